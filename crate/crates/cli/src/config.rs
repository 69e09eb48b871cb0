//! Resolution of command-line flags, spec files and `LEBDYN_BUDGET` into a
//! run configuration and a system bundle.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lebdyn_core::cover::cover_diam;
use lebdyn_core::rates::VerifyConfig;
use lebdyn_core::systems::{generate_system, KnownValue, NamedCover};
use lebdyn_core::{Budget, Family, SolveMode, SystemBundle, SystemSpec, Window};

use crate::io::{self, CoverFile, MapFile, SpaceFile, SpecFile};
use crate::{CliError, Format, ModeArg, RunArgs};

pub const BUDGET_ENV: &str = "LEBDYN_BUDGET";

/// Horizon of custom systems built from files when `--horizon` is absent.
pub const CUSTOM_HORIZON: usize = 8;

/// Where the system comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Spec(SystemSpec),
    Files { space: PathBuf, map: PathBuf, covers: Vec<PathBuf> },
}

/// Everything a command needs besides the system itself.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub mesh: Option<Vec<f64>>,
    pub window: Option<Window>,
    pub known: BTreeMap<String, f64>,
    pub timing: bool,
    pub verify: VerifyConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `a:b` with `1 ≤ a ≤ b`.
pub fn parse_window(s: &str) -> Result<Window, CliError> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("window `{s}` is not of the form a:b")))?;
    let parse =
        |t: &str| t.trim().parse::<usize>().map_err(|_| usage(format!("window `{s}`: `{t}` is not an integer")));
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || a > b {
        return Err(usage(format!("window `{s}` must satisfy 1 <= a <= b")));
    }
    Ok(Window::new(a, b))
}

/// `LEBDYN_BUDGET`: a bare integer sets the node budget; otherwise a comma
/// separated list of `key=value` with keys `nodes`, `member_cap`,
/// `enumeration`, `pairs`.
pub fn parse_budget(s: &str, mut budget: Budget) -> Result<Budget, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(budget);
    }
    let positive = |key: &str, v: &str| -> Result<u64, CliError> {
        match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("{BUDGET_ENV}: `{key}` must be a positive integer, got `{v}`"))),
        }
    };
    if !s.contains('=') {
        budget.nodes = positive("nodes", s)?;
        return Ok(budget);
    }
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("{BUDGET_ENV}: `{part}` is not key=value")))?;
        let k = k.trim();
        let n = positive(k, v)?;
        match k {
            "nodes" => budget.nodes = n,
            "member_cap" => budget.member_cap = n as usize,
            "enumeration" => budget.enumeration = n,
            "pairs" => budget.pairs = n as usize,
            _ => return Err(usage(format!("{BUDGET_ENV}: unknown key `{k}`"))),
        }
    }
    Ok(budget)
}

fn parse_param(s: &str) -> Result<(String, serde_json::Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--param `{s}` is not key=value")))?;
    let value = serde_json::from_str(v.trim()).map_err(|e| usage(format!("--param {k}: {e}")))?;
    Ok((k.trim().to_string(), value))
}

fn parse_known(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--known `{s}` is not name=value")))?;
    let x: f64 = v.trim().parse().map_err(|_| usage(format!("--known {k}: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(usage(format!("--known {k}: value must be finite")));
    }
    Ok((k.trim().to_string(), x))
}

impl RunConfig {
    /// Resolves flags; `budget_env` is the value of `LEBDYN_BUDGET`, if set.
    pub fn from_args(args: &RunArgs, budget_env: Option<&str>) -> Result<Self, CliError> {
        let mut known = BTreeMap::new();
        let source = if let Some(path) = &args.spec {
            let file: SpecFile = io::read_json(path)?;
            known.extend(file.known.clone());
            Source::Spec(file.to_spec()?)
        } else if let Some(name) = &args.family {
            let mut spec = SystemSpec::new(Family::from_name(name)?);
            for p in &args.params {
                let (k, v) = parse_param(p)?;
                spec = spec.with_param(&k, io::param_from_json(&k, &v)?);
            }
            Source::Spec(spec)
        } else if let (Some(space), Some(map)) = (&args.space, &args.map) {
            Source::Files { space: space.clone(), map: map.clone(), covers: args.covers.clone() }
        } else {
            return Err(usage("no system given; use --spec, --family or --space with --map"));
        };
        if !args.params.is_empty() && args.family.is_none() {
            return Err(usage("--param needs --family"));
        }
        for k in &args.known {
            let (k, v) = parse_known(k)?;
            known.insert(k, v);
        }

        let mut budget = parse_budget(budget_env.unwrap_or(""), Budget::default())?;
        if let Some(p) = args.exact_limit {
            budget.exact_points = p;
            budget.exact_members = p;
            budget.exact_independent_points = p;
        }
        let mut verify = VerifyConfig { budget, horizon: args.horizon, ..VerifyConfig::default() };
        if let Some(t) = args.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(usage("--tolerance must be a non-negative number"));
            }
            verify.tolerance = t;
        }
        verify.mode = match args.mode {
            ModeArg::Auto => SolveMode::Auto,
            ModeArg::Exact => SolveMode::Exact,
            ModeArg::Greedy => SolveMode::Greedy,
        };
        if args.horizon == Some(0) {
            return Err(usage("--horizon must be at least 1"));
        }
        if let Some(mesh) = &args.mesh {
            if mesh.is_empty() || mesh.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return Err(usage("--mesh radii must be positive numbers"));
            }
        }
        let window = args.window.as_deref().map(parse_window).transpose()?;
        verify.window = window;

        let format = if args.json { Format::Json } else { args.format.unwrap_or(Format::Json) };
        Ok(RunConfig {
            source,
            format,
            out: args.out.clone(),
            horizon: args.horizon,
            mesh: args.mesh.clone(),
            window,
            known,
            timing: args.timing,
            verify,
        })
    }

    /// Builds the system, applies overrides and checks the window against
    /// the resolved horizon.
    pub fn build(&self) -> Result<SystemBundle, CliError> {
        let mut bundle = match &self.source {
            Source::Spec(spec) => {
                let mut spec = spec.clone();
                if let Some(h) = self.horizon {
                    spec.horizon = h;
                }
                if let Some(mesh) = &self.mesh {
                    spec.mesh_radii = mesh.clone();
                }
                generate_system(&spec)?
            }
            Source::Files { space, map, covers } => build_custom(space, map, covers, self)?,
        };
        apply_known(&mut bundle, &self.known)?;
        if let Some(w) = self.window {
            if w.end > bundle.horizon() {
                return Err(usage(format!("window {}:{} exceeds the horizon {}", w.start, w.end, bundle.horizon())));
            }
        }
        Ok(bundle)
    }

    pub fn horizon_for(&self, bundle: &SystemBundle) -> usize {
        self.horizon.unwrap_or(bundle.horizon())
    }
}

fn build_custom(space: &Path, map: &Path, covers: &[PathBuf], cfg: &RunConfig) -> Result<SystemBundle, CliError> {
    let space = io::read_json::<SpaceFile>(space)?.to_space()?;
    let map = io::read_json::<MapFile>(map)?.to_map()?;
    let mut extra = Vec::with_capacity(covers.len());
    for path in covers {
        let cover = io::read_json::<CoverFile>(path)?.to_cover(space.len())?;
        let radius = cover_diam(&space, &cover)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        extra.push(NamedCover { id: format!("file:{stem}"), radius, cover });
    }
    let mesh = match &cfg.mesh {
        Some(m) => m.clone(),
        None if extra.is_empty() => {
            let d = space.diameter();
            vec![d / 8.0, d / 16.0]
        }
        None => Vec::new(),
    };
    let horizon = cfg.horizon.unwrap_or(CUSTOM_HORIZON);
    Ok(SystemBundle::from_parts("custom", space, map, &mesh, extra, horizon)?)
}

const KNOWN_OVERRIDE: &str = "user override";

fn apply_known(bundle: &mut SystemBundle, known: &BTreeMap<String, f64>) -> Result<(), CliError> {
    for (k, &value) in known {
        let v = Some(KnownValue { value, citation: KNOWN_OVERRIDE });
        let slot = match k.as_str() {
            "h" => &mut bundle.known.h,
            "dimb" => &mut bundle.known.dimb,
            "dimh" => &mut bundle.known.dimh,
            "h_l_lower" => &mut bundle.known.h_l_lower,
            "h_l_upper" => &mut bundle.known.h_l_upper,
            "l" => &mut bundle.known.l,
            "lipschitz" => &mut bundle.known.lipschitz,
            _ => return Err(usage(format!("unknown invariant `{k}` in known-value overrides"))),
        };
        *slot = v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        assert_eq!(parse_window("3:7").unwrap(), Window::new(3, 7));
        assert!(parse_window("0:4").is_err());
        assert!(parse_window("5:4").is_err());
        assert!(parse_window("5").is_err());
    }

    #[test]
    fn budget_forms() {
        let b = parse_budget("500", Budget::default()).unwrap();
        assert_eq!(b.nodes, 500);
        let b = parse_budget("nodes=7, pairs=9", Budget::default()).unwrap();
        assert_eq!((b.nodes, b.pairs), (7, 9));
        assert!(parse_budget("0", Budget::default()).is_err());
        assert!(parse_budget("speed=3", Budget::default()).is_err());
    }

    #[test]
    fn window_beyond_horizon_is_usage() {
        let args = RunArgs { family: Some("rotation".into()), window: Some("2:20".into()), ..RunArgs::default() };
        let cfg = RunConfig::from_args(&args, None).unwrap();
        assert!(matches!(cfg.build(), Err(CliError::Usage(_))));
    }

    #[test]
    fn known_override_applies() {
        let args = RunArgs { family: Some("rotation".into()), known: vec!["h=2.5".into()], ..RunArgs::default() };
        let bundle = RunConfig::from_args(&args, None).unwrap().build().unwrap();
        assert_eq!(bundle.known.h.unwrap().value, 2.5);
    }
}
