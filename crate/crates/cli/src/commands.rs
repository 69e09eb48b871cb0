//! Command implementations. Each command computes a [`Fragment`]; `report`
//! merges all of them.

use std::path::Path;
use std::time::Instant;

use lebdyn_core::cover::lebesgue_number;
use lebdyn_core::dynamics::{iterate_rate, lbd_lower_bound, DeltaContext, DeltaMode};
use lebdyn_core::metric::{box_dim_estimate, default_gamma_grid};
use lebdyn_core::rates::{
    cover_entropy, hl_delta_estimate, measure, prefix_max_rate_check, rate_bounds, sep_entropy, verify_inequalities,
    Measurements, Provenance, Quantity, Status,
};
use lebdyn_core::systems::{list_families, FamilyInfo};
use lebdyn_core::{RateSequence, SystemBundle};
use serde::Serialize;

use crate::config::{RunConfig, Source, BUDGET_ENV};
use crate::io::{self, SpecFile};
use crate::report::{
    BudgetEcho, Checks, ConfigEcho, CoverInfo, DeltaRow, DimRow, EntropyRow, EntropySummary, FiniteBoundRow, Fragment,
    InequalityOut, InequalitySection, IterateRow, Num, PrefixMaxRow, PreimageInfo, QuantityRow, RateRow, Report,
    StatusCounts, SystemInfo, SCHEMA_VERSION,
};
use crate::{CliError, Command, Format, ListArgs, RunArgs, EXIT_OK, EXIT_VIOLATION};

pub fn execute(command: Command) -> Result<i32, CliError> {
    let (name, args) = match command {
        Command::List(args) => return cmd_list(&args),
        Command::DeltaTable(a) => ("delta-table", a),
        Command::Rates(a) => ("rates", a),
        Command::Entropy(a) => ("entropy", a),
        Command::Dims(a) => ("dims", a),
        Command::Verify(a) => ("verify", a),
        Command::Report(a) => ("report", a),
    };
    let budget_env = std::env::var(BUDGET_ENV).ok();
    let cfg = RunConfig::from_args(&args, budget_env.as_deref())?;
    run_command(name, &cfg, &args)
}

/// Runs one system command, writes its output and returns the exit code.
pub fn run_command(name: &str, cfg: &RunConfig, args: &RunArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let bundle = cfg.build()?;
    let mut frag = Fragment::default();
    match name {
        "delta-table" => frag.merge(delta_table(cfg, &bundle)?),
        "rates" => frag.merge(rates(cfg, &bundle)?),
        "entropy" => frag.merge(entropy(cfg, &bundle)?),
        "dims" => frag.merge(dims(cfg, &bundle)?),
        "verify" => frag.merge(verify(cfg, &bundle)),
        "report" => {
            frag.merge(delta_table(cfg, &bundle)?);
            frag.merge(rates(cfg, &bundle)?);
            frag.merge(entropy(cfg, &bundle)?);
            frag.merge(dims(cfg, &bundle)?);
            frag.merge(verify(cfg, &bundle));
        }
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
    let mut report = Report::new(name, config_echo(cfg, args, &bundle), system_info(&bundle), frag);
    if cfg.timing {
        report.wall_time_s = Some(Num(start.elapsed().as_secs_f64()));
    }
    write_report(&report, cfg)?;
    let failed = report.inequalities.as_ref().is_some_and(|s| !s.passed);
    if failed {
        for row in report.inequalities.iter().flat_map(|s| &s.failed) {
            eprintln!("inequality failed: {row}");
        }
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}

fn write_report(report: &Report, cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.format {
        Format::Json => emit(cfg.out.as_deref(), &report.to_json()),
        Format::Csv => {
            let tables = report.tables();
            let to_dir = report.command == "report" || cfg.out.as_deref().is_some_and(Path::is_dir);
            if to_dir {
                let dir = cfg
                    .out
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("`report --format csv` needs --out DIR".into()))?;
                std::fs::create_dir_all(dir)
                    .map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
                for t in &tables {
                    crate::report::write_file(&dir.join(format!("{}.csv", t.name)), &t.to_csv())?;
                }
                Ok(())
            } else {
                let primary = tables.iter().find(|t| t.name == primary_table(&report.command)).or(tables.first());
                emit(cfg.out.as_deref(), &primary.map(|t| t.to_csv()).unwrap_or_default())
            }
        }
    }
}

fn primary_table(command: &str) -> &'static str {
    match command {
        "delta-table" => "delta",
        "rates" => "rates",
        "entropy" => "entropy",
        "dims" => "dims",
        _ => "inequalities",
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => crate::report::write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

fn config_echo(cfg: &RunConfig, args: &RunArgs, bundle: &SystemBundle) -> ConfigEcho {
    let v = &cfg.verify;
    let b = &v.budget;
    let (space_file, map_file, cover_files) = match &cfg.source {
        Source::Spec(_) => (None, None, Vec::new()),
        Source::Files { space, map, covers } => {
            (Some(path_text(space)), Some(path_text(map)), covers.iter().map(|c| path_text(c)).collect())
        }
    };
    ConfigEcho {
        spec: bundle.spec.as_ref().map(SpecFile::from_spec),
        space_file,
        map_file,
        cover_files,
        horizon: cfg.horizon_for(bundle),
        mesh_radii: bundle.mesh_radii().iter().map(|&r| Num(r)).collect(),
        window: cfg.window.map(|w| [w.start, w.end]),
        tolerance: Num(v.tolerance),
        analytic_tolerance: Num(v.analytic_tolerance),
        mode: format!("{:?}", args.mode).to_lowercase(),
        budget: BudgetEcho {
            nodes: b.nodes,
            member_cap: b.member_cap,
            enumeration: b.enumeration,
            exact_points: b.exact_points,
            exact_members: b.exact_members,
            exact_independent_points: b.exact_independent_points,
            pairs: b.pairs,
        },
        known_overrides: cfg.known.iter().map(|(k, &x)| (k.clone(), Num(x))).collect(),
    }
}

fn system_info(bundle: &SystemBundle) -> SystemInfo {
    let space = &bundle.space;
    let covers = bundle
        .covers
        .iter()
        .map(|c| CoverInfo {
            id: c.id.clone(),
            radius: Num(c.radius),
            members: c.cover.len(),
            lebesgue_number: Num(lebesgue_number(space, &c.cover).map_or(f64::NAN, |r| r.delta)),
        })
        .collect();
    SystemInfo {
        name: bundle.name.clone(),
        points: space.len(),
        metric: space.metric_kind().to_string(),
        diameter: Num(space.diameter()),
        separation: Num(space.separation()),
        covers,
    }
}

fn prov(p: Provenance) -> String {
    p.name().to_string()
}

/// Per-cover `δ_n` sequences, computed with a shared neighbour order.
fn sequences(cfg: &RunConfig, bundle: &SystemBundle) -> Result<Vec<(String, f64, RateSequence)>, CliError> {
    let ctx = DeltaContext::new(&bundle.space);
    let horizon = cfg.horizon_for(bundle);
    bundle
        .covers
        .iter()
        .map(|c| {
            let mut seq =
                ctx.delta_sequence(&bundle.map, &c.cover, horizon, DeltaMode::RunningMin, &cfg.verify.budget)?;
            seq.name = c.id.clone();
            Ok((c.id.clone(), c.radius, seq))
        })
        .collect()
}

pub fn delta_table(cfg: &RunConfig, bundle: &SystemBundle) -> Result<Fragment, CliError> {
    let mut rows = Vec::new();
    for (id, _, seq) in sequences(cfg, bundle)? {
        for n in 1..=seq.horizon() {
            let capped = seq.capped[n - 1];
            let a_n = if capped || (n > 1 && seq.capped[n - 2]) { f64::NAN } else { seq.exponent(n) };
            rows.push(DeltaRow {
                system: bundle.name.clone(),
                cover_id: id.clone(),
                n,
                delta_n: Num(seq.delta(n)),
                a_n: Num(a_n),
                capped,
                op: "delta_sequence".into(),
                provenance: prov(Provenance::Exact),
            });
        }
    }
    Ok(Fragment { delta_table: Some(rows), ..Fragment::default() })
}

pub fn rates(cfg: &RunConfig, bundle: &SystemBundle) -> Result<Fragment, CliError> {
    let (space, map, budget) = (&bundle.space, &bundle.map, &cfg.verify.budget);
    let horizon = cfg.horizon_for(bundle);
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut checks = Checks::default();
    let system = bundle.name.clone();

    for (id, radius, seq) in sequences(cfg, bundle)? {
        match rate_bounds(&seq, cfg.window) {
            Ok(e) => rows.push(RateRow {
                system: system.clone(),
                source: "lebesgue".into(),
                cover_id: id.clone(),
                radius: Num(radius),
                n_min: e.window.start,
                n_max: e.window.end,
                lower_rate: Num(e.lower_rate),
                upper_rate: Num(e.upper_rate),
                slope: Num(e.slope),
                cumulative_rate: Num(e.cumulative_rate),
                op: "rate_bounds".into(),
                provenance: prov(Provenance::Measured),
            }),
            Err(e) => notes.push(format!("lebesgue rates for {id}: {e}")),
        }
        let usable = seq.usable_len().min(seq.pullback_capped.iter().take_while(|c| !**c).count());
        let pullback: Vec<f64> = (1..=usable).map(|n| (seq.reference / seq.pullback[n - 1]).ln()).collect();
        let check = prefix_max_rate_check(&pullback, cfg.window);
        checks.prefix_max.push(PrefixMaxRow {
            cover_id: id,
            n_min: check.window.start,
            n_max: check.window.end,
            pullback_rate: Num(check.direct),
            running_min_rate: Num(check.prefix_max),
        });
    }

    if space.len() <= cfg.verify.delta_point_limit {
        if let Some(c) = bundle.covers.first() {
            match hl_delta_estimate(space, map, &c.cover, horizon, budget, cfg.window) {
                Ok(d) => {
                    checks.minimal_dominated = Some(d.dominated);
                    rows.push(RateRow {
                        system: system.clone(),
                        source: "lebesgue-minimal".into(),
                        cover_id: c.id.clone(),
                        radius: Num(c.radius),
                        n_min: d.estimate.window.start,
                        n_max: d.estimate.window.end,
                        lower_rate: Num(d.estimate.lower_rate),
                        upper_rate: Num(d.estimate.upper_rate),
                        slope: Num(d.estimate.slope),
                        cumulative_rate: Num(d.cumulative_delta),
                        op: "hl_delta_estimate".into(),
                        provenance: prov(Provenance::Measured),
                    });
                }
                Err(e) => notes.push(format!("minimum-subcover rates: {e}")),
            }
        }
    } else {
        notes.push(format!(
            "minimum-subcover rates: skipped for {} points (limit {})",
            space.len(),
            cfg.verify.delta_point_limit
        ));
    }

    match lbd_lower_bound(space, map, horizon, budget) {
        Ok(b) => {
            rows.push(RateRow {
                system: system.clone(),
                source: "preimage-gap".into(),
                cover_id: String::new(),
                radius: Num(f64::NAN),
                n_min: b.window.0,
                n_max: b.window.1,
                lower_rate: Num(b.lower),
                upper_rate: Num(b.upper),
                slope: Num(f64::NAN),
                cumulative_rate: Num(f64::NAN),
                op: "lbd_lower_bound".into(),
                provenance: prov(Provenance::LowerBound),
            });
            checks.preimage_gap = Some(PreimageInfo {
                lower: Num(b.lower),
                upper: Num(b.upper),
                best_pair: [b.best_pair.0, b.best_pair.1],
                pairs: b.pairs,
                n_min: b.window.0,
                n_max: b.window.1,
            });
        }
        Err(e) => notes.push(format!("preimage-gap bound: {e}")),
    }

    let l_horizon = horizon.min(cfg.verify.lipschitz_horizon).max(1);
    let iterates = match iterate_rate(space, map, l_horizon) {
        Ok(it) => {
            checks.subadditive = Some(it.subadditive);
            let last = it.per_n.last().map_or(f64::NAN, |p| p.2);
            let upper = it.per_n.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
            rows.push(RateRow {
                system: system.clone(),
                source: "iterate-lipschitz".into(),
                cover_id: String::new(),
                radius: Num(f64::NAN),
                n_min: 1,
                n_max: l_horizon,
                lower_rate: Num(it.estimate),
                upper_rate: Num(upper),
                slope: Num(f64::NAN),
                cumulative_rate: Num(last),
                op: "iterate_rate".into(),
                provenance: prov(Provenance::Mixed),
            });
            Some(
                it.per_n
                    .iter()
                    .map(|&(n, l, r)| IterateRow {
                        system: system.clone(),
                        n,
                        lipschitz: Num(l),
                        rate: Num(r),
                        op: "lipschitz_constant".into(),
                        provenance: prov(Provenance::Exact),
                    })
                    .collect(),
            )
        }
        Err(e) => {
            notes.push(format!("iterate lipschitz rate: {e}"));
            None
        }
    };

    Ok(Fragment { rates: Some(rows), iterates, checks: Some(checks), notes, ..Fragment::default() })
}

fn sep_scales(bundle: &SystemBundle) -> Vec<f64> {
    let mut eps: Vec<f64> = bundle.mesh_radii().to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    eps
}

pub fn entropy(cfg: &RunConfig, bundle: &SystemBundle) -> Result<Fragment, CliError> {
    let (space, map, budget, mode) = (&bundle.space, &bundle.map, &cfg.verify.budget, cfg.verify.mode);
    let horizon = cfg.horizon_for(bundle);
    let system = bundle.name.clone();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut summary = Vec::new();

    let eps = sep_scales(bundle);
    if eps.is_empty() {
        notes.push("separated sets: no mesh radii to use as scales".into());
    } else {
        match sep_entropy(space, map, &eps, horizon, mode, budget, cfg.window) {
            Ok(sep) => {
                for s in &sep.per_eps {
                    for r in &s.rows {
                        rows.push(EntropyRow {
                            system: system.clone(),
                            estimator: "separated".into(),
                            scale: Num(s.eps),
                            n: r.n,
                            count: r.count,
                            rate: Num(r.rate),
                            exact: r.exact,
                            op: "max_separated".into(),
                            provenance: prov(if r.exact { Provenance::Exact } else { Provenance::LowerBound }),
                        });
                    }
                    summary.push(EntropySummary {
                        system: system.clone(),
                        estimator: "separated".into(),
                        scale: Num(s.eps),
                        n_min: s.window.start,
                        n_max: s.window.end,
                        estimate: Num(s.estimate),
                        op: "sep_entropy".into(),
                        provenance: prov(s.provenance),
                    });
                }
            }
            Err(e) => notes.push(format!("separated sets: {e}")),
        }
    }

    if let Some(c) = bundle.covers.first() {
        match cover_entropy(space, map, &c.cover, horizon.max(2), mode, budget, cfg.window) {
            Ok(ce) => {
                for r in &ce.rows {
                    rows.push(EntropyRow {
                        system: system.clone(),
                        estimator: "cover".into(),
                        scale: Num(c.radius),
                        n: r.n,
                        count: r.count,
                        rate: Num(r.rate),
                        exact: r.exact,
                        op: "min_subcover".into(),
                        provenance: prov(if r.exact { Provenance::Exact } else { Provenance::UpperBound }),
                    });
                }
                summary.push(EntropySummary {
                    system: system.clone(),
                    estimator: "cover".into(),
                    scale: Num(c.radius),
                    n_min: ce.window.start,
                    n_max: ce.window.end,
                    estimate: Num(ce.estimate),
                    op: "cover_entropy".into(),
                    provenance: prov(ce.provenance),
                });
            }
            Err(e) => notes.push(format!("cover entropy for {}: {e}", c.id)),
        }
    }
    Ok(Fragment { entropy: Some(rows), entropy_summary: Some(summary), notes, ..Fragment::default() })
}

pub fn dims(cfg: &RunConfig, bundle: &SystemBundle) -> Result<Fragment, CliError> {
    let gammas = default_gamma_grid(&bundle.space);
    let d = box_dim_estimate(&bundle.space, &gammas, cfg.verify.mode, &cfg.verify.budget)?;
    let rows = d
        .per_scale
        .iter()
        .map(|s| DimRow {
            system: bundle.name.clone(),
            gamma: Num(s.gamma),
            count: s.count,
            exact: s.exact,
            slope: Num(d.slope),
            op: "covering_number".into(),
            provenance: prov(if s.exact { Provenance::Exact } else { Provenance::UpperBound }),
        })
        .collect();
    Ok(Fragment { dims: Some(rows), ..Fragment::default() })
}

fn quantity_rows(bundle: &SystemBundle, m: &Measurements) -> Vec<QuantityRow> {
    let mut out = Vec::new();
    let mut push = |name: &str, q: &Option<Quantity>| {
        if let Some(q) = q {
            out.push(QuantityRow {
                name: name.into(),
                value: Num(q.value),
                provenance: prov(q.provenance),
                op: q.source.into(),
            });
        }
    };
    push("h", &m.h);
    push("h_cover", &m.h_cover);
    push("dimb", &m.dimb);
    push("h_l_lower", &m.h_l_lower);
    push("h_l_upper", &m.h_l_upper);
    push("h_l_delta", &m.h_l_delta);
    push("h_l_delta_cumulative", &m.h_l_delta_cumulative);
    push("h_l_lower_cover", &m.h_l_lower_cover);
    push("l", &m.l);
    push("lipschitz", &m.lipschitz);
    let k = &bundle.known;
    let known = [
        ("h", k.h),
        ("dimb", k.dimb),
        ("dimh", k.dimh),
        ("h_l_lower", k.h_l_lower),
        ("h_l_upper", k.h_l_upper),
        ("l", k.l),
        ("lipschitz", k.lipschitz),
    ];
    for (name, v) in known {
        if let Some(v) = v {
            out.push(QuantityRow {
                name: format!("{name}/analytic"),
                value: Num(v.value),
                provenance: prov(Provenance::Analytic),
                op: v.citation.into(),
            });
        }
    }
    out
}

pub fn verify(cfg: &RunConfig, bundle: &SystemBundle) -> Fragment {
    let m = measure(bundle, &cfg.verify);
    let report = verify_inequalities(bundle, &m, &cfg.verify);
    let rows: Vec<InequalityOut> = report
        .rows
        .iter()
        .map(|r| InequalityOut {
            name: r.name.clone(),
            relation: r.relation.into(),
            lhs: Num(r.lhs),
            rhs: Num(r.rhs),
            slack: Num(r.slack),
            tol: Num(r.tolerance),
            status: r.status.name().into(),
            pass: r.pass,
            lhs_src: r.lhs_src.map(prov),
            rhs_src: r.rhs_src.map(prov),
            lhs_from: r.lhs_from.clone(),
            rhs_from: r.rhs_from.clone(),
        })
        .collect();
    let section = InequalitySection {
        passed: report.passed(),
        counts: StatusCounts {
            pass: report.count(Status::Pass),
            fail: report.count(Status::Fail),
            inconclusive: report.count(Status::Inconclusive),
            skipped: report.count(Status::Skipped),
        },
        failed: report.failures().map(|r| r.name.clone()).collect(),
        rows,
    };
    let checks = Checks {
        finite_bounds: m
            .finite_bounds
            .iter()
            .map(|f| FiniteBoundRow { cover_id: f.cover_id.clone(), margin: Num(f.margin) })
            .collect(),
        subadditive: m.iterate.as_ref().map(|i| i.subadditive),
        minimal_dominated: m.delta.as_ref().map(|d| d.dominated),
        ..Checks::default()
    };
    Fragment {
        quantities: Some(quantity_rows(bundle, &m)),
        inequalities: Some(section),
        checks: Some(checks),
        notes: m.notes.clone(),
        ..Fragment::default()
    }
}

#[derive(Serialize)]
struct Catalog {
    schema_version: u32,
    families: Vec<CatalogEntry>,
}

#[derive(Serialize)]
struct CatalogEntry {
    name: &'static str,
    summary: &'static str,
    source: &'static str,
    default_horizon: usize,
    default_radii: Vec<Num>,
    params: Vec<CatalogParam>,
}

#[derive(Serialize)]
struct CatalogParam {
    name: &'static str,
    default: &'static str,
    doc: &'static str,
}

fn catalog_entry(f: &FamilyInfo) -> CatalogEntry {
    CatalogEntry {
        name: f.family.name(),
        summary: f.summary,
        source: f.source,
        default_horizon: f.default_horizon,
        default_radii: f.default_radii.iter().map(|&r| Num(r)).collect(),
        params: f.params.iter().map(|p| CatalogParam { name: p.name, default: p.default, doc: p.doc }).collect(),
    }
}

fn cmd_list(args: &ListArgs) -> Result<i32, CliError> {
    let families = list_families();
    let format = if args.json { Some(Format::Json) } else { args.format };
    let text = match format {
        Some(Format::Json) => io::to_json_string(&Catalog {
            schema_version: SCHEMA_VERSION,
            families: families.iter().map(catalog_entry).collect(),
        }),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io_err = |e: csv::Error| CliError::Usage(e.to_string());
            w.write_record(["family", "param", "default", "doc"]).map_err(io_err)?;
            for f in &families {
                for p in &f.params {
                    w.write_record([f.family.name(), p.name, p.default, p.doc]).map_err(io_err)?;
                }
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?).unwrap_or_default()
        }
        None => list_text(&families),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn list_text(families: &[FamilyInfo]) -> String {
    let width = families.iter().map(|f| f.family.name().len()).max().unwrap_or(0);
    let mut out = String::new();
    for f in families {
        out.push_str(&format!("{:width$}  {}\n", f.family.name(), f.summary));
        let radii: Vec<String> = f.default_radii.iter().map(|r| format!("{r}")).collect();
        out.push_str(&format!("{:width$}  horizon {}, radii {}\n", "", f.default_horizon, radii.join(", ")));
        for p in &f.params {
            out.push_str(&format!("{:width$}    {}={}  {}\n", "", p.name, p.default, p.doc));
        }
    }
    out
}
