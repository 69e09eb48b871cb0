//! Generators for the example systems, each a finite truncation bundled with
//! its analytically known invariants.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::cover::{mesh_cover, Cover};
use crate::dynamics::DynMap;
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Label, Metric};

/// Smallest distance a generated space may contain.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;

/// Largest number of points a generated space may have.
pub const MAX_POINTS: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Doubling,
    Rotation,
    Sqrt,
    Involution,
    LadderEx3,
    Xab,
    Xa,
    Osc,
    Cylinder,
    Shift,
    Product,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Doubling,
        Family::Rotation,
        Family::Sqrt,
        Family::Involution,
        Family::LadderEx3,
        Family::Xab,
        Family::Xa,
        Family::Osc,
        Family::Cylinder,
        Family::Shift,
        Family::Product,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Doubling => "doubling",
            Family::Rotation => "rotation",
            Family::Sqrt => "sqrt",
            Family::Involution => "involution",
            Family::LadderEx3 => "ladder_ex3",
            Family::Xab => "xab",
            Family::Xa => "xa",
            Family::Osc => "osc",
            Family::Cylinder => "cylinder",
            Family::Shift => "shift",
            Family::Product => "product",
        }
    }

    /// Parses a family name; unknown names report the closest known one.
    pub fn from_name(name: &str) -> Result<Family> {
        if let Some(f) = Family::ALL.iter().find(|f| f.name() == name) {
            return Ok(*f);
        }
        let suggestion = Family::ALL
            .iter()
            .map(|f| (edit_distance(name, f.name()), f.name()))
            .min()
            .filter(|(d, _)| *d <= 3)
            .map(|(_, n)| n.to_string());
        Err(Error::UnknownFamily { name: name.to_string(), suggestion })
    }
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// A parameter value in a [`SystemSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Spec(Box<SystemSpec>),
}

/// Family, parameters, cover plan and horizon. Empty radii and a zero
/// horizon mean "use the family defaults".
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub family: Family,
    pub params: BTreeMap<String, ParamValue>,
    pub mesh_radii: Vec<f64>,
    pub horizon: usize,
}

impl SystemSpec {
    pub fn new(family: Family) -> Self {
        SystemSpec { family, params: BTreeMap::new(), mesh_radii: Vec::new(), horizon: 0 }
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn int(self, key: &str, v: i64) -> Self {
        self.with_param(key, ParamValue::Int(v))
    }

    pub fn real(self, key: &str, v: f64) -> Self {
        self.with_param(key, ParamValue::Real(v))
    }

    pub fn radii(mut self, radii: &[f64]) -> Self {
        self.mesh_radii = radii.to_vec();
        self
    }

    pub fn horizon(mut self, n: usize) -> Self {
        self.horizon = n;
        self
    }
}

/// One analytically known value with where it comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnownValue {
    pub value: f64,
    pub citation: &'static str,
}

/// Analytically known invariants of a system; `None` where unknown.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Known {
    /// Topological entropy.
    pub h: Option<KnownValue>,
    /// Upper box dimension.
    pub dimb: Option<KnownValue>,
    /// Hausdorff dimension.
    pub dimh: Option<KnownValue>,
    /// Lower Lebesgue decay rate.
    pub h_l_lower: Option<KnownValue>,
    /// Upper Lebesgue decay rate.
    pub h_l_upper: Option<KnownValue>,
    /// Asymptotic Lipschitz rate.
    pub l: Option<KnownValue>,
    /// Lipschitz constant.
    pub lipschitz: Option<KnownValue>,
    /// The Lebesgue decay rates are infinite.
    pub rates_diverge: bool,
}

fn kv(value: f64, citation: &'static str) -> Option<KnownValue> {
    Some(KnownValue { value, citation })
}

/// A named cover of a bundle's space.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedCover {
    pub id: String,
    pub radius: f64,
    pub cover: Cover,
}

/// Space, map, recommended covers and known invariants.
#[derive(Clone, Debug)]
pub struct SystemBundle {
    pub name: String,
    /// The generating spec with every default filled in; `None` for systems
    /// assembled from parts.
    pub spec: Option<SystemSpec>,
    pub horizon: usize,
    pub mesh_radii: Vec<f64>,
    pub space: FiniteMetricSpace,
    pub map: DynMap,
    pub covers: Vec<NamedCover>,
    pub known: Known,
}

impl SystemBundle {
    /// A bundle for a user-supplied system: mesh covers for `mesh_radii`
    /// followed by `extra` covers, and no known invariants.
    pub fn from_parts(
        name: impl Into<String>,
        space: FiniteMetricSpace,
        map: DynMap,
        mesh_radii: &[f64],
        extra: Vec<NamedCover>,
        horizon: usize,
    ) -> Result<Self> {
        map.check_space(&space)?;
        if horizon == 0 {
            return Err(Error::arg("horizon must be at least 1"));
        }
        let mut covers = mesh_covers(&space, mesh_radii)?;
        for c in extra {
            c.cover.require_valid(&space)?;
            covers.push(c);
        }
        Ok(SystemBundle {
            name: name.into(),
            spec: None,
            horizon,
            mesh_radii: mesh_radii.to_vec(),
            space,
            map,
            covers,
            known: Known::default(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mesh_radii(&self) -> &[f64] {
        &self.mesh_radii
    }
}

fn mesh_covers(space: &FiniteMetricSpace, radii: &[f64]) -> Result<Vec<NamedCover>> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::arg("mesh radii must be positive"));
    }
    radii.iter().map(|&r| Ok(NamedCover { id: format!("mesh:{r}"), radius: r, cover: mesh_cover(space, r)? })).collect()
}

/// Catalog entry for one family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyInfo {
    pub family: Family,
    pub summary: &'static str,
    pub source: &'static str,
    pub params: Vec<ParamDoc>,
    pub default_radii: Vec<f64>,
    pub default_horizon: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDoc {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn p(name: &'static str, default: &'static str, doc: &'static str) -> ParamDoc {
    ParamDoc { name, default, doc }
}

fn param_docs(family: Family) -> Vec<ParamDoc> {
    match family {
        Family::Doubling => vec![
            p("m", "10", "grid of 2^m points on the circle (1..=13)"),
            p("points", "2^m", "explicit grid size; odd sizes make the map a bijection"),
        ],
        Family::Rotation => vec![p("points", "97", "grid size"), p("step", "13", "rotation in grid steps")],
        Family::Sqrt => vec![p("k", "6", "chain points 2^(-2^j) for j = 0..=k (at most 9)")],
        Family::Involution => vec![p("pairs", "16", "number of swapped pairs")],
        Family::LadderEx3 => vec![p("m", "64", "points 2^(-j) for j = 1..=m, plus 0")],
        Family::Xab => vec![
            p("a", "4", "outer ratio, a >= b > 1"),
            p("b", "2", "ratio of the expanding chains"),
            p("p", "6", "levels a^(-2^j), j = 0..=p"),
            p("q", "60", "points per accumulating chain"),
        ],
        Family::Xa => vec![
            p("a", "4", "outer ratio, a > 1"),
            p("p", "6", "levels a^(-2^j), j = 0..=p"),
            p("q", "60", "points per accumulating chain"),
        ],
        Family::Osc => vec![
            p("a", "1.0", "fast rate"),
            p("b", "0.5", "slow rate, 0 < b < a"),
            p("n_max", "700", "points t_1..t_n_max"),
        ],
        Family::Cylinder => vec![p("m", "9", "2^m points around the circle"), p("q", "16", "points along the axis")],
        Family::Shift => vec![p("k", "2", "alphabet size"), p("len", "10", "word length")],
        Family::Product => vec![
            p("left", "xa with q=12", "nested spec for the first factor"),
            p("right", "interval", "nested spec for the second factor"),
            p("interval_points", "8", "grid on [0,1] with the identity map, used without `right`"),
        ],
    }
}

/// One entry per family.
pub fn list_families() -> Vec<FamilyInfo> {
    Family::ALL
        .iter()
        .map(|&family| {
            let (summary, source) = match family {
                Family::Doubling => ("x -> 2x mod 1 on a circle grid", "standard test system"),
                Family::Rotation => ("rotation of a circle grid, an isometry", "isometries have zero Lebesgue rates"),
                Family::Sqrt => (
                    "x -> sqrt(x) on a preimage chain of 1/2",
                    "worked example: unbounded Lebesgue rates at zero entropy",
                ),
                Family::Involution => {
                    ("x -> sqrt(1 - x^2), an involution", "worked example: non-Lipschitz map with zero Lebesgue rates")
                }
                Family::LadderEx3 => (
                    "{0} u {2^-m}, doubling except at 2^(-2^k)",
                    "worked example: Lipschitz rate log 2, Lebesgue rate 0",
                ),
                Family::Xab => {
                    ("successor map on X_{a,b}", "worked example: Lipschitz rate log a, Lebesgue rate log b")
                }
                Family::Xa => ("successor map on X_a", "worked example: Lipschitz rate log a, Lebesgue rate 0"),
                Family::Osc => ("shift t_n -> t_(n-1), t_n = exp(-s_n)", "worked example: upper rate a, lower rate b"),
                Family::Cylinder => {
                    ("(x, y) -> (2x, y) or (0, y) on a cylinder", "worked example: strict preimage-gap bound")
                }
                Family::Shift => ("one-sided shift on words", "standard test system"),
                Family::Product => ("(f, g) under the max metric", "worked example: product of X_a with an interval"),
            };
            let (radii, horizon) = defaults(family);
            FamilyInfo {
                family,
                summary,
                source,
                params: param_docs(family),
                default_radii: radii,
                default_horizon: horizon,
            }
        })
        .collect()
}

fn defaults(family: Family) -> (Vec<f64>, usize) {
    match family {
        Family::Doubling | Family::LadderEx3 | Family::Cylinder => (vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 8),
        Family::Rotation => (vec![1.0 / 16.0, 1.0 / 32.0], 8),
        Family::Sqrt => (vec![0.05, 0.03], 6),
        Family::Involution => (vec![1.0 / 8.0, 1.0 / 16.0], 8),
        Family::Xab | Family::Xa => (vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 12),
        Family::Osc => (vec![0.1, 0.05], 660),
        Family::Shift => (vec![1.0 / 4.0, 1.0 / 8.0], 6),
        Family::Product => (Vec::new(), 0),
    }
}

/// Typed access to a spec's parameters; rejects unknown keys.
struct Params<'a> {
    family: Family,
    map: &'a BTreeMap<String, ParamValue>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a SystemSpec) -> Result<Self> {
        let allowed = param_docs(spec.family);
        for key in spec.params.keys() {
            if !allowed.iter().any(|d| d.name == key) {
                let known: Vec<&str> = allowed.iter().map(|d| d.name).collect();
                return Err(Error::InvalidParam {
                    family: spec.family.name(),
                    key: key.clone(),
                    reason: format!("unknown parameter (expected one of: {})", known.join(", ")),
                });
            }
        }
        Ok(Params { family: spec.family, map: &spec.params })
    }

    fn bad(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::InvalidParam { family: self.family.name(), key: key.to_string(), reason: reason.into() }
    }

    fn int(&self, key: &str, default: i64, min: i64, max: i64) -> Result<i64> {
        let v = match self.map.get(key) {
            None => default,
            Some(ParamValue::Int(v)) => *v,
            Some(ParamValue::Real(r)) if libm::trunc(*r) == *r && r.abs() < 1e15 => *r as i64,
            Some(_) => return Err(self.bad(key, "expected an integer")),
        };
        if v < min || v > max {
            return Err(self.bad(key, format!("must lie in {min}..={max}, got {v}")));
        }
        Ok(v)
    }

    fn opt_int(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            Some(ParamValue::Real(r)) if r.is_finite() => Ok(*r),
            Some(_) => Err(self.bad(key, "expected a finite number")),
        }
    }

    fn spec(&self, key: &str) -> Result<Option<SystemSpec>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(ParamValue::Spec(s)) => Ok(Some((**s).clone())),
            Some(_) => Err(self.bad(key, "expected a nested system spec")),
        }
    }
}

/// Builds the bundle for a spec.
pub fn generate_system(spec: &SystemSpec) -> Result<SystemBundle> {
    let params = Params::new(spec)?;
    let built = match spec.family {
        Family::Doubling => doubling(&params)?,
        Family::Rotation => rotation(&params)?,
        Family::Sqrt => sqrt_chain(&params)?,
        Family::Involution => involution(&params)?,
        Family::LadderEx3 => ladder(&params)?,
        Family::Xab => xab(&params)?,
        Family::Xa => xa(&params)?,
        Family::Osc => osc(&params)?,
        Family::Cylinder => cylinder(&params)?,
        Family::Shift => shift(&params)?,
        Family::Product => product(&params)?,
    };
    let (mut radii, mut horizon) = defaults(spec.family);
    if spec.family == Family::Product {
        radii = built.radii.clone();
        horizon = built.horizon;
    }
    if !spec.mesh_radii.is_empty() {
        radii = spec.mesh_radii.clone();
    }
    if spec.horizon > 0 {
        horizon = spec.horizon;
    }
    let covers = mesh_covers(&built.space, &radii)?;
    let mut resolved = spec.clone();
    resolved.mesh_radii = radii.clone();
    resolved.horizon = horizon;
    Ok(SystemBundle {
        name: spec.family.name().to_string(),
        spec: Some(resolved),
        horizon,
        mesh_radii: radii,
        space: built.space,
        map: built.map,
        covers,
        known: built.known,
    })
}

struct Built {
    space: FiniteMetricSpace,
    map: DynMap,
    known: Known,
    radii: Vec<f64>,
    horizon: usize,
}

impl Built {
    fn new(space: FiniteMetricSpace, map: Vec<usize>, known: Known) -> Result<Self> {
        Ok(Built { space, map: DynMap::new(map)?, known, radii: Vec::new(), horizon: 0 })
    }
}

fn circle_labels(n: usize) -> Vec<Label> {
    (0..n).map(|k| Label::Coords(vec![k as f64 / n as f64])).collect()
}

/// Smallest gap of a sorted list of reals.
fn min_gap(sorted: &[f64]) -> f64 {
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn doubling(p: &Params) -> Result<Built> {
    let m = p.int("m", 10, 1, 13)?;
    let n = if p.opt_int("points") { p.int("points", 0, 2, MAX_POINTS as i64)? as usize } else { 1usize << m };
    let space = FiniteMetricSpace::circle_grid(n)?.with_labels(circle_labels(n));
    let map = (0..n).map(|k| 2 * k % n).collect();
    let known = Known {
        h: kv(LN_2, "standard: doubling map entropy log 2"),
        dimb: kv(1.0, "classical: circle"),
        dimh: kv(1.0, "classical: circle"),
        h_l_lower: kv(LN_2, "standard: Lebesgue numbers halve per iterate"),
        h_l_upper: kv(LN_2, "standard: Lebesgue numbers halve per iterate"),
        l: kv(LN_2, "standard: L(f^n) = 2^n"),
        lipschitz: kv(2.0, "standard: expansion factor 2"),
        rates_diverge: false,
    };
    Built::new(space, map, known)
}

fn rotation(p: &Params) -> Result<Built> {
    let n = p.int("points", 97, 2, MAX_POINTS as i64)? as usize;
    let step = p.int("step", 13, 0, n as i64 - 1)? as usize;
    let space = FiniteMetricSpace::circle_grid(n)?.with_labels(circle_labels(n));
    let map = (0..n).map(|k| (k + step) % n).collect();
    let iso = "isometry: all Lebesgue rates vanish";
    let known = Known {
        h: kv(0.0, "classical: isometries have zero entropy"),
        dimb: kv(1.0, "classical: circle"),
        dimh: kv(1.0, "classical: circle"),
        h_l_lower: kv(0.0, iso),
        h_l_upper: kv(0.0, iso),
        l: kv(0.0, "isometry: L(f^n) = 1"),
        lipschitz: kv(1.0, "isometry"),
        rates_diverge: false,
    };
    Built::new(space, map, known)
}

fn line_space(xs: &[f64]) -> Result<FiniteMetricSpace> {
    FiniteMetricSpace::line(xs)
}

/// Index of each value in a sorted, duplicate-free list.
fn position(sorted: &[f64], v: f64) -> usize {
    sorted.binary_search_by(|x| x.total_cmp(&v)).expect("value is in the point list")
}

fn sqrt_chain(p: &Params) -> Result<Built> {
    let safe_max = 9;
    let k = p.int("k", 6, 1, 30)?;
    if k > safe_max {
        return Err(Error::Underflow { key: "k".into(), safe_max: safe_max as f64 });
    }
    let mut xs: Vec<f64> = vec![0.0, 1.0];
    xs.extend((0..=k).map(|j| libm::exp2(-libm::exp2(j as f64))));
    xs.sort_by(f64::total_cmp);
    let map = xs
        .iter()
        .map(|&x| {
            if x == 0.0 || x == 1.0 {
                position(&xs, x)
            } else if x == 0.5 {
                position(&xs, 1.0)
            } else {
                position(&xs, libm::sqrt(x))
            }
        })
        .collect();
    let known = Known {
        h: kv(0.0, "classical: monotone interval map"),
        dimb: kv(0.0, "classical: super-exponentially converging sequence"),
        dimh: kv(0.0, "classical: countable set"),
        rates_diverge: true,
        ..Known::default()
    };
    Built::new(line_space(&xs)?, map, known)
}

fn involution(p: &Params) -> Result<Built> {
    let pairs = p.int("pairs", 16, 1, 4096)? as usize;
    let fixed = core::f64::consts::FRAC_1_SQRT_2;
    let mut xs = Vec::with_capacity(2 * pairs + 1);
    for i in 0..pairs {
        let x = fixed * i as f64 / pairs as f64;
        xs.push(x);
        xs.push(libm::sqrt(1.0 - x * x));
    }
    xs.push(fixed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    if min_gap(&sorted) <= 0.0 {
        return Err(p.bad("pairs", "points coincide"));
    }
    // Map each point to the sorted position of its partner; the partner of a
    // partner is the original point, so the map is an exact involution.
    let mut rank = vec![0; xs.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut map = vec![0; xs.len()];
    for i in 0..xs.len() {
        let j = if xs[i] == fixed {
            i
        } else if i % 2 == 0 {
            i + 1
        } else {
            i - 1
        };
        map[rank[i]] = rank[j];
    }
    let known = Known {
        h: kv(0.0, "classical: f^2 = id"),
        dimb: kv(1.0, "classical: interval"),
        dimh: kv(1.0, "classical: interval"),
        h_l_lower: kv(0.0, "worked example: f^2 = id gives zero Lebesgue rates"),
        h_l_upper: kv(0.0, "worked example: f^2 = id gives zero Lebesgue rates"),
        l: kv(0.0, "construction: L(f^2) = 1"),
        ..Known::default()
    };
    Built::new(line_space(&sorted)?, map, known)
}

fn ladder(p: &Params) -> Result<Built> {
    let m = p.int("m", 64, 2, 996)? as usize;
    // Index j holds 2^-j (j ≥ 1); index 0 holds 0.
    let xs: Vec<f64> = (0..=m).map(|j| if j == 0 { 0.0 } else { libm::exp2(-(j as f64)) }).collect();
    let map = (0..=m).map(|j| if j == 0 || j.is_power_of_two() { j } else { j - 1 }).collect();
    let space = line_space(&xs)?;
    let known = Known {
        h: kv(0.0, "classical: countable space"),
        dimb: kv(0.0, "classical: geometric sequence"),
        dimh: kv(0.0, "classical: countable set"),
        h_l_lower: kv(0.0, "worked example: pullback Lebesgue numbers stay bounded below"),
        h_l_upper: kv(0.0, "worked example: pullback Lebesgue numbers stay bounded below"),
        l: kv(LN_2, "worked example: L(f^n) >= 2^n"),
        ..Known::default()
    };
    Built::new(space, map, known)
}

/// Sorted points with the successor map, fixing `fixed`, 0 and every point
/// in `also_fixed`, plus the top point.
fn successor_system(mut pts: Vec<f64>, fixed: &[f64], also_fixed: &[f64]) -> Result<(FiniteMetricSpace, Vec<usize>)> {
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let n = pts.len();
    let is_fixed = |x: f64| x == 0.0 || fixed.contains(&x) || also_fixed.contains(&x);
    let map = (0..n).map(|i| if i + 1 == n || is_fixed(pts[i]) { i } else { i + 1 }).collect();
    Ok((line_space(&pts)?, map))
}

fn check_points(p: &Params, key: &str, pts: &[f64], safe: impl Fn() -> f64) -> Result<()> {
    let mut s = pts.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    if min_gap(&s) < UNDERFLOW_LIMIT {
        return Err(Error::Underflow { key: key.into(), safe_max: safe() });
    }
    if s.len() > MAX_POINTS {
        return Err(p.bad(key, format!("the space would have {} points (limit {MAX_POINTS})", s.len())));
    }
    Ok(())
}

fn xab_points(a: f64, b: f64, levels: i64, q: i64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pts = vec![0.0];
    let mut fixed = Vec::new();
    let mut last_below = Vec::new();
    let top = 1i64 << levels;
    pts.extend((1..=top).map(|m| libm::pow(a, -(m as f64))));
    for lvl in 0..=levels {
        let c = libm::pow(a, -libm::exp2(lvl as f64));
        fixed.push(c);
        for j in 1..=q {
            pts.push(j as f64 * c / (a + j as f64));
        }
        last_below.push(q as f64 * c / (a + q as f64));
        for j in -q..=64 {
            if 1.0 + libm::pow(b, j as f64) < a {
                pts.push(c * (1.0 + libm::pow(b, j as f64)));
            }
        }
    }
    (pts, fixed, last_below)
}

fn xab(p: &Params) -> Result<Built> {
    let a = p.real("a", 4.0)?;
    let b = p.real("b", 2.0)?;
    if !(b > 1.0 && a >= b) {
        return Err(p.bad("b", "need a >= b > 1"));
    }
    let levels = p.int("p", 6, 0, 12)?;
    let q = p.int("q", 60, 1, 2000)?;
    let (pts, fixed, last_below) = xab_points(a, b, levels, q);
    check_points(p, "p", &pts, || {
        (0..levels).rev().find(|&l| min_gap_of(&xab_points(a, b, l, q).0) >= UNDERFLOW_LIMIT).unwrap_or(0) as f64
    })?;
    let (space, map) = successor_system(pts, &fixed, &last_below)?;
    let known = Known {
        h: kv(0.0, "classical: countable space"),
        dimb: kv(0.5, "classical: harmonic-type accumulation"),
        dimh: kv(0.0, "classical: countable set"),
        h_l_lower: kv(libm::log(b), "worked example: Lebesgue rate log b"),
        h_l_upper: kv(libm::log(b), "worked example: Lebesgue rate log b"),
        l: kv(libm::log(a), "worked example: asymptotic Lipschitz rate log a"),
        ..Known::default()
    };
    Built::new(space, map, known)
}

fn min_gap_of(pts: &[f64]) -> f64 {
    let mut s = pts.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    min_gap(&s)
}

fn xa_points(a: f64, levels: i64, q: i64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pts = vec![0.0];
    let mut fixed = Vec::new();
    let mut last_below = Vec::new();
    let top = 1i64 << levels;
    pts.extend((1..=top).map(|m| libm::pow(a, -(m as f64))));
    for lvl in 0..=levels {
        let c = libm::pow(a, -libm::exp2(lvl as f64));
        fixed.push(c);
        for j in 1..=q {
            let r = j as f64 / (a + j as f64);
            pts.push(c * r);
            // The reciprocal branch can leave (0, 1]; such points are dropped.
            if c / r <= 1.0 {
                pts.push(c / r);
            }
        }
        last_below.push(c * q as f64 / (a + q as f64));
    }
    (pts, fixed, last_below)
}

fn xa(p: &Params) -> Result<Built> {
    let a = p.real("a", 4.0)?;
    if !(a > 1.0) {
        return Err(p.bad("a", "need a > 1"));
    }
    let levels = p.int("p", 6, 0, 12)?;
    let q = p.int("q", 60, 1, 2000)?;
    let (pts, fixed, last_below) = xa_points(a, levels, q);
    check_points(p, "p", &pts, || {
        (0..levels).rev().find(|&l| min_gap_of(&xa_points(a, l, q).0) >= UNDERFLOW_LIMIT).unwrap_or(0) as f64
    })?;
    let (space, map) = successor_system(pts, &fixed, &last_below)?;
    let known = xa_known(a);
    Built::new(space, map, known)
}

fn xa_known(a: f64) -> Known {
    Known {
        h: kv(0.0, "classical: countable space"),
        dimb: kv(0.5, "classical: harmonic-type accumulation"),
        dimh: kv(0.0, "classical: countable set"),
        h_l_lower: kv(0.0, "worked example: Lebesgue rate 0"),
        h_l_upper: kv(0.0, "worked example: Lebesgue rate 0"),
        l: kv(libm::log(a), "worked example: asymptotic Lipschitz rate log a"),
        ..Known::default()
    }
}

/// `s_1..s_N` for the oscillating system: increments of `a` for
/// `2^(2^(2k-2)) <= n < 2^(2^(2k-1))` and of `b` for
/// `2^(2^(2k-1)) <= n < 2^(2^(2k))`.
pub fn osc_exponents(a: f64, b: f64, n_max: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let v = match n {
            1 => 0.0,
            2 => a,
            _ => s[n - 2] + if osc_fast(n) { a } else { b },
        };
        s.push(v);
    }
    s
}

/// Whether step `n ≥ 2` lies in a fast block. Block ends grow as
/// `2^(2^j)`: 2, 4, 16, 256, 65536, …; even `j` start fast blocks.
fn osc_fast(n: usize) -> bool {
    let mut j = 0u32;
    loop {
        let lo = 1u128 << (1u32 << j);
        let hi = if j + 1 < 7 { 1u128 << (1u32 << (j + 1)) } else { u128::MAX };
        if (n as u128) >= lo && (n as u128) < hi {
            return j.is_multiple_of(2);
        }
        j += 1;
    }
}

fn osc(p: &Params) -> Result<Built> {
    let a = p.real("a", 1.0)?;
    let b = p.real("b", 0.5)?;
    if !(a > b && b > 0.0) {
        return Err(p.bad("b", "need a > b > 0"));
    }
    let n_max = p.int("n_max", 700, 3, MAX_POINTS as i64)? as usize;
    let s = osc_exponents(a, b, n_max);
    let t: Vec<f64> = s.iter().map(|&v| libm::exp(-v)).collect();
    let ok = |k: usize| t[k - 1] >= UNDERFLOW_LIMIT && t[k - 2] - t[k - 1] >= UNDERFLOW_LIMIT;
    if !ok(n_max) {
        let safe = (3..n_max).rev().find(|&k| ok(k)).unwrap_or(2);
        return Err(Error::Underflow { key: "n_max".into(), safe_max: safe as f64 });
    }
    // Point 0 is 0; point k ≥ 1 is t_k, and t_1 = 1 is the other fixed point.
    let mut xs = vec![0.0];
    xs.extend_from_slice(&t);
    let map = (0..=n_max).map(|i| if i <= 1 { i } else { i - 1 }).collect();
    let known = Known {
        h: kv(0.0, "classical: countable space"),
        dimb: kv(0.0, "classical: exponentially converging sequence"),
        dimh: kv(0.0, "classical: countable set"),
        h_l_lower: kv(b, "worked example: lower Lebesgue rate b"),
        h_l_upper: kv(a, "worked example: upper Lebesgue rate a"),
        l: kv(a, "worked example: asymptotic Lipschitz rate a"),
        ..Known::default()
    };
    Built::new(line_space(&xs)?, map, known)
}

fn cylinder(p: &Params) -> Result<Built> {
    let m = p.int("m", 9, 1, 12)?;
    let q = p.int("q", 16, 2, 256)? as usize;
    let nx = 1usize << m;
    if nx * q > MAX_POINTS {
        return Err(p.bad("q", format!("the space would have {} points (limit {MAX_POINTS})", nx * q)));
    }
    let circle = FiniteMetricSpace::circle_grid(nx)?.with_labels(circle_labels(nx));
    let ys: Vec<f64> = (0..q).map(|j| j as f64 / (q - 1) as f64).collect();
    let axis = line_space(&ys)?;
    let space = FiniteMetricSpace::max_product(circle, axis)?;
    let map = (0..nx * q)
        .map(|id| {
            let (i, j) = (id / q, id % q);
            let x = if 2 * i < nx { 2 * i } else { 0 };
            x * q + j
        })
        .collect();
    let known = Known {
        h: kv(0.0, "classical: non-wandering set is the fixed column"),
        dimb: kv(2.0, "classical: cylinder"),
        dimh: kv(2.0, "classical: cylinder"),
        h_l_lower: kv(LN_2, "worked example: Lebesgue rate log 2 for fine covers"),
        h_l_upper: kv(LN_2, "worked example: Lebesgue rate log 2 for fine covers"),
        ..Known::default()
    };
    Built::new(space, map, known)
}

fn shift(p: &Params) -> Result<Built> {
    let k = p.int("k", 2, 2, 16)? as usize;
    let len = p.int("len", 10, 1, 30)? as usize;
    let count = (k as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > 4096 {
        return Err(p.bad("len", format!("k^len = {count} words exceeds the limit of 4096")));
    }
    let n = count as usize;
    // Word w has digits w_0..w_{len-1}, most significant first.
    let digits = |w: usize| -> Vec<usize> {
        let mut d = vec![0; len];
        let mut v = w;
        for i in (0..len).rev() {
            d[i] = v % k;
            v /= k;
        }
        d
    };
    let words: Vec<Vec<usize>> = (0..n).map(digits).collect();
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let i = (0..len).find(|&i| words[x][i] != words[y][i]).unwrap_or(len);
                data[x * n + y] = libm::exp2(-(i as f64));
            }
        }
    }
    let map = (0..n).map(|w| (w * k) % n).collect();
    let labels = words
        .iter()
        .map(|w| Label::Text(w.iter().map(|&d| char::from_digit(d as u32, 36).unwrap_or('?')).collect()))
        .collect();
    let space = FiniteMetricSpace::new(Metric::Matrix { n, data })?.with_labels(labels);
    let lk = libm::log(k as f64);
    let known = Known {
        h: kv(lk, "standard: full shift entropy log k"),
        dimb: kv(lk / LN_2, "standard: log k / log 2 for the 2^-n metric"),
        dimh: kv(lk / LN_2, "standard: log k / log 2 for the 2^-n metric"),
        h_l_lower: kv(LN_2, "standard: cylinder Lebesgue numbers halve per iterate"),
        h_l_upper: kv(LN_2, "standard: cylinder Lebesgue numbers halve per iterate"),
        l: kv(LN_2, "standard: the shift doubles distances"),
        lipschitz: kv(2.0, "standard: the shift doubles distances"),
        rates_diverge: false,
    };
    Built::new(space, map, known)
}

fn interval_factor(points: usize) -> Result<SystemBundle> {
    let ys: Vec<f64> = (0..points).map(|j| j as f64 / (points - 1) as f64).collect();
    let space = line_space(&ys)?;
    let known = Known {
        h: kv(0.0, "classical: identity"),
        dimb: kv(1.0, "classical: interval"),
        dimh: kv(1.0, "classical: interval"),
        h_l_lower: kv(0.0, "isometry"),
        h_l_upper: kv(0.0, "isometry"),
        l: kv(0.0, "identity"),
        lipschitz: kv(1.0, "identity"),
        rates_diverge: false,
    };
    Ok(SystemBundle {
        name: "interval".into(),
        spec: None,
        horizon: 1,
        mesh_radii: Vec::new(),
        space,
        map: DynMap::identity(points),
        covers: Vec::new(),
        known,
    })
}

fn product(p: &Params) -> Result<Built> {
    // The default keeps the product small enough for a cached distance matrix.
    let left_spec = p.spec("left")?.unwrap_or_else(|| SystemSpec::new(Family::Xa).int("q", 12));
    let left = generate_system(&left_spec)?;
    let right_spec = p.spec("right")?;
    let interval = right_spec.is_none();
    let right = match right_spec {
        Some(s) => generate_system(&s)?,
        None => interval_factor(p.int("interval_points", 8, 2, 1024)? as usize)?,
    };
    let (nl, nr) = (left.space.len(), right.space.len());
    if nl * nr > MAX_POINTS {
        return Err(p.bad("left", format!("the product would have {} points (limit {MAX_POINTS})", nl * nr)));
    }
    let map = (0..nl * nr).map(|id| left.map.apply(id / nr) * nr + right.map.apply(id % nr)).collect();
    let space = FiniteMetricSpace::max_product(left.space.clone(), right.space.clone())?;
    let (lk, rk) = (&left.known, &right.known);
    let sum = |a: Option<KnownValue>, b: Option<KnownValue>, c: &'static str| match (a, b) {
        (Some(x), Some(y)) => kv(x.value + y.value, c),
        _ => None,
    };
    let max = |a: Option<KnownValue>, b: Option<KnownValue>, c: &'static str| match (a, b) {
        (Some(x), Some(y)) => kv(x.value.max(y.value), c),
        _ => None,
    };
    let mut known = Known {
        h: sum(lk.h, rk.h, "classical: entropy of a product"),
        l: max(lk.l, rk.l, "classical: max metric"),
        lipschitz: max(lk.lipschitz, rk.lipschitz, "classical: max metric"),
        ..Known::default()
    };
    if interval {
        known.dimb =
            lk.dimb.map(|v| KnownValue { value: v.value + 1.0, citation: "classical: product with an interval" });
        known.dimh =
            lk.dimh.map(|v| KnownValue { value: v.value + 1.0, citation: "classical: product with an interval" });
        if left_spec.family == Family::Xa {
            known.h_l_lower = kv(0.0, "worked example: (f, id) on X_a x [0,1] has Lebesgue rate 0");
            known.h_l_upper = kv(0.0, "worked example: (f, id) on X_a x [0,1] has Lebesgue rate 0");
        }
    }
    let mut built = Built::new(space, map, known)?;
    built.radii = left.mesh_radii.clone();
    built.horizon = left.horizon;
    Ok(built)
}
