//! Finite-horizon rate estimates and the inequality verifier.
//!
//! Limits inferior and superior of `a_n = ln(δ_{n−1}/δ_n)` are replaced by
//! the minimum and maximum over a window of indices. The default window is
//! the second half of the usable prefix of a sequence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::cover::{self, delta_minimal_with, mesh_cover, min_subcover, Cover};
use crate::dynamics::{
    iterate_rate, lipschitz_constant, pullback_cover, separated_from_graph, BowenTable, DeltaContext, DeltaMode,
    DynMap, IterateRate, RateSequence,
};
use crate::error::{Error, Result};
use crate::metric::{box_dim_estimate, default_gamma_grid, DimEstimate, FiniteMetricSpace};
use crate::solver::{Budget, SolveMode};
use crate::stats::least_squares_slope;
use crate::systems::{KnownValue, NamedCover, SystemBundle};

/// Spaces above this size are not tabulated for separated sets: the table
/// of pairwise Bowen distances grows quadratically.
pub const SEPARATED_POINT_LIMIT: usize = 4096;

/// Inclusive index window `start..=end`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Window { start, end }
    }

    /// Second half of a prefix of length `len`: `⌊len/2⌋+1 ..= len`.
    pub fn tail(len: usize) -> Self {
        Window { start: len / 2 + 1, end: len }
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(self, usable: usize) -> Result<()> {
        if self.start == 0 || self.start > self.end || self.end > usable {
            return Err(Error::EmptyWindow { start: self.start, end: self.end, usable });
        }
        Ok(())
    }
}

/// Windowed rate estimate of a decreasing sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    /// Smallest per-step exponent on the window.
    pub lower_rate: f64,
    /// Largest per-step exponent on the window.
    pub upper_rate: f64,
    /// Least-squares slope of `−ln δ_n` against `n`, over `start−1 ..= end`.
    pub slope: f64,
    /// `(1/n)·ln(δ_0/δ_n)` at the end of the window.
    pub cumulative_rate: f64,
    pub window: Window,
    pub method: &'static str,
}

/// Rate bounds of a sequence over `window`, or over the tail of its usable
/// prefix.
///
/// Including `δ_{start−1}` in the fit makes the slope a weighted mean of the
/// same exponents the bounds range over, so `lower ≤ slope ≤ upper`.
pub fn rate_bounds(seq: &RateSequence, window: Option<Window>) -> Result<RateEstimate> {
    let usable = seq.usable_len();
    let w = window.unwrap_or_else(|| Window::tail(usable));
    w.check(usable)?;
    let exps: Vec<f64> = (w.start..=w.end).map(|n| seq.exponent(n)).collect();
    let lower = exps.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xs: Vec<f64> = (w.start - 1..=w.end).map(|n| n as f64).collect();
    let ys: Vec<f64> = (w.start - 1..=w.end).map(|n| -libm::log(seq.delta(n))).collect();
    let slope = least_squares_slope(&xs, &ys).max(lower).min(upper);
    Ok(RateEstimate {
        lower_rate: lower,
        upper_rate: upper,
        slope,
        cumulative_rate: seq.cumulative_rate(w.end),
        window: w,
        method: "delta-window",
    })
}

/// Upper rates of a sequence and of its running maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefixMaxCheck {
    /// `max a_n / n` over the window.
    pub direct: f64,
    /// `max b_n / n` over the window, `b_n = max_{k≤n} a_k`.
    pub prefix_max: f64,
    pub window: Window,
}

/// Compares the windowed upper rate of `a_1, a_2, …` with that of its
/// running maximum. The window is clamped to the list; an empty list gives
/// zeros.
pub fn prefix_max_rate_check(values: &[f64], window: Option<Window>) -> PrefixMaxCheck {
    let len = values.len();
    let mut w = window.unwrap_or_else(|| Window::tail(len));
    w.start = w.start.max(1);
    w.end = w.end.min(len);
    if w.is_empty() {
        return PrefixMaxCheck { direct: 0.0, prefix_max: 0.0, window: w };
    }
    let mut running = f64::NEG_INFINITY;
    let (mut direct, mut prefix_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, &a) in values.iter().enumerate().take(w.end) {
        let n = i + 1;
        running = running.max(a);
        if n >= w.start {
            direct = direct.max(a / n as f64);
            prefix_max = prefix_max.max(running / n as f64);
        }
    }
    PrefixMaxCheck { direct, prefix_max, window: w }
}

/// Where a number comes from, and which way it may be off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Known in closed form for the system.
    Analytic,
    /// Computed exactly on the finite model.
    Exact,
    /// A finite-horizon estimate with no known bias direction.
    Measured,
    /// May underestimate (greedy separated sets).
    LowerBound,
    /// May overestimate (greedy subcovers, iterate Lipschitz rates).
    UpperBound,
    /// Combines bounds of both directions.
    Mixed,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Exact => "exact",
            Provenance::Measured => "measured",
            Provenance::LowerBound => "lower-bound",
            Provenance::UpperBound => "upper-bound",
            Provenance::Mixed => "mixed",
        }
    }

    /// Provenance of a product or maximum of non-negative quantities.
    pub fn combine(self, other: Provenance) -> Provenance {
        use Provenance::*;
        match (self, other) {
            (Mixed, _) | (_, Mixed) | (LowerBound, UpperBound) | (UpperBound, LowerBound) => Mixed,
            (LowerBound, _) | (_, LowerBound) => LowerBound,
            (UpperBound, _) | (_, UpperBound) => UpperBound,
            (Measured, _) | (_, Measured) => Measured,
            (Exact, _) | (_, Exact) => Exact,
            _ => Analytic,
        }
    }

    fn may_be_low(self) -> bool {
        matches!(self, Provenance::LowerBound | Provenance::Mixed)
    }

    fn may_be_high(self) -> bool {
        matches!(self, Provenance::UpperBound | Provenance::Mixed)
    }
}

/// One value of a counting sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountRow {
    pub n: usize,
    pub count: usize,
    /// `(1/n)·ln count`.
    pub rate: f64,
    pub exact: bool,
}

/// Counts above `|X|` divided by this are treated as saturated.
pub const SATURATION_FACTOR: usize = 8;

/// Slope of `ln c_n` over `start−1 ..= end`, with `c_0 = 1`.
///
/// The default window is the tail of the prefix whose counts stay at most
/// `points / SATURATION_FACTOR`: closer to `|X|` the count can no longer
/// grow geometrically on a finite model and the slope flattens. If that
/// prefix has fewer than two rows, all rows are used.
///
/// The flag is set when the window reaches a saturated count; such a slope
/// says more about the resolution of the model than about the map.
fn count_slope(rows: &[CountRow], points: usize, window: Option<Window>) -> Result<(f64, Window, bool)> {
    let saturated = |r: &CountRow| r.count * SATURATION_FACTOR > points;
    let w = window.unwrap_or_else(|| {
        let unsaturated = rows.iter().take_while(|r| !saturated(r)).count();
        Window::tail(if unsaturated >= 2 { unsaturated } else { rows.len() })
    });
    w.check(rows.len())?;
    let flagged = rows[w.start - 1..w.end].iter().any(saturated);
    let log_count = |n: usize| if n == 0 { 0.0 } else { libm::log(rows[n - 1].count as f64) };
    let xs: Vec<f64> = (w.start - 1..=w.end).map(|n| n as f64).collect();
    let ys: Vec<f64> = (w.start - 1..=w.end).map(log_count).collect();
    Ok((least_squares_slope(&xs, &ys), w, flagged))
}

/// `S(U_fⁿ)` for `n = 1..N` and the entropy estimate `h(f, U)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverEntropy {
    /// Stops early once a subcover needs every point.
    pub rows: Vec<CountRow>,
    pub estimate: f64,
    pub provenance: Provenance,
    pub window: Window,
}

/// Calls `visit(n, U_fⁿ)` for `n = 1..=horizon`, each cover pruned to its
/// maximal members, until `visit` returns `false`.
///
/// Pruning keeps minimum subcover sizes and the best Lebesgue number over
/// minimum subcovers: every member lies in a maximal one, and joins of the
/// pruned covers have the same maximal members as joins of the full ones.
fn for_each_iterated(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    horizon: usize,
    budget: &Budget,
    mut visit: impl FnMut(usize, &Cover) -> Result<bool>,
) -> Result<()> {
    cover.require_valid(space)?;
    map.check_space(space)?;
    let base = cover.maximal_members();
    let mut acc = base.clone();
    let mut power = DynMap::identity(space.len());
    for n in 1..=horizon {
        if n > 1 {
            power = map.after(&power);
            let pulled = pullback_cover(space, &power, &base)?.maximal_members();
            acc = cover::join(space, &acc, &pulled)?.maximal_members();
            if acc.len() > budget.member_cap {
                return Err(Error::MemberCap { count: acc.len(), cap: budget.member_cap });
            }
        }
        if !visit(n, &acc)? {
            break;
        }
    }
    Ok(())
}

/// Entropy of a cover from the growth of `S(U_fⁿ)`.
pub fn cover_entropy(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    horizon: usize,
    mode: SolveMode,
    budget: &Budget,
    window: Option<Window>,
) -> Result<CoverEntropy> {
    if horizon < 2 {
        return Err(Error::arg("cover entropy needs a horizon of at least 2"));
    }
    let mut rows = Vec::with_capacity(horizon);
    for_each_iterated(space, map, cover, horizon, budget, |n, c| {
        let s = min_subcover(space, c, mode, budget)?;
        rows.push(CountRow { n, count: s.size, rate: libm::log(s.size as f64) / n as f64, exact: s.exact });
        Ok(s.size < space.len())
    })?;
    let (estimate, window, saturated) = count_slope(&rows, space.len(), window)?;
    let exact = rows[window.start.saturating_sub(2)..window.end].iter().all(|r| r.exact);
    let provenance = match (saturated, exact) {
        (true, _) => Provenance::Mixed,
        (false, true) => Provenance::Measured,
        (false, false) => Provenance::UpperBound,
    };
    Ok(CoverEntropy { rows, estimate, provenance, window })
}

/// Separated-set counts at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SepSeries {
    pub eps: f64,
    /// Stops early once every point is separated.
    pub rows: Vec<CountRow>,
    pub estimate: f64,
    pub provenance: Provenance,
    pub window: Window,
}

/// Separated-set entropy estimates for several scales.
#[derive(Clone, Debug, PartialEq)]
pub struct SepEntropy {
    pub per_eps: Vec<SepSeries>,
}

impl SepEntropy {
    /// The largest per-scale estimate, as entropy is a supremum over scales.
    pub fn best(&self) -> Option<&SepSeries> {
        self.per_eps.iter().max_by(|a, b| a.estimate.total_cmp(&b.estimate))
    }
}

/// Growth of the largest `(n, ε)`-separated sets.
pub fn sep_entropy(
    space: &FiniteMetricSpace,
    map: &DynMap,
    eps_list: &[f64],
    horizon: usize,
    mode: SolveMode,
    budget: &Budget,
    window: Option<Window>,
) -> Result<SepEntropy> {
    map.check_space(space)?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("scales must be positive and strictly decreasing"));
    }
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    if space.len() > SEPARATED_POINT_LIMIT {
        return Err(Error::arg(format!(
            "separated sets are tabulated for at most {SEPARATED_POINT_LIMIT} points, not {}",
            space.len()
        )));
    }
    if space.len() < 2 {
        let rows = vec![CountRow { n: 1, count: 1, rate: 0.0, exact: true }];
        let per_eps = eps_list
            .iter()
            .map(|&eps| SepSeries {
                eps,
                rows: rows.clone(),
                estimate: 0.0,
                provenance: Provenance::Exact,
                window: Window::new(1, 1),
            })
            .collect();
        return Ok(SepEntropy { per_eps });
    }
    let mut table = BowenTable::new(space, map);
    let mut rows: Vec<Vec<CountRow>> = vec![Vec::new(); eps_list.len()];
    let mut done = vec![false; eps_list.len()];
    for n in 1..=horizon {
        table.advance();
        for (i, &eps) in eps_list.iter().enumerate() {
            if done[i] {
                continue;
            }
            let s = separated_from_graph(&table.conflict_graph(eps), mode, budget)?;
            rows[i].push(CountRow { n, count: s.size, rate: libm::log(s.size as f64) / n as f64, exact: s.exact });
            done[i] = s.size == space.len();
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    let per_eps = eps_list
        .iter()
        .zip(rows)
        .map(|(&eps, rows)| {
            let (estimate, window, saturated) = count_slope(&rows, space.len(), window)?;
            let exact = rows[window.start.saturating_sub(2)..window.end].iter().all(|r| r.exact);
            let provenance = match (saturated, exact) {
                (true, _) => Provenance::Mixed,
                (false, true) => Provenance::Measured,
                (false, false) => Provenance::LowerBound,
            };
            Ok(SepSeries { eps, rows, estimate, provenance, window })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SepEntropy { per_eps })
}

/// Lebesgue rates for one mesh cover.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRate {
    pub radius: f64,
    pub cover_id: String,
    pub sequence: RateSequence,
    pub estimate: RateEstimate,
}

/// Lebesgue rates across mesh radii.
#[derive(Clone, Debug, PartialEq)]
pub struct HlEstimate {
    /// In the order the radii were given.
    pub per_radius: Vec<RadiusRate>,
    /// Lower rate at the finest radius.
    pub lower: f64,
    /// Upper rate at the finest radius.
    pub upper: f64,
    pub finest_radius: f64,
}

/// Lower and upper Lebesgue rates of mesh covers of the given radii.
pub fn hl_estimates(
    space: &FiniteMetricSpace,
    map: &DynMap,
    radii: &[f64],
    horizon: usize,
    budget: &Budget,
    window: Option<Window>,
) -> Result<HlEstimate> {
    let covers = radii
        .iter()
        .map(|&r| Ok(NamedCover { id: format!("mesh:{r}"), radius: r, cover: mesh_cover(space, r)? }))
        .collect::<Result<Vec<_>>>()?;
    hl_estimates_for(&DeltaContext::new(space), map, &covers, horizon, budget, window)
}

/// [`hl_estimates`] over prebuilt covers sharing one context.
pub fn hl_estimates_for(
    ctx: &DeltaContext<'_>,
    map: &DynMap,
    covers: &[NamedCover],
    horizon: usize,
    budget: &Budget,
    window: Option<Window>,
) -> Result<HlEstimate> {
    if covers.len() < 2 {
        return Err(Error::arg("Lebesgue rate estimates need at least two mesh radii"));
    }
    let mut per_radius = Vec::with_capacity(covers.len());
    for c in covers {
        let mut sequence = ctx.delta_sequence(map, &c.cover, horizon, DeltaMode::RunningMin, budget)?;
        sequence.name = c.id.clone();
        let estimate = rate_bounds(&sequence, window)?;
        per_radius.push(RadiusRate { radius: c.radius, cover_id: c.id.clone(), sequence, estimate });
    }
    let finest = per_radius.iter().min_by(|a, b| a.radius.total_cmp(&b.radius)).expect("at least two radii");
    Ok(HlEstimate {
        lower: finest.estimate.lower_rate,
        upper: finest.estimate.upper_rate,
        finest_radius: finest.radius,
        per_radius,
    })
}

/// Rates of `Δ_n`, the best Lebesgue number among minimum subcovers of
/// `U_fⁿ`, next to the rates of `δ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaRate {
    /// `Δ_n` as a rate sequence.
    pub sequence: RateSequence,
    /// `δ_n` for the same cover.
    pub lebesgue: RateSequence,
    /// Windowed rates of `Δ_n`; `lower_rate` estimates the Δ-rate.
    pub estimate: RateEstimate,
    /// `(1/n)·ln(δ_0/Δ_n)` at the end of the window.
    pub cumulative_delta: f64,
    /// `(1/n)·ln(δ_0/δ_n)` at the same `n`; never above `cumulative_delta`.
    pub cumulative_lower: f64,
    /// `Δ_n ≤ δ_n` held for every computed `n`.
    pub dominated: bool,
}

pub fn hl_delta_estimate(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    horizon: usize,
    budget: &Budget,
    window: Option<Window>,
) -> Result<DeltaRate> {
    let ctx = DeltaContext::new(space);
    let lebesgue = ctx.delta_sequence(map, cover, horizon, DeltaMode::RunningMin, budget)?;
    let mut values = Vec::with_capacity(horizon);
    let mut capped = Vec::with_capacity(horizon);
    for_each_iterated(space, map, cover, horizon, budget, |_, c| {
        let d = delta_minimal_with(space, ctx.order(), c, budget)?;
        values.push(d.delta);
        capped.push(d.capped);
        Ok(true)
    })?;
    let dominated = values
        .iter()
        .zip(&capped)
        .zip(lebesgue.values.iter().zip(&lebesgue.capped))
        .all(|((&d, &dc), (&l, &lc))| lc || (!dc && d <= l));
    let sequence = RateSequence {
        name: "delta-minimal".into(),
        pullback: values.clone(),
        pullback_capped: capped.clone(),
        values,
        capped,
        reference: space.diameter(),
        floor: space.separation(),
    };
    let estimate = rate_bounds(&sequence, window)?;
    let n = estimate.window.end;
    Ok(DeltaRate {
        cumulative_delta: sequence.cumulative_rate(n),
        cumulative_lower: if lebesgue.capped[n - 1] { 0.0 } else { lebesgue.cumulative_rate(n) },
        estimate,
        sequence,
        lebesgue,
        dominated,
    })
}

/// A number with its provenance and the operation that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub provenance: Provenance,
    pub source: &'static str,
}

impl Quantity {
    fn new(value: f64, provenance: Provenance, source: &'static str) -> Self {
        Quantity { value, provenance, source }
    }

    fn analytic(v: Option<KnownValue>) -> Option<Quantity> {
        v.map(|k| Quantity::new(k.value, Provenance::Analytic, k.citation))
    }
}

/// Settings for [`measure`] and [`verify_inequalities`].
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    /// Overrides the bundle's horizon.
    pub horizon: Option<usize>,
    /// Slack allowance for rows with measured inputs.
    pub tolerance: f64,
    /// Slack allowance for rows with only analytic or exact inputs.
    pub analytic_tolerance: f64,
    pub budget: Budget,
    pub mode: SolveMode,
    pub window: Option<Window>,
    /// Largest `n` for the iterate Lipschitz rate.
    pub lipschitz_horizon: usize,
    /// Minimum-subcover rates are attempted up to this many points.
    pub delta_point_limit: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            horizon: None,
            tolerance: 0.15,
            analytic_tolerance: 1e-9,
            budget: Budget::default(),
            mode: SolveMode::Auto,
            window: None,
            lipschitz_horizon: 8,
            delta_point_limit: 64,
        }
    }
}

/// Lebesgue numbers never fall faster than `max(L, 1)` per iterate:
/// `δ_n ≥ δ(U)·max(L,1)^{−(n−1)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteBound {
    pub cover_id: String,
    /// `min_n [ln δ_n − ln δ(U) + (n−1)·ln max(L,1)]`; non-negative when the
    /// bound holds.
    pub margin: f64,
}

/// Everything [`verify_inequalities`] compares, measured on one bundle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Measurements {
    pub h: Option<Quantity>,
    pub h_cover: Option<Quantity>,
    pub dimb: Option<Quantity>,
    pub h_l_lower: Option<Quantity>,
    pub h_l_upper: Option<Quantity>,
    pub h_l_delta: Option<Quantity>,
    /// Cumulative rate of `Δ_n` at the end of its window.
    pub h_l_delta_cumulative: Option<Quantity>,
    /// Cumulative rate of `δ_n` at the same `n`, for the same cover.
    pub h_l_lower_cover: Option<Quantity>,
    pub l: Option<Quantity>,
    pub lipschitz: Option<Quantity>,
    pub hl: Option<HlEstimate>,
    pub sep: Option<SepEntropy>,
    pub dim: Option<DimEstimate>,
    pub iterate: Option<IterateRate>,
    pub cover_entropy: Option<CoverEntropy>,
    pub delta: Option<DeltaRate>,
    pub finite_bounds: Vec<FiniteBound>,
    /// Measurements that could not be made, with the reason.
    pub notes: Vec<String>,
}

fn note<T>(notes: &mut Vec<String>, what: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    }
}

/// Runs every estimator the verifier needs. Estimators that fail (budget,
/// size limits, empty windows) leave their entry empty and add a note.
pub fn measure(bundle: &SystemBundle, config: &VerifyConfig) -> Measurements {
    let space = &bundle.space;
    let map = &bundle.map;
    let budget = &config.budget;
    let horizon = config.horizon.unwrap_or(bundle.horizon());
    let mut m = Measurements::default();
    let ctx = DeltaContext::new(space);

    m.hl = note(
        &mut m.notes,
        "lebesgue rates",
        hl_estimates_for(&ctx, map, &bundle.covers, horizon, budget, config.window),
    );
    if let Some(hl) = &m.hl {
        m.h_l_lower = Some(Quantity::new(hl.lower, Provenance::Measured, "hl_estimates"));
        m.h_l_upper = Some(Quantity::new(hl.upper, Provenance::Measured, "hl_estimates"));
    }

    let gammas = default_gamma_grid(space);
    m.dim = note(&mut m.notes, "box dimension", box_dim_estimate(space, &gammas, config.mode, budget));
    if let Some(d) = &m.dim {
        let exact = d.per_scale.iter().all(|s| s.exact);
        let prov = if exact { Provenance::Measured } else { Provenance::UpperBound };
        m.dimb = Some(Quantity::new(d.slope, prov, "box_dim_estimate"));
    }

    let mut eps: Vec<f64> = bundle.mesh_radii().to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    m.sep = note(&mut m.notes, "separated sets", sep_entropy(space, map, &eps, horizon, config.mode, budget, None));
    if let Some(best) = m.sep.as_ref().and_then(SepEntropy::best) {
        m.h = Some(Quantity::new(best.estimate, best.provenance, "sep_entropy"));
    }

    if let Some(lip) = note(&mut m.notes, "lipschitz constant", lipschitz_constant(space, map)) {
        // Exact on the model, but a supremum over sampled pairs can only
        // undershoot the Lipschitz constant of the system it samples.
        m.lipschitz = Some(Quantity::new(lip, Provenance::LowerBound, "lipschitz_constant"));
        if let Some(hl) = &m.hl {
            let log_l = libm::log(lip.max(1.0));
            for r in &hl.per_radius {
                let s = &r.sequence;
                if s.capped[0] {
                    continue;
                }
                let base = libm::log(s.values[0]);
                let margin = (1..=s.usable_len())
                    .map(|n| libm::log(s.delta(n)) - base + (n - 1) as f64 * log_l)
                    .fold(f64::INFINITY, f64::min);
                m.finite_bounds.push(FiniteBound { cover_id: r.cover_id.clone(), margin });
            }
        }
    }

    let l_horizon = horizon.min(config.lipschitz_horizon).max(1);
    m.iterate = note(&mut m.notes, "iterate lipschitz rate", iterate_rate(space, map, l_horizon));
    if let Some(it) = &m.iterate {
        // Sampled constants undershoot; a minimum over finitely many n overshoots.
        m.l = Some(Quantity::new(it.estimate, Provenance::Mixed, "iterate_rate"));
    }

    if space.len() <= config.delta_point_limit {
        if let Some(c) = bundle.covers.first() {
            let delta = note(
                &mut m.notes,
                "minimum-subcover rates",
                hl_delta_estimate(space, map, &c.cover, horizon, budget, config.window),
            );
            if let Some(d) = delta {
                let n = d.estimate.window.end.max(2);
                let ce = note(
                    &mut m.notes,
                    "cover entropy",
                    cover_entropy(space, map, &c.cover, n, config.mode, budget, None),
                );
                if let Some(ce) = ce {
                    m.h_cover = Some(Quantity::new(ce.estimate, ce.provenance, "cover_entropy"));
                    m.cover_entropy = Some(ce);
                }
                m.h_l_delta = Some(Quantity::new(d.estimate.lower_rate, Provenance::Measured, "hl_delta_estimate"));
                m.h_l_delta_cumulative =
                    Some(Quantity::new(d.cumulative_delta, Provenance::Exact, "hl_delta_estimate"));
                m.h_l_lower_cover = Some(Quantity::new(d.cumulative_lower, Provenance::Exact, "hl_delta_estimate"));
                m.delta = Some(d);
            }
        }
    } else {
        m.notes.push(format!(
            "minimum-subcover rates: skipped for {} points (limit {})",
            space.len(),
            config.delta_point_limit
        ));
    }
    m
}

/// Outcome of one inequality row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    /// Outside tolerance, but a bound of the wrong direction is involved, so
    /// the violation may be an artefact of the estimate.
    Inconclusive,
    /// An input is missing.
    Skipped,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::Skipped => "skipped",
        }
    }
}

/// One `lhs ≥ rhs` comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityRow {
    pub name: String,
    pub relation: &'static str,
    /// `NaN` when skipped.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    /// `slack ≥ −tolerance`.
    pub pass: bool,
    pub status: Status,
    pub lhs_src: Option<Provenance>,
    pub rhs_src: Option<Provenance>,
    /// Operations or citations behind each side.
    pub lhs_from: String,
    pub rhs_from: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InequalityReport {
    pub rows: Vec<InequalityRow>,
}

impl InequalityReport {
    pub fn failures(&self) -> impl Iterator<Item = &InequalityRow> {
        self.rows.iter().filter(|r| r.status == Status::Fail)
    }

    /// No row failed soundly.
    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn count(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }
}

/// A side of a row: a value, its provenance and the sources combined.
#[derive(Clone, Debug)]
struct Side {
    value: f64,
    provenance: Provenance,
    from: String,
}

impl Side {
    fn of(q: Quantity) -> Side {
        Side { value: q.value, provenance: q.provenance, from: q.source.to_string() }
    }

    fn times(self, other: Side) -> Side {
        Side {
            value: self.value * other.value,
            provenance: self.provenance.combine(other.provenance),
            from: format!("{} * {}", self.from, other.from),
        }
    }

    fn positive_part(self) -> Side {
        Side { value: self.value.max(0.0), ..self }
    }

    fn ln(self) -> Side {
        Side { value: libm::log(self.value), ..self }
    }
}

/// Inputs available to one variant of the rows.
struct Inputs {
    h: Option<Quantity>,
    h_cover: Option<Quantity>,
    dimb: Option<Quantity>,
    dimh: Option<Quantity>,
    lower: Option<Quantity>,
    upper: Option<Quantity>,
    delta: Option<Quantity>,
    delta_cumulative: Option<Quantity>,
    lower_cover: Option<Quantity>,
    l: Option<Quantity>,
    lip: Option<Quantity>,
}

type Rule = (&'static str, &'static str, fn(&Inputs) -> Option<Side>, fn(&Inputs) -> Option<Side>);

fn side(q: Option<Quantity>) -> Option<Side> {
    q.map(Side::of)
}

const RULES: [Rule; 9] = [
    ("box_dim_lower_rate", "dimb * hl_lower >= h", |i| Some(side(i.dimb)?.times(side(i.lower)?)), |i| side(i.h)),
    ("hausdorff_upper_rate", "dimh * hl_upper >= h", |i| Some(side(i.dimh)?.times(side(i.upper)?)), |i| side(i.h)),
    (
        "lipschitz_upper_rate",
        "max(ln L, 0) >= hl_upper",
        |i| Some(side(i.lip)?.ln().positive_part()),
        |i| side(i.upper),
    ),
    (
        "asymptotic_lipschitz_hausdorff",
        "dimh * max(l, 0) >= h",
        |i| Some(side(i.dimh)?.times(side(i.l)?.positive_part())),
        |i| side(i.h),
    ),
    ("rate_order_lower_upper", "hl_upper >= hl_lower", |i| side(i.upper), |i| side(i.lower)),
    ("rate_order_upper_asymptotic", "max(l, 0) >= hl_upper", |i| Some(side(i.l)?.positive_part()), |i| side(i.upper)),
    (
        "box_dim_lipschitz",
        "dimb * max(ln L, 0) >= h",
        |i| Some(side(i.dimb)?.times(side(i.lip)?.ln().positive_part())),
        |i| side(i.h),
    ),
    (
        "delta_box_dim_cover",
        "dimb * hl_delta(U) >= h(f,U)",
        |i| Some(side(i.dimb)?.times(side(i.delta)?)),
        |i| side(i.h_cover),
    ),
    (
        "delta_dominates_lower",
        "cumulative hl_delta(U) >= cumulative hl_lower(U)",
        |i| side(i.delta_cumulative),
        |i| side(i.lower_cover),
    ),
];

fn make_row(
    name: String,
    relation: &'static str,
    lhs: Option<Side>,
    rhs: Option<Side>,
    tolerance: f64,
) -> InequalityRow {
    match (lhs, rhs) {
        (Some(l), Some(r)) if !l.value.is_nan() && !r.value.is_nan() => {
            let slack = l.value - r.value;
            // Equal infinities compare as equal.
            let slack = if slack.is_nan() { 0.0 } else { slack };
            let pass = slack >= -tolerance;
            let status = if pass {
                Status::Pass
            } else if l.provenance.may_be_low() || r.provenance.may_be_high() {
                Status::Inconclusive
            } else {
                Status::Fail
            };
            InequalityRow {
                name,
                relation,
                lhs: l.value,
                rhs: r.value,
                slack,
                tolerance,
                pass,
                status,
                lhs_src: Some(l.provenance),
                rhs_src: Some(r.provenance),
                lhs_from: l.from,
                rhs_from: r.from,
            }
        }
        (l, r) => InequalityRow {
            name,
            relation,
            lhs: l.as_ref().map_or(f64::NAN, |s| s.value),
            rhs: r.as_ref().map_or(f64::NAN, |s| s.value),
            slack: f64::NAN,
            tolerance,
            pass: false,
            status: Status::Skipped,
            lhs_src: l.as_ref().map(|s| s.provenance),
            rhs_src: r.as_ref().map(|s| s.provenance),
            lhs_from: l.map(|s| s.from).unwrap_or_default(),
            rhs_from: r.map(|s| s.from).unwrap_or_default(),
        },
    }
}

fn is_analytic(s: &Option<Side>) -> bool {
    s.as_ref().is_some_and(|s| s.provenance == Provenance::Analytic)
}

/// Checks every inequality twice: once on analytic values only, once
/// preferring measured values. Rows with a missing side are skipped; rows
/// whose measured variant would only repeat analytic values are skipped too.
pub fn verify_inequalities(bundle: &SystemBundle, measured: &Measurements, config: &VerifyConfig) -> InequalityReport {
    let k = &bundle.known;
    let rates = |v: Option<KnownValue>| if k.rates_diverge { None } else { Quantity::analytic(v) };
    let analytic = Inputs {
        h: Quantity::analytic(k.h),
        h_cover: None,
        dimb: Quantity::analytic(k.dimb),
        dimh: Quantity::analytic(k.dimh),
        lower: rates(k.h_l_lower),
        upper: rates(k.h_l_upper),
        delta: None,
        delta_cumulative: None,
        lower_cover: None,
        l: Quantity::analytic(k.l),
        lip: Quantity::analytic(k.lipschitz),
    };
    let m = measured;
    let mixed = Inputs {
        h: m.h.or(analytic.h),
        h_cover: m.h_cover,
        dimb: m.dimb.or(analytic.dimb),
        // Hausdorff dimension is never measured.
        dimh: analytic.dimh,
        lower: m.h_l_lower.or(analytic.lower),
        upper: m.h_l_upper.or(analytic.upper),
        delta: m.h_l_delta,
        delta_cumulative: m.h_l_delta_cumulative,
        lower_cover: m.h_l_lower_cover,
        l: m.l.or(analytic.l),
        lip: m.lipschitz.or(analytic.lip),
    };
    let mut rows = Vec::new();
    for (name, relation, lhs, rhs) in RULES {
        rows.push(make_row(
            format!("{name}/analytic"),
            relation,
            lhs(&analytic),
            rhs(&analytic),
            config.analytic_tolerance,
        ));
        let (l, r) = (lhs(&mixed), rhs(&mixed));
        let mut row = if is_analytic(&l) && is_analytic(&r) {
            make_row(String::new(), relation, None, None, config.tolerance)
        } else {
            let exact = |s: &Option<Side>| {
                s.as_ref().is_some_and(|s| matches!(s.provenance, Provenance::Analytic | Provenance::Exact))
            };
            let tol = if exact(&l) && exact(&r) { config.analytic_tolerance } else { config.tolerance };
            make_row(String::new(), relation, l, r, tol)
        };
        row.name = format!("{name}/measured");
        rows.push(row);
    }
    for b in &m.finite_bounds {
        let lhs =
            Side { value: b.margin, provenance: Provenance::Exact, from: "delta_sequence, lipschitz_constant".into() };
        let rhs = Side { value: 0.0, provenance: Provenance::Exact, from: "zero".into() };
        rows.push(make_row(
            format!("lipschitz_finite_bound/{}", b.cover_id),
            "ln delta_n - ln delta(U) + (n-1) ln max(L,1) >= 0",
            Some(lhs),
            Some(rhs),
            config.analytic_tolerance,
        ));
    }
    InequalityReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{generate_system, Family, SystemSpec};
    use core::f64::consts::LN_2;

    fn doubling(p: usize) -> (FiniteMetricSpace, DynMap) {
        let s = FiniteMetricSpace::circle_grid(p).unwrap();
        let m = DynMap::new((0..p).map(|k| 2 * k % p).collect()).unwrap();
        (s, m)
    }

    fn synthetic(values: Vec<f64>) -> RateSequence {
        RateSequence::from_values("t", values, 1.0).unwrap()
    }

    #[test]
    fn constant_sequence_has_zero_rates() {
        let e = rate_bounds(&synthetic(vec![0.5; 10]), None).unwrap();
        assert_eq!((e.lower_rate, e.upper_rate), (0.0, 0.0));
        assert!(e.slope.abs() < 1e-12);
        assert_eq!(e.window, Window::new(6, 10));
    }

    #[test]
    fn exponential_sequence_recovers_lambda() {
        let lambda = 0.37;
        let seq = synthetic((1..=20).map(|n| libm::exp(-lambda * n as f64)).collect());
        let e = rate_bounds(&seq, Some(Window::new(3, 17))).unwrap();
        for v in [e.lower_rate, e.upper_rate, e.slope, e.cumulative_rate] {
            assert!((v - lambda).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn windows_outside_the_prefix_are_rejected() {
        let seq = synthetic(vec![0.5; 4]);
        assert!(matches!(rate_bounds(&seq, Some(Window::new(2, 5))), Err(Error::EmptyWindow { .. })));
        assert!(matches!(rate_bounds(&seq, Some(Window::new(0, 2))), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn prefix_max_of_linear_sequence() {
        let a: Vec<f64> = (1..=50).map(|n| n as f64).collect();
        let c = prefix_max_rate_check(&a, None);
        assert_eq!((c.direct, c.prefix_max), (1.0, 1.0));
        let flat = prefix_max_rate_check(&[3.0; 10_000], None);
        assert!(flat.direct < 1e-3 && flat.prefix_max < 1e-3);
    }

    #[test]
    fn prefix_max_of_spiky_sequence() {
        // Oracle: recompute both sequences from scratch.
        let a: Vec<f64> =
            (1..=200u64).map(|n| ((n * 7919) % 97) as f64 * if n % 13 == 0 { 3.0 } else { 0.1 }).collect();
        let w = Window::new(50, 200);
        let c = prefix_max_rate_check(&a, Some(w));
        let mut direct = f64::MIN;
        let mut pm = f64::MIN;
        for n in 50..=200 {
            direct = direct.max(a[n - 1] / n as f64);
            let b = a[..n].iter().copied().fold(f64::MIN, f64::max);
            pm = pm.max(b / n as f64);
        }
        assert_eq!((c.direct, c.prefix_max), (direct, pm));
        assert!(c.prefix_max >= c.direct);
    }

    #[test]
    fn cover_entropy_examples() {
        let (s, m) = doubling(256);
        let u = mesh_cover(&s, 1.0 / 8.0).unwrap();
        let e = cover_entropy(&s, &m, &u, 6, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert!((e.estimate - LN_2).abs() <= 0.15, "{}", e.estimate);

        let id = DynMap::identity(256);
        let e = cover_entropy(&s, &id, &u, 6, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert_eq!(e.estimate, 0.0);

        let rot = DynMap::new((0..256).map(|k| (k + 37) % 256).collect()).unwrap();
        let e = cover_entropy(&s, &rot, &u, 6, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert!(e.estimate.abs() <= 0.1, "{}", e.estimate);
    }

    #[test]
    fn sep_entropy_examples() {
        let (s, m) = doubling(1024);
        let e = sep_entropy(&s, &m, &[1.0 / 16.0], 6, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert!((e.per_eps[0].estimate - LN_2).abs() <= 0.12, "{}", e.per_eps[0].estimate);
        assert_eq!(e.per_eps[0].provenance, Provenance::LowerBound);

        let id = DynMap::identity(1024);
        let e = sep_entropy(&s, &id, &[0.1, 0.05], 6, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert!(e.per_eps.iter().all(|p| p.estimate.abs() < 1e-12));

        let b = generate_system(&SystemSpec::new(Family::Shift)).unwrap();
        let e = sep_entropy(&b.space, &b.map, &[0.125], 5, SolveMode::Auto, &Budget::default(), None).unwrap();
        assert!((e.per_eps[0].estimate - LN_2).abs() <= 0.15, "{}", e.per_eps[0].estimate);
    }

    #[test]
    fn scales_below_the_grid_are_flagged() {
        // Every point is separated at n = 1, so the slope is ln 12, not ln 2.
        let (s, m) = doubling(12);
        let e = sep_entropy(&s, &m, &[1.0 / 32.0], 4, SolveMode::Auto, &Budget::default(), None).unwrap();
        let series = &e.per_eps[0];
        assert_eq!(series.rows.len(), 1);
        assert!((series.estimate - libm::log(12.0)).abs() < 1e-12);
        assert_eq!(series.provenance, Provenance::Mixed);
    }

    #[test]
    fn hl_estimates_examples() {
        let budget = Budget::default();
        let rot = generate_system(&SystemSpec::new(Family::Rotation)).unwrap();
        let e = hl_estimates(&rot.space, &rot.map, rot.mesh_radii(), 8, &budget, None).unwrap();
        assert!(e.per_radius.iter().all(|r| r.estimate.lower_rate == 0.0 && r.estimate.upper_rate == 0.0));

        let (s, m) = doubling(1024);
        let e = hl_estimates(&s, &m, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 8, &budget, None).unwrap();
        for r in &e.per_radius {
            assert!((r.estimate.lower_rate - LN_2).abs() <= 0.1, "{:?}", r.estimate);
            assert!((r.estimate.upper_rate - LN_2).abs() <= 0.1, "{:?}", r.estimate);
        }

        let xab = generate_system(&SystemSpec::new(Family::Xab)).unwrap();
        let e = hl_estimates(&xab.space, &xab.map, xab.mesh_radii(), xab.horizon(), &budget, None).unwrap();
        assert!((e.lower - LN_2).abs() <= 0.2 * LN_2 && (e.upper - LN_2).abs() <= 0.2 * LN_2, "{e:?}");
    }

    fn arcs(p: usize, count: usize, overlap: usize) -> Cover {
        let step = p / count;
        let members = (0..count)
            .map(|j| {
                crate::metric::PointSet::new(
                    (0..step + 2 * overlap).map(|t| (j * step + p - overlap + t) % p).collect(),
                )
            })
            .collect();
        Cover::new(p, members).unwrap()
    }

    #[test]
    fn delta_rates_examples() {
        let budget = Budget::default();
        let (s, m) = doubling(64);
        let u = arcs(64, 4, 2);
        let d = hl_delta_estimate(&s, &m, &u, 4, &budget, None).unwrap();
        assert!(d.dominated);
        let lower = rate_bounds(&d.lebesgue, Some(d.estimate.window)).unwrap();
        assert!(d.cumulative_delta >= d.cumulative_lower);
        let h = d.estimate.lower_rate;
        assert!(h >= lower.lower_rate - 1e-12 && h <= lower.lower_rate + 0.2, "{h} vs {}", lower.lower_rate);

        let id = DynMap::identity(64);
        let d = hl_delta_estimate(&s, &id, &u, 4, &budget, None).unwrap();
        assert_eq!((d.estimate.lower_rate, d.estimate.upper_rate), (0.0, 0.0));
    }

    #[test]
    fn unique_minimal_cover_has_equal_rates() {
        // Disjoint cells: the only subcover is the cover itself.
        let s = FiniteMetricSpace::line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let u = Cover::from_lists(8, &[&[0, 1, 2, 3], &[4, 5, 6, 7]]).unwrap();
        let m = DynMap::new(vec![1, 2, 3, 4, 5, 6, 7, 7]).unwrap();
        let d = hl_delta_estimate(&s, &m, &u, 3, &Budget::default(), None).unwrap();
        assert_eq!(d.sequence.values, d.lebesgue.values);
        assert_eq!(d.cumulative_delta, d.cumulative_lower);
    }

    #[test]
    fn provenance_combination() {
        use Provenance::*;
        assert_eq!(Analytic.combine(Exact), Exact);
        assert_eq!(Measured.combine(LowerBound), LowerBound);
        assert_eq!(LowerBound.combine(UpperBound), Mixed);
        assert_eq!(Analytic.combine(Analytic), Analytic);
    }

    #[test]
    fn rotation_rows_all_pass() {
        let b = generate_system(&SystemSpec::new(Family::Rotation)).unwrap();
        let cfg = VerifyConfig::default();
        let m = measure(&b, &cfg);
        let r = verify_inequalities(&b, &m, &cfg);
        assert!(r.passed());
        assert_eq!(r.count(Status::Inconclusive), 0);
        assert!(r.rows.iter().any(|row| row.name == "box_dim_lower_rate/analytic" && row.status == Status::Pass));
    }

    #[test]
    fn inflated_entropy_fails_analytic_row() {
        let mut b = generate_system(&SystemSpec::new(Family::Rotation)).unwrap();
        b.known.h = Some(KnownValue { value: 5.0, citation: "inflated" });
        let cfg = VerifyConfig::default();
        let r = verify_inequalities(&b, &Measurements::default(), &cfg);
        let failed: Vec<&str> = r.failures().map(|row| row.name.as_str()).collect();
        assert!(failed.contains(&"box_dim_lower_rate/analytic"), "{failed:?}");
        assert!(!r.passed());
    }

    #[test]
    fn product_hausdorff_row_has_strict_slack() {
        let b = generate_system(&SystemSpec::new(Family::Product)).unwrap();
        let r = verify_inequalities(&b, &Measurements::default(), &VerifyConfig::default());
        let row = |n: &str| r.rows.iter().find(|row| row.name == n).unwrap().clone();
        let lip = row("asymptotic_lipschitz_hausdorff/analytic");
        assert_eq!(lip.status, Status::Pass);
        assert!(lip.slack > 1.0);
        let hd = row("hausdorff_upper_rate/analytic");
        assert_eq!(hd.status, Status::Pass);
        assert!(hd.slack.abs() < 1e-12);
    }

    #[test]
    fn bound_direction_decides_failure() {
        let lhs = Side { value: 0.0, provenance: Provenance::LowerBound, from: String::new() };
        let rhs = Side { value: 1.0, provenance: Provenance::Exact, from: String::new() };
        assert_eq!(make_row("x".into(), "", Some(lhs.clone()), Some(rhs.clone()), 0.1).status, Status::Inconclusive);
        let lhs = Side { provenance: Provenance::UpperBound, ..lhs };
        assert_eq!(make_row("x".into(), "", Some(lhs), Some(rhs), 0.1).status, Status::Fail);
        assert_eq!(make_row("x".into(), "", None, None, 0.1).status, Status::Skipped);
    }
}
