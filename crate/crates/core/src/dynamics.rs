//! Self-maps, pullback and iterated covers, `δ_n` sequences, Bowen metrics,
//! separated sets, Lipschitz constants and preimage gaps.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::BitSet;
use crate::cover::{self, Cover, CoverIndex, LebesgueEngine};
use crate::error::{Error, Result};
use crate::metric::{Extended, FiniteMetricSpace, NeighborOrder, PointSet};
use crate::solver::{self, Budget, SolveMode};

/// A total self-map of `{0..n}` in array form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynMap {
    image: Vec<usize>,
}

impl DynMap {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        if let Some(&bad) = image.iter().find(|&&y| y >= n) {
            return Err(Error::InvalidPoint { id: bad, len: n });
        }
        Ok(DynMap { image })
    }

    pub fn identity(n: usize) -> Self {
        DynMap { image: (0..n).collect() }
    }

    pub fn constant(n: usize, c: usize) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &DynMap) -> DynMap {
        DynMap { image: inner.image.iter().map(|&y| self.image[y]).collect() }
    }

    pub(crate) fn check_space(&self, space: &FiniteMetricSpace) -> Result<()> {
        if self.len() != space.len() {
            return Err(Error::SpaceMismatch { left: self.len(), right: space.len() });
        }
        Ok(())
    }
}

/// `fⁿ`, with `f⁰` the identity.
pub fn map_power(map: &DynMap, n: usize) -> DynMap {
    let mut out = DynMap::identity(map.len());
    for _ in 0..n {
        out = map.after(&out);
    }
    out
}

/// Member-wise preimages, empty ones dropped.
pub fn pullback_cover(space: &FiniteMetricSpace, map: &DynMap, cover: &Cover) -> Result<Cover> {
    map.check_space(space)?;
    pullback_by(space.len(), map.image(), cover)
}

fn pullback_by(n: usize, g: &[usize], cover: &Cover) -> Result<Cover> {
    let bits = cover.member_bits();
    let members = bits
        .iter()
        .map(|b| PointSet::from_sorted((0..n).filter(|&x| b.contains(g[x])).collect()))
        .filter(|m| !m.is_empty())
        .collect();
    Cover::new(n, members)
}

/// `U_fⁿ = U ∨ f⁻¹U ∨ … ∨ f⁻⁽ⁿ⁻¹⁾U`, duplicates removed after every join.
pub fn iterated_cover(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    n: usize,
    budget: &Budget,
) -> Result<Cover> {
    map.check_space(space)?;
    if n == 0 {
        return Err(Error::arg("iterated covers start at n = 1"));
    }
    let mut acc = cover.deduplicated();
    let mut power = DynMap::identity(space.len());
    for _ in 1..n {
        power = map.after(&power);
        let pulled = pullback_by(space.len(), power.image(), cover)?.deduplicated();
        acc = cover::join(space, &acc, &pulled)?.deduplicated();
        if acc.len() > budget.member_cap {
            return Err(Error::MemberCap { count: acc.len(), cap: budget.member_cap });
        }
    }
    Ok(acc)
}

/// How `delta_sequence` evaluates `δ_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DeltaMode {
    /// `δ_n = min_{k<n} δ(f⁻ᵏU)`.
    #[default]
    RunningMin,
    /// `δ(U_fⁿ)` from the materialised iterated cover.
    Direct,
}

/// `δ_1..δ_N` for one cover together with the single-pullback values
/// `δ(f⁻ᵏU)`, `k = 0..N−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSequence {
    pub name: String,
    /// `δ_n` at index `n − 1`; capped entries hold the diameter.
    pub values: Vec<f64>,
    pub capped: Vec<bool>,
    /// `δ(f⁻ᵏU)` at index `k`; capped entries hold the diameter.
    pub pullback: Vec<f64>,
    pub pullback_capped: Vec<bool>,
    /// `δ_0`, the diameter of the space. Exponents are measured from it.
    pub reference: f64,
    /// Smallest possible Lebesgue number on the space (its separation).
    /// Once `δ_n` reaches it the sequence carries no more information.
    pub floor: f64,
}

impl RateSequence {
    /// A plain positive sequence, measured from `reference`.
    pub fn from_values(name: impl Into<String>, values: Vec<f64>, reference: f64) -> Result<Self> {
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) || !(reference > 0.0 && reference.is_finite()) {
            return Err(Error::arg("rate sequences need positive finite values"));
        }
        let n = values.len();
        Ok(RateSequence {
            name: name.into(),
            capped: vec![false; n],
            pullback: values.clone(),
            pullback_capped: vec![false; n],
            values,
            reference,
            floor: 0.0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// `δ_n` for `n ≥ 0`.
    pub fn delta(&self, n: usize) -> f64 {
        if n == 0 {
            self.reference
        } else {
            self.values[n - 1]
        }
    }

    /// Per-step exponent `a_n = ln(δ_{n−1}/δ_n)`.
    pub fn exponent(&self, n: usize) -> f64 {
        libm::log(self.delta(n - 1) / self.delta(n))
    }

    /// `(1/n)·ln(δ_0/δ_n)`: the average of `a_1..a_n`.
    pub fn cumulative_rate(&self, n: usize) -> f64 {
        libm::log(self.reference / self.delta(n)) / n as f64
    }

    /// Length of the prefix usable for rate estimates: it stops before the
    /// first capped value and includes the first value that reaches the floor.
    pub fn usable_len(&self) -> usize {
        let mut u = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if self.capped[i] {
                break;
            }
            u = i + 1;
            if v <= self.floor {
                break;
            }
        }
        u
    }
}

/// Precomputed state for many Lebesgue numbers on one space.
pub struct DeltaContext<'a> {
    space: &'a FiniteMetricSpace,
    order: NeighborOrder,
}

impl<'a> DeltaContext<'a> {
    pub fn new(space: &'a FiniteMetricSpace) -> Self {
        DeltaContext { space, order: NeighborOrder::new(space) }
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        self.space
    }

    pub(crate) fn order(&self) -> &NeighborOrder {
        &self.order
    }

    /// `δ(g⁻¹U)`, or `δ(U)` when `g` is `None`.
    pub fn lebesgue(&self, cover: &Cover, g: Option<&DynMap>) -> cover::LebesgueReport {
        LebesgueEngine::new(&self.order, self.space).report(&CoverIndex::new(cover), g.map(DynMap::image), false)
    }

    pub fn delta_sequence(
        &self,
        map: &DynMap,
        cover: &Cover,
        horizon: usize,
        mode: DeltaMode,
        budget: &Budget,
    ) -> Result<RateSequence> {
        let space = self.space;
        map.check_space(space)?;
        if horizon == 0 {
            return Err(Error::arg("horizon must be at least 1"));
        }
        if cover.point_count() != space.len() {
            return Err(Error::SpaceMismatch { left: cover.point_count(), right: space.len() });
        }
        if let Some(v) = cover::validate_cover(space, cover).first() {
            return Err(Error::InvalidCover(alloc::format!("{v:?}")));
        }
        let engine = LebesgueEngine::new(&self.order, space);
        let index = CoverIndex::new(cover);
        let mut pullback = Vec::with_capacity(horizon);
        let mut pullback_capped = Vec::with_capacity(horizon);
        let mut power = DynMap::identity(space.len());
        for k in 0..horizon {
            if k > 0 {
                power = map.after(&power);
            }
            let r = engine.report(&index, Some(power.image()), false);
            pullback.push(r.delta);
            pullback_capped.push(r.capped);
        }
        let mut values = Vec::with_capacity(horizon);
        let mut capped = Vec::with_capacity(horizon);
        match mode {
            DeltaMode::RunningMin => {
                let mut cur = Extended::Infinite;
                for k in 0..horizon {
                    let v = if pullback_capped[k] { Extended::Infinite } else { Extended::Finite(pullback[k]) };
                    cur = cur.min(v);
                    values.push(cur.capped(space.diameter()));
                    capped.push(cur.is_infinite());
                }
            }
            DeltaMode::Direct => {
                for n in 1..=horizon {
                    let c = iterated_cover(space, map, cover, n, budget)?;
                    let r = engine.report(&CoverIndex::new(&c), None, false);
                    values.push(r.delta);
                    capped.push(r.capped);
                }
            }
        }
        Ok(RateSequence {
            name: String::new(),
            values,
            capped,
            pullback,
            pullback_capped,
            reference: space.diameter(),
            floor: space.separation(),
        })
    }
}

/// `δ_1..δ_N` of a cover under a map.
pub fn delta_sequence(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    horizon: usize,
    mode: DeltaMode,
) -> Result<RateSequence> {
    DeltaContext::new(space).delta_sequence(map, cover, horizon, mode, &Budget::default())
}

/// `d_fⁿ(x, y) = max_{k<n} d(fᵏx, fᵏy)`.
pub fn bowen_dist(space: &FiniteMetricSpace, map: &DynMap, n: usize, x: usize, y: usize) -> Result<f64> {
    map.check_space(space)?;
    space.check_point(x)?;
    space.check_point(y)?;
    if n == 0 {
        return Err(Error::arg("Bowen distances start at n = 1"));
    }
    let (mut a, mut b) = (x, y);
    let mut d: f64 = 0.0;
    for _ in 0..n {
        d = d.max(space.dist(a, b));
        a = map.apply(a);
        b = map.apply(b);
    }
    Ok(d)
}

/// All pairwise Bowen distances, advanced one iterate at a time.
pub(crate) struct BowenTable<'a> {
    space: &'a FiniteMetricSpace,
    map: &'a DynMap,
    /// Upper triangle, row-major.
    dist: Vec<f64>,
    power: DynMap,
    n: usize,
}

impl<'a> BowenTable<'a> {
    pub(crate) fn new(space: &'a FiniteMetricSpace, map: &'a DynMap) -> Self {
        let m = space.len();
        BowenTable { space, map, dist: vec![0.0; m * (m - 1) / 2], power: DynMap::identity(m), n: 0 }
    }

    /// Moves from `d_fⁿ` to `d_f^{n+1}`.
    pub(crate) fn advance(&mut self) {
        let m = self.space.len();
        let g = self.power.image();
        let mut i = 0;
        for x in 0..m {
            for y in x + 1..m {
                let d = self.space.dist(g[x], g[y]);
                if d > self.dist[i] {
                    self.dist[i] = d;
                }
                i += 1;
            }
        }
        self.power = self.map.after(&self.power);
        self.n += 1;
    }

    /// Graph joining points that are not `ε`-separated.
    pub(crate) fn conflict_graph(&self, eps: f64) -> Vec<BitSet> {
        let m = self.space.len();
        let mut adj = vec![BitSet::new(m); m];
        let mut i = 0;
        for x in 0..m {
            for y in x + 1..m {
                if self.dist[i] <= eps {
                    adj[x].insert(y);
                    adj[y].insert(x);
                }
                i += 1;
            }
        }
        adj
    }
}

/// Size of a largest `(n, ε)`-separated set.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatedSet {
    pub size: usize,
    pub witness: PointSet,
    pub exact: bool,
}

pub(crate) fn separated_from_graph(adj: &[BitSet], mode: SolveMode, budget: &Budget) -> Result<SeparatedSet> {
    let exact = mode.use_exact(adj.len() <= budget.exact_independent_points);
    let pick = if exact {
        solver::exact_independent_set(adj, budget.nodes)
            .map_err(|_| Error::NodeBudget { what: "separated set", budget: budget.nodes })?
    } else {
        solver::greedy_independent_set(adj)
    };
    Ok(SeparatedSet { size: pick.len(), witness: PointSet::from_sorted(pick), exact })
}

/// Largest set whose points are pairwise more than `ε` apart in `d_fⁿ`.
pub fn max_separated(
    space: &FiniteMetricSpace,
    map: &DynMap,
    n: usize,
    eps: f64,
    mode: SolveMode,
    budget: &Budget,
) -> Result<SeparatedSet> {
    map.check_space(space)?;
    if n == 0 || !(eps > 0.0) {
        return Err(Error::arg("separated sets need n ≥ 1 and ε > 0"));
    }
    let mut table = BowenTable::new(space, map);
    for _ in 0..n {
        table.advance();
    }
    separated_from_graph(&table.conflict_graph(eps), mode, budget)
}

/// Smallest Lipschitz constant `L(f) = max_{x≠y} d(fx, fy)/d(x, y)`.
pub fn lipschitz_constant(space: &FiniteMetricSpace, map: &DynMap) -> Result<f64> {
    map.check_space(space)?;
    if space.len() < 2 {
        return Err(Error::arg("Lipschitz constants need at least two points"));
    }
    let n = space.len();
    let mut best: f64 = 0.0;
    for x in 0..n {
        let fx = map.apply(x);
        for y in x + 1..n {
            let r = space.dist(fx, map.apply(y)) / space.dist(x, y);
            if r > best {
                best = r;
            }
        }
    }
    Ok(best)
}

/// `(1/n)·ln L(fⁿ)` for `n = 1..N` and their minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateRate {
    /// `l ≈ min_n (1/n)·ln L(fⁿ)`; `−∞` when some iterate is constant.
    pub estimate: f64,
    /// `(n, L(fⁿ), (1/n)·ln L(fⁿ))`.
    pub per_n: Vec<(usize, f64, f64)>,
    /// Whether `ln L(f^{m+n}) ≤ ln L(f^m) + ln L(fⁿ)` held on the table.
    pub subadditive: bool,
}

pub fn iterate_rate(space: &FiniteMetricSpace, map: &DynMap, horizon: usize) -> Result<IterateRate> {
    map.check_space(space)?;
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    let mut per_n = Vec::with_capacity(horizon);
    let mut power = DynMap::identity(space.len());
    for n in 1..=horizon {
        power = map.after(&power);
        let l = lipschitz_constant(space, &power)?;
        per_n.push((n, l, libm::log(l) / n as f64));
    }
    let logs: Vec<f64> = per_n.iter().map(|p| libm::log(p.1)).collect();
    let mut subadditive = true;
    for m in 1..=horizon {
        for k in 1..=horizon - m {
            let (a, b, c) = (logs[m + k - 1], logs[m - 1], logs[k - 1]);
            if b + c > f64::NEG_INFINITY && a > b + c + 1e-9 {
                subadditive = false;
            }
        }
    }
    let estimate = per_n.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(IterateRate { estimate, per_n, subadditive })
}

/// Number of consecutive iterates `fᵏ(B)`, `k = 0, 1, …`, that each fit in
/// one member of the cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLength {
    pub length: usize,
    /// Still inside a member after `cap` iterates.
    pub reached_cap: bool,
}

pub fn bowen_block_length(
    space: &FiniteMetricSpace,
    map: &DynMap,
    cover: &Cover,
    block: &PointSet,
    cap: usize,
) -> Result<BlockLength> {
    map.check_space(space)?;
    if cap == 0 {
        return Err(Error::arg("block-length cap must be at least 1"));
    }
    let n = space.len();
    let bits = cover.member_bits();
    let mut cur = block.to_bitset(n);
    for k in 0..cap {
        if !bits.iter().any(|m| cur.is_subset(m)) {
            return Ok(BlockLength { length: k, reached_cap: false });
        }
        cur = BitSet::from_indices(n, cur.iter().map(|x| map.apply(x)));
    }
    Ok(BlockLength { length: cap, reached_cap: true })
}

/// Preimage lists of `g`: `out[y] = {x : g(x) = y}`.
fn preimages(g: &DynMap) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.len()];
    for (x, &y) in g.image().iter().enumerate() {
        out[y].push(x);
    }
    out
}

fn set_gap(space: &FiniteMetricSpace, a: &[usize], b: &[usize]) -> Extended {
    let mut best = Extended::Infinite;
    for &z in a {
        for &w in b {
            best = best.min(Extended::Finite(space.dist(z, w)));
        }
    }
    best
}

/// `D(f⁻ⁿx, f⁻ⁿy)`: the least distance between an `n`-step preimage of `x`
/// and one of `y`; `+∞` if either has none.
pub fn preimage_gap(space: &FiniteMetricSpace, map: &DynMap, n: usize, x: usize, y: usize) -> Result<Extended> {
    map.check_space(space)?;
    space.check_point(x)?;
    space.check_point(y)?;
    let g = map_power(map, n);
    let pre = preimages(&g);
    Ok(set_gap(space, &pre[x], &pre[y]))
}

/// `X_∞ = ⋂ fⁿ(X)`.
pub fn eventual_image(space: &FiniteMetricSpace, map: &DynMap) -> Result<PointSet> {
    map.check_space(space)?;
    let mut cur: BTreeSet<usize> = (0..space.len()).collect();
    loop {
        let next: BTreeSet<usize> = cur.iter().map(|&x| map.apply(x)).collect();
        if next.len() == cur.len() {
            return Ok(PointSet::from_sorted(next.into_iter().collect()));
        }
        cur = next;
    }
}

/// Lower bounds on the Lebesgue rates from preimage gaps on `X_∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreimageBound {
    /// Supremum over pairs of the windowed minimum of `c_n`.
    pub lower: f64,
    /// Supremum over pairs of the windowed maximum of `c_n`.
    pub upper: f64,
    pub best_pair: (usize, usize),
    pub pairs: usize,
    pub window: (usize, usize),
}

/// Over pairs `x ≠ y` in `X_∞`, `c_n = (1/n)·ln(d(x, y)/D(f⁻ⁿx, f⁻ⁿy))` on
/// the tail window `⌊N/2⌋+1..=N`. At most `budget.pairs` pairs are used,
/// taken at an even stride through the pair list.
pub fn lbd_lower_bound(
    space: &FiniteMetricSpace,
    map: &DynMap,
    horizon: usize,
    budget: &Budget,
) -> Result<PreimageBound> {
    map.check_space(space)?;
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    let core = eventual_image(space, map)?;
    if core.len() < 2 {
        return Err(Error::SinglePointEventualImage);
    }
    let ids = core.as_slice();
    let mut pairs = Vec::new();
    for (i, &x) in ids.iter().enumerate() {
        for &y in &ids[i + 1..] {
            pairs.push((x, y));
        }
    }
    if pairs.len() > budget.pairs.max(1) {
        let stride = pairs.len().div_ceil(budget.pairs.max(1));
        pairs = pairs.into_iter().step_by(stride).collect();
    }
    let start = horizon / 2 + 1;
    let mut lows = vec![f64::INFINITY; pairs.len()];
    let mut highs = vec![f64::NEG_INFINITY; pairs.len()];
    let mut power = DynMap::identity(space.len());
    for n in 1..=horizon {
        power = map.after(&power);
        if n < start {
            continue;
        }
        let pre = preimages(&power);
        for (i, &(x, y)) in pairs.iter().enumerate() {
            // Points of X_∞ always have preimages in X_∞.
            let gap = set_gap(space, &pre[x], &pre[y]).capped(space.dist(x, y));
            let c = libm::log(space.dist(x, y) / gap) / n as f64;
            lows[i] = lows[i].min(c);
            highs[i] = highs[i].max(c);
        }
    }
    let mut best = 0;
    for i in 1..pairs.len() {
        if lows[i] > lows[best] {
            best = i;
        }
    }
    let upper = highs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PreimageBound { lower: lows[best], upper, best_pair: pairs[best], pairs: pairs.len(), window: (start, horizon) })
}
