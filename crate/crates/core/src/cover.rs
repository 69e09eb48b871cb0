//! Covers, Lebesgue numbers, joins, refinement and minimum subcovers.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::metric::{dist_to_complement, Extended, FiniteMetricSpace, NeighborOrder, PointSet};
use crate::solver::{Budget, SetCover, SolveMode};

/// A finite family of point sets over a space of `point_count` points.
/// Member order gives stable ids for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cover {
    point_count: usize,
    members: Vec<PointSet>,
}

impl Cover {
    /// Builds a cover without checking that it covers; see [`validate_cover`].
    /// Member ids outside the space are rejected.
    pub fn new(point_count: usize, members: Vec<PointSet>) -> Result<Self> {
        for m in &members {
            if let Some(&bad) = m.as_slice().last().filter(|&&id| id >= point_count) {
                return Err(Error::InvalidPoint { id: bad, len: point_count });
            }
        }
        Ok(Cover { point_count, members })
    }

    pub fn from_lists(point_count: usize, lists: &[&[usize]]) -> Result<Self> {
        Self::new(point_count, lists.iter().map(|l| PointSet::new(l.to_vec())).collect())
    }

    /// The trivial cover `{X}`.
    pub fn whole(point_count: usize) -> Self {
        Cover { point_count, members: vec![PointSet::from_sorted((0..point_count).collect())] }
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn members(&self) -> &[PointSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True iff some member is the whole space.
    pub fn has_whole_space_member(&self) -> bool {
        self.members.iter().any(|m| m.len() == self.point_count)
    }

    /// Same members with duplicates removed, first occurrence kept.
    pub fn deduplicated(&self) -> Cover {
        let mut seen = BTreeSet::new();
        let members = self.members.iter().filter(|m| seen.insert((*m).clone())).cloned().collect();
        Cover { point_count: self.point_count, members }
    }

    /// Members that are not strictly contained in another member, with
    /// duplicates removed. Subcover sizes and Lebesgue numbers are unchanged.
    pub fn maximal_members(&self) -> Cover {
        let dedup = self.deduplicated();
        let members = &dedup.members;
        let bits: Vec<BitSet> = members.iter().map(|m| m.to_bitset(self.point_count)).collect();
        // A member can only lie inside members that contain its rarest point.
        let mut containing: Vec<Vec<u32>> = vec![Vec::new(); self.point_count];
        for (j, m) in members.iter().enumerate() {
            for x in m.iter() {
                containing[x].push(j as u32);
            }
        }
        let any_nonempty = members.iter().any(|m| !m.is_empty());
        let keep: Vec<PointSet> = (0..members.len())
            .filter(|&i| {
                let Some(rarest) = members[i].iter().min_by_key(|&x| containing[x].len()) else {
                    return !any_nonempty;
                };
                !containing[rarest].iter().any(|&j| {
                    let j = j as usize;
                    members[j].len() > members[i].len() && bits[i].is_subset(&bits[j])
                })
            })
            .map(|i| members[i].clone())
            .collect();
        Cover { point_count: self.point_count, members: keep }
    }

    pub(crate) fn member_bits(&self) -> Vec<BitSet> {
        self.members.iter().map(|m| m.to_bitset(self.point_count)).collect()
    }

    pub(crate) fn from_bitsets(point_count: usize, sets: impl IntoIterator<Item = BitSet>) -> Self {
        Cover { point_count, members: sets.into_iter().map(|b| PointSet::from_bitset(&b)).collect() }
    }

    fn check_space(&self, space: &FiniteMetricSpace) -> Result<()> {
        if self.point_count != space.len() {
            return Err(Error::SpaceMismatch { left: self.point_count, right: space.len() });
        }
        Ok(())
    }

    pub(crate) fn require_valid(&self, space: &FiniteMetricSpace) -> Result<()> {
        self.check_space(space)?;
        match validate_cover(space, self).first() {
            None => Ok(()),
            Some(CoverViolation::EmptyMember { index }) => {
                Err(Error::InvalidCover(alloc::format!("member {index} is empty")))
            }
            Some(CoverViolation::Uncovered { points }) => Err(Error::InvalidCover(alloc::format!(
                "{} point(s) are not covered, first {}",
                points.len(),
                points.as_slice()[0]
            ))),
        }
    }
}

/// A defect that keeps a family of sets from being a cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoverViolation {
    Uncovered { points: PointSet },
    EmptyMember { index: usize },
}

pub fn validate_cover(space: &FiniteMetricSpace, cover: &Cover) -> Vec<CoverViolation> {
    let n = space.len();
    let mut out = Vec::new();
    let mut covered = BitSet::new(n);
    for (index, m) in cover.members.iter().enumerate() {
        if m.is_empty() {
            out.push(CoverViolation::EmptyMember { index });
        }
        for x in m.iter().filter(|&x| x < n) {
            covered.insert(x);
        }
    }
    if !covered.is_full() {
        let points = PointSet::from_sorted((0..n).filter(|&x| !covered.contains(x)).collect());
        out.insert(0, CoverViolation::Uncovered { points });
    }
    out
}

/// Lebesgue number of a cover.
#[derive(Clone, Debug, PartialEq)]
pub struct LebesgueReport {
    /// `δ(U)`, or the diameter when some member is the whole space.
    pub delta: f64,
    /// Set when `δ(U)` is infinite and `delta` holds the diameter instead.
    pub capped: bool,
    /// Lowest point id attaining the minimum.
    pub argmin_point: usize,
    /// `δ(U, x)` for every point, when requested.
    pub per_point: Option<Vec<Extended>>,
}

impl LebesgueReport {
    pub fn extended(&self) -> Extended {
        if self.capped {
            Extended::Infinite
        } else {
            Extended::Finite(self.delta)
        }
    }
}

/// `δ(U, x) = max_{U ∋ x} d(x, X∖U)`, straight from the definition.
pub fn lebesgue_at_point(space: &FiniteMetricSpace, cover: &Cover, x: usize) -> Result<Extended> {
    cover.check_space(space)?;
    space.check_point(x)?;
    let mut best: Option<Extended> = None;
    for m in cover.members.iter().filter(|m| m.contains(x)) {
        let d = dist_to_complement(space, m, x)?;
        best = Some(best.map_or(d, |b| b.max(d)));
    }
    best.ok_or_else(|| Error::InvalidCover(alloc::format!("point {x} is not covered")))
}

/// `δ(U) = min_x δ(U, x)` with per-point values.
pub fn lebesgue_number(space: &FiniteMetricSpace, cover: &Cover) -> Result<LebesgueReport> {
    cover.require_valid(space)?;
    let order = NeighborOrder::new(space);
    let engine = LebesgueEngine::new(&order, space);
    Ok(engine.report(&CoverIndex::new(cover), None, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scan {
    Hit(usize),
    Exhausted,
    Pruned,
}

/// Member bitsets plus per-point incidence lists for fast membership tests.
pub(crate) struct CoverIndex {
    bits: Vec<BitSet>,
    incidence: Vec<Vec<u32>>,
}

impl CoverIndex {
    pub(crate) fn new(cover: &Cover) -> Self {
        let mut incidence = vec![Vec::new(); cover.point_count];
        for (i, m) in cover.members.iter().enumerate() {
            for x in m.iter() {
                incidence[x].push(i as u32);
            }
        }
        CoverIndex { bits: cover.member_bits(), incidence }
    }
}

/// Computes Lebesgue numbers by scanning each point's neighbours in order of
/// distance while tracking the members that still contain every point seen.
/// The last member to drop out does so at `δ(U, x)`.
///
/// With `labels = g`, the scan tests `g(y)` instead of `y`; this gives the
/// Lebesgue number of the preimage cover `g⁻¹U` without building it.
pub(crate) struct LebesgueEngine<'a> {
    order: &'a NeighborOrder,
    space: &'a FiniteMetricSpace,
}

impl<'a> LebesgueEngine<'a> {
    pub(crate) fn new(order: &'a NeighborOrder, space: &'a FiniteMetricSpace) -> Self {
        LebesgueEngine { order, space }
    }

    /// Walks `row` until no candidate contains every point seen. Stops early
    /// with `Pruned` once the distance reaches `bound`.
    fn scan(
        &self,
        index: &CoverIndex,
        labels: Option<&[usize]>,
        x: usize,
        row: &[u32],
        bound: f64,
        cand: &mut Vec<u32>,
    ) -> Scan {
        let label = |y: usize| labels.map_or(y, |g| g[y]);
        for &y in row {
            if bound.is_finite() && self.space.dist(x, y as usize) >= bound {
                return Scan::Pruned;
            }
            let gy = label(y as usize);
            cand.retain(|&c| index.bits[c as usize].contains(gy));
            if cand.is_empty() {
                return Scan::Hit(y as usize);
            }
        }
        Scan::Exhausted
    }

    /// `δ(U, x)`, or `None` when it is at least `bound`.
    fn at_point(
        &self,
        index: &CoverIndex,
        labels: Option<&[usize]>,
        x: usize,
        bound: f64,
        cand: &mut Vec<u32>,
    ) -> Option<Extended> {
        let gx = labels.map_or(x, |g| g[x]);
        cand.clear();
        cand.extend_from_slice(&index.incidence[gx]);
        if cand.is_empty() {
            return Some(Extended::Finite(0.0));
        }
        let row = self.order.row(x);
        let mut hit = self.scan(index, labels, x, row, bound, cand);
        if hit == Scan::Exhausted && row.len() < self.space.len() {
            // The truncated row was scanned in full below `bound`, so it is a
            // prefix of the longer row and the candidates carry over.
            let full = NeighborOrder::row_within(self.space, x, bound);
            hit = self.scan(index, labels, x, &full[row.len()..], bound, cand);
            if hit == Scan::Exhausted && bound.is_finite() {
                hit = Scan::Pruned;
            }
        }
        match hit {
            Scan::Hit(y) => Some(Extended::Finite(self.space.dist(x, y))),
            Scan::Exhausted => Some(Extended::Infinite),
            Scan::Pruned => None,
        }
    }

    pub(crate) fn report(&self, index: &CoverIndex, labels: Option<&[usize]>, keep_per_point: bool) -> LebesgueReport {
        let n = self.space.len();
        // A member holding the whole image contains every preimage ball, so
        // no scan could terminate.
        let image = match labels {
            Some(g) => BitSet::from_indices(n, g.iter().copied()),
            None => BitSet::full(n),
        };
        if index.bits.iter().any(|b| image.is_subset(b)) {
            let per_point = keep_per_point.then(|| vec![Extended::Infinite; n]);
            return LebesgueReport { delta: self.space.diameter(), capped: true, argmin_point: 0, per_point };
        }
        let mut cand = Vec::new();
        let mut per_point = if keep_per_point { Some(Vec::with_capacity(n)) } else { None };
        let mut best = Extended::Infinite;
        let mut argmin = 0;
        for x in 0..n {
            // Only a strictly smaller value can change the minimum, so the
            // scan may stop at the current best unless every value is kept.
            let bound = match (keep_per_point, best) {
                (false, Extended::Finite(b)) => b,
                _ => f64::INFINITY,
            };
            let Some(v) = self.at_point(index, labels, x, bound, &mut cand) else {
                continue;
            };
            if let Some(p) = per_point.as_mut() {
                p.push(v);
            }
            let lower = match (v, best) {
                (Extended::Finite(_), Extended::Infinite) => true,
                (Extended::Finite(a), Extended::Finite(b)) => a < b,
                _ => false,
            };
            if lower {
                best = v;
                argmin = x;
            }
        }
        match best {
            Extended::Finite(d) => LebesgueReport { delta: d, capped: false, argmin_point: argmin, per_point },
            Extended::Infinite => {
                LebesgueReport { delta: self.space.diameter(), capped: true, argmin_point: 0, per_point }
            }
        }
    }
}

/// All pairwise intersections, empty ones dropped, in row-major order.
pub fn join(space: &FiniteMetricSpace, a: &Cover, b: &Cover) -> Result<Cover> {
    a.check_space(space)?;
    b.check_space(space)?;
    let n = space.len();
    let bb = b.member_bits();
    let mut out = Vec::new();
    for m in a.members.iter() {
        let am = m.to_bitset(n);
        for s in &bb {
            let i = am.intersection(s);
            if !i.is_empty() {
                out.push(i);
            }
        }
    }
    Ok(Cover::from_bitsets(n, out))
}

/// True iff every member of `a` lies inside some member of `b`.
pub fn is_finer(a: &Cover, b: &Cover) -> Result<bool> {
    if a.point_count != b.point_count {
        return Err(Error::SpaceMismatch { left: a.point_count, right: b.point_count });
    }
    let bb = b.member_bits();
    Ok(a.members.iter().all(|m| {
        let am = m.to_bitset(a.point_count);
        bb.iter().any(|s| am.is_subset(s))
    }))
}

/// Diameter of a point set.
pub fn set_diam(space: &FiniteMetricSpace, s: &PointSet) -> f64 {
    let ids = s.as_slice();
    let mut d: f64 = 0.0;
    for (i, &x) in ids.iter().enumerate() {
        for &y in &ids[i + 1..] {
            d = d.max(space.dist(x, y));
        }
    }
    d
}

/// Largest member diameter.
pub fn cover_diam(space: &FiniteMetricSpace, cover: &Cover) -> Result<f64> {
    cover.check_space(space)?;
    Ok(cover.members.iter().map(|m| set_diam(space, m)).fold(0.0, f64::max))
}

/// Cover by all open `r`-balls centred at points, duplicates removed.
pub fn mesh_cover(space: &FiniteMetricSpace, r: f64) -> Result<Cover> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::arg("mesh radius must be positive"));
    }
    let n = space.len();
    let mut seen = BTreeSet::new();
    let mut members = Vec::new();
    for x in 0..n {
        let b = PointSet::from_sorted((0..n).filter(|&y| space.dist(x, y) < r).collect());
        if seen.insert(b.clone()) {
            members.push(b);
        }
    }
    Ok(Cover { point_count: n, members })
}

/// A subcover given by member indices into the original cover.
#[derive(Clone, Debug, PartialEq)]
pub struct SubcoverResult {
    pub size: usize,
    pub indices: Vec<usize>,
    pub witness: Cover,
    pub exact: bool,
}

/// `S(U)`: the smallest number of members that still cover.
pub fn min_subcover(
    space: &FiniteMetricSpace,
    cover: &Cover,
    mode: SolveMode,
    budget: &Budget,
) -> Result<SubcoverResult> {
    cover.require_valid(space)?;
    let exact = mode.use_exact(cover.len() <= budget.exact_members);
    let instance = SetCover::new(space.len(), cover.member_bits());
    let indices = if exact {
        instance
            .exact(budget.nodes)
            .map_err(|_| Error::NodeBudget { what: "minimum subcover", budget: budget.nodes })?
    } else {
        instance.greedy()
    };
    let witness =
        Cover { point_count: space.len(), members: indices.iter().map(|&i| cover.members[i].clone()).collect() };
    Ok(SubcoverResult { size: indices.len(), indices, witness, exact })
}

/// `Δ(U)`: the largest Lebesgue number over minimum-cardinality subcovers.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMinimal {
    pub delta: f64,
    pub capped: bool,
    pub subcover_size: usize,
    pub minimal_subcovers: u64,
    pub witness: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

pub fn delta_minimal_subcovers(space: &FiniteMetricSpace, cover: &Cover, budget: &Budget) -> Result<DeltaMinimal> {
    let order = NeighborOrder::new(space);
    delta_minimal_with(space, &order, cover, budget)
}

pub(crate) fn delta_minimal_with(
    space: &FiniteMetricSpace,
    order: &NeighborOrder,
    cover: &Cover,
    budget: &Budget,
) -> Result<DeltaMinimal> {
    let s = min_subcover(space, cover, SolveMode::Exact, budget)?.size;
    let m = cover.len();
    let needed = binomial(m, s);
    if needed > budget.enumeration as u128 {
        return Err(Error::EnumerationBudget { needed, budget: budget.enumeration });
    }
    let n = space.len();
    let bits = cover.member_bits();
    let engine = LebesgueEngine::new(order, space);
    let mut best: Option<(Extended, Vec<usize>)> = None;
    let mut count = 0u64;
    let mut pick = Vec::with_capacity(s);
    let mut visit = |pick: &[usize]| {
        let sub = Cover { point_count: n, members: pick.iter().map(|&i| cover.members[i].clone()).collect() };
        let d = engine.report(&CoverIndex::new(&sub), None, false).extended();
        count += 1;
        let better = match &best {
            None => true,
            Some((b, _)) => match (d, *b) {
                (Extended::Infinite, Extended::Finite(_)) => true,
                (Extended::Finite(x), Extended::Finite(y)) => x > y,
                _ => false,
            },
        };
        if better {
            best = Some((d, pick.to_vec()));
        }
    };
    combinations(&bits, s, 0, &mut BitSet::new(n), &mut pick, &mut visit);
    let (d, witness) = best.ok_or_else(|| Error::InvalidCover("no subcover found".into()))?;
    let (delta, capped) = match d {
        Extended::Finite(v) => (v, false),
        Extended::Infinite => (space.diameter(), true),
    };
    Ok(DeltaMinimal { delta, capped, subcover_size: s, minimal_subcovers: count, witness })
}

/// Calls `visit` on every `k`-subset of member indices (in lexicographic
/// order) whose union is the whole space.
fn combinations(
    bits: &[BitSet],
    k: usize,
    start: usize,
    union: &mut BitSet,
    pick: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if pick.len() == k {
        if union.is_full() {
            visit(pick);
        }
        return;
    }
    let need = k - pick.len();
    for i in start..=bits.len().saturating_sub(need) {
        if i >= bits.len() {
            break;
        }
        let saved = union.clone();
        union.union_with(&bits[i]);
        pick.push(i);
        combinations(bits, k, i + 1, union, pick, visit);
        pick.pop();
        *union = saved;
    }
}
