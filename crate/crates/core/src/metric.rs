//! Finite metric spaces, balls, covering numbers and box dimension.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::solver::{Budget, SetCover, SolveMode};
use crate::stats::least_squares_slope;

/// Spaces up to this many points keep a full distance matrix.
pub const DEFAULT_CACHE_THRESHOLD: usize = 2048;

/// Relative slack (times the diameter) allowed in the triangle inequality.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Structural metrics are metrics by construction; above this size their
/// triangle inequality is not re-checked exhaustively.
pub const TRIANGLE_EXHAUSTIVE_LIMIT: usize = 400;

/// Neighbour lists are truncated to this depth for uncached spaces.
const NEIGHBOR_DEPTH: usize = 512;

/// A nonnegative real or `+∞`, kept as a tag rather than an IEEE infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// The value, with `+∞` replaced by `cap`.
    pub fn capped(self, cap: f64) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::Infinite => cap,
        }
    }

    pub fn min(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.min(b)),
            (Extended::Finite(a), Extended::Infinite) | (Extended::Infinite, Extended::Finite(a)) => {
                Extended::Finite(a)
            }
            _ => Extended::Infinite,
        }
    }

    pub fn max(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.max(b)),
            _ => Extended::Infinite,
        }
    }
}

/// Descriptive per-point label.
#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    None,
    Text(String),
    Coords(Vec<f64>),
}

/// How distances are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// Row-major `n × n` matrix.
    Matrix { n: usize, data: Vec<f64> },
    /// Euclidean distance between coordinate tuples of a common dimension.
    Euclidean { dim: usize, coords: Vec<f64> },
    /// Points of the circle `ℝ/ℤ` given by coordinates in `[0, 1)`.
    Circle { coords: Vec<f64> },
    /// The grid `{k/size}` on the circle of circumference one. Distances are
    /// computed from integer offsets, so they are exactly translation invariant.
    CircleGrid { size: usize },
    /// Max metric on a product; point `i·|right| + j` is the pair `(i, j)`.
    MaxProduct { left: Box<FiniteMetricSpace>, right: Box<FiniteMetricSpace> },
}

impl Metric {
    fn len(&self) -> usize {
        match self {
            Metric::Matrix { n, .. } => *n,
            Metric::Euclidean { dim, coords } => {
                if *dim == 0 {
                    0
                } else {
                    coords.len() / dim
                }
            }
            Metric::Circle { coords } => coords.len(),
            Metric::CircleGrid { size } => *size,
            Metric::MaxProduct { left, right } => left.len() * right.len(),
        }
    }

    fn eval(&self, x: usize, y: usize) -> f64 {
        match self {
            Metric::Matrix { n, data } => data[x * n + y],
            Metric::Euclidean { dim, coords } => {
                let a = &coords[x * dim..(x + 1) * dim];
                let b = &coords[y * dim..(y + 1) * dim];
                let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                if *dim == 1 {
                    (a[0] - b[0]).abs()
                } else {
                    libm::sqrt(s)
                }
            }
            Metric::Circle { coords } => {
                let d = (coords[x] - coords[y]).abs();
                let d = d - libm::floor(d);
                d.min(1.0 - d)
            }
            Metric::CircleGrid { size } => {
                let k = x.abs_diff(y);
                k.min(size - k) as f64 / *size as f64
            }
            Metric::MaxProduct { left, right } => {
                let m = right.len();
                left.dist(x / m, y / m).max(right.dist(x % m, y % m))
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Metric::Matrix { .. } => "matrix",
            Metric::Euclidean { .. } => "euclidean",
            Metric::Circle { .. } => "circle",
            Metric::CircleGrid { .. } => "circle_grid",
            Metric::MaxProduct { .. } => "max_product",
        }
    }
}

/// A finite metric space. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<Label>,
    metric: Metric,
    scale: f64,
    cache: Option<Vec<f64>>,
    cache_threshold: usize,
    diameter: f64,
    separation: f64,
}

impl FiniteMetricSpace {
    pub fn new(metric: Metric) -> Result<Self> {
        Self::with_cache_threshold(metric, DEFAULT_CACHE_THRESHOLD)
    }

    pub fn with_cache_threshold(metric: Metric, cache_threshold: usize) -> Result<Self> {
        let n = metric.len();
        if n == 0 {
            return Err(Error::arg("a metric space needs at least one point"));
        }
        match &metric {
            Metric::Matrix { n, data } if data.len() != n * n => {
                return Err(Error::arg("distance matrix must be n × n"));
            }
            Metric::Euclidean { dim, coords } if *dim == 0 || coords.len() % dim != 0 => {
                return Err(Error::arg("coordinates must split into tuples of the stated dimension"));
            }
            _ => {}
        }
        let mut space = FiniteMetricSpace {
            labels: vec![Label::None; n],
            metric,
            scale: 1.0,
            cache: None,
            cache_threshold,
            diameter: 0.0,
            separation: 0.0,
        };
        space.finish();
        Ok(space)
    }

    /// Points on the real line.
    pub fn line(xs: &[f64]) -> Result<Self> {
        let space = Self::new(Metric::Euclidean { dim: 1, coords: xs.to_vec() })?;
        Ok(space.with_labels(xs.iter().map(|&x| Label::Coords(vec![x])).collect()))
    }

    pub fn euclidean(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::arg("all points must have the same dimension"));
        }
        let coords = points.iter().flatten().copied().collect();
        let space = Self::new(Metric::Euclidean { dim, coords })?;
        Ok(space.with_labels(points.iter().map(|p| Label::Coords(p.clone())).collect()))
    }

    pub fn circle_grid(size: usize) -> Result<Self> {
        Self::new(Metric::CircleGrid { size })
    }

    pub fn from_matrix(n: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Metric::Matrix { n, data })
    }

    pub fn max_product(left: FiniteMetricSpace, right: FiniteMetricSpace) -> Result<Self> {
        let labels: Vec<Label> = (0..left.len() * right.len())
            .map(|p| {
                let (i, j) = (p / right.len(), p % right.len());
                match (&left.labels[i], &right.labels[j]) {
                    (Label::Coords(a), Label::Coords(b)) => Label::Coords(a.iter().chain(b.iter()).copied().collect()),
                    _ => Label::None,
                }
            })
            .collect();
        let threshold = left.cache_threshold;
        let space =
            Self::with_cache_threshold(Metric::MaxProduct { left: Box::new(left), right: Box::new(right) }, threshold)?;
        Ok(space.with_labels(labels))
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Self {
        if labels.len() == self.len() {
            self.labels = labels;
        }
        self
    }

    fn finish(&mut self) {
        let n = self.len();
        if n <= self.cache_threshold {
            let mut m = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    m[x * n + y] = self.raw(x, y);
                }
            }
            self.cache = Some(m);
        }
        if let Metric::MaxProduct { left, right } = &self.metric {
            let seps = [left.separation, right.separation];
            let sep = match (left.len() > 1, right.len() > 1) {
                (true, true) => seps[0].min(seps[1]),
                (true, false) => seps[0],
                (false, true) => seps[1],
                (false, false) => 0.0,
            };
            self.diameter = self.scale * left.diameter.max(right.diameter);
            self.separation = self.scale * sep;
            return;
        }
        let mut diam: f64 = 0.0;
        let mut sep = f64::MAX;
        for x in 0..n {
            for y in x + 1..n {
                let d = self.dist(x, y).max(self.dist(y, x));
                diam = diam.max(d);
                sep = sep.min(self.dist(x, y).min(self.dist(y, x)));
            }
        }
        self.diameter = diam;
        self.separation = if n > 1 { sep } else { 0.0 };
    }

    #[inline]
    fn raw(&self, x: usize, y: usize) -> f64 {
        self.scale * self.metric.eval(x, y)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distance between two valid point ids.
    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        match &self.cache {
            Some(m) => m[x * self.len() + y],
            None => self.raw(x, y),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest distance between two distinct points (zero for one point).
    /// No cover of the space can have a Lebesgue number below this value.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_kind(&self) -> &'static str {
        self.metric.kind()
    }

    /// Multiplier applied on top of the metric by [`scale_metric`].
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidPoint { id: x, len: self.len() })
        }
    }

    pub fn all_points(&self) -> PointSet {
        PointSet((0..self.len()).collect())
    }
}

/// Sorted, duplicate-free list of point ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointSet(Vec<usize>);

impl PointSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        PointSet(ids)
    }

    pub fn empty() -> Self {
        PointSet(Vec::new())
    }

    pub(crate) fn from_sorted(ids: Vec<usize>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        PointSet(ids)
    }

    pub fn from_bitset(bits: &BitSet) -> Self {
        PointSet(bits.iter().collect())
    }

    pub fn to_bitset(&self, n: usize) -> BitSet {
        BitSet::from_indices(n, self.0.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        let mut it = other.0.iter();
        'outer: for x in &self.0 {
            for y in it.by_ref() {
                match y.cmp(x) {
                    Ordering::Less => continue,
                    Ordering::Equal => continue 'outer,
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        PointSet(out)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        PointSet::new(iter.into_iter().collect())
    }
}

/// One failed metric axiom, with witnesses.
#[derive(Clone, Debug, PartialEq)]
pub enum SpaceViolation {
    NonzeroSelfDistance { x: usize, value: f64 },
    NotPositive { x: usize, y: usize, value: f64 },
    NotFinite { x: usize, y: usize },
    Asymmetric { x: usize, y: usize, forward: f64, backward: f64 },
    Triangle { x: usize, y: usize, z: usize, excess: f64 },
}

/// Checks the metric axioms. Violations are data, not failures.
///
/// Matrix metrics get an exhaustive triangle check. Structural metrics are
/// metrics by construction and are checked exhaustively up to
/// [`TRIANGLE_EXHAUSTIVE_LIMIT`] points.
pub fn validate_space(space: &FiniteMetricSpace) -> Vec<SpaceViolation> {
    let n = space.len();
    let mut out = Vec::new();
    for x in 0..n {
        let d = space.dist(x, x);
        if d != 0.0 {
            out.push(SpaceViolation::NonzeroSelfDistance { x, value: d });
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            let (f, b) = (space.dist(x, y), space.dist(y, x));
            if !f.is_finite() || !b.is_finite() {
                out.push(SpaceViolation::NotFinite { x, y });
                continue;
            }
            if f <= 0.0 || b <= 0.0 {
                out.push(SpaceViolation::NotPositive { x, y, value: f.min(b) });
            }
            if f != b {
                out.push(SpaceViolation::Asymmetric { x, y, forward: f, backward: b });
            }
        }
    }
    let exhaustive = matches!(space.metric, Metric::Matrix { .. }) || n <= TRIANGLE_EXHAUSTIVE_LIMIT;
    if exhaustive {
        let slack = TRIANGLE_TOLERANCE * space.diameter();
        for x in 0..n {
            for z in x + 1..n {
                let direct = space.dist(x, z);
                for y in 0..n {
                    if y == x || y == z {
                        continue;
                    }
                    let via = space.dist(x, y) + space.dist(y, z);
                    if direct > via + slack {
                        out.push(SpaceViolation::Triangle { x, y, z, excess: direct - via });
                    }
                }
            }
        }
    }
    out
}

/// Open ball `{y : d(x, y) < radius}`.
pub fn ball(space: &FiniteMetricSpace, center: usize, radius: f64) -> Result<PointSet> {
    space.check_point(center)?;
    Ok(PointSet::from_sorted((0..space.len()).filter(|&y| space.dist(center, y) < radius).collect()))
}

/// `min_{y ∉ s} d(x, y)`, or [`Extended::Infinite`] when `s` is the whole space.
pub fn dist_to_complement(space: &FiniteMetricSpace, s: &PointSet, x: usize) -> Result<Extended> {
    space.check_point(x)?;
    let mut best = Extended::Infinite;
    let mut members = s.iter().peekable();
    for y in 0..space.len() {
        while members.peek().is_some_and(|&m| m < y) {
            members.next();
        }
        if members.peek() == Some(&y) {
            continue;
        }
        best = best.min(Extended::Finite(space.dist(x, y)));
    }
    Ok(best)
}

/// Scaled copy with `d' = c·d`.
pub fn scale_metric(space: &FiniteMetricSpace, c: f64) -> Result<FiniteMetricSpace> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::arg("metric scale factor must be positive and finite"));
    }
    let mut out = space.clone();
    out.scale = space.scale * c;
    if let Some(m) = &mut out.cache {
        for v in m.iter_mut() {
            *v *= c;
        }
    }
    out.diameter = space.diameter * c;
    out.separation = space.separation * c;
    Ok(out)
}

/// Per-point neighbour lists sorted by `(distance, id)`, each starting with
/// the point itself. Uncached spaces keep a truncated list and callers fall
/// back to [`NeighborOrder::full_row`] when they run past its end.
#[derive(Clone, Debug)]
pub struct NeighborOrder {
    depth: usize,
    ids: Vec<u32>,
}

impl NeighborOrder {
    pub fn new(space: &FiniteMetricSpace) -> Self {
        let n = space.len();
        let depth = if space.is_cached() { n } else { n.min(NEIGHBOR_DEPTH) };
        let mut ids = Vec::with_capacity(n * depth);
        let mut row: Vec<(f64, u32)> = Vec::with_capacity(n);
        for x in 0..n {
            row.clear();
            row.extend((0..n).map(|y| (space.dist(x, y), y as u32)));
            let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if depth < n {
                row.select_nth_unstable_by(depth - 1, cmp);
                row.truncate(depth);
            }
            row.sort_unstable_by(cmp);
            ids.extend(row.iter().map(|p| p.1));
        }
        NeighborOrder { depth, ids }
    }

    pub fn is_complete(&self, space: &FiniteMetricSpace) -> bool {
        self.depth == space.len()
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[u32] {
        &self.ids[x * self.depth..(x + 1) * self.depth]
    }

    pub fn full_row(space: &FiniteMetricSpace, x: usize) -> Vec<u32> {
        Self::row_within(space, x, f64::INFINITY)
    }

    /// Neighbours of `x` strictly closer than `bound`, in `(distance, id)` order.
    pub fn row_within(space: &FiniteMetricSpace, x: usize, bound: f64) -> Vec<u32> {
        let mut row: Vec<(f64, u32)> = (0..space.len())
            .filter_map(|y| {
                let d = space.dist(x, y);
                (d < bound).then_some((d, y as u32))
            })
            .collect();
        row.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        row.into_iter().map(|p| p.1).collect()
    }
}

/// Result of a covering-number computation.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringNumber {
    pub count: usize,
    pub centers: Vec<usize>,
    pub exact: bool,
}

pub(crate) fn ball_bitsets(space: &FiniteMetricSpace, gamma: f64) -> Vec<BitSet> {
    let n = space.len();
    (0..n).map(|x| BitSet::from_indices(n, (0..n).filter(|&y| space.dist(x, y) < gamma))).collect()
}

/// Minimal number `N(γ)` of open `γ`-balls centred at points of the space
/// that cover it.
pub fn covering_number(
    space: &FiniteMetricSpace,
    gamma: f64,
    mode: SolveMode,
    budget: &Budget,
) -> Result<CoveringNumber> {
    if !(gamma > 0.0) {
        return Err(Error::arg("covering radius must be positive"));
    }
    let n = space.len();
    if gamma > space.diameter() {
        return Ok(CoveringNumber { count: 1, centers: vec![0], exact: true });
    }
    let sets = ball_bitsets(space, gamma);
    let instance = SetCover::new(n, sets);
    let exact = mode.use_exact(n <= budget.exact_points);
    let centers = if exact {
        instance.exact(budget.nodes).map_err(|_| Error::NodeBudget { what: "covering number", budget: budget.nodes })?
    } else {
        instance.greedy()
    };
    Ok(CoveringNumber { count: centers.len(), centers, exact })
}

/// Box-counting estimate of the upper box dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DimEstimate {
    pub per_scale: Vec<ScaleCount>,
    pub slope: f64,
    pub scale_window: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleCount {
    pub gamma: f64,
    pub count: usize,
    pub exact: bool,
}

/// Least-squares slope of `ln N(γ)` against `−ln γ` over a decreasing grid
/// of at least three scales.
pub fn box_dim_estimate(
    space: &FiniteMetricSpace,
    gammas: &[f64],
    mode: SolveMode,
    budget: &Budget,
) -> Result<DimEstimate> {
    if gammas.len() < 3 {
        return Err(Error::arg("box dimension needs at least three scales"));
    }
    if gammas.iter().any(|&g| !(g > 0.0)) || gammas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("scales must be positive and strictly decreasing"));
    }
    let mut per_scale = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let c = covering_number(space, g, mode, budget)?;
        per_scale.push(ScaleCount { gamma: g, count: c.count, exact: c.exact });
    }
    // A cover by smaller balls is also a cover by the larger ones with the
    // same centres, so counts can be pushed up the grid.
    for i in (0..per_scale.len() - 1).rev() {
        if per_scale[i + 1].count < per_scale[i].count {
            per_scale[i].count = per_scale[i + 1].count;
            per_scale[i].exact = false;
        }
    }
    let xs: Vec<f64> = per_scale.iter().map(|s| -libm::log(s.gamma)).collect();
    let ys: Vec<f64> = per_scale.iter().map(|s| libm::log(s.count as f64)).collect();
    let slope = least_squares_slope(&xs, &ys);
    Ok(DimEstimate { per_scale, slope, scale_window: (gammas[gammas.len() - 1], gammas[0]) })
}

/// Dyadic scale grid `diam/2, diam/4, …` down to a few point separations.
pub fn default_gamma_grid(space: &FiniteMetricSpace) -> Vec<f64> {
    let diam = space.diameter();
    let floor = (4.0 * space.separation()).max(diam * 1e-6);
    let mut out = Vec::new();
    let mut g = diam / 2.0;
    while g >= floor && out.len() < 24 {
        out.push(g);
        g /= 2.0;
    }
    if out.len() < 3 {
        out = vec![diam, diam / 2.0, diam / 4.0];
    }
    out
}
