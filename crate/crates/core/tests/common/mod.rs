//! Random finite systems for property tests.
#![allow(dead_code)]

use lebdyn_core::{Cover, DynMap, FiniteMetricSpace, PointSet};
use proptest::prelude::*;

/// A small system: points in the plane, a total self-map and a cover.
#[derive(Clone, Debug)]
pub struct Instance {
    pub space: FiniteMetricSpace,
    pub map: DynMap,
    pub cover: Cover,
    pub other: Cover,
}

/// `members` subsets of `0..n` that together cover it: every point gets a
/// home member, and each member may pick up extra points.
pub fn cover_strategy(n: usize, max_members: usize) -> impl Strategy<Value = Cover> {
    (1..=max_members).prop_flat_map(move |k| {
        (proptest::collection::vec(0..k, n), proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), k))
            .prop_map(move |(home, extra)| {
                let members: Vec<PointSet> = (0..k)
                    .map(|j| {
                        PointSet::new((0..n).filter(|&x| home[x] == j || (extra[j][x] && x % 3 == j % 3)).collect())
                    })
                    .filter(|m| !m.is_empty())
                    .collect();
                Cover::new(n, members).unwrap()
            })
    })
}

pub fn points_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (min..=max).prop_flat_map(|n| {
        proptest::collection::btree_set((0u32..1000, 0u32..1000), n)
            .prop_map(|s| s.into_iter().map(|(x, y)| vec![x as f64 / 1000.0, y as f64 / 1000.0]).collect())
    })
}

pub fn instance(min: usize, max: usize, max_members: usize) -> impl Strategy<Value = Instance> {
    points_strategy(min, max).prop_flat_map(move |pts| {
        let n = pts.len();
        (Just(pts), proptest::collection::vec(0..n, n), cover_strategy(n, max_members), cover_strategy(n, max_members))
            .prop_map(|(pts, image, cover, other)| Instance {
                space: FiniteMetricSpace::euclidean(&pts).unwrap(),
                map: DynMap::new(image).unwrap(),
                cover,
                other,
            })
    })
}

/// Relative comparison with a floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
