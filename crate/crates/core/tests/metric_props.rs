mod common;

use common::{instance, points_strategy};
use lebdyn_core::dynamics::{bowen_dist, preimage_gap};
use lebdyn_core::metric::{ball, dist_to_complement, scale_metric};
use lebdyn_core::{Extended, FiniteMetricSpace, PointSet};
use proptest::prelude::*;

proptest! {
    #[test]
    fn ball_to_complement_stays_inside(pts in points_strategy(2, 40), mask in proptest::collection::vec(any::<bool>(), 40)) {
        let space = FiniteMetricSpace::euclidean(&pts).unwrap();
        let n = space.len();
        let s = PointSet::new((0..n).filter(|&i| mask[i]).collect());
        prop_assume!(!s.is_empty() && s.len() < n);
        for x in s.iter() {
            let r = dist_to_complement(&space, &s, x).unwrap();
            let r = r.finite().unwrap();
            prop_assert!(ball(&space, x, r).unwrap().is_subset(&s));
        }
    }

    #[test]
    fn scaling_scales_distances_to_complements(pts in points_strategy(2, 30), c in prop::sample::select(vec![0.1, 3.0, 10.0])) {
        let space = FiniteMetricSpace::euclidean(&pts).unwrap();
        let scaled = scale_metric(&space, c).unwrap();
        let s = PointSet::new((0..space.len()).step_by(2).collect());
        for x in s.iter() {
            match (dist_to_complement(&space, &s, x).unwrap(), dist_to_complement(&scaled, &s, x).unwrap()) {
                (Extended::Finite(a), Extended::Finite(b)) => prop_assert!((b - a * c).abs() <= 1e-12 * b),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn bowen_distance_grows_and_gaps_start_at_the_metric(inst in instance(2, 30, 4), x in 0usize..30, y in 0usize..30) {
        let n = inst.space.len();
        let (x, y) = (x % n, y % n);
        let mut prev = 0.0;
        for k in 1..=5 {
            let d = bowen_dist(&inst.space, &inst.map, k, x, y).unwrap();
            prop_assert!(d >= prev);
            prev = d;
        }
        prop_assert_eq!(preimage_gap(&inst.space, &inst.map, 0, x, y).unwrap(), Extended::Finite(inst.space.dist(x, y)));
    }
}
