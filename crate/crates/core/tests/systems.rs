//! Structural checks of the generated example systems.

use lebdyn_core::dynamics::{delta_sequence, eventual_image, lipschitz_constant, map_power, preimage_gap, DeltaMode};
use lebdyn_core::metric::validate_space;
use lebdyn_core::systems::{generate_system, osc_exponents, Family, SystemSpec};
use lebdyn_core::{Extended, Label};

fn coords(b: &lebdyn_core::SystemBundle) -> Vec<f64> {
    b.space
        .labels()
        .iter()
        .map(|l| match l {
            Label::Coords(c) => c[0],
            other => panic!("unexpected label {other:?}"),
        })
        .collect()
}

#[test]
fn generated_maps_are_total_and_spaces_valid() {
    for f in Family::ALL {
        // Word metrics are matrices and get a cubic triangle check.
        let spec = match f {
            Family::Cylinder => continue,
            Family::Shift => SystemSpec::new(f).int("len", 8),
            _ => SystemSpec::new(f),
        };
        let b = generate_system(&spec).unwrap();
        assert!(b.map.image().iter().all(|&y| y < b.space.len()), "{f}");
        assert!(validate_space(&b.space).is_empty(), "{f}");
    }
    let small = generate_system(&SystemSpec::new(Family::Cylinder).int("m", 6).int("q", 6)).unwrap();
    assert!(validate_space(&small.space).is_empty());
}

#[test]
fn sqrt_chain_lands_on_one_half() {
    let b = generate_system(&SystemSpec::new(Family::Sqrt)).unwrap();
    let xs = coords(&b);
    let half = xs.iter().position(|&x| x == 0.5).unwrap();
    for n in 1..=5u32 {
        let start = xs.iter().position(|&x| x == 2f64.powf(-(2f64.powi(n as i32)))).unwrap();
        assert_eq!(map_power(&b.map, n as usize).apply(start), half, "n = {n}");
    }
}

#[test]
fn ladder_lipschitz_constants_double() {
    let b = generate_system(&SystemSpec::new(Family::LadderEx3)).unwrap();
    for n in 1..=16 {
        let l = lipschitz_constant(&b.space, &map_power(&b.map, n)).unwrap();
        assert!(l >= 2f64.powi(n as i32), "n = {n}: {l}");
    }
    for c in &b.covers {
        let seq = delta_sequence(&b.space, &b.map, &c.cover, 16, DeltaMode::RunningMin).unwrap();
        let last = seq.pullback[15];
        assert!(seq.pullback[8..].iter().all(|&v| v == last), "{}: {:?}", c.id, seq.pullback);
    }
}

#[test]
fn osc_increments_follow_the_blocks() {
    let (a, b) = (1.0, 0.5);
    let s = osc_exponents(a, b, 700);
    for n in 16..=255 {
        assert_eq!(s[n - 1] - s[n - 2], a, "n = {n}");
    }
    for n in 256..=700 {
        assert_eq!(s[n - 1] - s[n - 2], b, "n = {n}");
    }
}

#[test]
fn osc_points_follow_the_shift() {
    let b = generate_system(&SystemSpec::new(Family::Osc)).unwrap();
    let xs = coords(&b);
    let s = osc_exponents(1.0, 0.5, 700);
    assert_eq!(xs.len(), 701);
    for n in 2..=700 {
        assert!((xs[n] / (-s[n - 1]).exp() - 1.0).abs() < 1e-14);
        assert_eq!(b.map.apply(n), n - 1);
    }
    assert_eq!((b.map.apply(0), b.map.apply(1)), (0, 1));
}

#[test]
fn cylinder_column_is_the_eventual_image() {
    let b = generate_system(&SystemSpec::new(Family::Cylinder)).unwrap();
    let core = eventual_image(&b.space, &b.map).unwrap();
    assert_eq!(core.as_slice(), (0..16).collect::<Vec<_>>().as_slice());
    for n in 0..=8 {
        for x in 0..16 {
            for y in x + 1..16 {
                match preimage_gap(&b.space, &b.map, n, x, y).unwrap() {
                    Extended::Finite(g) => assert!(g >= b.space.dist(x, y)),
                    Extended::Infinite => {}
                }
            }
        }
    }
}

#[test]
fn xab_and_xa_stay_within_size_limits() {
    for f in [Family::Xab, Family::Xa] {
        let b = generate_system(&SystemSpec::new(f)).unwrap();
        assert!(b.space.len() <= 2000, "{f}: {}", b.space.len());
        assert!(b.space.separation() >= 1e-300);
    }
}

#[test]
fn shift_map_drops_the_first_symbol() {
    let b = generate_system(&SystemSpec::new(Family::Shift).int("k", 3).int("len", 4)).unwrap();
    let words: Vec<String> = b
        .space
        .labels()
        .iter()
        .map(|l| match l {
            Label::Text(t) => t.clone(),
            other => panic!("{other:?}"),
        })
        .collect();
    for (i, w) in words.iter().enumerate() {
        let expected = format!("{}0", &w[1..]);
        assert_eq!(words[b.map.apply(i)], expected);
    }
}
