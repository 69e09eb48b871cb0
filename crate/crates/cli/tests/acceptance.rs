//! End-to-end acceptance checks. Runs without the test harness so that each
//! criterion's PASS/FAIL line is always printed; exits non-zero if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use lebdyn::report::Report;
use lebdyn_core::cover::{cover_diam, join, lebesgue_number, mesh_cover, min_subcover};
use lebdyn_core::dynamics::{
    delta_sequence, eventual_image, iterate_rate, lbd_lower_bound, lipschitz_constant, map_power, max_separated,
    preimage_gap, DeltaContext, DeltaMode,
};
use lebdyn_core::metric::{covering_number, scale_metric};
use lebdyn_core::rates::{
    hl_estimates_for, measure, prefix_max_rate_check, rate_bounds, verify_inequalities, Status, VerifyConfig,
};
use lebdyn_core::systems::{generate_system, NamedCover};
use lebdyn_core::{
    Budget, Cover, DynMap, Extended, Family, FiniteMetricSpace, PointSet, SolveMode, SystemSpec, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn bundle(spec: SystemSpec) -> lebdyn_core::SystemBundle {
    generate_system(&spec).expect("spec builds")
}

// ---------------------------------------------------------------------------
// Test-side oracles, written from the definitions.

/// `min_x max_{M ∋ x} d(x, X∖M)`; `None` when some point sits in a member
/// equal to the whole space.
fn oracle_lebesgue(space: &FiniteMetricSpace, members: &[Vec<bool>]) -> Option<f64> {
    let n = space.len();
    let mut worst = f64::INFINITY;
    for x in 0..n {
        let mut best = f64::NEG_INFINITY;
        for m in members.iter().filter(|m| m[x]) {
            let gap = (0..n).filter(|&y| !m[y]).map(|y| space.dist(x, y)).fold(f64::INFINITY, f64::min);
            best = best.max(gap);
        }
        worst = worst.min(best);
    }
    worst.is_finite().then_some(worst)
}

fn indicator(cover: &Cover) -> Vec<Vec<bool>> {
    let n = cover.point_count();
    cover
        .members()
        .iter()
        .map(|m| {
            let mut v = vec![false; n];
            for x in m.iter() {
                v[x] = true;
            }
            v
        })
        .collect()
}

/// Members of `U ∨ f⁻¹U ∨ … ∨ f⁻⁽ⁿ⁻¹⁾U`, joining one pullback at a time
/// by pointwise intersection.
fn oracle_iterated(map: &[usize], base: &[Vec<bool>], n: usize) -> Vec<Vec<bool>> {
    let mut power: Vec<usize> = (0..map.len()).collect();
    let mut acc: Vec<Vec<bool>> = base.to_vec();
    for _ in 1..n {
        power = power.iter().map(|&x| map[x]).collect();
        let pulled: Vec<Vec<bool>> = base.iter().map(|m| power.iter().map(|&y| m[y]).collect()).collect();
        let mut next = HashSet::new();
        for a in &acc {
            for b in &pulled {
                let m: Vec<bool> = a.iter().zip(b).map(|(&x, &y)| x && y).collect();
                if m.iter().any(|&v| v) {
                    next.insert(m);
                }
            }
        }
        acc = next.into_iter().collect();
    }
    acc
}

fn oracle_lipschitz(space: &FiniteMetricSpace, map: &[usize]) -> f64 {
    let n = space.len();
    let mut best: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                best = best.max(space.dist(map[x], map[y]) / space.dist(x, y));
            }
        }
    }
    best
}

/// All index sets of size `k` whose members cover the space.
fn oracle_min_subcovers(cover: &Cover, k: usize) -> Vec<Vec<usize>> {
    let m = cover.len();
    let n = cover.point_count();
    (0u32..1 << m)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..m).filter(|&i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|idx| {
            let mut seen = vec![false; n];
            for &i in idx {
                for x in cover.members()[i].iter() {
                    seen[x] = true;
                }
            }
            seen.iter().all(|&s| s)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random instances.

struct Instance {
    space: FiniteMetricSpace,
    map: DynMap,
    cover: Cover,
    other: Cover,
}

fn random_cover(rng: &mut ChaCha8Rng, n: usize, max_members: usize) -> Cover {
    let k = rng.gen_range(1..=max_members);
    let home: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let extra = rng.gen_range(0.0..0.5);
    let members: Vec<PointSet> = (0..k)
        .map(|j| PointSet::new((0..n).filter(|&x| home[x] == j || rng.gen_bool(extra)).collect()))
        .filter(|m| !m.is_empty())
        .collect();
    Cover::new(n, members).expect("covers every point")
}

fn random_instance(rng: &mut ChaCha8Rng, max_points: usize, max_members: usize) -> Instance {
    let n = rng.gen_range(2..=max_points);
    let mut seen = HashSet::new();
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let p = (rng.gen_range(0u32..1000), rng.gen_range(0u32..1000));
        if seen.insert(p) {
            pts.push(vec![p.0 as f64 / 1000.0, p.1 as f64 / 1000.0]);
        }
    }
    let space = FiniteMetricSpace::euclidean(&pts).unwrap();
    let map = DynMap::new((0..n).map(|_| rng.gen_range(0..n)).collect()).unwrap();
    let cover = random_cover(rng, n, max_members);
    let other = random_cover(rng, n, max_members);
    Instance { space, map, cover, other }
}

fn same(a: Option<f64>, b: Extended) -> bool {
    match (a, b) {
        (None, Extended::Infinite) => true,
        (Some(x), Extended::Finite(y)) => rel_close(x, y, 1e-12),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Criteria.

const RANDOM_INSTANCES: usize = 120;

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1eb);
    let budget = Budget::default();
    let mut checks = 0usize;
    for case in 0..RANDOM_INSTANCES {
        let Instance { space, map, cover, other } = random_instance(&mut rng, 40, 8);
        let img = map.image().to_vec();
        let ctx = |what: &str| format!("instance {case} ({} points): {what}", space.len());

        // Join formula.
        let j = join(&space, &cover, &other).unwrap();
        let expect = match (oracle_lebesgue(&space, &indicator(&cover)), oracle_lebesgue(&space, &indicator(&other))) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        ensure(same(expect, lebesgue_number(&space, &j).unwrap().extended()), || ctx("join"))?;
        checks += 1;

        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let run = delta_sequence(&space, &map, &cover, m * n, DeltaMode::RunningMin).unwrap();
        let direct = delta_sequence(&space, &map, &cover, m * n, DeltaMode::Direct).unwrap();

        // Running minimum against the iterated cover built by brute force.
        let base = indicator(&cover);
        for k in 1..=m * n {
            let oracle = oracle_lebesgue(&space, &oracle_iterated(&img, &base, k));
            let lib = if run.capped[k - 1] { Extended::Infinite } else { Extended::Finite(run.values[k - 1]) };
            ensure(same(oracle, lib), || ctx(&format!("running min at n={k}")))?;
            ensure(run.values[k - 1] == direct.values[k - 1] && run.capped[k - 1] == direct.capped[k - 1], || {
                ctx(&format!("direct at n={k}"))
            })?;
            checks += 2;
        }

        // Iterating the iterated cover; iterating the plain cover.
        let g = map_power(&map, n);
        let un = lebdyn_core::dynamics::iterated_cover(&space, &map, &cover, n, &budget).unwrap();
        let lhs = delta_sequence(&space, &g, &un, m, DeltaMode::RunningMin).unwrap();
        ensure(lhs.values[m - 1] == run.values[m * n - 1] && lhs.capped[m - 1] == run.capped[m * n - 1], || {
            ctx(&format!("delta_m(f^n, U_f^n) vs delta_mn with m={m}, n={n}"))
        })?;
        let plain = delta_sequence(&space, &g, &cover, m, DeltaMode::RunningMin).unwrap();
        ensure(plain.values[m - 1] >= run.values[m * n - 1], || ctx("delta_m(f^n, U) >= delta_mn"))?;
        checks += 2;

        // Monotone in n.
        ensure(run.values.windows(2).all(|w| w[1] <= w[0]), || ctx("monotonicity"))?;
        checks += 1;

        // Finite Lipschitz bound, with L from the definition.
        if !run.capped[0] && space.len() >= 2 {
            let l = oracle_lipschitz(&space, &img).max(1.0);
            for k in 1..=m * n {
                if run.capped[k - 1] {
                    continue;
                }
                let bound = run.values[0] * l.powi(-(k as i32 - 1));
                ensure(run.values[k - 1] >= bound * (1.0 - 1e-12), || ctx(&format!("finite bound at n={k}")))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{RANDOM_INSTANCES} instances, {checks} comparisons, 0 violations"))
}

fn counting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0);
    let budget = Budget::default();
    let mut checks = 0usize;
    for case in 0..RANDOM_INSTANCES {
        let inst = random_instance(&mut rng, 25, 8);
        let space = &inst.space;
        let ctx = |what: &str| format!("instance {case} ({} points): {what}", space.len());

        let s = min_subcover(space, &inst.cover, SolveMode::Exact, &budget).unwrap();
        ensure(s.exact, || ctx("subcover solver not exact"))?;
        ensure(oracle_min_subcovers(&inst.cover, s.size.saturating_sub(1)).is_empty() || s.size == 0, || {
            ctx("a smaller subcover exists")
        })?;
        let subs = oracle_min_subcovers(&inst.cover, s.size);
        ensure(!subs.is_empty(), || ctx("no subcover of the reported size"))?;
        for idx in subs {
            let w = Cover::new(space.len(), idx.iter().map(|&i| inst.cover.members()[i].clone()).collect()).unwrap();
            let d = lebesgue_number(space, &w).unwrap();
            if d.capped {
                continue;
            }
            let cn = covering_number(space, d.delta, SolveMode::Exact, &budget).unwrap();
            ensure(cn.exact && cn.count >= s.size, || ctx(&format!("N(delta(W)) = {} < S(U) = {}", cn.count, s.size)))?;
            checks += 1;
        }

        let r = rng.gen_range(0.05..0.4);
        let u = mesh_cover(space, r).unwrap();
        let eps = cover_diam(space, &u).unwrap() * (1.0 + 1e-9) + 1e-12;
        for n in 1..=4 {
            let seq = delta_sequence(space, &inst.map, &u, n, DeltaMode::RunningMin).unwrap();
            if seq.capped[n - 1] {
                continue;
            }
            let cn = covering_number(space, seq.values[n - 1], SolveMode::Exact, &budget).unwrap();
            let sep = max_separated(space, &inst.map, n, eps, SolveMode::Exact, &budget).unwrap();
            ensure(cn.exact && sep.exact, || ctx("solver not exact"))?;
            ensure(cn.count >= sep.size, || ctx(&format!("N(delta_{n}) = {} < s_{n} = {}", cn.count, sep.size)))?;
            checks += 1;
        }
    }
    Ok(format!("{RANDOM_INSTANCES} instances, {checks} comparisons, 0 violations"))
}

fn doubling() -> Outcome {
    let b =
        bundle(SystemSpec::new(Family::Doubling).int("m", 10).radii(&[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]).horizon(8));
    let cfg = VerifyConfig::default();
    let m = measure(&b, &cfg);
    let lo = m.h_l_lower.ok_or("no lower rate")?.value;
    let hi = m.h_l_upper.ok_or("no upper rate")?.value;
    let sep = m.sep.as_ref().ok_or("no separated sets")?;
    let s16 = sep.per_eps.iter().find(|s| s.eps == 1.0 / 16.0).ok_or("no series at 1/16")?.estimate;
    let dimb = m.dimb.ok_or("no box dimension")?.value;
    let report = verify_inequalities(&b, &m, &cfg);
    let row = report.rows.iter().find(|r| r.name == "box_dim_lower_rate/measured").ok_or("missing row")?;
    let detail =
        format!("hl- {lo:.4}, hl+ {hi:.4}, sep(1/16) {s16:.4}, dimb {dimb:.4}, dimb*hl- >= h {}", row.status.name());
    let inside = |v: f64, a: f64, b: f64| (a..=b).contains(&v);
    ensure(inside(lo, 0.59, 0.79) && inside(hi, 0.59, 0.79), || detail.clone())?;
    ensure(inside(s16, 0.57, 0.81), || detail.clone())?;
    ensure(inside(dimb, 0.85, 1.15) && row.status == Status::Pass, || detail.clone())?;
    Ok(detail)
}

fn rotation() -> Outcome {
    let b = bundle(SystemSpec::new(Family::Rotation).int("points", 97).int("step", 13));
    let cfg = VerifyConfig::default();
    let m = measure(&b, &cfg);
    let hl = m.hl.as_ref().ok_or("no Lebesgue rates")?;
    for r in &hl.per_radius {
        let s = &r.sequence;
        ensure(s.values.iter().all(|&v| v == s.values[0]), || format!("{}: delta_n not constant", r.cover_id))?;
        let e = &r.estimate;
        ensure(e.lower_rate == 0.0 && e.upper_rate == 0.0 && e.slope == 0.0, || {
            format!("{}: rates {} {} {}", r.cover_id, e.lower_rate, e.upper_rate, e.slope)
        })?;
    }
    let l = m.l.ok_or("no iterate rate")?.value;
    let h = m.h.ok_or("no entropy")?.value;
    ensure(l == 0.0 && h == 0.0, || format!("l = {l}, h = {h}"))?;
    let report = verify_inequalities(&b, &m, &cfg);
    let bad: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| matches!(r.status, Status::Fail | Status::Inconclusive))
        .map(|r| r.name.as_str())
        .collect();
    ensure(bad.is_empty(), || format!("rows not passing: {bad:?}"))?;
    Ok(format!(
        "{} covers constant, rates 0, {} rows pass, {} skipped",
        hl.per_radius.len(),
        report.count(Status::Pass),
        report.count(Status::Skipped)
    ))
}

fn sqrt_chain() -> Outcome {
    let b = bundle(SystemSpec::new(Family::Sqrt).int("k", 6));
    let mut used = 0;
    let mut detail = String::new();
    for c in &b.covers {
        if cover_diam(&b.space, &c.cover).unwrap() >= 0.1 {
            continue;
        }
        used += 1;
        let seq = delta_sequence(&b.space, &b.map, &c.cover, 6, DeltaMode::RunningMin).unwrap();
        for n in 1..=5 {
            let bound = 2f64.powf(-(2f64.powi(n)));
            let d = seq.delta(n as usize + 1);
            ensure(!seq.capped[n as usize] && d <= bound, || format!("{}: delta_{} = {d} > {bound}", c.id, n + 1))?;
        }
        let a: Vec<f64> = (2..=seq.usable_len()).map(|n| seq.exponent(n)).collect();
        ensure(a.windows(2).all(|w| w[1] > w[0]), || format!("{}: a_n not increasing: {a:?}", c.id))?;
        detail = format!(
            "{}: a_2..a_{} = {:?}",
            c.id,
            seq.usable_len(),
            a.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        );
    }
    ensure(used > 0, || "no cover with diameter below 0.1".into())?;
    Ok(format!("{used} covers; {detail}"))
}

fn ladder() -> Outcome {
    const N: usize = 8;
    let b = bundle(SystemSpec::new(Family::LadderEx3).int("m", 64).horizon(N));
    let l8 = lipschitz_constant(&b.space, &map_power(&b.map, N)).unwrap().ln() / N as f64;
    ensure(l8 >= 0.64, || format!("(1/8) ln L(f^8) = {l8}"))?;
    let mut worst_upper: f64 = 0.0;
    let mut n_star = 0;
    for c in &b.covers {
        let seq = delta_sequence(&b.space, &b.map, &c.cover, N, DeltaMode::RunningMin).unwrap();
        let last = seq.pullback[N - 1];
        let first_const = (0..N).find(|&k| seq.pullback[k..].iter().all(|&v| v == last)).unwrap();
        ensure(first_const < N / 2, || format!("{}: pullback not constant early: {:?}", c.id, seq.pullback))?;
        n_star = n_star.max(first_const);
        let e = rate_bounds(&seq, None).map_err(|e| e.to_string())?;
        worst_upper = worst_upper.max(e.upper_rate);
    }
    ensure(worst_upper <= 0.05, || format!("hl+ = {worst_upper}"))?;
    Ok(format!("(1/8) ln L(f^8) = {l8:.4}, pullbacks constant from n = {n_star}, hl+ <= {worst_upper:.4}"))
}

fn xab() -> Outcome {
    let b = bundle(SystemSpec::new(Family::Xab).real("a", 4.0).real("b", 2.0).int("p", 6));
    let cfg = VerifyConfig::default();
    let ctx = DeltaContext::new(&b.space);
    let hl = hl_estimates_for(&ctx, &b.map, &b.covers, b.horizon(), &cfg.budget, None).map_err(|e| e.to_string())?;
    let it = iterate_rate(&b.space, &b.map, cfg.lipschitz_horizon).unwrap();
    let (ln2, ln4) = (2f64.ln(), 4f64.ln());
    let detail = format!("hl- {:.4}, hl+ {:.4}, l {:.4}", hl.lower, hl.upper, it.estimate);
    let within = |v: f64, t: f64| (v - t).abs() <= 0.2 * t;
    ensure(within(hl.lower, ln2) && within(hl.upper, ln2), || detail.clone())?;
    ensure(within(it.estimate, ln4), || detail.clone())?;
    Ok(detail)
}

fn osc() -> Outcome {
    let b = bundle(SystemSpec::new(Family::Osc).real("a", 1.0).real("b", 0.5).int("n_max", 700));
    let ctx = DeltaContext::new(&b.space);
    let budget = Budget::default();
    let mut parts = Vec::new();
    for c in &b.covers {
        let seq = ctx.delta_sequence(&b.map, &c.cover, 650, DeltaMode::RunningMin, &budget).unwrap();
        let fast = rate_bounds(&seq, Some(Window::new(16, 255))).map_err(|e| e.to_string())?.slope;
        let slow = rate_bounds(&seq, Some(Window::new(300, 650))).map_err(|e| e.to_string())?.slope;
        parts.push(format!("{}: [16,255] {fast:.4}, [300,650] {slow:.4}", c.id));
        ensure((0.90..=1.05).contains(&fast) && (0.45..=0.55).contains(&slow), || parts.join("; "))?;
    }
    Ok(parts.join("; "))
}

fn cylinder() -> Outcome {
    const N: usize = 8;
    let b = bundle(SystemSpec::new(Family::Cylinder).int("m", 9).int("q", 16).horizon(N));
    let budget = Budget::default();
    let lbd = lbd_lower_bound(&b.space, &b.map, N, &budget).map_err(|e| e.to_string())?;
    ensure(lbd.lower == 0.0, || format!("lbd lower bound = {}", lbd.lower))?;
    let core = eventual_image(&b.space, &b.map).unwrap();
    let ids = core.as_slice();
    let mut pairs = 0;
    for (i, &x) in ids.iter().enumerate() {
        for &y in &ids[i + 1..] {
            for n in 0..=N {
                if let Extended::Finite(g) = preimage_gap(&b.space, &b.map, n, x, y).unwrap() {
                    ensure(g >= b.space.dist(x, y), || format!("D < d for ({x}, {y}) at n = {n}"))?;
                }
            }
            pairs += 1;
        }
    }
    let ctx = DeltaContext::new(&b.space);
    let hl = hl_estimates_for(&ctx, &b.map, &b.covers, N, &budget, None).map_err(|e| e.to_string())?;
    let detail = format!("lbd = 0 over {pairs} column pairs, hl- {:.4}, hl+ {:.4}", hl.lower, hl.upper);
    ensure((0.59..=0.79).contains(&hl.lower) && (0.59..=0.79).contains(&hl.upper), || detail.clone())?;
    Ok(detail)
}

fn scaling() -> Outcome {
    let systems = [
        SystemSpec::new(Family::Doubling).int("m", 8),
        SystemSpec::new(Family::LadderEx3),
        SystemSpec::new(Family::Sqrt),
        SystemSpec::new(Family::Xab),
    ];
    let budget = Budget::default();
    let mut compared = 0;
    for spec in systems {
        let b = bundle(spec);
        let base_ctx = DeltaContext::new(&b.space);
        let base =
            hl_estimates_for(&base_ctx, &b.map, &b.covers, b.horizon(), &budget, None).map_err(|e| e.to_string())?;
        for c in [0.1, 3.0, 10.0] {
            let scaled = scale_metric(&b.space, c).unwrap();
            let ctx = DeltaContext::new(&scaled);
            let covers: Vec<NamedCover> = b.covers.clone();
            let s = hl_estimates_for(&ctx, &b.map, &covers, b.horizon(), &budget, None).map_err(|e| e.to_string())?;
            for (r0, r1) in base.per_radius.iter().zip(&s.per_radius) {
                let who = format!("{} {} c={c}", b.name, r0.cover_id);
                for (i, (&d0, &d1)) in r0.sequence.values.iter().zip(&r1.sequence.values).enumerate() {
                    ensure(d1 == c * d0, || format!("{who}: delta_{} {d1} != {c} * {d0}", i + 1))?;
                    compared += 1;
                }
                let (e0, e1) = (&r0.estimate, &r1.estimate);
                for (name, a, b) in [
                    ("lower", e0.lower_rate, e1.lower_rate),
                    ("upper", e0.upper_rate, e1.upper_rate),
                    ("slope", e0.slope, e1.slope),
                    ("cumulative", e0.cumulative_rate, e1.cumulative_rate),
                ] {
                    ensure(rel_close(a, b, 1e-12) || (a - b).abs() <= 1e-12, || format!("{who}: {name} {a} vs {b}"))?;
                }
            }
        }
    }
    Ok(format!("{compared} delta_n values scale exactly; rates unchanged"))
}

fn pullback_consistency() -> Outcome {
    let b = bundle(SystemSpec::new(Family::Doubling).int("m", 10));
    let mut parts = Vec::new();
    for c in &b.covers {
        let seq = delta_sequence(&b.space, &b.map, &c.cover, b.horizon(), DeltaMode::RunningMin).unwrap();
        let w = Window::tail(seq.usable_len());
        let single: Vec<f64> = seq.pullback.iter().map(|&p| (seq.reference / p).ln()).collect();
        let from_single = prefix_max_rate_check(&single, Some(w)).direct;
        let from_joined = (w.start..=w.end).map(|n| seq.cumulative_rate(n)).fold(f64::NEG_INFINITY, f64::max);
        parts.push(format!("{}: {from_single:.4} vs {from_joined:.4}", c.id));
        ensure((from_single - from_joined).abs() <= 0.05, || parts.join("; "))?;
    }
    Ok(parts.join("; "))
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lebdyn")).args(args).env_remove("LEBDYN_BUDGET").output().expect("binary runs")
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("doubling.json");
    std::fs::write(&spec, r#"{"family": "doubling", "params": {"m": 10}}"#).unwrap();
    let spec = spec.to_str().unwrap();

    let first = run_cli(&["verify", "--spec", spec]);
    ensure(first.status.code() == Some(0), || {
        format!("verify exited {:?}: {}", first.status.code(), String::from_utf8_lossy(&first.stderr))
    })?;
    let report: Report = serde_json::from_slice(&first.stdout).map_err(|e| format!("report does not parse: {e}"))?;
    ensure(report.command == "verify" && report.inequalities.as_ref().is_some_and(|s| s.passed), || {
        "report lacks a passing inequality section".into()
    })?;

    let second = run_cli(&["verify", "--spec", spec]);
    ensure(second.stdout == first.stdout, || "reruns differ".into())?;

    let inflated = dir.path().join("inflated.json");
    std::fs::write(&inflated, r#"{"family": "doubling", "params": {"m": 10}, "known": {"h": 5.0}}"#).unwrap();
    let neg = run_cli(&["verify", "--spec", inflated.to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&neg.stderr);
    ensure(neg.status.code() == Some(1), || format!("negative control exited {:?}", neg.status.code()))?;
    ensure(stderr.contains("box_dim_lower_rate/analytic"), || format!("failed row not named: {stderr}"))?;
    let neg_report: Report = serde_json::from_slice(&neg.stdout).map_err(|e| format!("negative report: {e}"))?;
    let failed = neg_report.inequalities.map(|s| s.failed).unwrap_or_default();
    Ok(format!("exit 0, schema ok, reruns identical; negative control exit 1 naming {failed:?}"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("identity suite", identities),
        ("counting suite", counting),
        ("doubling map", doubling),
        ("rotation", rotation),
        ("sqrt chain", sqrt_chain),
        ("ladder", ladder),
        ("X_ab", xab),
        ("oscillating rates", osc),
        ("cylinder", cylinder),
        ("scaling", scaling),
        ("pullback consistency", pullback_consistency),
        ("CLI contract", cli_contract),
    ];
    assert!(Path::new(env!("CARGO_BIN_EXE_lebdyn")).exists());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
