//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them as they complete).
//!
//! The statistical criteria run at three-sigma-style thresholds under fixed
//! seeds, so the suite is deterministic. The heavy cross-validation tests
//! (5 and 6) take several minutes each on a small machine.

use invstop_core::barrier::{Barrier, Interpolation, Knot};
use invstop_core::boundary::{
    indicator_residual, reflected_residual, solve_boundary, SolverConfig,
};
use invstop_core::model::{
    bm_linear_flow, bm_product_payoff, bm_squared_payoff, static_linear_flow, Coef,
    DiffusionSpec, PayoffSpec, Problem, TerminalPayoff,
};
use invstop_core::oracle::{
    check_implementability, dp_stop_boundary, dp_value, extract_boundary, reflection_cdf_check,
    Lattice, RowStatus,
};
use invstop_core::paths::{check_pathwise_properties, hit_fraction, subseed, PathwiseCheckConfig};
use invstop_core::transfer::{
    check_transfer_properties, transfer_at, transfer_curve, McConfig, TransferCurve,
};

use rand::{Rng, SeedableRng};

fn report(name: &str, pass: bool, detail: &str) {
    println!("acceptance {name}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

/// Absolute guard absorbing floating-point summation noise in the
/// zero-variance cases (the trapezoid of a constant integrand reproduces
/// sigma^2 (T - t) only up to accumulated rounding, while the sample
/// standard error is itself rounding-level).
const FP_GUARD: f64 = 1e-9;

// Criterion 1: for mu = 0, sigma in {0.5, 1, 2}, f = 0, g = x^2 and three
// distinct regular barriers, the estimated transfer matches sigma^2 (T - t)
// within 3 stderr pointwise at 11 equispaced times, with stderr at most 1%
// of sigma^2, at n = 1e5 paths and max step 1e-3.
#[test]
fn criterion_1_transfer_closed_example() {
    let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let barriers = [
        ("constant", Barrier::constant(1.0, 1.0).unwrap()),
        ("linear", Barrier::piecewise_linear(&[(0.0, 0.5), (1.0, 1.5)]).unwrap()),
        (
            "upward-jump",
            Barrier::new(
                Interpolation::Constant,
                vec![Knot::new(0.0, 0.8), Knot::new(0.5, 1.6), Knot::new(1.0, 1.6)],
            )
            .unwrap(),
        ),
    ];
    let mut worst_rel_err = 0.0_f64;
    for (si, &sigma) in [0.5, 1.0, 2.0].iter().enumerate() {
        let problem = bm_squared_payoff(sigma, 1.0);
        for (bi, (name, barrier)) in barriers.iter().enumerate() {
            let cfg = McConfig::new(100_000, 1 + (si * 3 + bi) as u64, 1e-3).unwrap();
            let curve = transfer_curve(&problem, barrier, &times, &cfg).unwrap();
            for i in 0..curve.len() {
                let expected = sigma * sigma * (1.0 - curve.times[i]);
                let err = (curve.pi[i] - expected).abs();
                assert!(
                    err <= 3.0 * curve.stderr[i] + FP_GUARD,
                    "sigma={sigma} barrier={name} t={}: err {err} vs 3se {}",
                    curve.times[i],
                    3.0 * curve.stderr[i]
                );
                assert!(
                    curve.stderr[i] <= 0.01 * sigma * sigma,
                    "sigma={sigma} barrier={name}: stderr {}",
                    curve.stderr[i]
                );
                worst_rel_err = worst_rel_err.max(err / (sigma * sigma));
            }
        }
    }
    report(
        "criterion 1 (transfer closed example)",
        true,
        &format!("9 curves x 11 times; worst |error|/sigma^2 = {worst_rel_err:.2e}"),
    );
}

// Criterion 2: static problem mu = sigma = 0, f = -x, g = 0: the solved
// boundary is |b(t)| <= 1e-8 at every solver node (deterministic residual,
// bisection tolerance-limited).
#[test]
fn criterion_2_static_boundary() {
    let problem = static_linear_flow(1.0);
    let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let mut cfg = SolverConfig::new(grid, (-1.0, 1.0), McConfig::new(16, 0, 0.05).unwrap());
    cfg.tol_x = 1e-9;
    cfg.max_bisections = 200;
    let solution = solve_boundary(&problem, &cfg).unwrap();
    assert!(solution.fully_resolved());
    let worst = solution
        .nodes
        .iter()
        .map(|n| n.value.abs())
        .fold(0.0_f64, f64::max);
    report(
        "criterion 2 (static boundary)",
        worst <= 1e-8,
        &format!("21 nodes, worst |b| = {worst:.2e} (tolerance 1e-8)"),
    );
}

// Criterion 3: Kolmogorov-Smirnov check of the factor-two reflection
// identity at sigma = 1, b = 0, s - t = 1, n = 1e5, level 1%.
#[test]
fn criterion_3_reflection_factor_two() {
    let cfg = McConfig::new(100_000, 2024, 1e-3).unwrap();
    let rep = reflection_cdf_check(1.0, 0.0, 0.0, 1.0, &cfg).unwrap();
    report(
        "criterion 3 (reflection factor-2 identity)",
        rep.pass,
        &format!(
            "KS distance {:.5e} vs critical {:.5e} at n = {}",
            rep.sup_distance, rep.threshold, rep.n_samples
        ),
    );
}

// Criterion 4: with a constant barrier and driftless BM (h = -x), the
// indicator-form residual equals half the reflected residual within noise at
// five test times; in the static decreasing-barrier counterexample the
// indicator residual vanishes while the reflected residual does not.
#[test]
fn criterion_4_indicator_vs_reflected() {
    let problem = bm_linear_flow(1.0, 1.0);
    let barrier = Barrier::constant(0.0, 1.0).unwrap();
    let n = 20_000;
    let max_step = 2.5e-5;
    let mut worst_z = 0.0_f64;
    for (j, &t) in [0.0, 0.2, 0.4, 0.6, 0.8].iter().enumerate() {
        let kjc = indicator_residual(
            &problem,
            &barrier,
            t,
            &McConfig::new(n, subseed(900, j as u64), max_step).unwrap(),
        )
        .unwrap();
        let refl = reflected_residual(
            &problem,
            &barrier,
            t,
            0.0,
            &McConfig::new(n, subseed(901, j as u64), max_step).unwrap(),
        )
        .unwrap();
        let dev = (kjc.residual - 0.5 * refl.residual).abs();
        let band = 3.0 * (kjc.stderr.powi(2) + 0.25 * refl.stderr.powi(2)).sqrt();
        assert!(dev <= band, "t={t}: |Psi - Phi/2| = {dev:.3e} vs band {band:.3e}");
        worst_z = worst_z.max(dev / (band / 3.0));
    }

    // Static counterexample: b(t) = 1 - t zeroes the indicator residual for
    // every start on the barrier, yet only b = 0 solves the reflected form.
    let static_problem = static_linear_flow(1.0);
    let decreasing = Barrier::piecewise_linear(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
    let cfg = McConfig::new(64, 7, 1e-3).unwrap();
    let kjc = indicator_residual(&static_problem, &decreasing, 0.0, &cfg).unwrap();
    let refl = reflected_residual(&static_problem, &decreasing, 0.0, 1.0, &cfg).unwrap();
    assert!(
        kjc.residual.abs() <= 3.0 * kjc.stderr,
        "static indicator residual {} (stderr {})",
        kjc.residual,
        kjc.stderr
    );
    assert!(
        refl.residual.abs() > 10.0 * refl.stderr,
        "static reflected residual {} should be far from zero",
        refl.residual
    );
    report(
        "criterion 4 (indicator vs reflected equation)",
        true,
        &format!(
            "worst z = {worst_z:.2} over 5 times; static counterexample: Psi = {:.1e}, Phi = {:.3}",
            kjc.residual, refl.residual
        ),
    );
}

fn criterion5_lattice() -> Lattice {
    Lattice::new(1.0, 1e-3, -8.0, 6.0, 0.04).unwrap()
}

// Criterion 5: cross-validation of the boundary solver against the lattice
// oracle for mu = 0, sigma = 1, f = 0, g = x (T - t): mean absolute
// deviation of the two boundaries on common nodes at most 0.05, and the
// solved boundary is implementable with the zero transfer within gap 0.01.
#[test]
fn criterion_5_oracle_cross_validation() {
    let problem = bm_product_payoff(1.0);

    let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let mut cfg =
        SolverConfig::new(grid, (-0.5, 2.0), McConfig::new(200_000, 42, 5e-4).unwrap());
    cfg.tol_x = 1e-3;
    let solution = solve_boundary(&problem, &cfg).unwrap();
    assert!(solution.fully_resolved(), "solver nodes not all resolved");

    let lattice = criterion5_lattice();
    let surface = dp_value(&problem, None, &lattice).unwrap();
    let (lattice_boundary, statuses) = extract_boundary(&surface).unwrap();

    let mut mad = 0.0;
    let mut common = 0usize;
    for node in &solution.nodes {
        let k = (node.t / lattice.dt()).round() as usize;
        if statuses[k] == RowStatus::Interior {
            mad += (node.value - lattice_boundary.eval(node.t).unwrap()).abs();
            common += 1;
        }
    }
    mad /= common as f64;

    let implement = check_implementability(
        &problem,
        &solution.barrier,
        None,
        &lattice,
        0.01,
        2.0,
        None,
    )
    .unwrap();

    report(
        "criterion 5 (oracle cross-validation)",
        mad <= 0.05 && implement.pass,
        &format!(
            "MAD = {mad:.4} over {common} common nodes (tolerance 0.05); \
             implementability gap {:.2e} (tolerance 0.01)",
            implement.worst_gap
        ),
    );
}

// Criterion 6: three random regular barriers in the criterion-5 problem are
// implementable with their estimated transfer curves (gap <= 0.01), and with
// the zero transfer at least one fails with gap > 0.05.
#[test]
fn criterion_6_arbitrary_barriers_implementable() {
    let problem = bm_product_payoff(1.0);
    let lattice = criterion5_lattice();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2718);

    let barriers = vec![
        Barrier::constant(rng.gen_range(-0.3..1.0), 1.0).unwrap(),
        Barrier::piecewise_linear(&[
            (0.0, rng.gen_range(-0.6..1.2)),
            (1.0 / 3.0, rng.gen_range(-0.6..1.2)),
            (2.0 / 3.0, rng.gen_range(-0.6..1.2)),
            (1.0, rng.gen_range(-0.6..1.2)),
        ])
        .unwrap(),
        Barrier::piecewise_linear(&[
            (0.0, rng.gen_range(0.8..1.3)),
            (0.5, rng.gen_range(0.1..0.5)),
            (1.0, rng.gen_range(-0.4..0.2)),
        ])
        .unwrap(),
    ];

    let times = lattice.times();
    let mut estimated_gaps = Vec::new();
    let mut zero_gaps = Vec::new();
    for (i, barrier) in barriers.iter().enumerate() {
        let mc = McConfig::new(100_000, subseed(600, i as u64), 4e-3).unwrap();
        let curve = transfer_curve(&problem, barrier, &times, &mc).unwrap();
        let with_pi =
            check_implementability(&problem, barrier, Some(&curve), &lattice, 0.01, 2.0, None)
                .unwrap();
        assert!(
            with_pi.pass,
            "barrier {i}: estimated-transfer gap {:.4} exceeds 0.01",
            with_pi.worst_gap
        );
        estimated_gaps.push(with_pi.worst_gap);

        let without =
            check_implementability(&problem, barrier, None, &lattice, 0.01, 2.0, None).unwrap();
        zero_gaps.push(without.worst_gap);
    }
    let max_zero_gap = zero_gaps.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    report(
        "criterion 6 (implementability of arbitrary barriers)",
        max_zero_gap > 0.05,
        &format!(
            "estimated-transfer gaps {:?} (all <= 0.01); zero-transfer gaps {:?} (max {:.3} > 0.05)",
            estimated_gaps
                .iter()
                .map(|g| format!("{g:.2e}"))
                .collect::<Vec<_>>(),
            zero_gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>(),
            max_zero_gap
        ),
    );
}

// Criterion 7: pathwise property suite over 10^3 paths x 10 seeds x 3
// barrier shapes and two diffusions: zero violations of domination,
// regulator complementarity, minimality before hitting, both comparison
// principles, the flow property, and jump absorption, all asserted exactly
// at grid points; plus the far-start hitting-fraction decay.
#[test]
fn criterion_7_pathwise_property_suite() {
    let barriers = [
        Barrier::constant(1.0, 1.0).unwrap(),
        Barrier::piecewise_linear(&[(0.0, 1.2), (0.4, 0.6), (1.0, 1.3)]).unwrap(),
        Barrier::new(
            Interpolation::Constant,
            vec![
                Knot::new(0.0, 1.2),
                Knot::new(0.4, 0.5),
                Knot::new(0.7, 1.4),
                Knot::new(1.0, 1.4),
            ],
        )
        .unwrap(),
    ];
    let bm = bm_product_payoff(1.0);
    let ou = {
        let diffusion = DiffusionSpec::new(
            Coef::MeanReverting { kappa: 1.0, theta: 0.2 },
            Coef::Constant(0.6),
            1.6,
            1.0,
        )
        .unwrap();
        let payoff = PayoffSpec::new(Coef::zero(), TerminalPayoff::Zero, 1.0).unwrap();
        Problem::new(diffusion, payoff).unwrap()
    };

    let cfg = PathwiseCheckConfig {
        n_paths: 1000,
        seeds: (0..10).collect(),
        max_step: 2e-3,
        offset_low: 1.5,
        offset_high: 0.5,
    };
    let mut total_paths = 0;
    for problem in [&bm, &ou] {
        for barrier in &barriers {
            let rep = check_pathwise_properties(problem, barrier, &cfg).unwrap();
            assert!(rep.ok(), "violations: {:?}", &rep.violations[..rep.violations.len().min(3)]);
            total_paths += rep.paths_checked;
        }
    }

    // Far-start decay: the fraction of paths reaching the barrier is
    // non-increasing in the distance of the start and vanishes in the limit.
    let barrier = &barriers[0];
    let fractions: Vec<f64> = [-0.5, -10.0, -100.0, -1000.0]
        .iter()
        .map(|&x0| hit_fraction(&bm, barrier, x0, 2000, 31, 2e-3).unwrap())
        .collect();
    assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "not decreasing: {fractions:?}");
    assert!(fractions[0] > 0.05, "near start should hit: {fractions:?}");
    assert!(*fractions.last().unwrap() <= 1e-3, "far start should not hit: {fractions:?}");

    report(
        "criterion 7 (pathwise property suite)",
        true,
        &format!("{total_paths} paths, zero violations; far-start fractions {fractions:?}"),
    );
}

// Criterion 8: transfer regularity across barrier jumps. The barriers follow
// the oracle-calibrated optimal boundary alpha sqrt(T - t) after the jump,
// so the transfer is statistically zero on the tail and the terminal limit
// is a real check rather than a vacuous one.
#[test]
fn criterion_8_transfer_regularity_at_jumps() {
    let problem = bm_linear_flow(1.0, 1.0);

    // Calibrate the optimal-boundary slope from a fine lattice.
    let dx = 0.005;
    let lattice = Lattice::new(1.0, 0.5 * dx * dx, -4.0, 4.0, dx).unwrap();
    let bounds = dp_stop_boundary(&problem, None, &lattice).unwrap();
    let mut alpha = 0.0;
    let mut rows = 0usize;
    for k in 0..=lattice.n_steps {
        let t = lattice.time(k);
        if (0.2..=0.8).contains(&t) {
            if let Some(b) = bounds[k] {
                alpha += b / (1.0 - t).sqrt();
                rows += 1;
            }
        }
    }
    alpha /= rows as f64;
    let tail = |t: f64| alpha * (1.0 - t).sqrt();

    // Tail knots quadratically spaced toward the horizon so the square root
    // is well approximated; terminal value 0 is the exact root of h(T, .).
    let tail_knots = |from: f64| -> Vec<(f64, f64)> {
        let m = 18;
        let u0 = (1.0 - from).sqrt();
        (1..=m)
            .map(|i| {
                let u = u0 * (1.0 - i as f64 / m as f64);
                (1.0 - u * u, alpha * u)
            })
            .collect()
    };

    let build = |t_jump: f64, offset: f64| -> Barrier {
        let mut knots = Vec::new();
        for i in 0..6 {
            let t = t_jump * i as f64 / 6.0;
            knots.push(Knot::new(t, tail(t) + offset));
        }
        knots.push(Knot::with_left(t_jump, tail(t_jump), tail(t_jump) + offset));
        knots.extend(tail_knots(t_jump).into_iter().map(|(t, v)| Knot::new(t, v)));
        Barrier::new(Interpolation::Linear, knots).unwrap()
    };
    let upward = build(0.35, -0.4); // barrier jumps up to the tail
    let downward = build(0.4, 0.5); // barrier jumps down to the tail

    // Curve nodes: straddle every knot up to T - 0.05, plus the terminal-limit
    // node at T - 0.05 (simulated with a locally fine step so its bias sits
    // inside its own noise) and the horizon itself.
    let t_last = 0.95;
    let estimate = |barrier: &Barrier, base_seed: u64| -> TransferCurve {
        let mut times: Vec<f64> = Vec::new();
        for knot in &barrier.knots()[1..barrier.knots().len() - 1] {
            if knot.t <= t_last {
                times.push(knot.t - 1e-3);
                times.push(knot.t);
            }
        }
        times.push(0.0);
        times.push(t_last);
        times.push(1.0);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        let mut pi = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let max_step = if t == t_last { 1e-6 } else { 1e-3 };
            let cfg = McConfig::new(10_000, subseed(base_seed, j as u64), max_step).unwrap();
            let (mean, se) = transfer_at(&problem, barrier, t, &cfg).unwrap();
            pi.push(mean);
            stderr.push(se);
        }
        TransferCurve::new(times, pi, stderr).unwrap()
    };

    let curve_up = estimate(&upward, 810);
    let rep_up = check_transfer_properties(&curve_up, &upward).unwrap();
    assert!(
        rep_up.upward_jumps.is_empty(),
        "upward pi-jumps flagged: {:?}",
        rep_up.upward_jumps
    );
    assert!(
        rep_up.continuity_violations.is_empty(),
        "continuity violations: {:?}",
        rep_up.continuity_violations
    );
    assert!(
        rep_up.terminal_ok,
        "pi(T-) = {} exceeds {}",
        rep_up.terminal_value, rep_up.terminal_threshold
    );

    let curve_down = estimate(&downward, 811);
    let rep_down = check_transfer_properties(&curve_down, &downward).unwrap();
    assert!(
        rep_down.upward_jumps.is_empty(),
        "upward pi-jumps flagged: {:?}",
        rep_down.upward_jumps
    );
    assert!(
        rep_down.continuity_violations.is_empty(),
        "pi discontinuous at the downward barrier jump: {:?}",
        rep_down.continuity_violations
    );

    report(
        "criterion 8 (transfer regularity)",
        true,
        &format!(
            "alpha = {alpha:.4}; upward-jump barrier: no upward pi-jump, pi({t_last}) = {:.1e} \
             (threshold {:.1e}); downward-jump barrier: continuous at the jump",
            rep_up.terminal_value, rep_up.terminal_threshold
        ),
    );
}
