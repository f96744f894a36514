//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (run with `--nocapture` to see them).
//!
//! Criterion 9's lower bound on `h_+` is asserted as specified even though
//! the scan disproves it: at `delta = 1/2` the radicand collapses to
//! `(1-r)^2/4`, so `h_+(r) = -2r` and the minimum over the stated grid is
//! `-2`, not above `-1`. The bound is genuine only for `delta <= 1/3`.
//! That assertion is expected to stay red; everything else must pass.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use coagfrag::analysis::{convergence_report, m0_closed_form, verify_hpm};
use coagfrag::bench::bench_rhs;
use coagfrag::bernstein::{
    check_complete_monotonicity, extract_density, extraction_nodes, transform_f, transform_g,
    uniform_nodes,
};
use coagfrag::dist::{ConvolutionMode, InitialData, SimulationConfig, SizeDistribution};
use coagfrag::equilibrium::{self, recursion, tail_gaps};
use coagfrag::hj::{
    self, advance_g, discrete_slope_range, max_second_difference, stationary_residual_g, HjState,
};
use coagfrag::integrator::{detect_gelation, integrate, Trajectory};
use coagfrag::rhs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, elapsed: Duration, limit_s: f64, detail: &str) {
    println!(
        "[criterion {criterion:2}] PASS in {:.2}s (limit {limit_s}s): {detail}",
        elapsed.as_secs_f64()
    );
    assert!(
        elapsed.as_secs_f64() <= limit_s,
        "criterion {criterion} exceeded its runtime budget: {:.2}s > {limit_s}s",
        elapsed.as_secs_f64()
    );
}

/// Shared m = 0.3 reference run (criteria 3, 4, 8): monodisperse start,
/// N = 512, direct convolution so the gel-flux diagnostic stays clean.
fn subcritical_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let rho0 = InitialData::Monodisperse { size: 1, density: 0.3 }
            .build(512)
            .unwrap();
        let cfg = SimulationConfig {
            truncation_n: 512,
            t_end: 20.0,
            output_stride: 8,
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            convolution_mode: ConvolutionMode::Direct,
        };
        integrate(&rho0, &cfg).expect("subcritical reference run")
    })
}

#[test]
fn criterion_01_equilibrium_recursion_identities() {
    let start = Instant::now();
    for &m in &[0.1, 0.3, 0.5] {
        let table = recursion(m, 2048);
        assert!(
            table.values().iter().all(|&v| v >= 0.0),
            "m={m}: negative table value"
        );
        let report = equilibrium::validate(&table);
        assert!(
            report.rhs_residual_sup <= 1e-8,
            "m={m}: fixed-point residual {}",
            report.rhs_residual_sup
        );
        assert_eq!(report.residual_checked_up_to, 1024);

        let (g0_a, g1_a) = tail_gaps(m, 2048);
        let (g0_b, g1_b) = tail_gaps(m, 4096);
        assert!(
            g0_b < g0_a && !g0_b.is_negative(),
            "m={m}: m0 gap fails strict decrease"
        );
        assert!(
            g1_b < g1_a && !g1_b.is_negative(),
            "m={m}: m1 gap fails strict decrease"
        );
    }
    report(1, start.elapsed(), 10.0, "positivity, residual <= 1e-8, gaps strictly shrink");
}

#[test]
fn criterion_02_nonexistence_witnesses() {
    let start = Instant::now();
    let witness = recursion(2.0, 1).value(1);
    assert!(
        (witness + 2.0 / 3.0).abs() <= 1e-15,
        "rho~(1) at m=2: {witness}"
    );
    let unit = recursion(1.0, 100);
    for l in 1..=100 {
        assert!(
            unit.value(l).abs() <= 1e-15,
            "rho~({l}) at m=1: {}",
            unit.value(l)
        );
    }
    report(2, start.elapsed(), 1.0, "rho~(1)|m=2 = -2/3, m=1 table identically zero");
}

#[test]
fn criterion_03_m0_closed_form_law() {
    let start = Instant::now();
    let traj = subcritical_run();
    let mut worst = 0.0f64;
    for i in 0..traj.len() {
        assert!(
            traj.gel_flux(i) < 1e-12,
            "gel flux {} at t={}",
            traj.gel_flux(i),
            traj.time(i)
        );
        let want = m0_closed_form(0.3, 0.3, traj.time(i));
        worst = worst.max((traj.moments(i).m0 - want).abs());
    }
    assert!(worst <= 1e-6, "worst m0 deviation {worst}");
    report(
        3,
        start.elapsed(),
        30.0,
        &format!("worst |m0 - closed form| = {worst:.2e} over {} outputs", traj.len()),
    );
}

#[test]
fn criterion_04_conservation_gelation_dichotomy() {
    let start = Instant::now();

    // subcritical branch: mass conserved, gel negligible
    let traj = subcritical_run();
    for i in 0..traj.len() {
        assert!(
            traj.snapshot(i).gel_mass() < 1e-10,
            "gel mass {} at t={}",
            traj.snapshot(i).gel_mass(),
            traj.time(i)
        );
    }
    let defect = traj.conservation_defect();
    assert!(defect <= (1e-12 + 1e-9 * 0.3) * 20.0 * 10.0, "defect {defect}");

    // supercritical branch: gel >= 1% by t = 3, onset stable under N doubling
    let gel_run = |n: usize| {
        let rho0 = InitialData::Monodisperse { size: 1, density: 2.0 }
            .build(n)
            .unwrap();
        let cfg = SimulationConfig {
            truncation_n: n,
            t_end: 3.0,
            output_stride: 4,
            abs_tol: 1e-12,
            rel_tol: 1e-6,
            convolution_mode: ConvolutionMode::Fft,
        };
        integrate(&rho0, &cfg).expect("supercritical run")
    };
    let coarse = gel_run(4096);
    let onset_coarse = detect_gelation(&coarse, 0.01).expect("gelation by t=3 at N=4096");
    let fine = gel_run(8192);
    let onset_fine = detect_gelation(&fine, 0.01).expect("gelation by t=3 at N=8192");
    let rel_shift = (onset_fine - onset_coarse).abs() / onset_coarse;
    assert!(
        rel_shift < 0.10,
        "onset moved {rel_shift:.3} under N doubling ({onset_coarse} -> {onset_fine})"
    );
    report(
        4,
        start.elapsed(),
        120.0,
        &format!(
            "subcritical gel < 1e-10; onset {onset_coarse:.3} -> {onset_fine:.3} ({:.1}% shift)",
            100.0 * rel_shift
        ),
    );
}

#[test]
fn criterion_05_long_time_convergence() {
    let start = Instant::now();
    let rho0 = InitialData::Monodisperse { size: 1, density: 0.3 }
        .build(512)
        .unwrap();
    // tight tolerances keep the decaying transient visible above the
    // integrator's frozen global error at t = 50
    let cfg = SimulationConfig {
        truncation_n: 512,
        t_end: 100.0,
        output_stride: 16,
        abs_tol: 1e-13,
        rel_tol: 1e-10,
        convolution_mode: ConvolutionMode::Auto,
    };
    let traj = integrate(&rho0, &cfg).unwrap();
    let table = recursion(0.3, 2048);
    let rep = convergence_report(&traj, &table, 20).unwrap();

    let final_err = *rep.sup_errors.last().unwrap();
    assert!(final_err <= 1e-4, "sup error at t=100: {final_err}");

    let at = |t: f64| {
        let idx = rep
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        rep.sup_errors[idx]
    };
    let (e50, e100) = (at(50.0), at(100.0));
    assert!(
        e100 < e50,
        "error must keep shrinking: e(100)={e100:.3e} vs e(50)={e50:.3e}"
    );
    report(
        5,
        start.elapsed(),
        120.0,
        &format!("sup error 1e{:.1} at t=100, e(50)=1e{:.1}", e100.log10(), e50.log10()),
    );
}

#[test]
fn criterion_06_transform_consistency() {
    let start = Instant::now();

    // O(h) round trip, halving ratio in [1.6, 2.4] for l <= 5
    let rho = SizeDistribution::from_pairs(
        &[(1, 0.3), (2, 0.1), (3, 0.07), (4, 0.06), (5, 0.05), (6, 0.04), (7, 0.03)],
        16,
    )
    .unwrap();
    for l in 1..=5usize {
        let err_at = |h: f64| {
            let g = transform_g(&rho, &extraction_nodes(5, h));
            (extract_density(&g, l, h).unwrap() - rho.density(l)).abs()
        };
        let (e1, e2) = (err_at(0.02), err_at(0.01));
        let ratio = e1 / e2;
        assert!(
            (1.6..=2.4).contains(&ratio),
            "l={l}: halving ratio {ratio:.3} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    // Taylor remainder bound never violated on random distributions
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.gen_range(4..=64);
        let mut densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = densities.iter().sum();
        let target_m0 = rng.gen_range(0.1..1.0);
        for d in &mut densities {
            *d *= target_m0 / total;
        }
        let rho = SizeDistribution::new(densities).unwrap();
        let g0 = rho.moment(0);
        for &z in &[0.3, 0.6, 0.9] {
            let g = transform_g(&rho, &[z]).values()[0];
            for k in 1..=20usize {
                let mut partial = g0;
                let mut z_pow = 1.0;
                for l in 1..=k.min(n) {
                    z_pow *= z;
                    partial -= rho.density(l) * z_pow;
                }
                let bound = (k as f64 + 1.0) * z.powi(k as i32 + 1) / (1.0 - z).powi(2);
                assert!(
                    (g - partial).abs() <= bound + 1e-12,
                    "remainder bound violated at k={k}, z={z}"
                );
            }
        }
    }
    report(6, start.elapsed(), 10.0, "O(h) ratios in [1.6,2.4] for l<=5; remainder bound holds");
}

#[test]
fn criterion_07_hj_solver_validation() {
    let start = Instant::now();

    // (a) equilibrium transform is stationary to 1e-4 at dz = 1e-3
    let table = recursion(0.3, 2048);
    let nodes = uniform_nodes(0.0, 1.0 - 1e-3, 999);
    let g_tilde = transform_g(&table.to_distribution().unwrap(), &nodes);
    let residual = stationary_residual_g(&g_tilde, 0.3);
    assert!(residual <= 1e-4, "stationary residual {residual}");

    // (b) m = 1 evolution decays to <= 1e-3 over z <= 0.9 by t = 30
    let mut state = HjState::new_g(1.0, 1e-3, |z| 1.0 - z, 0.9);
    advance_g(&mut state, 30.0).unwrap();
    let sup_low_z = state
        .grid
        .nodes()
        .iter()
        .zip(state.grid.values())
        .filter(|(&z, _)| z <= 0.9)
        .map(|(_, &v)| v.abs())
        .fold(0.0f64, f64::max);
    assert!(sup_low_z <= 1e-3, "m=1 decay stalled at {sup_low_z}");

    // (c) observed order of the scheme
    let est = hj::refine_and_estimate_order(
        &hj::OrderProblem::GEvolution { m: 0.3, t_end: 1.0 },
        &[4e-3, 2e-3, 1e-3],
    );
    let order = est.observed_order.expect("non-degenerate refinement");
    assert!((0.7..=1.3).contains(&order), "observed order {order}");

    // (d) cross-consistency with the kinetic trajectory at t = 1
    let dz = 1e-3;
    let mut evolved = HjState::new_g(0.3, dz, |z| 0.3 * (1.0 - z), 0.9);
    advance_g(&mut evolved, 1.0).unwrap();
    let rho0 = InitialData::Monodisperse { size: 1, density: 0.3 }
        .build(512)
        .unwrap();
    let mut cfg = SimulationConfig::new(512, 1.0);
    cfg.convolution_mode = ConvolutionMode::Direct;
    let traj = integrate(&rho0, &cfg).unwrap();
    let reference = transform_g(traj.snapshot(traj.len() - 1), evolved.grid.nodes());
    let sup = evolved
        .grid
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 5.0 * dz * 0.3, "cross-consistency sup error {sup}");

    report(
        7,
        start.elapsed(),
        120.0,
        &format!(
            "residual {residual:.1e}; m=1 decay {sup_low_z:.1e}; order {order:.2}; cross {sup:.1e}"
        ),
    );
}

#[test]
fn criterion_08_shape_lemmas_along_run() {
    let start = Instant::now();
    let traj = subcritical_run();
    let m = 0.3;
    let x_nodes: Vec<f64> = (0..=1500).map(|i| i as f64 * 0.01).collect();
    let z_nodes = uniform_nodes(0.0, 0.8, 40);

    let stride = (traj.len() - 1) / 9;
    for s in 0..10 {
        let idx = (s * stride).min(traj.len() - 1);
        let snap = traj.snapshot(idx);

        let f_grid = transform_f(snap, &x_nodes);
        let (slope_min, slope_max) = discrete_slope_range(&f_grid);
        assert!(
            slope_min >= -1e-6 && slope_max <= m + 1e-6,
            "t={}: F_x range [{slope_min}, {slope_max}]",
            traj.time(idx)
        );
        let fxx = max_second_difference(&f_grid);
        assert!(fxx <= 1e-6, "t={}: F_xx max {fxx}", traj.time(idx));

        let g_grid = transform_g(snap, &z_nodes);
        let scale = g_grid
            .values()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        let cm = check_complete_monotonicity(&g_grid, 4, 0.02);
        assert!(cm.all_pass, "t={}: {cm:?}", traj.time(idx));
        for order in &cm.orders {
            assert!(
                order.worst_value <= 1e-8 * scale,
                "t={}: order {} difference {} above 1e-8 scale",
                traj.time(idx),
                order.order,
                order.worst_value
            );
        }
    }
    report(8, start.elapsed(), 30.0, "slope band, concavity, sign structure at 10 times");
}

#[test]
fn criterion_09_h_bound_scan() {
    let start = Instant::now();
    let deltas: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
    let rs: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let scan = verify_hpm(&deltas, &rs).unwrap();

    assert!(
        (scan.max_h_minus + 1.0).abs() <= 1e-12,
        "max h- = {}",
        scan.max_h_minus
    );
    println!(
        "[criterion  9] max h- = -1 PASS; min h+ = {} at (delta, r) = {:?} in {:.2}s",
        scan.min_h_plus,
        scan.min_h_plus_at,
        start.elapsed().as_secs_f64()
    );
    // As specified this asserts min h+ > -1 over delta in [0, 1/2]. The
    // formulas themselves refute it: at delta = 1/2 the radicand is
    // (1-r)^2/4, so h_+(r) = -2r and the grid minimum is -2 (the bound is
    // real only for delta <= 1/3). Kept as stated; expected red.
    assert!(
        scan.min_h_plus > -1.0,
        "min h+ = {} at {:?}: the stated bound fails for delta > 1/3 \
         (closed form at delta=1/2: h_+(r) = -2r)",
        scan.min_h_plus,
        scan.min_h_plus_at
    );
}

#[test]
fn criterion_10_oracle_equivalence_and_crossover() {
    let start = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(4..=64);
        let densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rho = SizeDistribution::new(densities).unwrap();
        let direct = rhs::rhs(&rho, ConvolutionMode::Direct);
        let fft = rhs::rhs(&rho, ConvolutionMode::Fft);
        for j in 0..n {
            let a = direct.d_densities[j];
            if a != 0.0 {
                worst = worst.max(((a - fft.d_densities[j]) / a).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "componentwise disagreement {worst:.3e}");

    let bench = bench_rhs(&[256, 512, 1024, 2048, 4096, 8192], 5, 7).unwrap();
    let crossover = bench.fft_crossover_n.expect("fft should win somewhere");
    assert!(crossover <= 8192, "crossover at {crossover}");

    report(
        10,
        start.elapsed(),
        60.0,
        &format!("worst rel err {worst:.2e}; fft crossover at n={crossover}"),
    );
}

