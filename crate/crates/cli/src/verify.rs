//! Named invariant checks runnable from the command line. Each check
//! prints one PASS/FAIL line; a failed check makes the process exit
//! nonzero.

use coagfrag::analysis;
use coagfrag::bernstein::{self, transform_g};
use coagfrag::dist::{ConvolutionMode, InitialData, SimulationConfig, SizeDistribution};
use coagfrag::equilibrium;
use coagfrag::hj;
use coagfrag::integrator::integrate;
use coagfrag::rhs;

pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Check = (&'static str, fn() -> CheckOutcome, /* fast */ bool);

fn outcome(name: &'static str, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, pass, detail }
}

fn equilibrium_identities() -> CheckOutcome {
    let table = equilibrium::recursion(0.3, 1024);
    let all_nonneg = table.values().iter().all(|&v| v >= 0.0);
    let report = equilibrium::validate(&table);
    let (g0_short, g1_short) = equilibrium::tail_gaps(0.3, 512);
    let (g0_long, g1_long) = equilibrium::tail_gaps(0.3, 1024);
    let gaps_shrink = g0_long < g0_short && g1_long < g1_short;
    let pass = all_nonneg && report.rhs_residual_sup <= 1e-8 && gaps_shrink;
    outcome(
        "equilibrium_identities",
        pass,
        format!(
            "m=0.3 L=1024: nonneg={all_nonneg}, residual={:.2e}, gaps shrink={gaps_shrink}",
            report.rhs_residual_sup
        ),
    )
}

fn nonexistence_witnesses() -> CheckOutcome {
    let witness = match equilibrium::existence_verdict(2.0, 4) {
        equilibrium::ExistenceVerdict::Nonexistent { witness_rho1 } => witness_rho1,
        _ => f64::NAN,
    };
    let witness_ok = (witness + 2.0 / 3.0).abs() <= 1e-15;
    let unit = equilibrium::recursion(1.0, 100);
    let zeros_ok = (1..=100).all(|l| unit.value(l).abs() <= 1e-15);
    outcome(
        "nonexistence_witnesses",
        witness_ok && zeros_ok,
        format!("rho~(1)|m=2 = {witness}, m=1 zeros through l=100: {zeros_ok}"),
    )
}

fn h_bound_scan() -> CheckOutcome {
    let deltas: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
    let rs: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    match analysis::verify_hpm(&deltas, &rs) {
        Ok(report) => {
            let max_ok = (report.max_h_minus + 1.0).abs() <= 1e-12;
            outcome(
                "h_bound_scan",
                max_ok,
                format!(
                    "max h- = {} at {:?}; min h+ = {} at {:?} (below -1 for delta > 1/3)",
                    report.max_h_minus,
                    report.max_h_minus_at,
                    report.min_h_plus,
                    report.min_h_plus_at
                ),
            )
        }
        Err(e) => outcome("h_bound_scan", false, format!("domain error: {e}")),
    }
}

fn rhs_oracle_equivalence() -> CheckOutcome {
    use rand_like::*;
    let mut state = 0x5eed_1234_u64;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = 4 + (next(&mut state) % 61) as usize;
        let densities: Vec<f64> = (0..n).map(|_| uniform(&mut state)).collect();
        let rho = SizeDistribution::new(densities).unwrap();
        let a = rhs::rhs(&rho, ConvolutionMode::Direct);
        let b = rhs::rhs(&rho, ConvolutionMode::Fft);
        for j in 0..n {
            if a.d_densities[j] != 0.0 {
                worst = worst
                    .max(((a.d_densities[j] - b.d_densities[j]) / a.d_densities[j]).abs());
            }
        }
    }
    outcome(
        "rhs_oracle_equivalence",
        worst <= 1e-12,
        format!("worst componentwise rel err {worst:.2e} over 50 instances"),
    )
}

fn mass_closure() -> CheckOutcome {
    use rand_like::*;
    let mut state = 0xabcd_u64;
    let mut worst_ratio = 0.0f64;
    for _ in 0..50 {
        let n = 4 + (next(&mut state) % 125) as usize;
        let densities: Vec<f64> = (0..n).map(|_| uniform(&mut state)).collect();
        let rho = SizeDistribution::new(densities).unwrap();
        let m1 = rho.moment(1);
        let tol = 1e-10 * m1 * m1 + 1e-10 * m1;
        let out = rhs::rhs(&rho, ConvolutionMode::Auto);
        worst_ratio = worst_ratio.max(out.mass_defect().abs() / tol);
    }
    outcome(
        "mass_closure",
        worst_ratio <= 1.0,
        format!("worst defect at {worst_ratio:.3} of budget"),
    )
}

fn m0_law_short_run() -> CheckOutcome {
    let rho0 = InitialData::Monodisperse { size: 1, density: 0.3 }
        .build(256)
        .unwrap();
    let mut cfg = SimulationConfig::new(256, 5.0);
    cfg.convolution_mode = ConvolutionMode::Direct;
    match integrate(&rho0, &cfg) {
        Ok(traj) => {
            let mut worst = 0.0f64;
            for i in 0..traj.len() {
                let want = analysis::m0_closed_form(0.3, 0.3, traj.time(i));
                worst = worst.max((traj.moments(i).m0 - want).abs());
            }
            outcome(
                "m0_law_short_run",
                worst <= 1e-6,
                format!("worst |m0 - closed form| = {worst:.2e}"),
            )
        }
        Err(e) => outcome("m0_law_short_run", false, format!("integrator error: {e}")),
    }
}

fn transform_roundtrip() -> CheckOutcome {
    let rho = SizeDistribution::from_pairs(
        &[(1, 0.3), (2, 0.1), (3, 0.07), (4, 0.06), (5, 0.05), (6, 0.04)],
        16,
    )
    .unwrap();
    let mut all_ok = true;
    let mut detail = String::new();
    for l in 1..=5usize {
        let e = |h: f64| {
            let g = transform_g(&rho, &bernstein::extraction_nodes(5, h));
            (bernstein::extract_density(&g, l, h).unwrap() - rho.density(l)).abs()
        };
        let (e1, e2) = (e(0.02), e(0.01));
        if e1 > 1e-12 {
            let ratio = e1 / e2;
            if !(1.3..=3.0).contains(&ratio) {
                all_ok = false;
                detail = format!("l={l}: halving ratio {ratio:.2}");
            }
        }
    }
    if detail.is_empty() {
        detail = "O(h) halving ratios in range for l <= 5".to_string();
    }
    outcome("transform_roundtrip", all_ok, detail)
}

fn band_preservation() -> CheckOutcome {
    let m = 0.3;
    let mut state = hj::HjState::new_g(m, 2e-3, |z| m * (1.0 - z), 0.9);
    match hj::advance_g(&mut state, 1.0) {
        Ok(_) => outcome(
            "band_preservation",
            state.max_band_violation <= 1e-6,
            format!("max band excursion {:.2e}", state.max_band_violation),
        ),
        Err(e) => outcome("band_preservation", false, format!("solver error: {e}")),
    }
}

fn stationary_transform_residual() -> CheckOutcome {
    let m = 0.3;
    let table = equilibrium::recursion(m, 2048);
    let nodes = bernstein::uniform_nodes(0.0, 1.0 - 1e-3, 999);
    let grid = transform_g(&table.to_distribution().unwrap(), &nodes);
    let res = hj::stationary_residual_g(&grid, m);
    outcome(
        "stationary_transform_residual",
        res <= 1e-4,
        format!("residual {res:.2e} at dz=1e-3"),
    )
}

fn scheme_order() -> CheckOutcome {
    let est = hj::refine_and_estimate_order(
        &hj::OrderProblem::GEvolution { m: 0.3, t_end: 1.0 },
        &[4e-3, 2e-3, 1e-3],
    );
    match est.observed_order {
        Some(order) => outcome(
            "scheme_order",
            (0.7..=1.3).contains(&order),
            format!("observed order {order:.3}"),
        ),
        None => outcome("scheme_order", false, "degenerate refinement".to_string()),
    }
}

/// Minimal splitmix-style generator so the verify suite needs no RNG dep.
mod rand_like {
    pub fn next(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(state: &mut u64) -> f64 {
        (next(state) >> 11) as f64 / (1u64 << 53) as f64
    }
}

const CHECKS: &[Check] = &[
    ("equilibrium_identities", equilibrium_identities, true),
    ("nonexistence_witnesses", nonexistence_witnesses, true),
    ("h_bound_scan", h_bound_scan, true),
    ("rhs_oracle_equivalence", rhs_oracle_equivalence, true),
    ("mass_closure", mass_closure, true),
    ("m0_law_short_run", m0_law_short_run, true),
    ("transform_roundtrip", transform_roundtrip, true),
    ("band_preservation", band_preservation, true),
    ("stationary_transform_residual", stationary_transform_residual, false),
    ("scheme_order", scheme_order, false),
];

pub fn available_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(name, _, _)| *name).collect()
}

/// Runs the requested suite (`all`, `fast`, or one check's name), printing
/// one line per check. Returns the number of failures.
pub fn run_suite(suite: &str) -> Result<usize, String> {
    let selected: Vec<&Check> = match suite {
        "all" => CHECKS.iter().collect(),
        "fast" => CHECKS.iter().filter(|(_, _, fast)| *fast).collect(),
        name => {
            let found: Vec<&Check> =
                CHECKS.iter().filter(|(n, _, _)| *n == name).collect();
            if found.is_empty() {
                return Err(format!(
                    "unknown suite {name:?}; use all, fast, or one of {:?}",
                    available_names()
                ));
            }
            found
        }
    };
    let mut failures = 0usize;
    for (_, check, _) in selected {
        let out = check();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", out.name, out.detail);
        if !out.pass {
            failures += 1;
        }
    }
    Ok(failures)
}
