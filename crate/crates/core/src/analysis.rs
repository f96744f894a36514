//! Closed-form references and verification diagnostics.
//!
//! Everything here is an independent check on the solvers: the zeroth-moment
//! law, the gelation-time root, weak-form residuals against arbitrary
//! bounded test functions, the `h` bound functions behind the second
//! derivative estimate, and convergence-to-equilibrium reports.

use thiserror::Error;

use crate::dist::SizeDistribution;
use crate::equilibrium::EquilibriumTable;
use crate::integrator::Trajectory;
use crate::numeric::neumaier_sum;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("h_pm radicand negative at delta={delta}, r={r}: {value}")]
    Domain { delta: f64, r: f64, value: f64 },
    #[error("trajectory mass {traj_mass} does not match table mass {table_mass}")]
    MassMismatch { traj_mass: f64, table_mass: f64 },
}

/// Zeroth-moment law under mass conservation:
/// `m0(t) = m - m^2 + e^{-t/2} (m0(0) - (m - m^2))`.
pub fn m0_closed_form(m: f64, m0_initial: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let limit = m - m * m;
    limit + (-t / 2.0).exp() * (m0_initial - limit)
}

/// For `m > 1` the closed-form `m0` hits zero at
/// `t* = 2 ln((m0(0) + m^2 - m) / (m^2 - m))`; no root exists for `m <= 1`.
pub fn gelation_time_bound(m: f64, m0_initial: f64) -> Option<f64> {
    debug_assert!(m0_initial > 0.0);
    if m <= 1.0 {
        return None;
    }
    let excess = m * m - m;
    Some(2.0 * ((m0_initial + excess) / excess).ln())
}

/// Right side of the weak form for a bounded test function `g`:
///
/// ```text
/// (1/2) sum_{j,k} (g(j+k) - g(j) - g(k)) jk rho(j) rho(k)
/// - (1/2) sum_j sum_{k<j} (g(j) - g(k) - g(j-k)) rho(j)
/// ```
///
/// summed over the truncated support; `g(j+k)` beyond the truncation is
/// evaluated as given (the test function lives on all sizes). With
/// `g = 1_l` this collapses to the generator component `Q_c + Q_f` at `l`,
/// which the tests exploit as a cross-module identity.
pub fn weak_form_pairing(rho: &SizeDistribution, test_g: impl Fn(usize) -> f64) -> f64 {
    let n = rho.truncation_n();
    let d = rho.densities();
    let mut terms = Vec::with_capacity(n * n / 2);
    for j in 1..=n {
        if d[j - 1] == 0.0 {
            continue;
        }
        for k in 1..=n {
            if d[k - 1] != 0.0 {
                terms.push(
                    0.5 * (test_g(j + k) - test_g(j) - test_g(k))
                        * (j * k) as f64
                        * d[j - 1]
                        * d[k - 1],
                );
            }
        }
        for k in 1..j {
            terms.push(-0.5 * (test_g(j) - test_g(k) - test_g(j - k)) * d[j - 1]);
        }
    }
    neumaier_sum(terms)
}

/// Residual of the weak form along a trajectory: centered time differences
/// of `sum_j g(j) rho(j, t)` minus [`weak_form_pairing`] at the snapshot,
/// one `(t, residual)` pair per interior output time. The stated tolerances
/// assume dense output (>= 20 samples per unit time) so the differencing
/// error sits below the integrator error.
pub fn weak_form_residual(
    traj: &Trajectory,
    test_g: impl Fn(usize) -> f64,
) -> Vec<(f64, f64)> {
    let n_out = traj.len();
    if n_out < 3 {
        return Vec::new();
    }
    let observable = |rho: &SizeDistribution| -> f64 {
        neumaier_sum(
            rho.densities()
                .iter()
                .enumerate()
                .map(|(i, &v)| test_g(i + 1) * v),
        )
    };

    let mut out = Vec::with_capacity(n_out - 2);
    for i in 1..n_out - 1 {
        // three-point derivative, second order on the nonuniform output grid
        let h_minus = traj.time(i) - traj.time(i - 1);
        let h_plus = traj.time(i + 1) - traj.time(i);
        let f_prev = observable(traj.snapshot(i - 1));
        let f_mid = observable(traj.snapshot(i));
        let f_next = observable(traj.snapshot(i + 1));
        let slope = -h_plus / (h_minus * (h_minus + h_plus)) * f_prev
            + (h_plus - h_minus) / (h_minus * h_plus) * f_mid
            + h_minus / (h_plus * (h_minus + h_plus)) * f_next;
        out.push((
            traj.time(i),
            slope - weak_form_pairing(traj.snapshot(i), &test_g),
        ));
    }
    out
}

/// Scan report for the bound functions
/// `h_pm(r) = -1/2 - r(1+delta) -+ sqrt(1/4 + r^2(1-delta)^2 + r(1-3delta))`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HpmReport {
    pub max_h_minus: f64,
    pub max_h_minus_at: (f64, f64),
    pub min_h_plus: f64,
    pub min_h_plus_at: (f64, f64),
}

pub fn h_minus(delta: f64, r: f64) -> Result<f64, AnalysisError> {
    let rad = radicand(delta, r)?;
    Ok(-0.5 - r * (1.0 + delta) - rad.sqrt())
}

pub fn h_plus(delta: f64, r: f64) -> Result<f64, AnalysisError> {
    let rad = radicand(delta, r)?;
    Ok(-0.5 - r * (1.0 + delta) + rad.sqrt())
}

fn radicand(delta: f64, r: f64) -> Result<f64, AnalysisError> {
    let value = 0.25 + r * r * (1.0 - delta) * (1.0 - delta) + r * (1.0 - 3.0 * delta);
    if value < 0.0 {
        // cannot happen for delta <= 1/2; a hit here falsifies the lemma
        return Err(AnalysisError::Domain { delta, r, value });
    }
    Ok(value)
}

/// Scans `h_-` and `h_+` over the given `delta` and `r` grids and reports
/// the extrema. The expected picture: `max h_- = -1` (attained at `r = 0`)
/// and `min h_+ > -1`.
pub fn verify_hpm(deltas: &[f64], rs: &[f64]) -> Result<HpmReport, AnalysisError> {
    let mut report = HpmReport {
        max_h_minus: f64::NEG_INFINITY,
        max_h_minus_at: (f64::NAN, f64::NAN),
        min_h_plus: f64::INFINITY,
        min_h_plus_at: (f64::NAN, f64::NAN),
    };
    for &delta in deltas {
        debug_assert!((0.0..=0.5).contains(&delta));
        for &r in rs {
            debug_assert!((0.0..=1.0).contains(&r));
            let hm = h_minus(delta, r)?;
            let hp = h_plus(delta, r)?;
            if hm > report.max_h_minus {
                report.max_h_minus = hm;
                report.max_h_minus_at = (delta, r);
            }
            if hp < report.min_h_plus {
                report.min_h_plus = hp;
                report.min_h_plus_at = (delta, r);
            }
        }
    }
    Ok(report)
}

/// Distance of a trajectory from an equilibrium table over low sizes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    /// `sup_{l<=k} |rho(l, t) - rho~(l)|` per output time.
    pub sup_errors: Vec<f64>,
    /// Whether the last half of the samples is nonincreasing (1e-9 slack).
    pub monotone_tail_flag: bool,
}

pub fn convergence_report(
    traj: &Trajectory,
    table: &EquilibriumTable,
    k: usize,
) -> Result<ConvergenceReport, AnalysisError> {
    if !traj.is_empty() {
        let traj_mass = traj.snapshot(0).moment(1);
        if (traj_mass - table.mass_m()).abs() > 1e-9 {
            return Err(AnalysisError::MassMismatch {
                traj_mass,
                table_mass: table.mass_m(),
            });
        }
    }
    let mut times = Vec::with_capacity(traj.len());
    let mut sup_errors = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let rho = traj.snapshot(i);
        let k_eff = k.min(rho.truncation_n()).min(table.len());
        let mut sup = 0.0f64;
        for l in 1..=k_eff {
            sup = sup.max((rho.density(l) - table.value(l)).abs());
        }
        if k == 0 {
            continue;
        }
        times.push(traj.time(i));
        sup_errors.push(sup);
    }
    let half = sup_errors.len() / 2;
    let monotone_tail_flag = sup_errors[half..]
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-9);
    Ok(ConvergenceReport {
        times,
        sup_errors,
        monotone_tail_flag,
    })
}
