//! Adaptive time integration of the coagulation-fragmentation system.
//!
//! Dormand-Prince 5(4) embedded pair with PI step-size control, FSAL, and a
//! stability cap derived from the coagulation loss term (whose spectrum
//! reaches `~N m1`, making the system stability-limited rather than
//! accuracy-limited near gelation). The state vector is the truncated
//! density plus the gel-mass accumulator, so conservation is an invariant
//! of the integrated system rather than an afterthought.
//!
//! Positivity: an accepted step may leave rounding-scale negative
//! densities. Components in `[-10 abs_tol, 0)` are projected to zero with
//! the removed mass logged; anything below that window aborts the run,
//! because it means the scheme is broken, not noisy.

use thiserror::Error;

use crate::dist::{MomentVector, SimulationConfig, SizeDistribution};
use crate::rhs::{rhs_from_slice, RhsOutput};

#[derive(Debug, Error, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t={t}: h={h} (stiffness or blow-up)")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("density for size {size} fell to {value} at t={t}, beyond the projection window")]
    NegativityFailure { size: usize, value: f64, t: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Time-stamped snapshots of an integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    snapshots: Vec<SizeDistribution>,
    moments: Vec<MomentVector>,
    gel_flux: Vec<f64>,
    projected_mass: f64,
    accepted_steps: usize,
    rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot(&self, i: usize) -> &SizeDistribution {
        &self.snapshots[i]
    }

    pub fn moments(&self, i: usize) -> MomentVector {
        self.moments[i]
    }

    /// Gel-mass flux `d gel/dt` at output time `i`.
    pub fn gel_flux(&self, i: usize) -> f64 {
        self.gel_flux[i]
    }

    /// Total density mass removed by the positivity projection over the run.
    pub fn projected_mass(&self) -> f64 {
        self.projected_mass
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted_steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected_steps
    }

    /// Worst deviation of `m1(t) + gel(t)` from its initial value over all
    /// output times.
    pub fn conservation_defect(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total0 = self.moments[0].m1 + self.snapshots[0].gel_mass();
        self.moments
            .iter()
            .zip(&self.snapshots)
            .map(|(m, s)| (m.m1 + s.gel_mass() - total0).abs())
            .fold(0.0, f64::max)
    }
}

// Dormand-Prince 5(4) tableau. The generator is autonomous, so the stage
// abscissae never enter.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct F {
    mode: crate::dist::ConvolutionMode,
    n: usize,
    evals: usize,
}

impl F {
    /// Derivative of the extended state `[rho(1..N), gel]`.
    fn eval(&mut self, y: &[f64]) -> Vec<f64> {
        self.evals += 1;
        let out: RhsOutput = rhs_from_slice(&y[..self.n], self.mode);
        let mut d = out.d_densities;
        d.push(out.d_gel_mass);
        d
    }
}

/// Integrates the system from `rho0` to `cfg.t_end`.
///
/// Snapshots are recorded at `t = 0`, after every `cfg.output_stride`
/// accepted steps, and at `t_end` exactly (the final step is shortened).
pub fn integrate(
    rho0: &SizeDistribution,
    cfg: &SimulationConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate().map_err(|e| IntegrateError::Invalid(e.to_string()))?;
    if rho0.truncation_n() != cfg.truncation_n {
        return Err(IntegrateError::Invalid(format!(
            "initial data truncated at {} but config says {}",
            rho0.truncation_n(),
            cfg.truncation_n
        )));
    }
    let n = rho0.truncation_n();
    let (abs_tol, rel_tol) = (cfg.abs_tol, cfg.rel_tol);
    let mut f = F {
        mode: cfg.convolution_mode,
        n,
        evals: 0,
    };

    let mut y: Vec<f64> = rho0.densities().to_vec();
    y.push(rho0.gel_mass());
    let mut t = 0.0f64;
    let mut k1 = f.eval(&y);

    // The coagulation loss term makes the Jacobian diagonal reach -N*m1;
    // keep h inside the explicit stability disk to avoid reject thrash.
    let spectral_cap = |y: &[f64]| -> f64 {
        let m1: f64 = y[..n]
            .iter()
            .enumerate()
            .map(|(i, &r)| (i + 1) as f64 * r)
            .sum();
        3.0 / (n as f64 * m1.abs() + 0.5 * n as f64 + 1.0)
    };

    let mut h = initial_step(&y, &k1, abs_tol, rel_tol, cfg.t_end).min(spectral_cap(&y));

    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        moments: Vec::new(),
        gel_flux: Vec::new(),
        projected_mass: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    record(&mut traj, t, &y, &k1, n);

    let mut err_prev: f64 = 1.0;
    let mut since_output = 0usize;
    let h_floor = 1e-14 * cfg.t_end;

    while t < cfg.t_end {
        let mut last = t + h >= cfg.t_end;
        if last {
            h = cfg.t_end - t;
        }
        if h < h_floor {
            return Err(IntegrateError::StepSizeUnderflow { t, h });
        }

        // stage loop (k1 carried over: FSAL)
        let mut k = vec![k1.clone()];
        for s in 0..6 {
            let mut ys = y.clone();
            for (ki, &a) in k.iter().zip(&A[s]) {
                if a != 0.0 {
                    for (yv, kv) in ys.iter_mut().zip(ki) {
                        *yv += h * a * kv;
                    }
                }
            }
            k.push(f.eval(&ys));
        }

        // 5th-order solution (stage 6 state is exactly it, but recompute
        // via B5 so the weights stay the single source of truth)
        let mut y5 = y.clone();
        for (ki, &b) in k.iter().zip(&B5) {
            if b != 0.0 {
                for (yv, kv) in y5.iter_mut().zip(ki) {
                    *yv += h * b * kv;
                }
            }
        }

        // scaled error estimate, max norm
        let mut err: f64 = 0.0;
        for i in 0..=n {
            let mut e = 0.0;
            for (ki, (&b5, &b4)) in k.iter().zip(B5.iter().zip(&B4)) {
                e += (b5 - b4) * ki[i];
            }
            e *= h;
            let sc = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }

        if err <= 1.0 {
            t += h;
            y = y5;
            traj.accepted_steps += 1;

            // positivity projection with logging
            let mut projected = false;
            for i in 0..n {
                if y[i] < 0.0 {
                    if y[i] < -10.0 * abs_tol {
                        return Err(IntegrateError::NegativityFailure {
                            size: i + 1,
                            value: y[i],
                            t,
                        });
                    }
                    traj.projected_mass += (i + 1) as f64 * (-y[i]);
                    y[i] = 0.0;
                    projected = true;
                }
            }
            if y[n] < 0.0 {
                if y[n] < -10.0 * abs_tol {
                    return Err(IntegrateError::NegativityFailure {
                        size: 0,
                        value: y[n],
                        t,
                    });
                }
                y[n] = 0.0;
                projected = true;
            }

            // FSAL: the last stage was evaluated at the accepted state,
            // unless the projection just moved it
            k1 = if projected {
                f.eval(&y)
            } else {
                k.pop().expect("seven stages")
            };
            since_output += 1;
            if t >= cfg.t_end {
                last = true;
            }
            if since_output >= cfg.output_stride || last {
                record(&mut traj, t, &y, &k1, n);
                since_output = 0;
            }

            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            err_prev = err.max(1e-10);
            h = (h * fac.clamp(0.2, 5.0)).min(spectral_cap(&y));
        } else {
            traj.rejected_steps += 1;
            let fac = 0.9 * err.powf(-1.0 / 5.0);
            h *= fac.clamp(0.2, 1.0);
        }
    }
    Ok(traj)
}

fn record(traj: &mut Trajectory, t: f64, y: &[f64], k: &[f64], n: usize) {
    let snap = SizeDistribution::with_gel_mass(y[..n].to_vec(), y[n])
        .expect("projected state is a valid distribution");
    traj.times.push(t);
    traj.moments.push(snap.moments());
    traj.gel_flux.push(k[n]);
    traj.snapshots.push(snap);
}

/// Conservative first step from the scaled norms of the state and its
/// derivative.
fn initial_step(y: &[f64], f0: &[f64], abs_tol: f64, rel_tol: f64, t_end: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (yv, fv) in y.iter().zip(f0) {
        let sc = abs_tol + rel_tol * yv.abs();
        d0 = d0.max((yv / sc).abs());
        d1 = d1.max((fv / sc).abs());
    }
    if d1 <= 1e-30 {
        return t_end / 100.0;
    }
    (0.01 * d0.max(1.0) / d1).clamp(1e-10 * t_end, t_end / 10.0)
}

/// First output time at which `gel(t) / (m1(0) + gel(0)) >= threshold`.
pub fn detect_gelation(traj: &Trajectory, threshold: f64) -> Option<f64> {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "threshold must lie in (0,1)"
    );
    if traj.is_empty() {
        return None;
    }
    let total0 = traj.moments(0).m1 + traj.snapshot(0).gel_mass();
    if total0 <= 0.0 {
        return None;
    }
    (0..traj.len())
        .find(|&i| traj.snapshot(i).gel_mass() / total0 >= threshold)
        .map(|i| traj.time(i))
}
