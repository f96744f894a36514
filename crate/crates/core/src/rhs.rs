//! Right-hand side of the coagulation-fragmentation system for the
//! multiplicative coagulation kernel `a(j,k) = jk` and constant
//! fragmentation kernel `b = 1`, on a finite truncation `j = 1..=N`.
//!
//! The coagulation gain is the discrete self-convolution of `w(j) = j rho(j)`;
//! it is evaluated either directly (O(N^2)) or via FFT (O(N log N)).
//! Coagulation products of total size above `N` are routed to the gel
//! accumulator by mass-conservation closure.

use crate::dist::{ConvolutionMode, SizeDistribution};
use crate::fft::self_convolve_prefix;
use crate::numeric::neumaier_sum;

/// `Auto` convolution mode switches to FFT at and above this truncation.
pub const FFT_AUTO_THRESHOLD: usize = 256;

/// In FFT mode the first few gain components are few-term sums whose
/// magnitude can sit far below the sequence norm; transform noise would
/// dominate them. They are summed directly, which keeps the FFT path
/// componentwise-accurate at negligible cost.
const DIRECT_HEAD: usize = 32;

/// Time derivative of a distribution: per-size density rates plus the mass
/// flux into the gel accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsOutput {
    pub d_densities: Vec<f64>,
    pub d_gel_mass: f64,
}

impl RhsOutput {
    fn zeros(n: usize) -> Self {
        Self {
            d_densities: vec![0.0; n],
            d_gel_mass: 0.0,
        }
    }

    /// Signed mass-conservation defect `sum_j j d(j) + d_gel`; zero up to
    /// rounding for every generator evaluation.
    pub fn mass_defect(&self) -> f64 {
        neumaier_sum(
            self.d_densities
                .iter()
                .enumerate()
                .map(|(i, &d)| (i + 1) as f64 * d)
                .chain(std::iter::once(self.d_gel_mass)),
        )
    }

    fn add(mut self, other: &RhsOutput) -> Self {
        for (a, b) in self.d_densities.iter_mut().zip(&other.d_densities) {
            *a += b;
        }
        self.d_gel_mass += other.d_gel_mass;
        self
    }
}

fn resolve_mode(mode: ConvolutionMode, n: usize) -> ConvolutionMode {
    match mode {
        ConvolutionMode::Auto => {
            if n >= FFT_AUTO_THRESHOLD {
                ConvolutionMode::Fft
            } else {
                ConvolutionMode::Direct
            }
        }
        other => other,
    }
}

/// Coagulation generator `Q_c` with kernel `a(j,k) = jk`.
///
/// Gain: `(1/2) sum_{k<j} (j-k) k rho(j-k) rho(k)`. Loss: `-j rho(j) m1`.
/// The gel flux is the mass the finite part loses, `-sum_j j (gain+loss)(j)`,
/// which equals the pair-enumeration flux exactly (see [`reference`]).
pub fn coagulation(rho: &SizeDistribution, mode: ConvolutionMode) -> RhsOutput {
    coagulation_from_slice(rho.densities(), mode)
}

fn coagulation_from_slice(densities: &[f64], mode: ConvolutionMode) -> RhsOutput {
    let n = densities.len();
    let m1 = neumaier_sum(
        densities
            .iter()
            .enumerate()
            .map(|(i, &r)| (i + 1) as f64 * r),
    );
    let w: Vec<f64> = densities
        .iter()
        .enumerate()
        .map(|(i, &r)| (i + 1) as f64 * r)
        .collect();

    let mut out = RhsOutput::zeros(n);
    match resolve_mode(mode, n) {
        ConvolutionMode::Direct => {
            for j in 2..=n {
                let mut gain = 0.0;
                for k in 1..j {
                    gain += w[k - 1] * w[j - k - 1];
                }
                out.d_densities[j - 1] = 0.5 * gain;
            }
        }
        ConvolutionMode::Fft => {
            // w is stored 0-indexed: w[i] = (i+1) rho(i+1), so the linear
            // self-convolution index j-2 holds sum_{k<j} w(k) w(j-k).
            let head = DIRECT_HEAD.min(n);
            let conv = self_convolve_prefix(&w, n.saturating_sub(1));
            for j in 2..=head {
                let mut gain = 0.0;
                for k in 1..j {
                    gain += w[k - 1] * w[j - k - 1];
                }
                out.d_densities[j - 1] = 0.5 * gain;
            }
            for j in (head + 1)..=n {
                out.d_densities[j - 1] = 0.5 * conv[j - 2];
            }
        }
        ConvolutionMode::Auto => unreachable!(),
    }

    for j in 1..=n {
        out.d_densities[j - 1] -= j as f64 * densities[j - 1] * m1;
    }

    // Mass closure: whatever mass the finite part loses went past N.
    let flux = -neumaier_sum(
        out.d_densities
            .iter()
            .enumerate()
            .map(|(i, &d)| (i + 1) as f64 * d),
    );
    // The true flux is nonnegative; tiny negative values are closure rounding.
    out.d_gel_mass = flux.max(0.0);
    out
}

/// Fragmentation generator `Q_f` with kernel `b = 1`.
///
/// `d(j) = -(j-1)/2 rho(j) + sum_{k=j+1..N} rho(k)`. Every fragment of a
/// cluster `<= N` stays below `N`, so fragmentation conserves mass exactly
/// and contributes no gel flux.
pub fn fragmentation(rho: &SizeDistribution) -> RhsOutput {
    fragmentation_from_slice(rho.densities())
}

fn fragmentation_from_slice(densities: &[f64]) -> RhsOutput {
    let n = densities.len();
    let mut out = RhsOutput::zeros(n);
    // Backward suffix-sum pass: O(N) for all gain terms.
    let mut suffix = 0.0;
    for j in (1..=n).rev() {
        out.d_densities[j - 1] = suffix - 0.5 * (j as f64 - 1.0) * densities[j - 1];
        suffix += densities[j - 1];
    }
    out
}

/// Full generator `Q_c + Q_f`.
pub fn rhs(rho: &SizeDistribution, mode: ConvolutionMode) -> RhsOutput {
    rhs_from_slice(rho.densities(), mode)
}

/// Generator evaluated on a raw density slice. Runge-Kutta stage vectors
/// may carry rounding-scale negative entries, which the polynomial
/// generator formulas tolerate; the distribution type would reject them.
pub(crate) fn rhs_from_slice(densities: &[f64], mode: ConvolutionMode) -> RhsOutput {
    coagulation_from_slice(densities, mode).add(&fragmentation_from_slice(densities))
}

/// Slow reference forms kept as independent oracles for the optimized paths.
pub mod reference {
    use super::*;

    /// Gel flux by explicit enumeration of coagulation pairs with `j + k > N`:
    /// each ordered pair contributes `(j+k) * jk rho(j) rho(k) / 2`.
    pub fn gel_flux_by_pairs(rho: &SizeDistribution) -> f64 {
        let n = rho.truncation_n();
        let d = rho.densities();
        let mut flux = 0.0;
        for j in 1..=n {
            for k in (n + 1 - j).max(1)..=n {
                flux += 0.5 * (j + k) as f64 * (j * k) as f64 * d[j - 1] * d[k - 1];
            }
        }
        flux
    }

    /// Coagulation by direct evaluation of both sums, no convolution tricks.
    pub fn coagulation_by_pairs(rho: &SizeDistribution) -> RhsOutput {
        let n = rho.truncation_n();
        let d = rho.densities();
        let mut out = RhsOutput::zeros(n);
        for j in 1..=n {
            let mut gain = 0.0;
            for k in 1..j {
                gain += ((j - k) * k) as f64 * d[j - k - 1] * d[k - 1];
            }
            let mut loss = 0.0;
            for k in 1..=n {
                loss += (j * k) as f64 * d[k - 1];
            }
            out.d_densities[j - 1] = 0.5 * gain - d[j - 1] * loss;
        }
        out.d_gel_mass = gel_flux_by_pairs(rho);
        out
    }
}
