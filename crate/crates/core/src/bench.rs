//! Timing harness for the right-hand-side evaluation paths.
//!
//! Correctness comes first: the two paths are cross-checked on every bench
//! size before any clock starts, and a failed check refuses to produce
//! timings at all.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dist::{ConvolutionMode, SizeDistribution};
use crate::rhs;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cross-check failed at n={n}, size {j}: direct {direct} vs fft {fft}")]
    CrossCheckFailed { n: usize, j: usize, direct: f64, fft: f64 },
    #[error("need at least 5 repetitions, got {0}")]
    TooFewRepetitions(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub direct_median_ns: u128,
    pub direct_spread_ns: u128,
    pub fft_median_ns: u128,
    pub fft_spread_ns: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Smallest measured size at which the FFT path's median beats direct.
    pub fft_crossover_n: Option<usize>,
}

fn median_and_spread(mut samples: Vec<u128>) -> (u128, u128) {
    samples.sort_unstable();
    let median = samples[samples.len() / 2];
    let spread = samples[samples.len() - 1] - samples[0];
    (median, spread)
}

/// Times `rhs` in both convolution modes for each size.
pub fn bench_rhs(sizes: &[usize], repetitions: usize, seed: u64) -> Result<BenchReport, BenchError> {
    // componentwise agreement up to the FFT's norm-scale noise floor
    bench_rhs_with_gate(sizes, repetitions, seed, 1e-9, 1e-12)
}

/// Bench with an explicit correctness gate (`|a-b| <= rel |a| + abs scale`);
/// the tests inject an impossible gate to exercise the refusal path.
pub fn bench_rhs_with_gate(
    sizes: &[usize],
    repetitions: usize,
    seed: u64,
    gate_rel: f64,
    gate_abs: f64,
) -> Result<BenchReport, BenchError> {
    if repetitions < 5 {
        return Err(BenchError::TooFewRepetitions(repetitions));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rho = SizeDistribution::new(densities).expect("positive random densities");

        // correctness gate before any timing
        let direct = rhs::rhs(&rho, ConvolutionMode::Direct);
        let fft = rhs::rhs(&rho, ConvolutionMode::Fft);
        let scale = direct
            .d_densities
            .iter()
            .fold(0.0f64, |acc, &d| acc.max(d.abs()));
        for j in 0..n {
            let a = direct.d_densities[j];
            let b = fft.d_densities[j];
            if (a - b).abs() > gate_rel * a.abs() + gate_abs * scale {
                return Err(BenchError::CrossCheckFailed {
                    n,
                    j: j + 1,
                    direct: a,
                    fft: b,
                });
            }
        }

        let time_mode = |mode: ConvolutionMode| -> Vec<u128> {
            (0..repetitions)
                .map(|_| {
                    let start = Instant::now();
                    let out = rhs::rhs(&rho, mode);
                    std::hint::black_box(&out);
                    start.elapsed().as_nanos()
                })
                .collect()
        };
        let (direct_median_ns, direct_spread_ns) = median_and_spread(time_mode(ConvolutionMode::Direct));
        let (fft_median_ns, fft_spread_ns) = median_and_spread(time_mode(ConvolutionMode::Fft));
        rows.push(BenchRow {
            n,
            direct_median_ns,
            direct_spread_ns,
            fft_median_ns,
            fft_spread_ns,
        });
    }
    let fft_crossover_n = rows
        .iter()
        .find(|r| r.fft_median_ns < r.direct_median_ns)
        .map(|r| r.n);
    Ok(BenchReport { rows, fft_crossover_n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_size_report() {
        let report = bench_rhs(&[64], 5, 1).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].direct_median_ns > 0);
    }

    #[test]
    fn rejects_too_few_repetitions() {
        assert!(matches!(
            bench_rhs(&[64], 3, 1),
            Err(BenchError::TooFewRepetitions(3))
        ));
    }

    #[test]
    fn injected_fault_refuses_timings() {
        // a zero-width gate makes ordinary FFT rounding count as a fault
        assert!(matches!(
            bench_rhs_with_gate(&[64], 5, 1, 0.0, 0.0),
            Err(BenchError::CrossCheckFailed { .. })
        ));
    }

    #[test]
    fn fft_wins_at_large_sizes() {
        let report = bench_rhs(&[1024, 4096], 5, 3).unwrap();
        let big = &report.rows[1];
        assert!(
            big.fft_median_ns < big.direct_median_ns,
            "fft {} ns vs direct {} ns at n=4096",
            big.fft_median_ns,
            big.direct_median_ns
        );
    }
}
