//! Stationary solutions of the coagulation-fragmentation system.
//!
//! The equilibrium density with mass `m` is pinned by the recursion
//!
//! ```text
//! rho~(l) = [ 2 m(1-m) + sum_{i<l} i(l-i) rho~(i) rho~(l-i)
//!                      - 2 sum_{i<l} rho~(i) ] / ((2m+1) l + 1)
//! ```
//!
//! together with the moment identities `sum rho~ = m(1-m)` and
//! `sum l rho~ = m`. A unique nonnegative solution exists for `m` in
//! `(0, 1/2]`; none exists for `m >= 1` (the recursion's first value is
//! already nonpositive); for `m` in `(1/2, 1)` positivity is an open
//! question that this module probes by scanning.
//!
//! Numerics. Two reformulations keep the computed tables faithful:
//!
//! - The bracketed numerator is assembled as `2 T(l-1) + S(l)` where
//!   `T(l) = m(1-m) - sum_{i<=l} rho~(i)` is carried as its own accumulator.
//!   `T` is the tail of the zeroth-moment series, so for a nonnegative
//!   solution the numerator is a sum of nonnegatives; the textbook form
//!   loses the tail to cancellation as soon as it drops under the rounding
//!   floor of the prefix sum, after which the computed values are noise of
//!   either sign.
//! - The solution tails decay geometrically and leave the `f64` exponent
//!   range within a couple thousand terms, so the sequential chain runs on
//!   [`WideFloat`] scalars (`f64` mantissa, `i64` exponent). The moment
//!   gaps then stay strictly monotone in the table length instead of
//!   flushing to zero.

use serde::Serialize;

use crate::dist::{ConvolutionMode, SizeDistribution};
use crate::fft::self_convolve_prefix;
use crate::numeric::WideFloat;
use crate::rhs;

/// Above this length the recursion switches from the exact O(L^2) loop to
/// divide-and-conquer FFT blocks in plain `f64`.
pub const FFT_RECURSION_THRESHOLD: usize = 10_000;

/// Equilibrium table `rho~(1..=L)` plus partial-sum diagnostics.
///
/// Values are reported in `f64` (entries below ~1e-308 flush to zero); the
/// moment-gap accumulators keep their wide-exponent form so that tail
/// comparisons between table lengths remain meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTable {
    mass_m: f64,
    values: Vec<f64>,
    m0_gap: WideFloat,
    m1_gap: WideFloat,
}

impl EquilibriumTable {
    pub fn mass_m(&self) -> f64 {
        self.mass_m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `rho~(l)`, 1-indexed.
    pub fn value(&self, l: usize) -> f64 {
        self.values[l - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_{l<=L} rho~(l)`, reported through the tail gap so the identity
    /// `partial_m0 + m0_gap = m(1-m)` is exact by construction.
    pub fn partial_m0(&self) -> f64 {
        self.mass_m * (1.0 - self.mass_m) - self.m0_gap.to_f64()
    }

    /// `sum_{l<=L} l rho~(l)`.
    pub fn partial_m1(&self) -> f64 {
        self.mass_m - self.m1_gap.to_f64()
    }

    /// `m(1-m) - partial_m0` as an `f64` (0.0 once below the f64 range).
    pub fn m0_gap(&self) -> f64 {
        self.m0_gap.to_f64()
    }

    /// `m - partial_m1` as an `f64`.
    pub fn m1_gap(&self) -> f64 {
        self.m1_gap.to_f64()
    }

    /// Full-precision gap accumulators, strictly comparable across lengths
    /// far below the `f64` range.
    pub fn m0_gap_wide(&self) -> WideFloat {
        self.m0_gap
    }

    pub fn m1_gap_wide(&self) -> WideFloat {
        self.m1_gap
    }

    /// View of the table as a size distribution with truncation `L`
    /// (meaningful for nonnegative tables only).
    pub fn to_distribution(&self) -> Result<SizeDistribution, crate::dist::DistError> {
        SizeDistribution::new(self.values.clone())
    }
}

struct WideRecursion {
    m: f64,
    values: Vec<WideFloat>,
    /// w(l) = l rho~(l), the sequence the convolution runs over.
    weights: Vec<WideFloat>,
    /// Tail of the m0 identity, `m(1-m) - prefix sum`.
    t0: WideFloat,
    /// Tail of the m1 identity, `m - weighted prefix sum`.
    t1: WideFloat,
}

impl WideRecursion {
    fn new(m: f64, l_max: usize) -> Self {
        Self {
            m,
            values: Vec::with_capacity(l_max),
            weights: Vec::with_capacity(l_max),
            t0: WideFloat::from_f64(m * (1.0 - m)),
            t1: WideFloat::from_f64(m),
        }
    }

    /// Finalizes rho~(l) given the completed convolution term
    /// `S(l) = sum_{i<l} i(l-i) rho~(i) rho~(l-i)`.
    fn finalize(&mut self, l: usize, conv: WideFloat) {
        let denom = (2.0 * self.m + 1.0) * l as f64 + 1.0;
        let value = (self.t0.mul_f64(2.0) + conv).div_f64(denom);
        self.values.push(value);
        self.weights.push(value.mul_f64(l as f64));

        // The tails of a nonnegative series are nonnegative; a sign flip
        // here is pure rounding and is pinned to zero.
        let pin = |tail: WideFloat, spent: WideFloat| {
            let next = tail - spent;
            if next.is_negative() && !tail.is_negative() && !spent.is_negative() {
                WideFloat::ZERO
            } else {
                next
            }
        };
        self.t0 = pin(self.t0, value);
        self.t1 = pin(self.t1, value.mul_f64(l as f64));
    }

    fn into_table(self) -> EquilibriumTable {
        EquilibriumTable {
            mass_m: self.m,
            values: self.values.iter().map(|v| v.to_f64()).collect(),
            m0_gap: self.t0,
            m1_gap: self.t1,
        }
    }
}

fn run_wide(m: f64, l_max: usize) -> WideRecursion {
    let mut state = WideRecursion::new(m, l_max);
    for l in 1..=l_max {
        let mut conv = WideFloat::ZERO;
        let w = &state.weights;
        for i in 1..l {
            conv = conv + w[i - 1] * w[l - i - 1];
        }
        state.finalize(l, conv);
    }
    state
}

fn recursion_wide(m: f64, l_max: usize) -> EquilibriumTable {
    run_wide(m, l_max).into_table()
}

/// Throughput variant in plain `f64`: divide-and-conquer online
/// self-convolution (solve the left half, push its cross-contributions onto
/// the right half with FFT products, recurse right), O(L log^2 L) total.
/// Tail bookkeeping follows the same pinned-tail scheme but saturates at
/// the `f64` floor, which is irrelevant at the lengths this path serves.
fn recursion_fft(m: f64, l_max: usize) -> EquilibriumTable {
    const LEAF: usize = 64;

    struct F64Recursion {
        m: f64,
        values: Vec<f64>,
        weights: Vec<f64>,
        t0: f64,
        t1: f64,
    }

    impl F64Recursion {
        fn finalize(&mut self, l: usize, conv: f64) {
            let denom = (2.0 * self.m + 1.0) * l as f64 + 1.0;
            let value = (2.0 * self.t0 + conv) / denom;
            self.values.push(value);
            self.weights.push(l as f64 * value);
            let pin = |tail: f64, spent: f64| {
                let next = tail - spent;
                if next < 0.0 && tail >= 0.0 && spent >= 0.0 {
                    0.0
                } else {
                    next
                }
            };
            self.t0 = pin(self.t0, value);
            self.t1 = pin(self.t1, l as f64 * value);
        }
    }

    fn solve(state: &mut F64Recursion, pending: &mut [f64], lo: usize, hi: usize) {
        if hi - lo < LEAF {
            for l in lo..=hi {
                // pending[l - lo] holds every ordered pair with BOTH indices
                // below lo; add the pairs whose larger index reaches [lo, l):
                // twice when the partner sits below lo, once per order when
                // both are inside.
                let mut conv = pending[l - lo];
                let w = &state.weights;
                for i in lo..l {
                    let j = l - i;
                    let prod = w[i - 1] * w[j - 1];
                    conv += if j < lo { 2.0 * prod } else { prod };
                }
                state.finalize(l, conv);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let (left_pending, right_pending) = pending.split_at_mut(mid + 1 - lo);
        solve(state, left_pending, lo, mid);

        // Ordered pairs (i, j), i + j = l in (mid, hi], with i in [lo, mid]:
        // counted twice when j < lo (both orders), once when j in [lo, mid].
        let w = &state.weights;
        let block: Vec<f64> = w[lo - 1..mid].to_vec();
        let lo_prefix_len = (hi - lo).min(lo.saturating_sub(1));
        if lo_prefix_len > 0 {
            let cross = cross_convolve(&block, &w[..lo_prefix_len]);
            for l in (mid + 1)..=hi {
                // block index a + prefix index b: sizes (lo+a) + (1+b) = l
                let idx = l - lo - 1;
                if idx < cross.len() {
                    right_pending[l - mid - 1] += 2.0 * cross[idx];
                }
            }
        }
        if hi >= 2 * lo {
            let self_conv =
                self_convolve_prefix(&block, (2 * block.len() - 1).min(hi - 2 * lo + 1));
            for l in (mid + 1).max(2 * lo)..=hi {
                // sizes (lo+a) + (lo+b) = l
                let idx = l - 2 * lo;
                if idx < self_conv.len() {
                    right_pending[l - mid - 1] += self_conv[idx];
                }
            }
        }
        solve(state, right_pending, mid + 1, hi);
    }

    /// Linear cross-convolution via three squared transforms:
    /// `ab = ((a+b)^2 - a^2 - b^2) / 2`.
    fn cross_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len().max(b.len());
        let out_len = a.len() + b.len() - 1;
        let mut sum = vec![0.0; n];
        for (s, &v) in sum.iter_mut().zip(a) {
            *s += v;
        }
        for (s, &v) in sum.iter_mut().zip(b) {
            *s += v;
        }
        let sq_sum = self_convolve_prefix(&sum, out_len.min(2 * n));
        let sq_a = self_convolve_prefix(a, (2 * a.len() - 1).min(out_len));
        let sq_b = self_convolve_prefix(b, (2 * b.len() - 1).min(out_len));
        (0..out_len)
            .map(|i| {
                let s = sq_sum.get(i).copied().unwrap_or(0.0);
                let x = sq_a.get(i).copied().unwrap_or(0.0);
                let y = sq_b.get(i).copied().unwrap_or(0.0);
                0.5 * (s - x - y)
            })
            .collect()
    }

    let mut state = F64Recursion {
        m,
        values: Vec::with_capacity(l_max),
        weights: Vec::with_capacity(l_max),
        t0: m * (1.0 - m),
        t1: m,
    };
    let mut pending = vec![0.0; l_max];
    solve(&mut state, &mut pending, 1, l_max);
    EquilibriumTable {
        mass_m: m,
        values: state.values,
        m0_gap: WideFloat::from_f64(state.t0),
        m1_gap: WideFloat::from_f64(state.t1),
    }
}

/// Computes `rho~(1..=L)` by the recursion, in increasing `l`.
///
/// Negative values are reported as-is: they certify nonexistence for
/// `m >= 1` rather than indicating a failure.
pub fn recursion(m: f64, l_max: usize) -> EquilibriumTable {
    assert!(m > 0.0, "mass must be positive");
    assert!(l_max >= 1);
    if l_max > FFT_RECURSION_THRESHOLD {
        recursion_fft(m, l_max)
    } else {
        recursion_wide(m, l_max)
    }
}

/// Moment-identity gaps at length `L`, measured as tail mass: the recursion
/// is extended to `2L` and the computed extension is summed.
///
/// The in-table gap accumulators are subtraction chains; each step removes
/// the bulk of the remaining tail, so their relative error grows
/// geometrically and they bottom out near the `m`-scale rounding floor
/// (~1e-17). Summing the extension values instead involves only additions
/// of positives, which keeps the reported gaps positive and strictly
/// monotone in `L` for as long as the computed tail itself decays.
/// Meaningful for the nonnegative regime `m < 1`.
pub fn tail_gaps(m: f64, l: usize) -> (WideFloat, WideFloat) {
    assert!(m > 0.0 && m < 1.0);
    if 2 * l > FFT_RECURSION_THRESHOLD {
        let extended = recursion_fft(m, 2 * l);
        let mut g0 = WideFloat::ZERO;
        let mut g1 = WideFloat::ZERO;
        for idx in (l..2 * l).rev() {
            let v = WideFloat::from_f64(extended.values[idx]);
            g0 = g0 + v;
            g1 = g1 + v.mul_f64((idx + 1) as f64);
        }
        return (g0, g1);
    }
    let extended = run_wide(m, 2 * l);
    let mut g0 = WideFloat::ZERO;
    let mut g1 = WideFloat::ZERO;
    // summed smallest-first so each add is relatively exact
    for idx in (l..2 * l).rev() {
        let v = extended.values[idx];
        g0 = g0 + v;
        g1 = g1 + v.mul_f64((idx + 1) as f64);
    }
    (g0, g1)
}

/// Existence/nonexistence decision per mass regime.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ExistenceVerdict {
    /// `m` in (0, 1/2]: the unique nonnegative stationary solution.
    ExistsUnique {
        #[serde(skip)]
        table: EquilibriumTable,
        min_value: f64,
    },
    /// `m >= 1`: no stationary solution; the witness is `rho~(1) <= 0`.
    Nonexistent { witness_rho1: f64 },
    /// `m` in (1/2, 1): positivity of the recursion is conjectural; the scan
    /// reports what the first `L` terms look like.
    Conjectural {
        #[serde(skip)]
        table: EquilibriumTable,
        scan: PositivityScan,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityScan {
    pub scanned_len: usize,
    pub min_value: f64,
    pub min_at_l: usize,
    pub negative_count: usize,
}

fn scan_positivity(table: &EquilibriumTable) -> PositivityScan {
    let mut min_value = f64::INFINITY;
    let mut min_at_l = 1;
    let mut negative_count = 0;
    for (i, &v) in table.values().iter().enumerate() {
        if v < min_value {
            min_value = v;
            min_at_l = i + 1;
        }
        if v < 0.0 {
            negative_count += 1;
        }
    }
    PositivityScan {
        scanned_len: table.len(),
        min_value,
        min_at_l,
        negative_count,
    }
}

pub fn existence_verdict(m: f64, l_max: usize) -> ExistenceVerdict {
    assert!(m > 0.0, "mass must be positive");
    if m >= 1.0 {
        // rho~(1) = m(1-m)/(m+1) <= 0 for m >= 1 kills nonnegativity at l=1.
        let witness = recursion(m, 1).value(1);
        return ExistenceVerdict::Nonexistent { witness_rho1: witness };
    }
    let table = recursion(m, l_max);
    if m <= 0.5 {
        let scan = scan_positivity(&table);
        debug_assert_eq!(scan.negative_count, 0);
        ExistenceVerdict::ExistsUnique {
            min_value: scan.min_value,
            table,
        }
    } else {
        let scan = scan_positivity(&table);
        ExistenceVerdict::Conjectural { scan, table }
    }
}

/// Validation report for a table in the proven regime `m` in (0, 1/2].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub m0_gap: f64,
    pub m1_gap: f64,
    pub m0_gap_log10: f64,
    pub m1_gap_log10: f64,
    /// Observed per-step tail decay ratio near the end of the accurate range.
    pub tail_decay_ratio: f64,
    /// `max_j |Q_c(rho~) + Q_f(rho~)|(j)` over `j <= L/2` with `N = L`.
    pub rhs_residual_sup: f64,
    pub residual_checked_up_to: usize,
}

/// Checks the fixed-point property and moment identities of a recursion
/// table using the kinetic right-hand side as the oracle.
pub fn validate(table: &EquilibriumTable) -> ValidationReport {
    assert!(
        table.mass_m() > 0.0 && table.mass_m() <= 0.5,
        "validation contract covers the proven regime m in (0, 1/2]"
    );
    let rho = table
        .to_distribution()
        .expect("tables in (0, 1/2] are nonnegative");
    let out = rhs::rhs(&rho, ConvolutionMode::Auto);
    let half = table.len() / 2;
    let mut sup = 0.0f64;
    for j in 1..=half {
        sup = sup.max(out.d_densities[j - 1].abs());
    }

    // Decay ratio measured where values are still clearly above rounding.
    let mut ratio = f64::NAN;
    let vals = table.values();
    if let Some(anchor) = vals.iter().position(|&v| v < 1e-10) {
        if anchor >= 2 && vals[anchor - 2] > 0.0 {
            ratio = vals[anchor - 1] / vals[anchor - 2];
        }
    } else if vals.len() >= 2 {
        ratio = vals[vals.len() - 1] / vals[vals.len() - 2];
    }

    ValidationReport {
        m0_gap: table.m0_gap(),
        m1_gap: table.m1_gap(),
        m0_gap_log10: table.m0_gap_wide().log10_abs(),
        m1_gap_log10: table.m1_gap_wide().log10_abs(),
        tail_decay_ratio: ratio,
        rhs_residual_sup: sup,
        residual_checked_up_to: half,
    }
}
