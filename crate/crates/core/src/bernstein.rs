//! The discrete Bernstein transform and its generating-function form.
//!
//! For a density `rho` on sizes `j >= 1`:
//!
//! ```text
//! F(x) = sum_j (1 - e^{-jx}) rho(j)          x in [0, inf)
//! G(z) = F(-log z) = sum_l (1 - z^l) rho(l)  z in [0, 1]
//! ```
//!
//! `F` is nondecreasing concave with `0 <= F <= m (1 - e^{-x})`; `G` is
//! nonincreasing with `0 <= G <= m (1 - z)`, `G(0) = m0`, `G(1) = 0`, and
//! every `z`-derivative of `G` is nonpositive. Densities are recovered from
//! `G` by `rho(l) = -G^(l)(0) / l!`, approximated here by forward
//! differences (low orders) or coefficient recovery from sampled values
//! (high orders, where difference operators drown in rounding).

use thiserror::Error;

use crate::dist::SizeDistribution;
use crate::numeric::{binomial, factorial};

/// Finite differences beyond this order are hopeless in f64 (the signal
/// `l! h^l` falls under the rounding floor `2^l eps`); extraction switches
/// to solving for the series coefficients instead.
pub const MAX_DIFFERENCE_ORDER: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum BernsteinError {
    #[error("grid is missing node {node} needed for order-{order} extraction")]
    GridTooCoarse { node: f64, order: usize },
    #[error("operation requires a grid in {expected:?} form")]
    WrongVariable { expected: TransformVariable },
    #[error("order must be >= 1")]
    ZeroOrder,
    #[error("step h = {h} too large for order {order}: need l*h < 1/2")]
    StepTooLarge { h: f64, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformVariable {
    /// Bernstein form, `x` in `[0, x_max]`.
    X,
    /// Generating-function form, `z` in `[0, 1]`.
    Z,
}

/// Sampled transform values on a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformGrid {
    variable: TransformVariable,
    nodes: Vec<f64>,
    values: Vec<f64>,
    mass_m: f64,
}

impl TransformGrid {
    pub fn new(
        variable: TransformVariable,
        nodes: Vec<f64>,
        values: Vec<f64>,
        mass_m: f64,
    ) -> Self {
        assert_eq!(nodes.len(), values.len());
        assert!(
            nodes.windows(2).all(|w| w[0] < w[1]),
            "nodes must be strictly increasing"
        );
        if let Some(&first) = nodes.first() {
            assert!(first >= 0.0);
        }
        if variable == TransformVariable::Z {
            if let Some(&last) = nodes.last() {
                assert!(last <= 1.0);
            }
        }
        Self {
            variable,
            nodes,
            values,
            mass_m,
        }
    }

    pub fn variable(&self) -> TransformVariable {
        self.variable
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mass_m(&self) -> f64 {
        self.mass_m
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node equal to `x` up to an absolute slack of 1e-12.
    pub fn find_node(&self, x: f64) -> Option<usize> {
        let idx = self
            .nodes
            .partition_point(|&n| n < x - 1e-12);
        if idx < self.nodes.len() && (self.nodes[idx] - x).abs() <= 1e-12 {
            Some(idx)
        } else {
            None
        }
    }

    /// Worst violation of the constraint band and monotonicity expected of
    /// a transform of a nonnegative distribution; 0.0 for a clean grid.
    pub fn band_violation(&self) -> f64 {
        let m = self.mass_m;
        let mut worst = 0.0f64;
        for (&x, &v) in self.nodes.iter().zip(&self.values) {
            let cap = match self.variable {
                TransformVariable::X => m * (1.0 - (-x).exp()),
                TransformVariable::Z => m * (1.0 - x),
            };
            worst = worst.max(-v).max(v - cap);
        }
        for w in self.values.windows(2) {
            let drift = match self.variable {
                TransformVariable::X => w[0] - w[1], // must be nondecreasing
                TransformVariable::Z => w[1] - w[0], // must be nonincreasing
            };
            worst = worst.max(drift);
        }
        worst
    }
}

/// `F(x) = sum_j (1 - e^{-jx}) rho(j)` at the given nodes.
///
/// Gel mass contributes nothing: the transform runs over finite sizes only.
pub fn transform_f(rho: &SizeDistribution, nodes: &[f64]) -> TransformGrid {
    let values = nodes
        .iter()
        .map(|&x| {
            debug_assert!(x >= 0.0);
            let q = (-x).exp();
            let mut q_pow = 1.0;
            let mut sum = 0.0;
            for &r in rho.densities() {
                q_pow *= q;
                sum += (1.0 - q_pow) * r;
            }
            sum
        })
        .collect();
    TransformGrid::new(TransformVariable::X, nodes.to_vec(), values, rho.moment(1))
}

/// `G(z) = sum_l (1 - z^l) rho(l)` at the given nodes in `[0, 1]`.
pub fn transform_g(rho: &SizeDistribution, nodes: &[f64]) -> TransformGrid {
    let values = nodes
        .iter()
        .map(|&z| {
            debug_assert!((0.0..=1.0).contains(&z));
            let mut z_pow = 1.0;
            let mut sum = 0.0;
            for &r in rho.densities() {
                z_pow *= z;
                sum += (1.0 - z_pow) * r;
            }
            sum
        })
        .collect();
    TransformGrid::new(TransformVariable::Z, nodes.to_vec(), values, rho.moment(1))
}

/// Default extraction step: balances the O(h) difference bias against
/// cancellation, whose constant blows up like `2^{l+2}(l+1)! l`.
pub fn default_extraction_step(l: usize) -> f64 {
    (1e-3f64).min(0.1 / l as f64)
}

/// Node set sufficient for `extract_density` up to order `l_max` at step
/// `h`: the uniform stencil plus clustered nodes on `[0, 1/2]` for the
/// coefficient-recovery path.
pub fn extraction_nodes(l_max: usize, h: f64) -> Vec<f64> {
    // the largest uniform stencil reaches l*h for l <= min(l_max, 8)
    let top = l_max.clamp(1, MAX_DIFFERENCE_ORDER);
    let mut nodes: Vec<f64> = (0..=top).map(|j| j as f64 * h).collect();
    if l_max > MAX_DIFFERENCE_ORDER {
        let n = l_max + 4;
        for j in 0..=n {
            // Chebyshev-extrema layout mapped to [0, 1/2]
            let theta = std::f64::consts::PI * j as f64 / n as f64;
            nodes.push(0.25 * (1.0 - theta.cos()));
        }
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    nodes
}

/// Recovers `rho(l)` from sampled values of `G`.
///
/// For `l <= 8`: the forward-difference device
/// `rho(l) ~= -Delta_h^l G(0) / (l! h^l)`, with
/// `Delta_h^l G(0) = sum_j (-1)^{l-j} C(l,j) G(jh)`; first-order accurate
/// in `h`. For larger `l`: solve the (triangular, Newton-form) system
/// mapping series coefficients to the sampled values on `[0, 1/2]` and
/// read off the coefficient of `z^l`.
pub fn extract_density(g: &TransformGrid, l: usize, h: f64) -> Result<f64, BernsteinError> {
    if g.variable() != TransformVariable::Z {
        return Err(BernsteinError::WrongVariable {
            expected: TransformVariable::Z,
        });
    }
    if l == 0 {
        return Err(BernsteinError::ZeroOrder);
    }
    if l <= MAX_DIFFERENCE_ORDER {
        if l as f64 * h >= 0.5 {
            return Err(BernsteinError::StepTooLarge { h, order: l });
        }
        let mut delta = 0.0;
        for j in 0..=l {
            let node = j as f64 * h;
            let idx = g
                .find_node(node)
                .ok_or(BernsteinError::GridTooCoarse { node, order: l })?;
            let sign = if (l - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            delta += sign * binomial(l as u32, j as u32) * g.values()[idx];
        }
        Ok(-delta / (factorial(l as u32) * h.powi(l as i32)))
    } else {
        extract_by_coefficients(g, l)
    }
}

/// Coefficient recovery: `p(z) = G(0) - G(z)` is (to truncation) a
/// polynomial with coefficients `rho(1..)`; interpolate it at the grid's
/// nodes on `[0, 0.55]` with the Bjorck-Pereyra dual Vandermonde solve.
fn extract_by_coefficients(g: &TransformGrid, l: usize) -> Result<f64, BernsteinError> {
    let zero_idx = g.find_node(0.0).ok_or(BernsteinError::GridTooCoarse {
        node: 0.0,
        order: l,
    })?;
    let g0 = g.values()[zero_idx];

    let mut zs = Vec::new();
    let mut ps = Vec::new();
    for (&z, &v) in g.nodes().iter().zip(g.values()) {
        if z <= 0.55 {
            zs.push(z);
            ps.push(g0 - v);
        }
    }
    let needed = l + 2;
    if zs.len() < needed {
        return Err(BernsteinError::GridTooCoarse {
            node: 0.55,
            order: l,
        });
    }
    // A few nodes beyond order l absorb the next density terms; many more
    // only feed the Vandermonde's exponential conditioning. Pick the grid
    // nodes closest to a Chebyshev layout over the available span, refusing
    // picks crammed against the previous one (clustered nodes wreck the
    // divided-difference chain).
    let cap = (l + 4).min(zs.len());
    let span = *zs.last().unwrap();
    let mut picked: Vec<usize> = Vec::with_capacity(cap);
    for i in 0..cap {
        let theta = std::f64::consts::PI * i as f64 / (cap - 1) as f64;
        let target = 0.5 * span * (1.0 - theta.cos());
        let min_z = picked
            .last()
            .map(|&p| zs[p] + 0.1 * span / cap as f64)
            .unwrap_or(-1.0);
        let idx = zs
            .iter()
            .enumerate()
            .filter(|&(_, &z)| z >= min_z)
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap()
            })
            .map(|(i, _)| i);
        if let Some(idx) = idx {
            if picked.last() != Some(&idx) {
                picked.push(idx);
            }
        }
    }
    if picked.len() < needed {
        return Err(BernsteinError::GridTooCoarse {
            node: 0.55,
            order: l,
        });
    }
    let (zs, ps): (Vec<f64>, Vec<f64>) = picked.iter().map(|&i| (zs[i], ps[i])).unzip();

    // Bjorck-Pereyra for sum_k b_k (z_i/span)^k = p_i: divided differences,
    // then Newton-to-monomial back substitution. Solving in the rescaled
    // variable keeps the Vandermonde conditioning at its [0,1] level;
    // unscale the one coefficient we need at the end.
    let n = zs.len();
    let scale = *zs.last().unwrap();
    let zs: Vec<f64> = zs.iter().map(|&z| z / scale).collect();
    let mut a = ps;
    for k in 0..n - 1 {
        for j in (k + 1..n).rev() {
            a[j] = (a[j] - a[j - 1]) / (zs[j] - zs[j - k - 1]);
        }
    }
    for k in (0..n - 1).rev() {
        for j in k..n - 1 {
            let t = a[j + 1] * zs[k];
            a[j] -= t;
        }
    }
    if l >= n {
        return Err(BernsteinError::GridTooCoarse {
            node: 0.55,
            order: l,
        });
    }
    Ok(a[l] / scale.powi(l as i32))
}

/// One order of the complete-monotonicity check.
#[derive(Debug, Clone)]
pub struct OrderCheck {
    pub order: usize,
    /// Largest forward difference found (positive values are suspicious).
    pub worst_value: f64,
    pub worst_at: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub points_checked: usize,
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub orders: Vec<OrderCheck>,
    pub all_pass: bool,
}

/// Checks the sign structure `d^k/dz^k G <= 0` via forward differences:
/// `Delta_h^k G(z) <= tol_k` at every grid point where the stencil fits,
/// with `tol_k = 1e-8 k! h^k scale` absorbing the difference operator's
/// natural magnitude. Report-only; violations do not error.
pub fn check_complete_monotonicity(
    g: &TransformGrid,
    k_max: usize,
    h: f64,
) -> MonotonicityReport {
    let scale = g
        .values()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    let mut orders = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let tol = 1e-8 * factorial(k as u32) * h.powi(k as i32) * scale;
        let mut worst_value = f64::NEG_INFINITY;
        let mut worst_at = f64::NAN;
        let mut points = 0usize;
        for &z in g.nodes() {
            let mut delta = 0.0;
            let mut complete = true;
            for j in 0..=k {
                match g.find_node(z + j as f64 * h) {
                    Some(idx) => {
                        let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                        delta += sign * binomial(k as u32, j as u32) * g.values()[idx];
                    }
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                points += 1;
                if delta > worst_value {
                    worst_value = delta;
                    worst_at = z;
                }
            }
        }
        let pass = points > 0 && worst_value <= tol;
        orders.push(OrderCheck {
            order: k,
            worst_value,
            worst_at,
            tolerance: tol,
            pass,
            points_checked: points,
        });
    }
    let all_pass = orders.iter().all(|o| o.pass);
    MonotonicityReport { orders, all_pass }
}

pub fn uniform_nodes(a: f64, b: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 1 && b > a);
    (0..=steps)
        .map(|i| a + (b - a) * i as f64 / steps as f64)
        .collect()
}
