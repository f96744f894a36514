//! Domain types shared by all solvers: truncated size distributions, moment
//! vectors, initial-data constructors, and run configuration.
//!
//! Cluster sizes are natural numbers `j = 1..=N`. All public interfaces speak
//! in sizes; internal vectors are 0-indexed with `densities[j - 1] = rho(j)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::neumaier_sum;

/// Relative tolerance on `m1 == declared_mass` for freshly built initial data.
pub const MASS_MATCH_REL_TOL: f64 = 1e-12;

/// Relative truncation-loss threshold above which an initial-data spec is
/// rejected as too large for the requested truncation.
pub const TRUNCATION_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("truncation must hold at least 2 sizes, got {0}")]
    TruncationTooSmall(usize),
    #[error("density for size {size} is negative: {value}")]
    NegativeDensity { size: usize, value: f64 },
    #[error("density for size {size} is not finite")]
    NonFiniteDensity { size: usize },
    #[error("gel mass must be nonnegative and finite, got {0}")]
    InvalidGelMass(f64),
    #[error("geometric ratio must lie in (0,1), got {0}")]
    RatioOutOfRange(f64),
    #[error("monodisperse size must be >= 1")]
    ZeroSize,
    #[error("explicit initial data is empty")]
    EmptyExplicit,
    #[error(
        "truncation n={n} loses too much mass: truncated m1 = {truncated_m1}, declared = {declared}"
    )]
    TruncationLosesMass {
        n: usize,
        truncated_m1: f64,
        declared: f64,
    },
    #[error("initial data does not fit in truncation n={n} (largest size {size})")]
    SizeBeyondTruncation { size: usize, n: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Truncated nonnegative cluster-size density `rho(1..=N)` plus the mass
/// accumulated past the truncation boundary ("gel").
///
/// `gel_mass` tracks first-moment mass only: clusters routed past size `N`
/// have no finite representative size, so counting them is meaningless while
/// their mass keeps total-mass conservation testable.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    densities: Vec<f64>,
    gel_mass: f64,
}

impl SizeDistribution {
    /// Builds a distribution from densities for sizes `1..=densities.len()`.
    pub fn new(densities: Vec<f64>) -> Result<Self, DistError> {
        Self::with_gel_mass(densities, 0.0)
    }

    pub fn with_gel_mass(densities: Vec<f64>, gel_mass: f64) -> Result<Self, DistError> {
        if densities.len() < 2 {
            return Err(DistError::TruncationTooSmall(densities.len()));
        }
        for (i, &v) in densities.iter().enumerate() {
            if !v.is_finite() {
                return Err(DistError::NonFiniteDensity { size: i + 1 });
            }
            if v < 0.0 {
                return Err(DistError::NegativeDensity { size: i + 1, value: v });
            }
        }
        if !gel_mass.is_finite() || gel_mass < 0.0 {
            return Err(DistError::InvalidGelMass(gel_mass));
        }
        Ok(Self { densities, gel_mass })
    }

    /// All-zero distribution truncated at `n`.
    pub fn zeros(n: usize) -> Result<Self, DistError> {
        Self::new(vec![0.0; n])
    }

    /// Sparse constructor from `(size, density)` pairs; other sizes are zero.
    pub fn from_pairs(pairs: &[(usize, f64)], n: usize) -> Result<Self, DistError> {
        let mut densities = vec![0.0; n.max(2)];
        for &(size, value) in pairs {
            if size == 0 {
                return Err(DistError::ZeroSize);
            }
            if size > n {
                return Err(DistError::SizeBeyondTruncation { size, n });
            }
            densities[size - 1] = value;
        }
        Self::new(densities)
    }

    pub fn truncation_n(&self) -> usize {
        self.densities.len()
    }

    /// Density of clusters of size `j` (1-indexed).
    pub fn density(&self, j: usize) -> f64 {
        self.densities[j - 1]
    }

    /// Densities for sizes `1..=N` as a slice (`slice[j - 1] = rho(j)`).
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn gel_mass(&self) -> f64 {
        self.gel_mass
    }

    /// l-th moment `sum_j j^order rho(j)` over the finite sizes only;
    /// `gel_mass` is never included.
    pub fn moment(&self, order: u32) -> f64 {
        assert!(order <= 3, "moment order must be in 0..=3, got {order}");
        neumaier_sum(
            self.densities
                .iter()
                .enumerate()
                .map(|(i, &rho)| ((i + 1) as f64).powi(order as i32) * rho),
        )
    }

    pub fn moments(&self) -> MomentVector {
        MomentVector {
            m0: self.moment(0),
            m1: self.moment(1),
            m2: self.moment(2),
        }
    }

    /// Mass held in sizes `j > n/2`; a cheap truncation-quality diagnostic.
    pub fn tail_mass(&self) -> f64 {
        let half = self.densities.len() / 2;
        neumaier_sum(
            self.densities
                .iter()
                .enumerate()
                .skip(half)
                .map(|(i, &rho)| (i + 1) as f64 * rho),
        )
    }
}

/// First three moments of a distribution. For any distribution supported on
/// `j >= 1` the ordering `m0 <= m1 <= m2` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentVector {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Declarative initial data. `build` realizes it on a finite truncation and
/// guarantees the first moment matches the declared mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// All clusters of a single size: `rho(j0) = c`.
    Monodisperse { size: usize, density: f64 },
    /// `rho(j) = c q^j` with `c` fixed so the total mass is `mass`.
    Geometric { ratio: f64, mass: f64 },
    /// Densities listed per size starting at `j = 1`.
    Explicit { densities: Vec<f64> },
}

impl InitialData {
    /// The mass `m = m1` this spec declares, before truncation.
    pub fn declared_mass(&self) -> f64 {
        match self {
            InitialData::Monodisperse { size, density } => *size as f64 * density,
            InitialData::Geometric { mass, .. } => *mass,
            InitialData::Explicit { densities } => neumaier_sum(
                densities
                    .iter()
                    .enumerate()
                    .map(|(i, &rho)| (i + 1) as f64 * rho),
            ),
        }
    }

    /// Realizes the spec on truncation `n`.
    ///
    /// The result satisfies `m1 == declared_mass()` to [`MASS_MATCH_REL_TOL`]
    /// relative and carries zero gel mass. Specs whose truncated first moment
    /// misses the declared mass by more than [`TRUNCATION_REL_TOL`] relative
    /// are rejected: the truncation is too small for the data.
    pub fn build(&self, n: usize) -> Result<SizeDistribution, DistError> {
        if n < 2 {
            return Err(DistError::TruncationTooSmall(n));
        }
        let declared = self.declared_mass();
        let mut densities = vec![0.0; n];
        match self {
            InitialData::Monodisperse { size, density } => {
                if *size == 0 {
                    return Err(DistError::ZeroSize);
                }
                if *density < 0.0 {
                    return Err(DistError::NegativeDensity {
                        size: *size,
                        value: *density,
                    });
                }
                if *size > n {
                    return Err(DistError::SizeBeyondTruncation { size: *size, n });
                }
                densities[size - 1] = *density;
            }
            InitialData::Geometric { ratio, mass } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(DistError::RatioOutOfRange(*ratio));
                }
                if *mass < 0.0 {
                    return Err(DistError::NegativeDensity { size: 1, value: *mass });
                }
                // sum_j j q^j = q/(1-q)^2, so c = m (1-q)^2 / q.
                let c = mass * (1.0 - ratio).powi(2) / ratio;
                let mut q_pow = 1.0;
                for slot in densities.iter_mut() {
                    q_pow *= ratio;
                    *slot = c * q_pow;
                }
            }
            InitialData::Explicit { densities: list } => {
                if list.is_empty() {
                    return Err(DistError::EmptyExplicit);
                }
                for (i, &v) in list.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(DistError::NonFiniteDensity { size: i + 1 });
                    }
                    if v < 0.0 {
                        return Err(DistError::NegativeDensity { size: i + 1, value: v });
                    }
                }
                if list.len() > n {
                    return Err(DistError::SizeBeyondTruncation { size: list.len(), n });
                }
                densities[..list.len()].copy_from_slice(list);
            }
        }

        let mut dist = SizeDistribution::new(densities)?;
        let truncated_m1 = dist.moment(1);
        if declared > 0.0 {
            let rel_gap = (truncated_m1 - declared).abs() / declared;
            if rel_gap > TRUNCATION_REL_TOL {
                return Err(DistError::TruncationLosesMass {
                    n,
                    truncated_m1,
                    declared,
                });
            }
            // Remove the (sub-1e-9) truncation drift so m1 matches the
            // declared mass to rounding.
            if truncated_m1 > 0.0 && truncated_m1 != declared {
                let scale = declared / truncated_m1;
                for v in &mut dist.densities {
                    *v *= scale;
                }
            }
        }
        Ok(dist)
    }
}

/// How the quadratic coagulation gain is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMode {
    Direct,
    Fft,
    /// Direct below [`crate::rhs::FFT_AUTO_THRESHOLD`], FFT at and above it.
    Auto,
}

/// Time-integration configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub truncation_n: usize,
    pub t_end: f64,
    /// Snapshots are emitted every this many accepted steps (and at `t_end`).
    pub output_stride: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub convolution_mode: ConvolutionMode,
}

impl SimulationConfig {
    pub fn new(truncation_n: usize, t_end: f64) -> Self {
        Self {
            truncation_n,
            t_end,
            output_stride: 16,
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            convolution_mode: ConvolutionMode::Auto,
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if self.truncation_n < 2 {
            return Err(DistError::TruncationTooSmall(self.truncation_n));
        }
        let reject = |cond: bool, msg: &str| {
            if cond {
                Err(DistError::InvalidConfig(msg.to_string()))
            } else {
                Ok(())
            }
        };
        reject(!(self.t_end > 0.0), "t_end must be > 0")?;
        reject(self.output_stride == 0, "output_stride must be >= 1")?;
        reject(!(self.abs_tol > 0.0), "abs_tol must be > 0")?;
        reject(!(self.rel_tol > 0.0), "rel_tol must be > 0")?;
        Ok(())
    }
}
