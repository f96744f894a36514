//! Numerical laboratory for the critical discrete coagulation-fragmentation
//! equation with multiplicative coagulation kernel `a(j,k) = jk` and constant
//! fragmentation kernel `b = 1`.
//!
//! The crate provides:
//! - truncated size-distribution types and moment bookkeeping ([`dist`]),
//! - the kinetic right-hand side with direct and FFT convolution paths
//!   ([`rhs`]),
//! - an adaptive embedded Runge-Kutta integrator with gel-mass accounting
//!   ([`integrator`]),
//! - the discrete Bernstein transform `F(x) = sum (1 - e^{-jx}) rho(j)` and
//!   its generating-function form `G(z) = sum (1 - z^l) rho(l)` ([`bernstein`]),
//! - monotone upwind solvers for the associated singular Hamilton-Jacobi
//!   equations in both forms ([`hj`]),
//! - the stationary-solution recursion and existence verdicts
//!   ([`equilibrium`]),
//! - closed-form references and verification diagnostics ([`analysis`]).

pub mod analysis;
pub mod bench;
pub mod bernstein;
pub mod dist;
pub mod equilibrium;
pub mod export;
mod fft;
pub mod hj;
pub mod integrator;
pub mod numeric;
pub mod rhs;

pub use dist::{ConvolutionMode, InitialData, MomentVector, SimulationConfig, SizeDistribution};
pub use integrator::{detect_gelation, integrate, Trajectory};

