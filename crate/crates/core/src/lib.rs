//! Numerics and exact simulators for Muller's ratchet under tournament
//! selection.
//!
//! The crate is organised around five independent routes to the same
//! limiting objects:
//!
//! * [`analytic`]: the quadratic recursion for the quasi-stationary profile,
//!   its generating-function tails, shape classification and equilibrium masses;
//! * [`dual`]: the hierarchy of logistic competitions, exact birth-death
//!   extinction times and the limiting ODE system;
//! * [`moran`]: an aggregated-rate Gillespie simulator of the forward type
//!   frequencies;
//! * [`graphical`]: the graphical representation (arrows and marks) with
//!   forward type transport and the backward load percolation on the ASG;
//! * [`yule`]: Monte Carlo on decorated Yule trees, branching random walks and
//!   the embedded Galton-Watson tree.
//!
//! The deterministic numerics are generic over the floating-point type
//! ([`Scalar`]); the aliases below fix them to `f64`, which is what the
//! simulators use.

pub mod analytic;
pub mod dual;
pub mod error;
pub mod graphical;
pub mod moran;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod yule;

pub use error::{RatchetError, Result};
pub use params::{FScaling, Params, Rates};
pub use scalar::Scalar;

/// Profile weights in double precision.
pub type Profile = analytic::ProfileWeights<f64>;
/// Equilibrium masses in double precision.
pub type Masses = analytic::EquilibriumMasses<f64>;
/// ODE trajectory in double precision.
pub type Trajectory = dual::ode::OdeTrajectory<f64>;
/// Single ODE state in double precision.
pub type OdeState = dual::ode::OdeState<f64>;
