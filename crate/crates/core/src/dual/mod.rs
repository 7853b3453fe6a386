//! The hierarchy of logistic competitions, exact extinction-time oracles for
//! its lowest level, and the limiting ODE.
//!
//! The mutation move `k -> k + 1` is a single transition family at total rate
//! `m z_k` per level.

pub mod extinction;
pub mod hierarchy;
pub mod ode;

pub use extinction::{
    z0_extinction_exact, z0_extinction_mc, z0_log_mean_extinction, Z0ExtinctionMc,
};
pub use hierarchy::{
    simulate_hierarchy, DualState, Hierarchy, HierarchyPath, LevelEvent, LevelExtinction,
};
pub use ode::{logistic_total, ode_integrate, OdeState, OdeTrajectory};
