//! Simulation and control stack for a three-inlet microfluidic chip.
//!
//! The crate is organised bottom-up:
//!
//! * [`physchem`]: lumped hydraulic resistance, inertia, compressibility and
//!   compressible air flow.
//! * [`plant`]: the full 22-state nonlinear plant plus flow-meter dynamics,
//!   integrated with fixed-step RK4 ([`ode`]).
//! * [`linmodel`]: the 13-state linear model, its zero-order-hold
//!   discretization and the incremental (extended) model.
//! * [`estimator`]: discrete Kalman filter on the 13-state model.
//! * [`qpsolve`]: dense convex QP solver used by the controller.
//! * [`mpc`]: receding-horizon controller on input increments.
//! * [`baseline`]: per-line PI controllers with anti-windup.
//! * [`harness`]: scenarios, closed-loop runner, metrics, sweeps and the
//!   model validation report.
//!
//! Internally everything is SI (m³/s, Pa). Scenario files and reports use
//! µl/s; see [`units`].

pub mod baseline;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linmodel;
pub mod mpc;
pub mod ode;
pub mod physchem;
pub mod plant;
pub mod qpsolve;
pub mod units;

pub use error::{Error, Result};

/// Number of controlled lines (inputs and measured outputs).
pub const LINES: usize = 3;
