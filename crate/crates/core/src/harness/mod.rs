//! Scenario-driven closed-loop runs, metrics, comparisons, sweeps and the
//! model validation report.

pub mod builtin;
pub mod compare;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sweep;
pub mod trace;
pub mod validate;

pub use builtin::{builtin, load, BUILTIN_NAMES};
pub use compare::{compare, CompareRow};
pub use metrics::{compute as compute_metrics, LineMetrics, MetricsReport};
pub use runner::run_scenario;
pub use scenario::{ControllerKind, PlantKind, ReferenceProfile, Scenario, Tuning};
pub use sweep::{sweep, SweepAxis, SweepPoint};
pub use trace::{Record, Trace};
pub use validate::{validate_model, ValidationReport};
