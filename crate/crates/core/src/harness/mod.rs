//! Config-driven runs, sweeps and verification behind the `coherent-soliton` binary.

pub mod config;
pub mod presets;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use config::{RunConfig, Scenario, SweepParameter, SCHEMA_VERSION};
pub use presets::{preset, PRESETS};
pub use scenario::{is_usage_error, run, Criterion, Metrics, RunReport};
pub use sweep::{sweep, SweepReport};
pub use verify::{verify, VerifyReport};
