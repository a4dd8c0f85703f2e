//! Experiment harness: scenario construction from a flat config format,
//! traffic generation, PRR / delay / duty-cycle metrics, and parameter
//! sweeps over the protocol × load grid.

pub mod config;
pub mod metrics;
pub mod scenario;
pub mod sweep;

pub use config::{ConfigError, ScenarioConfig, TrafficModel};
pub use metrics::{DeliveryEndpoint, MetricsReport};
pub use scenario::{delivery_endpoint, run_scenario, RunOutput, ScenarioError, TraceMode};
pub use sweep::{run_sweep, SweepReport, SweepSpec};
