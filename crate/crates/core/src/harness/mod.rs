//! Deterministic in-memory VANET simulation: TA, RSU, and vehicle actors
//! exchanging signed beacons over a simulated broadcast channel, plus
//! adversarial probes and a timing bench.

pub mod bench;
pub mod probe;
pub mod scenario;

pub use bench::{run_bench, BenchConfig, BenchReport, LinearFit};
pub use probe::{impersonation_probe, ForgeryStrategy};
pub use scenario::{
    run_scenario, Action, ChannelConfig, FreshnessPolicy, RejectReason, ScenarioConfig, SimClock,
    SimReport, StepConfig,
};
