//! Library behind the `simdb` simulator: a memory broker that divides a
//! fixed physical budget among database subcomponents, admission gateways
//! that throttle concurrent query compilation by memory appetite, and a
//! deterministic discrete-event engine that exercises both under
//! oversubscribed workloads.
//!
//! The crate is organized bottom-up:
//!
//! * [`broker`]: usage tracking, linear-trend prediction, proportional
//!   target division, and grow/shrink notifications.
//! * [`gateways`]: the three-tier compilation throttle with dynamic
//!   thresholds, FIFO waiting, deadlines, and best-plan finalization.
//! * [`workload`]: query classes, growth shapes, and per-client
//!   deterministic sampling.
//! * [`config`]: the JSON scenario schema with defaults and overrides.
//! * [`engine`]: the event loop tying the pieces together.
//! * [`report`]: deterministic summary and time-series output.
//! * [`scenario`]: canned configurations, including the three-query
//!   blocking walkthrough used by `simdb trace`.

pub mod broker;
pub mod config;
pub mod engine;
pub mod gateways;
pub mod report;
pub mod scenario;
pub mod workload;

pub use broker::{BrokerConfig, BrokerError, ComponentId, MemoryBroker, Notification};
pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use engine::{run_simulation, run_simulation_with, RunOptions, SimulationResult};
pub use scenario::scenario_config;
pub use gateways::{
    AllocationOutcome, GatewayError, GatewayPolicy, GatewaySet, OomDecision, TaskId, TaskOutcome,
    TaskState,
};
