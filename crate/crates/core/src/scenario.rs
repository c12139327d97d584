//! Canned scenarios runnable by name.
//!
//! `fig2` is a hand-scheduled walkthrough of the three-tier throttle: four
//! background compilations saturate the small-compilation slots and the
//! medium slot of a one-CPU server, while three foreground queries arrive
//! into the congestion. Its broker tick is pinned past the end of the run
//! so the thresholds never move and every block, grant, and completion
//! lands on a hand-checkable timestamp:
//!
//! * `Q1` (task 5) blocks twice, at t=13 on tier 0 until B1 finishes at
//!   t=40, and at t=70 on tier 1 until B4 finishes at t=130.
//! * `Q2` (task 6) blocks once at t=28 and waits 32 s for tier 0, longer
//!   than Q1's first wait.
//! * `Q3` (task 7) blocks at t=105 and is granted at t=120, the instant
//!   Q2 releases its slot.

use serde_json::json;

use crate::config::{resolve_value, ConfigError, ScenarioConfig};

pub const SCENARIO_NAMES: [&str; 1] = ["fig2"];

/// Resolves a canned scenario by name, applying `KEY=VALUE` overrides on
/// top of its document.
pub fn scenario_config(name: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    match name {
        "fig2" => resolve_value(walkthrough_doc(), overrides),
        other => Err(ConfigError::Invalid {
            field: "scenario".into(),
            message: format!(
                "unknown scenario `{other}` (available: {})",
                SCENARIO_NAMES.join(", ")
            ),
        }),
    }
}

fn walkthrough_doc() -> serde_json::Value {
    let background = |name: &str, compile_s: f64, peak: &str| {
        json!({
            "name": name, "submit_s": 0.0, "compile_s": compile_s,
            "peak_compile_memory": peak, "growth": "front_loaded",
            "exec_s": 1.0, "exec_grant": 0, "working_set": 0
        })
    };
    let foreground = |name: &str, submit_s: f64, compile_s: f64, peak: &str| {
        json!({
            "name": name, "submit_s": submit_s, "compile_s": compile_s,
            "peak_compile_memory": peak, "growth": "linear",
            "exec_s": 1.0, "exec_grant": 0, "working_set": 0
        })
    };
    json!({
        "physical": "1 GB",
        "cpus": 1,
        "throttling": true,
        "broker": {"tick_s": 1000.0},
        "gateways": {
            "t1": "5 MB",
            // 25 MB and 50 MB ladders over the 1 GB compilation target.
            "f_small": 25.0 / 1024.0,
            "f_medium": 50.0 / 1024.0,
            "timeouts_s": [1000.0, 2000.0, 3000.0]
        },
        "engine": {
            "buffer_pool_floor": 0,
            "plan_cache_floor": 0,
            "compile_reserve_fraction": 0.0,
            "plan_cache_working_size": 0,
            "plan_size_fraction": 0.0,
            "warmup_s": 0.0,
            "duration_s": 200.0,
            "slice_s": 20.0,
            "compile_cpu_sharing": false,
            "record_trace": true
        },
        "workload": {
            "scripted": [
                background("B1", 40.0, "20 MB"),
                background("B2", 60.0, "20 MB"),
                background("B3", 150.0, "24 MB"),
                background("B4", 130.0, "30 MB"),
                foreground("Q1", 5.0, 60.0, "40 MB"),
                foreground("Q2", 8.0, 80.0, "20 MB"),
                foreground("Q3", 90.0, 30.0, "10 MB")
            ]
        }
    })
}
