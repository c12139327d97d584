//! Report serialization for simulation results.
//!
//! Every writer is a pure function from results to bytes, so identical
//! results always produce identical files. JSON documents carry a
//! `format_version` and echo the fully-resolved configuration; CSV files
//! always start with their header row and use `.` as the decimal
//! separator regardless of locale.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::engine::{LatencyStats, SimulationResult, Totals};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct SummaryDoc<'a> {
    format_version: u32,
    config: &'a ScenarioConfig,
    totals: &'a Totals,
    finished: u64,
    latency: &'a LatencyStats,
    peak_memory: &'a crate::engine::PeakMemory,
    end_time_s: f64,
}

pub fn summary_json(result: &SimulationResult) -> String {
    let doc = SummaryDoc {
        format_version: FORMAT_VERSION,
        config: &result.config,
        totals: &result.totals,
        finished: result.totals.finished(),
        latency: &result.latency,
        peak_memory: &result.peak_memory,
        end_time_s: result.end_time_s,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    text.push('\n');
    text
}

pub fn throughput_csv(result: &SimulationResult) -> String {
    let mut out = String::from("slice_start_s,completed,completed_degraded,failed_oom,failed_timeout\n");
    for row in &result.slices {
        let c = row.counts;
        writeln!(
            out,
            "{},{},{},{},{}",
            row.slice_start_s, c.completed, c.completed_degraded, c.failed_oom, c.failed_timeout
        )
        .unwrap();
    }
    out
}

pub fn memory_csv(result: &SimulationResult) -> String {
    let mut out = String::from("time_s,buffer_pool,compilation,execution,plan_cache,free\n");
    for row in &result.memory_series {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.time_s, row.buffer_pool, row.compilation, row.execution, row.plan_cache, row.free
        )
        .unwrap();
    }
    out
}

pub fn gateways_csv(result: &SimulationResult) -> String {
    let mut out = String::from("time_s,S,M,L,queue0,queue1,queue2,t2_bytes,t3_bytes\n");
    for row in &result.gateway_series {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.time_s,
            row.small_active,
            row.medium_active,
            row.large_active,
            row.queue_lens[0],
            row.queue_lens[1],
            row.queue_lens[2],
            row.t2_bytes,
            row.t3_bytes
        )
        .unwrap();
    }
    out
}

pub fn trace_csv(result: &SimulationResult) -> String {
    let mut out = String::from("time_s,task_id,memory_bytes,state,held_tiers\n");
    for row in &result.trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.time_s, row.task, row.memory_bytes, row.state, row.held_tiers
        )
        .unwrap();
    }
    out
}

#[derive(Serialize)]
struct CompareSide<'a> {
    throttling: bool,
    totals: &'a Totals,
    finished: u64,
    latency: &'a LatencyStats,
}

impl<'a> CompareSide<'a> {
    fn of(result: &'a SimulationResult) -> CompareSide<'a> {
        CompareSide {
            throttling: result.config.throttling,
            totals: &result.totals,
            finished: result.totals.finished(),
            latency: &result.latency,
        }
    }
}

#[derive(Serialize)]
struct CompareSlice {
    slice_start_s: f64,
    throttled_finished: u64,
    unthrottled_finished: u64,
}

#[derive(Serialize)]
struct CompareDoc<'a> {
    format_version: u32,
    config: &'a ScenarioConfig,
    throttled: CompareSide<'a>,
    unthrottled: CompareSide<'a>,
    /// finished(throttled) / finished(unthrottled); absent when the
    /// unthrottled run finished nothing.
    throughput_ratio: Option<f64>,
    /// Positive deltas mean throttling avoided that many failures.
    failed_oom_delta: i64,
    failed_timeout_delta: i64,
    failed_total_delta: i64,
    slices: Vec<CompareSlice>,
}

/// Pairs a throttled and an unthrottled run of the same scenario. The
/// echoed config is the throttled side's; the two differ only in the
/// `throttling` flag, which both sides state explicitly.
pub fn compare_json(throttled: &SimulationResult, unthrottled: &SimulationResult) -> String {
    let tf = throttled.totals.finished();
    let uf = unthrottled.totals.finished();
    let fails = |t: &Totals| (t.failed_oom + t.failed_timeout) as i64;
    let slices = throttled
        .slices
        .iter()
        .zip(&unthrottled.slices)
        .map(|(t, u)| CompareSlice {
            slice_start_s: t.slice_start_s,
            throttled_finished: t.counts.finished(),
            unthrottled_finished: u.counts.finished(),
        })
        .collect();
    let doc = CompareDoc {
        format_version: FORMAT_VERSION,
        config: &throttled.config,
        throttled: CompareSide::of(throttled),
        unthrottled: CompareSide::of(unthrottled),
        throughput_ratio: (uf > 0).then(|| tf as f64 / uf as f64),
        failed_oom_delta: unthrottled.totals.failed_oom as i64 - throttled.totals.failed_oom as i64,
        failed_timeout_delta: unthrottled.totals.failed_timeout as i64
            - throttled.totals.failed_timeout as i64,
        failed_total_delta: fails(&unthrottled.totals) - fails(&throttled.totals),
        slices,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("comparison serializes");
    text.push('\n');
    text
}

/// Writes `summary.json`, `throughput.csv`, `memory.csv`, and
/// `gateways.csv` into `dir`, plus `trace.csv` when the run recorded one.
pub fn write_run_report(result: &SimulationResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), summary_json(result))?;
    fs::write(dir.join("throughput.csv"), throughput_csv(result))?;
    fs::write(dir.join("memory.csv"), memory_csv(result))?;
    fs::write(dir.join("gateways.csv"), gateways_csv(result))?;
    if result.config.engine.record_trace {
        fs::write(dir.join("trace.csv"), trace_csv(result))?;
    }
    Ok(())
}

/// Writes both sides' full reports under `dir/throttled` and
/// `dir/unthrottled`, plus `compare.json` at the top of `dir`.
pub fn write_compare_report(
    throttled: &SimulationResult,
    unthrottled: &SimulationResult,
    dir: &Path,
) -> io::Result<()> {
    write_run_report(throttled, &dir.join("throttled"))?;
    write_run_report(unthrottled, &dir.join("unthrottled"))?;
    fs::write(dir.join("compare.json"), compare_json(throttled, unthrottled))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::engine::run_simulation;

    fn tiny_result() -> SimulationResult {
        let cfg = parse_config(
            r#"{
                "physical": "64 MB",
                "cpus": 1,
                "engine": {
                    "buffer_pool_floor": 0, "plan_cache_floor": 0,
                    "plan_cache_working_size": 0,
                    "warmup_s": 0.0, "duration_s": 60.0, "slice_s": 30.0,
                    "record_trace": true
                },
                "workload": {
                    "scripted": [{
                        "name": "q", "submit_s": 1.0, "compile_s": 2.0,
                        "peak_compile_memory": "1 MB", "growth": "linear",
                        "exec_s": 1.0, "exec_grant": 0, "working_set": 0
                    }]
                }
            }"#,
            &[],
        )
        .unwrap();
        run_simulation(&cfg)
    }

    #[test]
    fn csv_files_carry_pinned_headers_and_one_line_per_row() {
        let result = tiny_result();
        let throughput = throughput_csv(&result);
        let mut lines = throughput.lines();
        assert_eq!(
            lines.next().unwrap(),
            "slice_start_s,completed,completed_degraded,failed_oom,failed_timeout"
        );
        assert_eq!(lines.count(), result.slices.len());
        assert_eq!(throughput.lines().nth(1).unwrap(), "0,1,0,0,0");

        assert!(memory_csv(&result)
            .starts_with("time_s,buffer_pool,compilation,execution,plan_cache,free\n"));
        assert!(gateways_csv(&result)
            .starts_with("time_s,S,M,L,queue0,queue1,queue2,t2_bytes,t3_bytes\n"));
        let trace = trace_csv(&result);
        assert!(trace.starts_with("time_s,task_id,memory_bytes,state,held_tiers\n"));
        assert!(trace.lines().count() > 1, "trace recorded no rows");
    }

    #[test]
    fn summary_echoes_a_reparseable_config() {
        let result = tiny_result();
        let text = summary_json(&result);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["format_version"], 1);
        assert_eq!(doc["totals"]["completed"], 1);
        let echoed = crate::config::resolve_value(doc["config"].clone(), &[]).unwrap();
        assert_eq!(echoed, result.config);
    }

    #[test]
    fn comparison_pairs_slices_and_signs_deltas_toward_throttling_wins() {
        let result = tiny_result();
        let mut other = result.clone();
        other.config.throttling = false;
        other.totals.failed_oom = 3;
        other.totals.completed = 0;
        other.totals.completed_degraded = 0;
        let text = compare_json(&result, &other);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["failed_oom_delta"], 3);
        assert_eq!(doc["failed_total_delta"], 3);
        assert!(doc["throughput_ratio"].is_null());
        assert_eq!(doc["slices"].as_array().unwrap().len(), result.slices.len());
        assert_eq!(doc["throttled"]["finished"], 1);
    }

    #[test]
    fn report_writers_are_deterministic() {
        let a = tiny_result();
        let b = tiny_result();
        assert_eq!(summary_json(&a), summary_json(&b));
        assert_eq!(throughput_csv(&a), throughput_csv(&b));
        assert_eq!(memory_csv(&a), memory_csv(&b));
        assert_eq!(gateways_csv(&a), gateways_csv(&b));
        assert_eq!(trace_csv(&a), trace_csv(&b));
    }

    #[test]
    fn run_reports_land_on_disk_with_trace_gated_by_config() {
        let dir = tempfile::tempdir().unwrap();
        let result = tiny_result();
        write_run_report(&result, dir.path()).unwrap();
        for name in ["summary.json", "throughput.csv", "memory.csv", "gateways.csv", "trace.csv"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }

        let mut untraced = result.clone();
        untraced.config.engine.record_trace = false;
        let dir2 = tempfile::tempdir().unwrap();
        write_run_report(&untraced, dir2.path()).unwrap();
        assert!(!dir2.path().join("trace.csv").exists());

        let dir3 = tempfile::tempdir().unwrap();
        write_compare_report(&result, &untraced, dir3.path()).unwrap();
        assert!(dir3.path().join("compare.json").exists());
        assert!(dir3.path().join("throttled/summary.json").exists());
        assert!(dir3.path().join("unthrottled/summary.json").exists());
    }
}
