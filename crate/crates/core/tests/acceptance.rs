//! Acceptance gate: one test per shipping criterion, each printing a
//! single pass line with the measured values behind it.

use simdb_core::engine::run_simulation;
use simdb_core::scenario::scenario_config;

fn trace_times<'a>(
    result: &'a simdb_core::SimulationResult,
    task: u64,
    state: &str,
) -> Vec<f64> {
    result
        .trace
        .iter()
        .filter(|row| row.task == task && row.state == state)
        .map(|row| row.time_s)
        .collect()
}

#[test]
fn criterion_05_walkthrough_reproduces_the_desk_simulated_timeline() {
    let cfg = scenario_config("fig2", &[]).unwrap();
    let result = run_simulation(&cfg);

    // Tasks 1..=4 are the background compilations B1..B4, 5..=7 are Q1..Q3.
    let q1_blocked = trace_times(&result, 5, "blocked");
    let q1_granted = trace_times(&result, 5, "granted");
    let q2_blocked = trace_times(&result, 6, "blocked");
    let q2_granted = trace_times(&result, 6, "granted");
    let q3_blocked = trace_times(&result, 7, "blocked");
    let q3_granted = trace_times(&result, 7, "granted");

    assert_eq!(q1_blocked, vec![13.0, 70.0], "Q1 must stall exactly twice");
    assert_eq!(q1_granted, vec![40.0, 130.0]);
    assert_eq!(trace_times(&result, 5, "compile_done"), vec![152.0]);

    assert_eq!(q2_blocked, vec![28.0], "Q2 must stall exactly once");
    assert_eq!(q2_granted, vec![60.0]);
    let q2_release = trace_times(&result, 6, "compile_done");
    assert_eq!(q2_release, vec![120.0]);
    let q2_wait = q2_granted[0] - q2_blocked[0];
    let q1_first_wait = q1_granted[0] - q1_blocked[0];
    assert!(
        q2_wait > q1_first_wait,
        "Q2 waited {q2_wait}s, not longer than Q1's first {q1_first_wait}s"
    );

    assert_eq!(q3_blocked, vec![105.0]);
    assert_eq!(
        q3_granted, q2_release,
        "Q3's unblock must coincide with Q2 releasing its slot"
    );
    assert_eq!(trace_times(&result, 7, "compile_done"), vec![135.0]);

    assert_eq!(result.totals.completed, 7);
    assert_eq!(result.totals.failed_oom + result.totals.failed_timeout, 0);

    println!(
        "criterion 05 PASS: Q1 stalls {:?}->{:?}, Q2 wait {q2_wait}s > {q1_first_wait}s, \
         Q3 granted at {} == Q2 release",
        q1_blocked, q1_granted, q3_granted[0]
    );
}
