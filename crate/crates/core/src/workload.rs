//! Workload description and sampling: query classes with stochastic compile
//! and execution parameters, drawn per client from independent RNG
//! substreams so one client's consumption never perturbs another's.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How compilation memory accumulates over the course of the work,
/// normalized so 0 work uses nothing and finished work uses the peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthShape {
    /// Memory grows in lockstep with progress.
    Linear,
    /// Most memory is grabbed early: 80% of peak within 30% of the work.
    FrontLoaded,
    /// The mirror image: memory stays low until the final 30% of the work.
    BackLoaded,
}

impl GrowthShape {
    /// Fraction of peak memory in use at compile progress `p` in [0, 1].
    /// Piecewise linear and non-decreasing.
    pub fn fraction(self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            GrowthShape::Linear => p,
            GrowthShape::FrontLoaded => {
                if p <= 0.3 {
                    p * (0.8 / 0.3)
                } else {
                    0.8 + (p - 0.3) * (0.2 / 0.7)
                }
            }
            GrowthShape::BackLoaded => {
                if p <= 0.7 {
                    p * (0.2 / 0.7)
                } else {
                    0.2 + (p - 0.7) * (0.8 / 0.3)
                }
            }
        }
    }
}

/// One kind of query: sampling ranges for its compile and execution phases.
/// Compile duration, execution duration, grant, and working set are uniform
/// over their ranges; peak compile memory is log-uniform so a class spans
/// its range multiplicatively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryClass {
    pub name: String,
    pub weight: f64,
    pub compile_s: [f64; 2],
    #[serde(rename = "peak_compile_memory")]
    pub peak_compile_bytes: [u64; 2],
    pub growth: GrowthShape,
    pub exec_s: [f64; 2],
    #[serde(rename = "exec_grant")]
    pub exec_grant_bytes: [u64; 2],
    #[serde(rename = "working_set")]
    pub working_set_bytes: [u64; 2],
}

/// Fully materialized parameters for one submitted query instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySample {
    pub class_idx: usize,
    pub compile_s: f64,
    pub peak_compile_bytes: u64,
    pub growth: GrowthShape,
    pub exec_s: f64,
    pub exec_grant_bytes: u64,
    pub working_set_bytes: u64,
}

/// RNG substream for one client: all clients share the master seed but draw
/// from disjoint ChaCha streams keyed by client index.
pub fn client_rng(master_seed: u64, client_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(client_index);
    rng
}

pub(crate) fn uniform_f64(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] >= range[1] {
        return range[0];
    }
    rng.random_range(range[0]..=range[1])
}

fn uniform_bytes(rng: &mut impl Rng, range: [u64; 2]) -> u64 {
    if range[0] >= range[1] {
        return range[0];
    }
    uniform_f64(rng, [range[0] as f64, range[1] as f64]).round() as u64
}

fn log_uniform_bytes(rng: &mut impl Rng, range: [u64; 2]) -> u64 {
    if range[0] >= range[1] {
        return range[0];
    }
    debug_assert!(range[0] > 0, "log-uniform range must be positive");
    let ln = uniform_f64(rng, [(range[0] as f64).ln(), (range[1] as f64).ln()]);
    (ln.exp().round() as u64).clamp(range[0], range[1])
}

/// Draws a class by weight, then the instance parameters from that class's
/// ranges. One call consumes a fixed number of draws from `rng` regardless
/// of outcome, keeping substreams aligned across resamples.
pub fn sample_query(classes: &[QueryClass], rng: &mut impl Rng) -> QuerySample {
    assert!(!classes.is_empty(), "workload needs at least one query class");
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    let mut pick = rng.random_range(0.0..total);
    let mut class_idx = classes.len() - 1;
    for (i, class) in classes.iter().enumerate() {
        if pick < class.weight {
            class_idx = i;
            break;
        }
        pick -= class.weight;
    }
    let class = &classes[class_idx];
    QuerySample {
        class_idx,
        compile_s: uniform_f64(rng, class.compile_s),
        peak_compile_bytes: log_uniform_bytes(rng, class.peak_compile_bytes),
        growth: class.growth,
        exec_s: uniform_f64(rng, class.exec_s),
        exec_grant_bytes: uniform_bytes(rng, class.exec_grant_bytes),
        working_set_bytes: uniform_bytes(rng, class.working_set_bytes),
    }
}

/// One pre-scripted query for canned scenarios: everything fixed, nothing
/// sampled, so traces are exactly reproducible by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedQuery {
    pub name: String,
    pub submit_s: f64,
    pub compile_s: f64,
    #[serde(rename = "peak_compile_memory")]
    pub peak_compile_bytes: u64,
    pub growth: GrowthShape,
    pub exec_s: f64,
    #[serde(rename = "exec_grant")]
    pub exec_grant_bytes: u64,
    #[serde(rename = "working_set")]
    pub working_set_bytes: u64,
}

const MB: u64 = 1024 * 1024;

/// Ten-class sales/decision-support mix. Peak compile memory is laddered so
/// a few dozen concurrent unthrottled compilations oversubscribe a 4 GB
/// server roughly twofold, execution stretches far longer than compilation,
/// and working sets comfortably exceed what the buffer pool can cache when
/// compilations crowd it out.
pub fn sales_classes() -> Vec<QueryClass> {
    let centers_mb: [u64; 10] = [16, 32, 48, 80, 128, 192, 288, 416, 576, 768];
    centers_mb
        .iter()
        .enumerate()
        .map(|(i, &center)| {
            let growth = match i % 3 {
                0 => GrowthShape::Linear,
                1 => GrowthShape::FrontLoaded,
                _ => GrowthShape::BackLoaded,
            };
            QueryClass {
                name: format!("sales_q{:02}", i + 1),
                weight: 1.0,
                compile_s: [10.0, 90.0],
                peak_compile_bytes: [center * MB * 2 / 3, center * MB * 3 / 2],
                growth,
                exec_s: [30.0, 600.0],
                exec_grant_bytes: [center * MB / 16, center * MB / 8],
                working_set_bytes: [center * MB / 2, center * MB],
            }
        })
        .collect()
}
