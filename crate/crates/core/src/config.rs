//! Scenario configuration: strict JSON with byte-unit strings, dotted-path
//! overrides, defaults, and validation.
//!
//! Parsing is two-stage. The raw schema accepts partial documents (every
//! field optional, unknown keys fatal) and byte quantities as either plain
//! numbers or strings with KB/MB/GB suffixes (powers of 1024). Resolution
//! fills defaults, expands workload presets, validates, and yields a
//! [`ScenarioConfig`] whose serialized form uses the same keys as the raw
//! schema, so a resolved config echoed into a report is itself a valid
//! config document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::{sales_classes, GrowthShape, QueryClass, ScriptedQuery};

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;
pub const GIB: u64 = 1024 * MIB;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Malformed JSON or schema violation; the message carries serde's
    /// field and position diagnostics.
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("invalid override `{key}`: {message}")]
    Override { key: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

/// Byte quantity in raw documents: `5242880`, `"5 MB"`, `"1.5gb"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteSize(pub u64);

pub fn parse_byte_size(text: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    let split = trimmed
        .find(|c: char| c.is_ascii_alphabetic())
        .ok_or_else(|| format!("`{trimmed}` has no unit; write a plain number for raw bytes"))?;
    let (number, unit) = trimmed.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("`{trimmed}` does not start with a number"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("`{trimmed}` is not a non-negative size"));
    }
    let scale = match unit.trim().to_ascii_lowercase().as_str() {
        "b" => 1,
        "kb" | "kib" => KIB,
        "mb" | "mib" => MIB,
        "gb" | "gib" => GIB,
        other => return Err(format!("unknown byte unit `{other}` (use B, KB, MB, or GB)")),
    };
    Ok((value * scale as f64).round() as u64)
}

impl<'de> Deserialize<'de> for ByteSize {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::Number(n) => {
                if let Some(u) = n.as_u64() {
                    Ok(ByteSize(u))
                } else {
                    Err(D::Error::custom(format!("byte size must be a non-negative integer, got {n}")))
                }
            }
            serde_json::Value::String(s) => {
                parse_byte_size(&s).map(ByteSize).map_err(D::Error::custom)
            }
            other => Err(D::Error::custom(format!(
                "byte size must be a number or a string with a unit, got {other}"
            ))),
        }
    }
}

impl Serialize for ByteSize {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.0)
    }
}

// ---------------------------------------------------------------------------
// Raw (on-disk) schema: everything optional, unknown keys rejected.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    physical: Option<ByteSize>,
    cpus: Option<u32>,
    throttling: Option<bool>,
    broker: Option<RawBroker>,
    gateways: Option<RawGateways>,
    engine: Option<RawEngine>,
    workload: Option<RawWorkload>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBroker {
    tick_s: Option<f64>,
    window: Option<usize>,
    horizon_s: Option<f64>,
    slack: Option<f64>,
    low_water: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGateways {
    t1: Option<ByteSize>,
    f_small: Option<f64>,
    f_medium: Option<f64>,
    timeouts_s: Option<[f64; 3]>,
    best_plan_min_progress: Option<f64>,
    best_plan_finalize_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    io_penalty_k: Option<f64>,
    buffer_pool_floor: Option<ByteSize>,
    buffer_pool_refill_per_s: Option<ByteSize>,
    plan_cache_floor: Option<ByteSize>,
    compile_reserve_fraction: Option<f64>,
    plan_cache_working_size: Option<ByteSize>,
    plan_cache_hit_rate_at_full: Option<f64>,
    plan_size_fraction: Option<f64>,
    retry_delay_s: Option<f64>,
    grant_backoff_cap_s: Option<f64>,
    grant_timeout_s: Option<f64>,
    timeout_scan_s: Option<f64>,
    warmup_s: Option<f64>,
    duration_s: Option<f64>,
    slice_s: Option<f64>,
    compile_step_s: Option<f64>,
    compile_cpu_sharing: Option<bool>,
    record_trace: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    preset: Option<String>,
    classes: Option<Vec<RawQueryClass>>,
    scripted: Option<Vec<RawScriptedQuery>>,
    clients: Option<u32>,
    think_time_s: Option<[f64; 2]>,
    retry_on_failure: Option<bool>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQueryClass {
    name: String,
    weight: f64,
    compile_s: [f64; 2],
    peak_compile_memory: [ByteSize; 2],
    growth: GrowthShape,
    exec_s: [f64; 2],
    exec_grant: [ByteSize; 2],
    working_set: [ByteSize; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScriptedQuery {
    name: String,
    submit_s: f64,
    compile_s: f64,
    peak_compile_memory: ByteSize,
    growth: GrowthShape,
    exec_s: f64,
    exec_grant: ByteSize,
    working_set: ByteSize,
}

// ---------------------------------------------------------------------------
// Resolved configuration.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    #[serde(rename = "physical")]
    pub physical_bytes: u64,
    pub cpus: u32,
    pub throttling: bool,
    pub broker: BrokerSettings,
    pub gateways: GatewaySettings,
    pub engine: EngineSettings,
    pub workload: WorkloadSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrokerSettings {
    pub tick_s: f64,
    pub window: usize,
    pub horizon_s: f64,
    pub slack: f64,
    pub low_water: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatewaySettings {
    #[serde(rename = "t1")]
    pub t1_bytes: u64,
    pub f_small: f64,
    pub f_medium: f64,
    pub timeouts_s: [f64; 3],
    pub best_plan_min_progress: f64,
    pub best_plan_finalize_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineSettings {
    pub io_penalty_k: f64,
    #[serde(rename = "buffer_pool_floor")]
    pub buffer_pool_floor_bytes: u64,
    /// Refill pace of the page cache: evicting pages is free, but
    /// repopulating them costs I/O, so the pool grows back at this rate.
    #[serde(rename = "buffer_pool_refill_per_s")]
    pub buffer_pool_refill_per_s_bytes: u64,
    #[serde(rename = "plan_cache_floor")]
    pub plan_cache_floor_bytes: u64,
    /// Fraction of physical memory the broker always reserves for the
    /// compilation component, keeping the gateway thresholds from
    /// collapsing when little compilation is running.
    pub compile_reserve_fraction: f64,
    #[serde(rename = "plan_cache_working_size")]
    pub plan_cache_working_size_bytes: u64,
    pub plan_cache_hit_rate_at_full: f64,
    pub plan_size_fraction: f64,
    pub retry_delay_s: f64,
    pub grant_backoff_cap_s: f64,
    pub grant_timeout_s: f64,
    pub timeout_scan_s: f64,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub slice_s: f64,
    pub compile_step_s: f64,
    /// Concurrent compilations beyond the CPU count proceed proportionally
    /// slower, sharing the CPUs evenly. Blocked compilations consume none.
    pub compile_cpu_sharing: bool,
    pub record_trace: bool,
}

/// Closed-loop clients (when `classes` is non-empty) or a fixed script
/// (when `scripted` is non-empty); resolution guarantees exactly one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadSettings {
    pub seed: u64,
    pub clients: u32,
    pub think_time_s: [f64; 2],
    pub retry_on_failure: bool,
    pub classes: Vec<QueryClass>,
    pub scripted: Vec<ScriptedQuery>,
}

impl WorkloadSettings {
    pub fn is_scripted(&self) -> bool {
        !self.scripted.is_empty()
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            physical_bytes: 4 * GIB,
            cpus: 8,
            throttling: true,
            broker: BrokerSettings {
                tick_s: 1.0,
                window: 16,
                horizon_s: 1.0,
                slack: 0.05,
                low_water: 0.9,
            },
            gateways: GatewaySettings {
                t1_bytes: 5 * MIB,
                f_small: 0.5,
                f_medium: 0.35,
                timeouts_s: [60.0, 180.0, 600.0],
                best_plan_min_progress: 0.25,
                best_plan_finalize_s: 2.0,
            },
            engine: EngineSettings {
                io_penalty_k: 3.0,
                buffer_pool_floor_bytes: 64 * MIB,
                buffer_pool_refill_per_s_bytes: 64 * MIB,
                plan_cache_floor_bytes: 16 * MIB,
                compile_reserve_fraction: 0.25,
                plan_cache_working_size_bytes: 256 * MIB,
                plan_cache_hit_rate_at_full: 0.0,
                plan_size_fraction: 0.05,
                retry_delay_s: 5.0,
                grant_backoff_cap_s: 60.0,
                grant_timeout_s: 300.0,
                timeout_scan_s: 1.0,
                warmup_s: 120.0,
                duration_s: 3600.0,
                slice_s: 30.0,
                compile_step_s: 1.0,
                compile_cpu_sharing: true,
                record_trace: false,
            },
            workload: WorkloadSettings {
                seed: 0,
                clients: 30,
                think_time_s: [0.0, 5.0],
                retry_on_failure: true,
                classes: sales_classes(),
                scripted: Vec::new(),
            },
        }
    }
}

/// Parses a JSON document, applies `KEY=VALUE` overrides (dotted paths into
/// the raw schema), fills defaults, and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve_value(value, overrides)
}

/// Same as [`parse_config`] but starting from an in-memory document, used by
/// canned scenarios that want override support.
pub fn resolve_value(
    mut value: serde_json::Value,
    overrides: &[String],
) -> Result<ScenarioConfig, ConfigError> {
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let raw: RawConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

fn apply_override(root: &mut serde_json::Value, entry: &str) -> Result<(), ConfigError> {
    let err = |message: &str| ConfigError::Override { key: entry.into(), message: message.into() };
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| err("expected KEY=VALUE"))?;
    if path.is_empty() {
        return Err(err("empty key"));
    }
    let parsed = match raw_value {
        "on" => serde_json::Value::Bool(true),
        "off" => serde_json::Value::Bool(false),
        other => serde_json::from_str(other)
            .unwrap_or_else(|_| serde_json::Value::String(other.to_string())),
    };
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if !node.is_object() {
            return Err(err(&format!(
                "`{}` is not an object and cannot be descended into",
                segments[..i].join(".")
            )));
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split never yields zero segments");
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let defaults = ScenarioConfig::default();
    let mut cfg = defaults.clone();

    if let Some(p) = raw.physical {
        cfg.physical_bytes = p.0;
    }
    if let Some(c) = raw.cpus {
        cfg.cpus = c;
    }
    if let Some(t) = raw.throttling {
        cfg.throttling = t;
    }

    let b = raw.broker.unwrap_or_default();
    set(&mut cfg.broker.tick_s, b.tick_s);
    set(&mut cfg.broker.window, b.window);
    set(&mut cfg.broker.horizon_s, b.horizon_s);
    set(&mut cfg.broker.slack, b.slack);
    set(&mut cfg.broker.low_water, b.low_water);

    let g = raw.gateways.unwrap_or_default();
    if let Some(t1) = g.t1 {
        cfg.gateways.t1_bytes = t1.0;
    }
    set(&mut cfg.gateways.f_small, g.f_small);
    set(&mut cfg.gateways.f_medium, g.f_medium);
    set(&mut cfg.gateways.timeouts_s, g.timeouts_s);
    set(&mut cfg.gateways.best_plan_min_progress, g.best_plan_min_progress);
    set(&mut cfg.gateways.best_plan_finalize_s, g.best_plan_finalize_s);

    let e = raw.engine.unwrap_or_default();
    set(&mut cfg.engine.io_penalty_k, e.io_penalty_k);
    if let Some(v) = e.buffer_pool_floor {
        cfg.engine.buffer_pool_floor_bytes = v.0;
    }
    set(&mut cfg.engine.compile_reserve_fraction, e.compile_reserve_fraction);
    if let Some(v) = e.buffer_pool_refill_per_s {
        cfg.engine.buffer_pool_refill_per_s_bytes = v.0;
    }
    if let Some(v) = e.plan_cache_floor {
        cfg.engine.plan_cache_floor_bytes = v.0;
    }
    if let Some(v) = e.plan_cache_working_size {
        cfg.engine.plan_cache_working_size_bytes = v.0;
    }
    set(&mut cfg.engine.plan_cache_hit_rate_at_full, e.plan_cache_hit_rate_at_full);
    set(&mut cfg.engine.plan_size_fraction, e.plan_size_fraction);
    set(&mut cfg.engine.retry_delay_s, e.retry_delay_s);
    set(&mut cfg.engine.grant_backoff_cap_s, e.grant_backoff_cap_s);
    set(&mut cfg.engine.grant_timeout_s, e.grant_timeout_s);
    set(&mut cfg.engine.timeout_scan_s, e.timeout_scan_s);
    set(&mut cfg.engine.warmup_s, e.warmup_s);
    set(&mut cfg.engine.duration_s, e.duration_s);
    set(&mut cfg.engine.slice_s, e.slice_s);
    set(&mut cfg.engine.compile_step_s, e.compile_step_s);
    set(&mut cfg.engine.compile_cpu_sharing, e.compile_cpu_sharing);
    set(&mut cfg.engine.record_trace, e.record_trace);

    let w = raw.workload.unwrap_or_default();
    set(&mut cfg.workload.seed, w.seed);
    set(&mut cfg.workload.think_time_s, w.think_time_s);
    set(&mut cfg.workload.retry_on_failure, w.retry_on_failure);
    if let Some(c) = w.clients {
        cfg.workload.clients = c;
    }

    // A resolved config echoes whichever of classes/scripted it does not
    // use as an empty list; reparsing must treat that like an omission.
    let mut classes = w.classes;
    let mut scripted = w.scripted;
    let has_classes = classes.as_ref().is_some_and(|c| !c.is_empty());
    let has_scripted = scripted.as_ref().is_some_and(|s| !s.is_empty());
    if has_classes && scripted.as_ref().is_some_and(|s| s.is_empty()) {
        scripted = None;
    }
    if has_scripted && classes.as_ref().is_some_and(|c| c.is_empty()) {
        classes = None;
    }

    match (&w.preset, classes, scripted) {
        (Some(_), Some(_), _) => {
            return Err(invalid("workload", "give either `preset` or `classes`, not both"));
        }
        (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
            return Err(invalid("workload", "`scripted` cannot be combined with `preset` or `classes`"));
        }
        (Some(name), None, None) => {
            cfg.workload.classes = match name.as_str() {
                "sales" => sales_classes(),
                other => {
                    return Err(invalid("workload.preset", format!("unknown preset `{other}`")))
                }
            };
        }
        (None, Some(classes), None) => {
            cfg.workload.classes = classes
                .into_iter()
                .map(|c| QueryClass {
                    name: c.name,
                    weight: c.weight,
                    compile_s: c.compile_s,
                    peak_compile_bytes: [c.peak_compile_memory[0].0, c.peak_compile_memory[1].0],
                    growth: c.growth,
                    exec_s: c.exec_s,
                    exec_grant_bytes: [c.exec_grant[0].0, c.exec_grant[1].0],
                    working_set_bytes: [c.working_set[0].0, c.working_set[1].0],
                })
                .collect();
        }
        (None, None, Some(scripted)) => {
            if w.clients.is_some_and(|c| c != 0) {
                return Err(invalid("workload.clients", "not applicable to scripted workloads"));
            }
            if scripted.is_empty() {
                return Err(invalid("workload.scripted", "must not be empty"));
            }
            cfg.workload.clients = 0;
            cfg.workload.classes = Vec::new();
            cfg.workload.scripted = scripted
                .into_iter()
                .map(|q| ScriptedQuery {
                    name: q.name,
                    submit_s: q.submit_s,
                    compile_s: q.compile_s,
                    peak_compile_bytes: q.peak_compile_memory.0,
                    growth: q.growth,
                    exec_s: q.exec_s,
                    exec_grant_bytes: q.exec_grant.0,
                    working_set_bytes: q.working_set.0,
                })
                .collect();
        }
        (None, None, None) => {
            // Defaults already hold the sales preset.
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    if cfg.physical_bytes == 0 {
        return Err(invalid("physical", "must be positive"));
    }
    if cfg.cpus == 0 {
        return Err(invalid("cpus", "must be at least 1"));
    }

    let b = &cfg.broker;
    if !(b.tick_s.is_finite() && b.tick_s > 0.0) {
        return Err(invalid("broker.tick_s", "must be positive"));
    }
    if b.window < 2 {
        return Err(invalid("broker.window", "must be at least 2"));
    }
    if !(b.horizon_s.is_finite() && b.horizon_s >= 0.0) {
        return Err(invalid("broker.horizon_s", "must be non-negative"));
    }
    if !(0.0..1.0).contains(&b.slack) {
        return Err(invalid("broker.slack", "must be in [0, 1)"));
    }
    if !(b.low_water > 0.0 && b.low_water <= 1.0) {
        return Err(invalid("broker.low_water", "must be in (0, 1]"));
    }

    let g = &cfg.gateways;
    if g.t1_bytes == 0 {
        return Err(invalid("gateways.t1", "must be positive"));
    }
    if g.t1_bytes >= cfg.physical_bytes {
        return Err(invalid("gateways.t1", "must be below physical memory"));
    }
    for (name, f) in [("gateways.f_small", g.f_small), ("gateways.f_medium", g.f_medium)] {
        if !(f.is_finite() && 0.0 < f && f < 1.0) {
            return Err(invalid(name, "must lie strictly between 0 and 1"));
        }
    }
    if g.f_small + g.f_medium >= 1.0 {
        return Err(invalid("gateways.f_small", "f_small + f_medium must stay below 1"));
    }
    if !(g.timeouts_s[0] > 0.0 && g.timeouts_s[0] < g.timeouts_s[1] && g.timeouts_s[1] < g.timeouts_s[2])
    {
        return Err(invalid("gateways.timeouts_s", "must be positive and strictly increasing"));
    }
    if !(0.0..=1.0).contains(&g.best_plan_min_progress) {
        return Err(invalid("gateways.best_plan_min_progress", "must be in [0, 1]"));
    }
    if !(g.best_plan_finalize_s.is_finite() && g.best_plan_finalize_s > 0.0) {
        return Err(invalid("gateways.best_plan_finalize_s", "must be positive"));
    }

    let e = &cfg.engine;
    if !(e.io_penalty_k.is_finite() && e.io_penalty_k >= 0.0) {
        return Err(invalid("engine.io_penalty_k", "must be non-negative"));
    }
    if !(0.0..1.0).contains(&e.compile_reserve_fraction) {
        return Err(invalid("engine.compile_reserve_fraction", "must be in [0, 1)"));
    }
    if e.buffer_pool_refill_per_s_bytes == 0 {
        return Err(invalid("engine.buffer_pool_refill_per_s", "must be positive"));
    }
    let compile_reserve = (cfg.physical_bytes as f64 * e.compile_reserve_fraction) as u64;
    if e.buffer_pool_floor_bytes + e.plan_cache_floor_bytes + compile_reserve
        >= cfg.physical_bytes
    {
        return Err(invalid(
            "engine.buffer_pool_floor",
            "component floors must leave room under physical memory",
        ));
    }
    if e.plan_cache_working_size_bytes < e.plan_cache_floor_bytes {
        return Err(invalid(
            "engine.plan_cache_working_size",
            "must be at least the plan cache floor",
        ));
    }
    if !(0.0..=1.0).contains(&e.plan_cache_hit_rate_at_full) {
        return Err(invalid("engine.plan_cache_hit_rate_at_full", "must be in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&e.plan_size_fraction) {
        return Err(invalid("engine.plan_size_fraction", "must be in [0, 1]"));
    }
    for (name, v) in [
        ("engine.retry_delay_s", e.retry_delay_s),
        ("engine.grant_backoff_cap_s", e.grant_backoff_cap_s),
        ("engine.grant_timeout_s", e.grant_timeout_s),
        ("engine.timeout_scan_s", e.timeout_scan_s),
        ("engine.duration_s", e.duration_s),
        ("engine.slice_s", e.slice_s),
        ("engine.compile_step_s", e.compile_step_s),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, "must be positive"));
        }
    }
    if !(e.warmup_s.is_finite() && e.warmup_s >= 0.0) {
        return Err(invalid("engine.warmup_s", "must be non-negative"));
    }
    if e.warmup_s >= e.duration_s {
        return Err(invalid("engine.warmup_s", "must be shorter than engine.duration_s"));
    }

    let w = &cfg.workload;
    if w.is_scripted() {
        for (i, q) in w.scripted.iter().enumerate() {
            let field = format!("workload.scripted[{i}]");
            if !(q.submit_s.is_finite() && q.submit_s >= 0.0) {
                return Err(invalid(&field, "submit_s must be non-negative"));
            }
            if !(q.compile_s.is_finite() && q.compile_s > 0.0) {
                return Err(invalid(&field, "compile_s must be positive"));
            }
            if !(q.exec_s.is_finite() && q.exec_s >= 0.0) {
                return Err(invalid(&field, "exec_s must be non-negative"));
            }
            if q.peak_compile_bytes == 0 {
                return Err(invalid(&field, "peak_compile_memory must be positive"));
            }
        }
    } else {
        if w.clients == 0 {
            return Err(invalid("workload.clients", "must be at least 1"));
        }
        if w.classes.is_empty() {
            return Err(invalid("workload.classes", "must not be empty"));
        }
        if !(w.think_time_s[0] >= 0.0 && w.think_time_s[0] <= w.think_time_s[1]) {
            return Err(invalid("workload.think_time_s", "must be an increasing non-negative range"));
        }
        for (i, c) in w.classes.iter().enumerate() {
            let field = format!("workload.classes[{i}]");
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(invalid(&field, "weight must be positive"));
            }
            if !(c.compile_s[0] > 0.0 && c.compile_s[0] <= c.compile_s[1]) {
                return Err(invalid(&field, "compile_s must be a positive increasing range"));
            }
            if !(c.exec_s[0] >= 0.0 && c.exec_s[0] <= c.exec_s[1]) {
                return Err(invalid(&field, "exec_s must be a non-negative increasing range"));
            }
            if c.peak_compile_bytes[0] == 0 || c.peak_compile_bytes[0] > c.peak_compile_bytes[1] {
                return Err(invalid(&field, "peak_compile_memory must be a positive increasing range"));
            }
            if c.exec_grant_bytes[0] > c.exec_grant_bytes[1] {
                return Err(invalid(&field, "exec_grant must be an increasing range"));
            }
            if c.working_set_bytes[0] > c.working_set_bytes[1] {
                return Err(invalid(&field, "working_set must be an increasing range"));
            }
        }
    }
    Ok(())
}
