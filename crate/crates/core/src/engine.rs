//! Deterministic discrete-event simulation of a database server whose
//! subcomponents compete for one physical memory budget.
//!
//! Four components share the ledger: the buffer pool and plan cache grow
//! and shrink as caches, compilation holds the live memory of every query
//! being planned, and execution holds the grants of running queries. The
//! broker redivides the budget every tick; the gateways throttle
//! compilations between ticks. Every byte a query touches moves through
//! the ledger, which conserves `physical` exactly at all times.
//!
//! Determinism: event order is a total order on (time, event rank,
//! scheduling sequence number), all collections iterate in fixed order,
//! and every random draw comes from a per-client counter-mode stream, so
//! one configuration always produces one output byte for byte.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::broker::{BrokerConfig, ComponentId, MemoryBroker, Notification};
use crate::config::ScenarioConfig;
use crate::gateways::{
    AllocationOutcome, GatewayPolicy, GatewaySet, OomDecision, TaskId, TaskOutcome,
};
use crate::workload::{client_rng, sample_query, uniform_f64, GrowthShape};

/// Memory-holding subcomponents, in ledger and report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    BufferPool = 0,
    Compilation = 1,
    Execution = 2,
    PlanCache = 3,
}

pub const COMPONENT_COUNT: usize = 4;

impl Component {
    pub const ALL: [Component; COMPONENT_COUNT] =
        [Component::BufferPool, Component::Compilation, Component::Execution, Component::PlanCache];

    pub fn name(self) -> &'static str {
        match self {
            Component::BufferPool => "buffer_pool",
            Component::Compilation => "compilation",
            Component::Execution => "execution",
            Component::PlanCache => "plan_cache",
        }
    }
}

/// Exact byte accounting for the shared physical memory.
/// Invariant: the component usages sum to at most `physical`, and the
/// remainder is the free pool.
#[derive(Debug)]
struct MemoryLedger {
    physical: u64,
    usage: [u64; COMPONENT_COUNT],
    peak: [u64; COMPONENT_COUNT],
}

impl MemoryLedger {
    fn new(physical: u64) -> Self {
        MemoryLedger { physical, usage: [0; COMPONENT_COUNT], peak: [0; COMPONENT_COUNT] }
    }

    fn usage(&self, c: Component) -> u64 {
        self.usage[c as usize]
    }

    fn free_bytes(&self) -> u64 {
        self.physical - self.usage.iter().sum::<u64>()
    }

    /// Takes `delta` from the free pool; refuses rather than oversubscribe.
    fn try_allocate(&mut self, c: Component, delta: u64) -> bool {
        if self.free_bytes() < delta {
            return false;
        }
        self.usage[c as usize] += delta;
        self.peak[c as usize] = self.peak[c as usize].max(self.usage[c as usize]);
        true
    }

    /// Allocation that may first evict cache memory, plan cache before
    /// buffer pool, each no lower than its reclaim limit. Either the full
    /// delta is satisfied or nothing changes.
    fn allocate_reclaiming(
        &mut self,
        c: Component,
        delta: u64,
        plan_cache_limit: u64,
        buffer_pool_limit: u64,
    ) -> bool {
        let free = self.free_bytes();
        if free >= delta {
            return self.try_allocate(c, delta);
        }
        let mut need = delta - free;
        let from_cache =
            need.min(self.usage(Component::PlanCache).saturating_sub(plan_cache_limit));
        need -= from_cache;
        let from_pool =
            need.min(self.usage(Component::BufferPool).saturating_sub(buffer_pool_limit));
        need -= from_pool;
        if need > 0 {
            return false;
        }
        self.release(Component::PlanCache, from_cache);
        self.release(Component::BufferPool, from_pool);
        self.try_allocate(c, delta)
    }

    fn release(&mut self, c: Component, delta: u64) {
        assert!(
            self.usage[c as usize] >= delta,
            "{} releases {delta} bytes but holds {}",
            c.name(),
            self.usage[c as usize]
        );
        self.usage[c as usize] -= delta;
    }

    fn assert_conserved(&self) {
        let total: u64 = self.usage.iter().sum();
        assert!(
            total <= self.physical,
            "ledger oversubscribed: {total} of {} bytes in use",
            self.physical
        );
    }
}

// ---------------------------------------------------------------------------
// Results.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub completed: u64,
    pub completed_degraded: u64,
    pub failed_oom: u64,
    pub failed_timeout: u64,
}

impl Totals {
    /// Queries that produced results, whether from a full or a degraded plan.
    pub fn finished(&self) -> u64 {
        self.completed + self.completed_degraded
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LatencyStats {
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the raw samples.
    pub fn from_samples(samples: &mut [f64]) -> LatencyStats {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        let n = samples.len();
        let rank = |p: f64| samples[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        LatencyStats {
            mean_s: samples.iter().sum::<f64>() / n as f64,
            p50_s: rank(0.5),
            p95_s: rank(0.95),
            max_s: samples[n - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMemory {
    pub buffer_pool: u64,
    pub compilation: u64,
    pub execution: u64,
    pub plan_cache: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceRow {
    pub slice_start_s: f64,
    pub counts: Totals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryRow {
    pub time_s: f64,
    pub buffer_pool: u64,
    pub compilation: u64,
    pub execution: u64,
    pub plan_cache: u64,
    pub free: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayRow {
    pub time_s: f64,
    pub small_active: usize,
    pub medium_active: usize,
    pub large_active: usize,
    pub queue_lens: [usize; 3],
    pub t2_bytes: u64,
    pub t3_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub task: u64,
    pub memory_bytes: u64,
    pub state: &'static str,
    /// Prefix of tiers held, rendered `0`, `01`, `012`, or `-` for none.
    pub held_tiers: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub config: ScenarioConfig,
    pub totals: Totals,
    pub latency: LatencyStats,
    pub peak_memory: PeakMemory,
    pub slices: Vec<SliceRow>,
    pub memory_series: Vec<MemoryRow>,
    pub gateway_series: Vec<GatewayRow>,
    pub trace: Vec<TraceRow>,
    /// Time of the last processed event.
    pub end_time_s: f64,
    /// Queries still in flight when the run stopped. Zero after a drain.
    pub live_queries_at_end: usize,
    pub final_usage: [u64; COMPONENT_COUNT],
    pub final_free_bytes: u64,
    /// Post-warmup time average of the summed peak demand of queries in the
    /// compile phase; gauges how oversubscribed the compile load runs.
    pub mean_compile_demand_bytes: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop new arrivals at `duration_s` but keep processing until every
    /// query reaches a terminal state, instead of cutting off at the end.
    pub drain: bool,
}

pub fn run_simulation(cfg: &ScenarioConfig) -> SimulationResult {
    run_simulation_with(cfg, RunOptions::default())
}

pub fn run_simulation_with(cfg: &ScenarioConfig, opts: RunOptions) -> SimulationResult {
    let mut sim = Sim::new(cfg, opts);
    sim.prime();
    sim.run();
    sim.finish()
}

// ---------------------------------------------------------------------------
// Events.

/// Events at equal times fire in rank order; the housekeeping sweeps run
/// after the instant's workload events, timeouts before the broker tick.
const RANK_WORK: u8 = 0;
const RANK_TIMEOUT_SCAN: u8 = 1;
const RANK_BROKER_TICK: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
struct QuerySpec {
    compile_s: f64,
    peak_bytes: u64,
    growth: GrowthShape,
    exec_s: f64,
    grant_bytes: u64,
    working_bytes: u64,
}

#[derive(Debug)]
enum EventKind {
    ClientArrival { client: usize },
    ClientResubmit { client: usize },
    ScriptedArrival { index: usize },
    CompileStep { id: u64, epoch: u64, work_s: f64 },
    BestPlanDone { id: u64 },
    ExecRetry { id: u64 },
    ExecDone { id: u64 },
    TimeoutScan,
    BrokerTick,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::TimeoutScan => RANK_TIMEOUT_SCAN,
            EventKind::BrokerTick => RANK_BROKER_TICK,
            _ => RANK_WORK,
        }
    }

    fn is_housekeeping(&self) -> bool {
        matches!(self, EventKind::TimeoutScan | EventKind::BrokerTick)
    }

    fn is_arrival(&self) -> bool {
        matches!(
            self,
            EventKind::ClientArrival { .. }
                | EventKind::ClientResubmit { .. }
                | EventKind::ScriptedArrival { .. }
        )
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.rank.cmp(&other.rank))
            .then(self.seq.cmp(&other.seq))
    }
}

// ---------------------------------------------------------------------------
// Query lifecycle.

#[derive(Debug, Clone, Copy)]
enum Phase {
    Compiling {
        /// Compile work left, in seconds. Reaches exactly zero.
        remaining_s: f64,
        memory: u64,
        /// Bumped on every reschedule; stale step events carry old epochs.
        epoch: u64,
        /// Set when the query gave up optimizing and keeps its best plan.
        degraded: bool,
    },
    AwaitingGrant {
        requested_s: f64,
        next_delay_s: f64,
        degraded: bool,
    },
    Executing {
        degraded: bool,
    },
}

#[derive(Debug)]
struct QueryRun {
    id: u64,
    /// Submitting client, or none for scripted one-shot queries.
    client: Option<usize>,
    spec: QuerySpec,
    submitted_s: f64,
    phase: Phase,
    /// True exactly while compile steps are pending, so the query is
    /// consuming CPU; blocked, finalizing, and settled queries are not.
    on_cpu: bool,
}

struct ClientState {
    rng: ChaCha8Rng,
}

enum FailKind {
    Oom,
    Timeout,
}

// ---------------------------------------------------------------------------
// The simulation proper.

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    opts: RunOptions,
    ledger: MemoryLedger,
    broker: MemoryBroker,
    gateways: GatewaySet,
    component_ids: [ComponentId; COMPONENT_COUNT],
    queries: BTreeMap<u64, QueryRun>,
    clients: Vec<ClientState>,
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    next_task: u64,
    /// Scheduled workload events not yet popped; drains wait on these.
    pending_work_events: u64,
    /// Sum of working sets of executing queries, the buffer pool's demand.
    pool_demand_bytes: u64,
    /// Queries with `on_cpu` set; drives the compile progress rate.
    on_cpu_count: u32,
    /// Byte-seconds of peak demand summed over active compilations after
    /// warmup; divided out into `mean_compile_demand_bytes` at the end.
    compile_demand_integral: f64,
    now: f64,
    totals: Totals,
    latencies: Vec<f64>,
    slices: Vec<SliceRow>,
    memory_series: Vec<MemoryRow>,
    gateway_series: Vec<GatewayRow>,
    trace: Vec<TraceRow>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, opts: RunOptions) -> Self {
        let mut ledger = MemoryLedger::new(cfg.physical_bytes);
        assert!(
            ledger.try_allocate(Component::BufferPool, cfg.engine.buffer_pool_floor_bytes),
            "buffer pool floor exceeds physical memory"
        );
        assert!(
            ledger.try_allocate(Component::PlanCache, cfg.engine.plan_cache_floor_bytes),
            "component floors exceed physical memory"
        );

        let mut broker = MemoryBroker::new(BrokerConfig {
            physical_bytes: cfg.physical_bytes,
            tick_s: cfg.broker.tick_s,
            window: cfg.broker.window,
            horizon_s: cfg.broker.horizon_s,
            slack: cfg.broker.slack,
            low_water: cfg.broker.low_water,
        })
        .expect("validated configuration");
        let compile_reserve =
            (cfg.physical_bytes as f64 * cfg.engine.compile_reserve_fraction) as u64;
        let floors = [
            cfg.engine.buffer_pool_floor_bytes,
            compile_reserve,
            0,
            cfg.engine.plan_cache_floor_bytes,
        ];
        let shrinkable = [true, false, false, true];
        let mut component_ids = [ComponentId(0); COMPONENT_COUNT];
        for c in Component::ALL {
            component_ids[c as usize] = broker
                .register_component(c.name(), floors[c as usize], shrinkable[c as usize])
                .expect("validated configuration");
        }

        let compilation_target =
            broker.target_bytes(component_ids[Component::Compilation as usize]).expect("registered");
        let gateways = GatewaySet::new(
            GatewayPolicy {
                cpu_count: cfg.cpus,
                t1_bytes: cfg.gateways.t1_bytes,
                f_small: cfg.gateways.f_small,
                f_medium: cfg.gateways.f_medium,
                timeouts_s: cfg.gateways.timeouts_s,
                best_plan_min_progress: cfg.gateways.best_plan_min_progress,
            },
            compilation_target,
        )
        .expect("validated configuration");

        let clients = (0..cfg.workload.clients)
            .map(|i| ClientState { rng: client_rng(cfg.workload.seed, i as u64) })
            .collect();

        let slice_count = (((cfg.engine.duration_s - cfg.engine.warmup_s) / cfg.engine.slice_s)
            .ceil() as usize)
            .max(1);
        let slices = (0..slice_count)
            .map(|i| SliceRow {
                slice_start_s: cfg.engine.warmup_s + i as f64 * cfg.engine.slice_s,
                counts: Totals::default(),
            })
            .collect();

        Sim {
            cfg,
            opts,
            ledger,
            broker,
            gateways,
            component_ids,
            queries: BTreeMap::new(),
            clients,
            heap: BinaryHeap::new(),
            next_seq: 0,
            next_task: 1,
            pending_work_events: 0,
            pool_demand_bytes: 0,
            on_cpu_count: 0,
            compile_demand_integral: 0.0,
            now: 0.0,
            totals: Totals::default(),
            latencies: Vec::new(),
            slices,
            memory_series: Vec::new(),
            gateway_series: Vec::new(),
            trace: Vec::new(),
        }
    }

    fn component_id(&self, c: Component) -> ComponentId {
        self.component_ids[c as usize]
    }

    fn target_floor(&self, c: Component) -> u64 {
        let floor = self.broker.floor_bytes(self.component_id(c)).expect("registered");
        let target = self.broker.target_bytes(self.component_id(c)).expect("registered");
        (target.floor() as u64).max(floor)
    }

    // -- scheduling ---------------------------------------------------------

    fn schedule(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time >= self.now, "event scheduled in the past");
        if !kind.is_housekeeping() {
            self.pending_work_events += 1;
        }
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, rank: kind.rank(), seq: self.next_seq, kind }));
    }

    fn prime(&mut self) {
        for index in 0..self.cfg.workload.scripted.len() {
            let submit = self.cfg.workload.scripted[index].submit_s;
            self.schedule(submit, EventKind::ScriptedArrival { index });
        }
        let think = self.cfg.workload.think_time_s;
        for client in 0..self.clients.len() {
            let at = uniform_f64(&mut self.clients[client].rng, think);
            self.schedule(at, EventKind::ClientArrival { client });
        }
        self.schedule(self.cfg.engine.timeout_scan_s, EventKind::TimeoutScan);
        self.schedule(self.cfg.broker.tick_s, EventKind::BrokerTick);
    }

    fn reschedule_housekeeping(&mut self, at: f64, kind: EventKind) {
        let live = !self.queries.is_empty() || self.pending_work_events > 0;
        if at < self.cfg.engine.duration_s || (self.opts.drain && live) {
            self.schedule(at, kind);
        }
    }

    fn run(&mut self) {
        while let Some(Reverse(head)) = self.heap.peek() {
            if !self.opts.drain && head.time >= self.cfg.engine.duration_s {
                break;
            }
            let Reverse(event) = self.heap.pop().expect("peeked");
            debug_assert!(event.time >= self.now);
            self.now = event.time;
            if !event.kind.is_housekeeping() {
                self.pending_work_events -= 1;
            }
            if self.opts.drain
                && event.kind.is_arrival()
                && event.time >= self.cfg.engine.duration_s
            {
                continue;
            }
            self.dispatch(event.kind);
            self.check_invariants();
        }
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::ClientArrival { client } => self.handle_client_arrival(client),
            // A resubmitted ad-hoc query recompiles from scratch, so it
            // resamples its parameters like any fresh arrival.
            EventKind::ClientResubmit { client } => self.handle_client_arrival(client),
            EventKind::ScriptedArrival { index } => self.handle_scripted_arrival(index),
            EventKind::CompileStep { id, epoch, work_s } => {
                self.handle_compile_step(id, epoch, work_s)
            }
            EventKind::BestPlanDone { id } => self.handle_best_plan_done(id),
            EventKind::ExecRetry { id } => self.attempt_exec_grant(id),
            EventKind::ExecDone { id } => self.handle_exec_done(id),
            EventKind::TimeoutScan => self.handle_timeout_scan(),
            EventKind::BrokerTick => self.handle_broker_tick(),
        }
    }

    // -- arrivals -----------------------------------------------------------

    fn handle_client_arrival(&mut self, client: usize) {
        let sample = sample_query(&self.cfg.workload.classes, &mut self.clients[client].rng);
        let spec = QuerySpec {
            compile_s: sample.compile_s,
            peak_bytes: sample.peak_compile_bytes,
            growth: sample.growth,
            exec_s: sample.exec_s,
            grant_bytes: sample.exec_grant_bytes,
            working_bytes: sample.working_set_bytes,
        };
        let hit = self.draw_plan_cache_hit(client);
        self.submit(Some(client), spec, hit);
    }

    fn handle_scripted_arrival(&mut self, index: usize) {
        let q = &self.cfg.workload.scripted[index];
        let spec = QuerySpec {
            compile_s: q.compile_s,
            peak_bytes: q.peak_compile_bytes,
            growth: q.growth,
            exec_s: q.exec_s,
            grant_bytes: q.exec_grant_bytes,
            working_bytes: q.working_set_bytes,
        };
        self.submit(None, spec, false);
    }

    /// One bernoulli draw per submission; the probability scales with how
    /// full the plan cache is, so the draw count per client stays fixed.
    fn draw_plan_cache_hit(&mut self, client: usize) -> bool {
        let working = self.cfg.engine.plan_cache_working_size_bytes;
        let fullness = if working == 0 {
            1.0
        } else {
            (self.ledger.usage(Component::PlanCache) as f64 / working as f64).min(1.0)
        };
        let p = (self.cfg.engine.plan_cache_hit_rate_at_full * fullness).clamp(0.0, 1.0);
        self.clients[client].rng.random_bool(p)
    }

    fn submit(&mut self, client: Option<usize>, spec: QuerySpec, cache_hit: bool) {
        let id = self.next_task;
        self.next_task += 1;
        let run = QueryRun {
            id,
            client,
            spec,
            submitted_s: self.now,
            on_cpu: false,
            phase: if cache_hit {
                Phase::AwaitingGrant {
                    requested_s: self.now,
                    next_delay_s: self.cfg.engine.retry_delay_s,
                    degraded: false,
                }
            } else {
                Phase::Compiling { remaining_s: spec.compile_s, memory: 0, epoch: 0, degraded: false }
            },
        };
        self.queries.insert(id, run);
        if cache_hit {
            self.push_trace(id, 0, "cache_hit");
            self.attempt_exec_grant(id);
            return;
        }
        if self.cfg.throttling {
            self.gateways.begin_task(TaskId(id)).expect("fresh task id");
            let outcome = self
                .gateways
                .on_allocation(TaskId(id), 0, 0.0, self.now)
                .expect("task just registered");
            debug_assert_eq!(outcome, AllocationOutcome::Proceed);
        }
        self.push_trace(id, 0, "begin");
        self.schedule_next_step(id);
    }

    // -- compilation --------------------------------------------------------

    /// Flips a query's CPU presence and keeps the shared counter in sync.
    /// Idempotent, so failure paths may clear it unconditionally.
    fn set_on_cpu(&mut self, id: u64, on: bool) {
        let q = self.queries.get_mut(&id).expect("live query");
        if q.on_cpu != on {
            q.on_cpu = on;
            if on {
                self.on_cpu_count += 1;
            } else {
                self.on_cpu_count -= 1;
            }
        }
    }

    /// Fraction of nominal speed each running compilation progresses at.
    /// Compilations beyond the CPU count share the CPUs evenly.
    fn compile_rate(&self) -> f64 {
        if !self.cfg.engine.compile_cpu_sharing || self.on_cpu_count == 0 {
            return 1.0;
        }
        (self.cfg.cpus as f64 / self.on_cpu_count as f64).min(1.0)
    }

    fn schedule_next_step(&mut self, id: u64) {
        self.set_on_cpu(id, true);
        let rate = self.compile_rate();
        let step_s = self.cfg.engine.compile_step_s;
        let q = self.queries.get_mut(&id).expect("live query");
        let Phase::Compiling { remaining_s, epoch, .. } = &mut q.phase else {
            unreachable!("steps are scheduled only while compiling")
        };
        // The rate is sampled per step; the event carries the work amount so
        // later arrivals and departures never desynchronize it.
        let work_s = (step_s * rate).min(*remaining_s);
        *epoch += 1;
        let (at, epoch) = (self.now + work_s / rate, *epoch);
        self.schedule(at, EventKind::CompileStep { id, epoch, work_s });
    }

    fn handle_compile_step(&mut self, id: u64, event_epoch: u64, work_s: f64) {
        let Some(q) = self.queries.get_mut(&id) else { return };
        let Phase::Compiling { remaining_s, memory, epoch, degraded } = &mut q.phase else {
            return;
        };
        if *epoch != event_epoch || *degraded {
            return;
        }
        let new_remaining = *remaining_s - work_s;
        let progress = (q.spec.compile_s - new_remaining) / q.spec.compile_s;
        let new_memory = (q.spec.peak_bytes as f64 * q.spec.growth.fraction(progress)).round() as u64;
        let delta = new_memory.saturating_sub(*memory);

        let pc_limit = self.target_floor(Component::PlanCache);
        let bp_limit = self.target_floor(Component::BufferPool);
        if delta > 0
            && !self.ledger.allocate_reclaiming(Component::Compilation, delta, pc_limit, bp_limit)
        {
            self.memory_denied(id);
            return;
        }

        let q = self.queries.get_mut(&id).expect("live query");
        let Phase::Compiling { remaining_s, memory, .. } = &mut q.phase else { unreachable!() };
        *remaining_s = new_remaining;
        *memory = new_memory;
        self.push_trace(id, new_memory, "step");

        if self.cfg.throttling {
            match self
                .gateways
                .on_allocation(TaskId(id), new_memory, progress, self.now)
                .expect("task is running")
            {
                AllocationOutcome::Proceed => {}
                AllocationOutcome::Blocked { .. } => {
                    self.set_on_cpu(id, false);
                    self.push_trace(id, new_memory, "blocked");
                    return;
                }
            }
        }
        self.finish_step_or_continue(id);
    }

    fn finish_step_or_continue(&mut self, id: u64) {
        let q = self.queries.get(&id).expect("live query");
        let Phase::Compiling { remaining_s, .. } = q.phase else { unreachable!() };
        if remaining_s <= 0.0 {
            self.compile_done(id, false);
        } else {
            self.schedule_next_step(id);
        }
    }

    /// The ledger refused a compilation grow step.
    fn memory_denied(&mut self, id: u64) {
        if !self.cfg.throttling {
            self.settle_failure(id, FailKind::Oom, "aborted_oom", false);
            return;
        }
        match self.gateways.oom_imminent(TaskId(id)).expect("task is live") {
            OomDecision::FinalizeBestPlan => {
                self.set_on_cpu(id, false);
                let q = self.queries.get_mut(&id).expect("live query");
                let Phase::Compiling { epoch, degraded, memory, .. } = &mut q.phase else {
                    unreachable!()
                };
                *degraded = true;
                *epoch += 1;
                let mem = *memory;
                let at = self.now + self.cfg.gateways.best_plan_finalize_s;
                self.schedule(at, EventKind::BestPlanDone { id });
                self.push_trace(id, mem, "finalizing");
            }
            OomDecision::Abort => {
                self.settle_failure(id, FailKind::Oom, "aborted_oom", false);
            }
        }
    }

    fn handle_best_plan_done(&mut self, id: u64) {
        let q = self.queries.get(&id).expect("finalizing query cannot abort");
        debug_assert!(matches!(q.phase, Phase::Compiling { degraded: true, .. }));
        self.compile_done(id, true);
    }

    fn compile_done(&mut self, id: u64, degraded: bool) {
        self.set_on_cpu(id, false);
        let q = self.queries.get(&id).expect("live query");
        let Phase::Compiling { memory, .. } = q.phase else { unreachable!() };
        let peak = q.spec.peak_bytes;
        if self.cfg.throttling {
            let unblocked =
                self.gateways.finish_task(TaskId(id), TaskOutcome::Done, self.now).expect("live");
            self.push_trace(id, memory, "compile_done");
            self.ledger.release(Component::Compilation, memory);
            self.resume_granted(unblocked);
        } else {
            self.push_trace(id, memory, "compile_done");
            self.ledger.release(Component::Compilation, memory);
        }

        // A degraded plan is not worth caching.
        if !degraded && self.cfg.engine.plan_size_fraction > 0.0 {
            let size = (peak as f64 * self.cfg.engine.plan_size_fraction).round() as u64;
            let room = self
                .cfg
                .engine
                .plan_cache_working_size_bytes
                .saturating_sub(self.ledger.usage(Component::PlanCache));
            let fill = size.min(room).min(self.ledger.free_bytes());
            if fill > 0 {
                let ok = self.ledger.try_allocate(Component::PlanCache, fill);
                debug_assert!(ok);
            }
        }

        let q = self.queries.get_mut(&id).expect("live query");
        q.phase = Phase::AwaitingGrant {
            requested_s: self.now,
            next_delay_s: self.cfg.engine.retry_delay_s,
            degraded,
        };
        self.attempt_exec_grant(id);
    }

    fn resume_granted(&mut self, unblocked: Vec<TaskId>) {
        for TaskId(id) in unblocked {
            let q = self.queries.get(&id).expect("blocked query is live");
            let Phase::Compiling { remaining_s, memory, .. } = q.phase else {
                unreachable!("only compiling tasks wait in gateway queues")
            };
            self.push_trace(id, memory, "granted");
            if remaining_s <= 0.0 {
                self.compile_done(id, false);
            } else {
                self.schedule_next_step(id);
            }
        }
    }

    // -- execution ----------------------------------------------------------

    fn attempt_exec_grant(&mut self, id: u64) {
        let q = self.queries.get(&id).expect("live query");
        let Phase::AwaitingGrant { requested_s, next_delay_s, degraded } = q.phase else {
            unreachable!("grant attempts only while awaiting")
        };
        let grant = q.spec.grant_bytes;
        let pc_limit = self.target_floor(Component::PlanCache);
        let bp_limit = self.target_floor(Component::BufferPool);
        if grant == 0
            || self.ledger.allocate_reclaiming(Component::Execution, grant, pc_limit, bp_limit)
        {
            self.start_execution(id, degraded);
            return;
        }
        if self.now - requested_s >= self.cfg.engine.grant_timeout_s {
            self.settle_failure(id, FailKind::Oom, "failed_oom", true);
            return;
        }
        let at = self.now + next_delay_s;
        let q = self.queries.get_mut(&id).expect("live query");
        let Phase::AwaitingGrant { next_delay_s, .. } = &mut q.phase else { unreachable!() };
        *next_delay_s = (*next_delay_s * 2.0).min(self.cfg.engine.grant_backoff_cap_s);
        self.schedule(at, EventKind::ExecRetry { id });
    }

    /// Execution slows as the buffer pool falls short of the aggregate
    /// working set of running queries, including the one starting now.
    fn start_execution(&mut self, id: u64, degraded: bool) {
        let spec = self.queries.get(&id).expect("live query").spec;
        self.pool_demand_bytes += spec.working_bytes;
        let pool = self.ledger.usage(Component::BufferPool) as f64;
        let demand = self.pool_demand_bytes as f64;
        let factor = if self.pool_demand_bytes == 0 {
            1.0
        } else {
            1.0 + self.cfg.engine.io_penalty_k * (1.0 - (pool / demand).min(1.0))
        };
        let duration = spec.exec_s * factor;
        let q = self.queries.get_mut(&id).expect("live query");
        q.phase = Phase::Executing { degraded };
        let at = self.now + duration;
        self.schedule(at, EventKind::ExecDone { id });
        self.push_trace(id, spec.grant_bytes, "executing");
    }

    fn handle_exec_done(&mut self, id: u64) {
        let q = self.queries.remove(&id).expect("live query");
        let Phase::Executing { degraded } = q.phase else { unreachable!() };
        self.ledger.release(Component::Execution, q.spec.grant_bytes);
        self.pool_demand_bytes -= q.spec.working_bytes;
        self.push_trace(id, 0, "done");
        if self.now >= self.cfg.engine.warmup_s {
            self.latencies.push(self.now - q.submitted_s);
            let counts = self.slice_counts();
            if degraded {
                counts.completed_degraded += 1;
                self.totals.completed_degraded += 1;
            } else {
                counts.completed += 1;
                self.totals.completed += 1;
            }
        }
        self.continue_client(q.client, false);
    }

    // -- failure and client continuation -------------------------------------

    /// Terminal bookkeeping for a failed query. `gateway_settled` marks
    /// tasks the gateways have already aborted (timeout sweeps) or never
    /// admitted (execution-phase failures).
    fn settle_failure(&mut self, id: u64, kind: FailKind, state: &'static str, gateway_settled: bool) {
        self.set_on_cpu(id, false);
        let q = self.queries.remove(&id).expect("live query");
        if let Phase::Compiling { memory, .. } = q.phase {
            if self.cfg.throttling && !gateway_settled {
                let outcome = match kind {
                    FailKind::Oom => TaskOutcome::AbortedOom,
                    FailKind::Timeout => TaskOutcome::AbortedTimeout,
                };
                let unblocked =
                    self.gateways.finish_task(TaskId(id), outcome, self.now).expect("live");
                self.ledger.release(Component::Compilation, memory);
                self.push_trace(id, 0, state);
                self.count_failure(&kind);
                self.continue_client(q.client, true);
                self.resume_granted(unblocked);
                return;
            }
            self.ledger.release(Component::Compilation, memory);
        }
        self.push_trace(id, 0, state);
        self.count_failure(&kind);
        self.continue_client(q.client, true);
    }

    fn count_failure(&mut self, kind: &FailKind) {
        if self.now < self.cfg.engine.warmup_s {
            return;
        }
        let counts = self.slice_counts();
        match kind {
            FailKind::Oom => {
                counts.failed_oom += 1;
                self.totals.failed_oom += 1;
            }
            FailKind::Timeout => {
                counts.failed_timeout += 1;
                self.totals.failed_timeout += 1;
            }
        }
    }

    fn slice_counts(&mut self) -> &mut Totals {
        let e = &self.cfg.engine;
        let index = ((self.now - e.warmup_s) / e.slice_s).floor() as usize;
        while self.slices.len() <= index {
            let start = e.warmup_s + self.slices.len() as f64 * e.slice_s;
            self.slices.push(SliceRow { slice_start_s: start, counts: Totals::default() });
        }
        &mut self.slices[index].counts
    }

    fn continue_client(&mut self, client: Option<usize>, failed: bool) {
        let Some(client) = client else { return };
        if failed && self.cfg.workload.retry_on_failure {
            let at = self.now + self.cfg.engine.retry_delay_s;
            self.schedule(at, EventKind::ClientResubmit { client });
        } else {
            let think = uniform_f64(&mut self.clients[client].rng, self.cfg.workload.think_time_s);
            let at = self.now + think;
            self.schedule(at, EventKind::ClientArrival { client });
        }
    }

    // -- housekeeping ---------------------------------------------------------

    fn handle_timeout_scan(&mut self) {
        if self.cfg.throttling {
            let sweep = self.gateways.check_timeouts(self.now);
            for TaskId(id) in sweep.timed_out {
                self.settle_failure(id, FailKind::Timeout, "aborted_timeout", true);
            }
            self.resume_granted(sweep.unblocked);
        }
        let at = self.now + self.cfg.engine.timeout_scan_s;
        self.reschedule_housekeeping(at, EventKind::TimeoutScan);
    }

    fn handle_broker_tick(&mut self) {
        for c in Component::ALL {
            self.broker
                .record_usage(self.component_id(c), self.ledger.usage(c), self.now)
                .expect("time is monotone");
        }
        self.broker.tick(self.now).expect("time is monotone");

        // The caches act on their notifications: shrink back to target on
        // pressure, grow toward demand when there is room.
        let bp_id = self.component_id(Component::BufferPool);
        let bp_limit = self.target_floor(Component::BufferPool);
        match self.broker.notification_for(bp_id).expect("registered") {
            Notification::MustShrink => {
                let usage = self.ledger.usage(Component::BufferPool);
                if usage > bp_limit {
                    self.ledger.release(Component::BufferPool, usage - bp_limit);
                }
            }
            Notification::CanGrow => {
                let usage = self.ledger.usage(Component::BufferPool);
                let floor = self.cfg.engine.buffer_pool_floor_bytes;
                let desired = self.pool_demand_bytes.max(floor).min(bp_limit);
                // Refilling evicted pages costs I/O, so growth is paced,
                // while eviction stays instantaneous.
                let refill = (self.cfg.engine.buffer_pool_refill_per_s_bytes as f64
                    * self.cfg.broker.tick_s) as u64;
                let grow = desired
                    .saturating_sub(usage)
                    .min(self.ledger.free_bytes())
                    .min(refill);
                if grow > 0 {
                    let ok = self.ledger.try_allocate(Component::BufferPool, grow);
                    debug_assert!(ok);
                }
            }
            Notification::Stable => {}
        }
        let pc_id = self.component_id(Component::PlanCache);
        if self.broker.notification_for(pc_id).expect("registered") == Notification::MustShrink {
            let limit = self.target_floor(Component::PlanCache);
            let usage = self.ledger.usage(Component::PlanCache);
            if usage > limit {
                self.ledger.release(Component::PlanCache, usage - limit);
            }
        }

        let comp_target = self
            .broker
            .target_bytes(self.component_id(Component::Compilation))
            .expect("registered");
        let (small, medium, _) = self.gateways.active_counts();
        self.gateways.recompute_thresholds(comp_target, small, medium);

        if self.now >= self.cfg.engine.warmup_s {
            let active_demand: u64 = self
                .queries
                .values()
                .filter(|q| matches!(q.phase, Phase::Compiling { .. }))
                .map(|q| q.spec.peak_bytes)
                .sum();
            self.compile_demand_integral += active_demand as f64 * self.cfg.broker.tick_s;
            self.memory_series.push(MemoryRow {
                time_s: self.now,
                buffer_pool: self.ledger.usage(Component::BufferPool),
                compilation: self.ledger.usage(Component::Compilation),
                execution: self.ledger.usage(Component::Execution),
                plan_cache: self.ledger.usage(Component::PlanCache),
                free: self.ledger.free_bytes(),
            });
            let (small, medium, large) = self.gateways.active_counts();
            let thresholds = self.gateways.thresholds();
            self.gateway_series.push(GatewayRow {
                time_s: self.now,
                small_active: small,
                medium_active: medium,
                large_active: large,
                queue_lens: self.gateways.queue_lens(),
                t2_bytes: thresholds[1],
                t3_bytes: thresholds[2],
            });
        }

        let at = self.now + self.cfg.broker.tick_s;
        self.reschedule_housekeeping(at, EventKind::BrokerTick);
    }

    // -- invariants and results ----------------------------------------------

    fn check_invariants(&self) {
        self.ledger.assert_conserved();
        let compiling: u64 = self
            .queries
            .values()
            .filter_map(|q| match q.phase {
                Phase::Compiling { memory, .. } => Some(memory),
                _ => None,
            })
            .sum();
        assert_eq!(
            compiling,
            self.ledger.usage(Component::Compilation),
            "compilation usage must equal the sum of live compile memory"
        );
        let granted: u64 = self
            .queries
            .values()
            .filter_map(|q| match q.phase {
                Phase::Executing { .. } => Some(q.spec.grant_bytes),
                _ => None,
            })
            .sum();
        assert_eq!(
            granted,
            self.ledger.usage(Component::Execution),
            "execution usage must equal the sum of live grants"
        );
        if self.cfg.throttling {
            self.gateways.validate();
        }
    }

    fn push_trace(&mut self, id: u64, memory: u64, state: &'static str) {
        if !self.cfg.engine.record_trace {
            return;
        }
        let held_tiers = if self.cfg.throttling {
            self.gateways
                .task(TaskId(id))
                .map(|t| match t.held_tier_count() {
                    0 => "-".to_string(),
                    n => "012"[..n].to_string(),
                })
                .unwrap_or_else(|| "-".to_string())
        } else {
            "-".to_string()
        };
        self.trace.push(TraceRow { time_s: self.now, task: id, memory_bytes: memory, state, held_tiers });
    }

    fn finish(mut self) -> SimulationResult {
        let latency = LatencyStats::from_samples(&mut self.latencies);
        SimulationResult {
            config: self.cfg.clone(),
            totals: self.totals,
            latency,
            peak_memory: PeakMemory {
                buffer_pool: self.ledger.peak[Component::BufferPool as usize],
                compilation: self.ledger.peak[Component::Compilation as usize],
                execution: self.ledger.peak[Component::Execution as usize],
                plan_cache: self.ledger.peak[Component::PlanCache as usize],
            },
            slices: self.slices,
            memory_series: self.memory_series,
            gateway_series: self.gateway_series,
            trace: self.trace,
            end_time_s: self.now,
            live_queries_at_end: self.queries.len(),
            final_usage: self.ledger.usage,
            final_free_bytes: self.ledger.free_bytes(),
            mean_compile_demand_bytes: {
                let span = self.now - self.cfg.engine.warmup_s;
                if span > 0.0 { self.compile_demand_integral / span } else { 0.0 }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const MB: u64 = 1024 * 1024;

    fn scripted_config(extra: &str, tasks: &str) -> ScenarioConfig {
        // The broker tick is pinned past the run so the thresholds stay at
        // their construction-time values and step timings are exact; CPU
        // sharing is off so compile times read directly as wall times.
        let doc = format!(
            r#"{{
                "physical": "256 MB", "cpus": 1,
                "broker": {{"tick_s": 1000.0}},
                "gateways": {{"t1": "5 MB", "timeouts_s": [20, 60, 120]}},
                "engine": {{
                    "compile_cpu_sharing": false,
                    "buffer_pool_floor": 0, "plan_cache_floor": 0,
                    "plan_cache_working_size": 0, "plan_size_fraction": 0,
                    "warmup_s": 0, "duration_s": 500, "slice_s": 100,
                    "record_trace": true {extra}
                }},
                "workload": {{"scripted": [{tasks}]}}
            }}"#
        );
        parse_config(&doc, &[]).unwrap()
    }

    fn task(name: &str, submit: f64, compile: f64, peak_mb: u64, exec: f64) -> String {
        format!(
            r#"{{"name": "{name}", "submit_s": {submit}, "compile_s": {compile},
                "peak_compile_memory": {}, "growth": "linear",
                "exec_s": {exec}, "exec_grant": 0, "working_set": 0}}"#,
            peak_mb * MB
        )
    }

    #[test]
    fn single_query_compiles_and_executes_on_schedule() {
        let cfg = scripted_config("", &task("q", 3.0, 10.0, 2, 7.0));
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.completed, 1);
        assert_eq!(result.totals.failed_oom + result.totals.failed_timeout, 0);
        // Compile from t=3 to t=13, execute until t=20.
        let done = result.trace.iter().find(|r| r.state == "done").unwrap();
        assert_eq!(done.time_s, 20.0);
        assert_eq!(result.latency.max_s, 17.0);
        assert_eq!(result.live_queries_at_end, 0);
    }

    #[test]
    fn fifth_large_compilation_waits_for_a_tier_slot() {
        // Four 20 MB compilations grow 1 MB per step and engage tier 0 at
        // t=5, filling the four slots of one CPU. The fifth query crosses
        // the 5 MB threshold at t=6 and must wait for the first finisher.
        let mut tasks: Vec<String> =
            (0..4).map(|i| task(&format!("b{i}"), 0.0, 20.0, 20, 1.0)).collect();
        tasks.push(task("q", 1.0, 10.0, 10, 1.0));
        let cfg = scripted_config("", &tasks.join(","));
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.completed, 5);

        let blocked: Vec<_> = result.trace.iter().filter(|r| r.state == "blocked").collect();
        assert_eq!(blocked.len(), 1);
        assert_eq!(blocked[0].task, 5);
        // 10 MB linear over 10 steps crosses 5 MB at step 5, t = 1 + 5.
        assert_eq!(blocked[0].time_s, 6.0);
        let granted = result.trace.iter().find(|r| r.state == "granted").unwrap();
        // The first background task compiles over t=0..20.
        assert_eq!(granted.time_s, 20.0);
        let done = result
            .trace
            .iter()
            .find(|r| r.state == "compile_done" && r.task == 5)
            .unwrap();
        // Five steps remained at the grant.
        assert_eq!(done.time_s, 25.0);
    }

    #[test]
    fn compile_oom_aborts_a_query_with_too_little_progress() {
        // A 30 MB execution grant pins most of the 40 MB budget. The victim
        // grows 0.6 MB per compile step, runs out of free memory at t=19
        // with 16% progress, and aborts rather than keep a partial plan.
        let doc = r#"{
            "physical": "40 MB", "cpus": 4,
            "broker": {"tick_s": 1000.0},
            "gateways": {"t1": "32 MB", "timeouts_s": [20, 60, 120]},
            "engine": {
                "buffer_pool_floor": 0, "plan_cache_floor": 0,
                "plan_cache_working_size": 0, "plan_size_fraction": 0,
                "warmup_s": 0, "duration_s": 400, "slice_s": 100,
                "record_trace": true
            },
            "workload": {"scripted": [
                {"name": "holder", "submit_s": 0, "compile_s": 1,
                 "peak_compile_memory": 1048576, "growth": "linear",
                 "exec_s": 300, "exec_grant": 31457280, "working_set": 0},
                {"name": "victim", "submit_s": 2, "compile_s": 100,
                 "peak_compile_memory": 62914560, "growth": "linear",
                 "exec_s": 1, "exec_grant": 0, "working_set": 0}
            ]}
        }"#;
        let cfg = parse_config(doc, &[]).unwrap();
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.failed_oom, 1);
        assert_eq!(result.totals.completed, 1);
        let aborted =
            result.trace.iter().find(|r| r.state == "aborted_oom" && r.task == 2).unwrap();
        assert_eq!(aborted.time_s, 19.0);
    }

    #[test]
    fn blocked_compilation_times_out_and_fails() {
        // Four slow 30 MB compilations engage tier 0 at t=17 and hold it
        // until t=100. The fifth query blocks at t=18 behind them and its
        // 20 s tier-0 deadline expires before any slot frees.
        let mut tasks: Vec<String> =
            (0..4).map(|i| task(&format!("b{i}"), 0.0, 100.0, 30, 1.0)).collect();
        tasks.push(task("q", 14.0, 8.0, 10, 1.0));
        let cfg = scripted_config("", &tasks.join(","));
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.failed_timeout, 1);
        let blocked = result.trace.iter().find(|r| r.state == "blocked").unwrap();
        assert_eq!((blocked.task, blocked.time_s), (5, 18.0));
        let aborted = result.trace.iter().find(|r| r.state == "aborted_timeout").unwrap();
        assert_eq!((aborted.task, aborted.time_s), (5, 38.0));
        assert_eq!(result.totals.completed, 4);
    }

    #[test]
    fn exec_grant_retries_back_off_then_fail() {
        // One query holds a 30 MB grant for the whole run; the second needs
        // 30 MB more than the 40 MB ledger can give and times out.
        let doc = r#"{
            "physical": "40 MB", "cpus": 1,
            "broker": {"tick_s": 1000.0},
            "engine": {
                "buffer_pool_floor": 0, "plan_cache_floor": 0,
                "plan_cache_working_size": 0, "plan_size_fraction": 0,
                "warmup_s": 0, "duration_s": 600, "slice_s": 100,
                "grant_timeout_s": 90, "record_trace": true
            },
            "workload": {"scripted": [
                {"name": "holder", "submit_s": 0, "compile_s": 1,
                 "peak_compile_memory": 1048576, "growth": "linear",
                 "exec_s": 500, "exec_grant": 31457280, "working_set": 0},
                {"name": "starved", "submit_s": 2, "compile_s": 1,
                 "peak_compile_memory": 1048576, "growth": "linear",
                 "exec_s": 10, "exec_grant": 31457280, "working_set": 0}
            ]}
        }"#;
        let cfg = parse_config(doc, &[]).unwrap();
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.failed_oom, 1);
        // Grant requested at t=3; retries at +5, +15, +35, +75, then the
        // retry at +135 lands past the 90 s budget.
        let failed = result.trace.iter().find(|r| r.state == "failed_oom").unwrap();
        assert_eq!(failed.time_s, 138.0);
    }

    #[test]
    fn warmup_excludes_early_completions_from_counts() {
        let tasks = [task("early", 0.0, 5.0, 2, 1.0), task("late", 60.0, 5.0, 2, 1.0)];
        let mut cfg = scripted_config("", &tasks.join(","));
        cfg.engine.warmup_s = 30.0;
        let result = run_simulation(&cfg);
        assert_eq!(result.totals.completed, 1);
        assert_eq!(result.latency.max_s, 6.0);
    }

    #[test]
    fn closed_loop_clients_are_deterministic() {
        let doc = r#"{
            "physical": "512 MB", "cpus": 2,
            "engine": {"warmup_s": 10, "duration_s": 240, "slice_s": 30,
                       "buffer_pool_floor": "16 MB", "plan_cache_floor": "4 MB",
                       "plan_cache_working_size": "32 MB"},
            "workload": {
                "seed": 42, "clients": 6, "think_time_s": [0, 3],
                "classes": [{
                    "name": "mixed", "weight": 1.0, "compile_s": [2, 8],
                    "peak_compile_memory": [4194304, 33554432], "growth": "linear",
                    "exec_s": [1, 5], "exec_grant": [1048576, 8388608],
                    "working_set": [1048576, 16777216]
                }]
            }
        }"#;
        let cfg = parse_config(doc, &[]).unwrap();
        let a = run_simulation(&cfg);
        let b = run_simulation(&cfg);
        assert_eq!(a, b);
        assert!(a.totals.completed > 10, "clients should cycle many queries");
        assert!(!a.memory_series.is_empty());
        assert_eq!(a.memory_series[0].time_s, 10.0);
    }

    #[test]
    fn drain_runs_to_quiescence_under_pressure() {
        let doc = r#"{
            "physical": "64 MB", "cpus": 1,
            "gateways": {"t1": "2 MB", "timeouts_s": [10, 30, 60]},
            "engine": {"warmup_s": 0, "duration_s": 60, "slice_s": 30,
                       "buffer_pool_floor": "8 MB", "plan_cache_floor": "2 MB",
                       "plan_cache_working_size": "16 MB", "grant_timeout_s": 45},
            "workload": {
                "seed": 7, "clients": 8, "think_time_s": [0, 1],
                "classes": [{
                    "name": "heavy", "weight": 1.0, "compile_s": [5, 20],
                    "peak_compile_memory": [8388608, 25165824], "growth": "front_loaded",
                    "exec_s": [2, 10], "exec_grant": [4194304, 16777216],
                    "working_set": [4194304, 33554432]
                }]
            }
        }"#;
        let cfg = parse_config(doc, &[]).unwrap();
        let result = run_simulation_with(&cfg, RunOptions { drain: true });
        assert_eq!(result.live_queries_at_end, 0);
        assert_eq!(result.final_usage[Component::Compilation as usize], 0);
        assert_eq!(result.final_usage[Component::Execution as usize], 0);
        let total: u64 = result.final_usage.iter().sum::<u64>() + result.final_free_bytes;
        assert_eq!(total, cfg.physical_bytes);
        assert!(result.end_time_s >= 60.0);
    }

    #[test]
    fn unthrottled_mode_never_blocks_and_differs_only_under_pressure() {
        // Plenty of memory and only two concurrent compilations: throttled
        // and unthrottled runs must behave identically apart from the flag.
        let tasks =
            [task("a", 0.0, 10.0, 2, 2.0), task("b", 1.0, 10.0, 2, 2.0)].join(",");
        let cfg_on = scripted_config("", &tasks);
        let mut cfg_off = cfg_on.clone();
        cfg_off.throttling = false;
        let on = run_simulation(&cfg_on);
        let off = run_simulation(&cfg_off);
        assert_eq!(on.totals, off.totals);
        assert_eq!(on.trace, off.trace);
        assert_eq!(on.latency, off.latency);
        assert!(on.trace.iter().all(|r| r.state != "blocked"));
    }
}
