//! Admission control for concurrent query compilations.
//!
//! Compilations pass through three gateways ordered by memory appetite.
//! Tier 0 admits many tasks at a small memory threshold, tier 1 admits one
//! per CPU at a medium threshold, and tier 2 serializes the largest
//! compilations. A task must hold every lower tier before acquiring a higher
//! one, so held tiers always form the prefix {0..k}; releases run in reverse
//! order. Tasks whose memory never reaches the tier-0 threshold bypass the
//! machinery entirely, which keeps short diagnostic and trivial compilations
//! unthrottled.
//!
//! Tier-0's threshold is static configuration. Tiers 1 and 2 are recomputed
//! from the compilation component's broker target and the current population
//! of small and medium compilations, so admission tightens exactly when
//! memory is scarce or crowded.
//!
//! Waiters are queued FIFO per tier with a deadline; expired waiters abort.
//! A task that has explored enough of its plan space may instead finish with
//! the best plan found so far when memory runs out, trading plan quality for
//! completion.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

pub const TIER_COUNT: usize = 3;

/// Identifies one compilation task for the lifetime of a gateway set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u64);

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskState {
    Running,
    Blocked { tier: usize, enqueued_s: f64, deadline_s: f64 },
    /// Memory ran out with enough of the plan space explored; the task is
    /// wrapping up with its best plan so far and no longer grows memory.
    FinalizingBestPlan,
    Done,
    AbortedTimeout,
    AbortedOom,
}

impl TaskState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskState::Done | TaskState::AbortedTimeout | TaskState::AbortedOom)
    }
}

/// Terminal outcome supplied when a task leaves the gateways.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOutcome {
    Done,
    AbortedTimeout,
    AbortedOom,
}

impl TaskOutcome {
    fn state(self) -> TaskState {
        match self {
            TaskOutcome::Done => TaskState::Done,
            TaskOutcome::AbortedTimeout => TaskState::AbortedTimeout,
            TaskOutcome::AbortedOom => TaskState::AbortedOom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationOutcome {
    Proceed,
    Blocked { tier: usize, deadline_s: f64 },
}

/// Verdict for a task that is about to run out of memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OomDecision {
    /// Enough progress: complete with the best plan explored so far.
    FinalizeBestPlan,
    /// Too little progress for a useful plan; the task must abort.
    Abort,
}

#[derive(Debug, Clone)]
pub struct GatewayPolicy {
    pub cpu_count: u32,
    /// Static tier-0 threshold; compilations below it are never throttled.
    pub t1_bytes: u64,
    /// Fraction of the compilation target shared by all small compilations.
    pub f_small: f64,
    /// Fraction of the compilation target shared by all medium compilations.
    pub f_medium: f64,
    /// Wait deadlines per tier; later tiers wait longer before giving up.
    pub timeouts_s: [f64; TIER_COUNT],
    /// Minimum progress at which an out-of-memory task may keep its best plan.
    pub best_plan_min_progress: f64,
}

impl GatewayPolicy {
    fn validate(&self) -> Result<(), GatewayError> {
        if self.cpu_count == 0 {
            return Err(GatewayError::InvalidPolicy("cpu_count must be at least 1".into()));
        }
        if self.t1_bytes == 0 {
            return Err(GatewayError::InvalidPolicy("t1_bytes must be positive".into()));
        }
        for f in [self.f_small, self.f_medium] {
            if !(f.is_finite() && 0.0 < f && f < 1.0) {
                return Err(GatewayError::InvalidPolicy(
                    "threshold fractions must lie strictly between 0 and 1".into(),
                ));
            }
        }
        if self.f_small + self.f_medium >= 1.0 {
            return Err(GatewayError::InvalidPolicy(
                "threshold fractions must sum below 1".into(),
            ));
        }
        if !(self.timeouts_s[0] > 0.0
            && self.timeouts_s[0] < self.timeouts_s[1]
            && self.timeouts_s[1] < self.timeouts_s[2])
        {
            return Err(GatewayError::InvalidPolicy(
                "tier timeouts must be positive and strictly increasing".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.best_plan_min_progress) {
            return Err(GatewayError::InvalidPolicy(
                "best_plan_min_progress must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Concurrency slots per tier: many small, one medium per CPU, one large.
    pub fn slot_counts(&self) -> [usize; TIER_COUNT] {
        let cpus = self.cpu_count as usize;
        [4 * cpus, cpus, 1]
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} already exists")]
    DuplicateTask(TaskId),
    #[error("task {0} is not running")]
    NotRunning(TaskId),
    #[error("task {id} memory may not decrease during compilation ({from} -> {to} bytes)")]
    MemoryDecrease { id: TaskId, from: u64, to: u64 },
    #[error("task {0} already finished")]
    AlreadyTerminal(TaskId),
}

/// Per-task view the engine reads back.
#[derive(Debug, Clone)]
pub struct CompilationTask {
    id: TaskId,
    memory_bytes: u64,
    progress: f64,
    /// Number of tiers held; the held set is always the prefix {0..held}.
    held: usize,
    state: TaskState,
}

impl CompilationTask {
    pub fn id(&self) -> TaskId {
        self.id
    }
    pub fn memory_bytes(&self) -> u64 {
        self.memory_bytes
    }
    pub fn progress(&self) -> f64 {
        self.progress
    }
    pub fn state(&self) -> TaskState {
        self.state
    }
    pub fn held_tier_count(&self) -> usize {
        self.held
    }
    pub fn holds_tier(&self, tier: usize) -> bool {
        tier < self.held
    }
    pub fn highest_held_tier(&self) -> Option<usize> {
        self.held.checked_sub(1)
    }
}

/// Raw tier-1/2 thresholds: the allotted fraction of the compilation target
/// divided by the current population, then clamped to keep the tier ladder
/// strictly increasing (each at least one byte above the tier below).
pub fn dynamic_thresholds(
    t1_bytes: u64,
    f_small: f64,
    f_medium: f64,
    compilation_target_bytes: f64,
    small_active: usize,
    medium_active: usize,
) -> (u64, u64) {
    let raw2 = compilation_target_bytes * f_small / small_active.max(1) as f64;
    let raw3 = compilation_target_bytes * f_medium / medium_active.max(1) as f64;
    let t2 = (raw2.floor() as u64).max(t1_bytes + 1);
    let t3 = (raw3.floor() as u64).max(t2 + 1);
    (t2, t3)
}

#[derive(Debug)]
pub struct GatewaySet {
    policy: GatewayPolicy,
    slots: [usize; TIER_COUNT],
    thresholds: [u64; TIER_COUNT],
    occupied: [usize; TIER_COUNT],
    queues: [VecDeque<TaskId>; TIER_COUNT],
    tasks: BTreeMap<TaskId, CompilationTask>,
    /// Tasks that ever held or queued at any tier (bypass accounting).
    engaged: BTreeSet<TaskId>,
}

impl GatewaySet {
    /// Builds a gateway set with thresholds seeded for an empty system
    /// (population counts of zero) from the given compilation target.
    pub fn new(policy: GatewayPolicy, compilation_target_bytes: f64) -> Result<Self, GatewayError> {
        policy.validate()?;
        let slots = policy.slot_counts();
        let (t2, t3) = dynamic_thresholds(
            policy.t1_bytes,
            policy.f_small,
            policy.f_medium,
            compilation_target_bytes,
            0,
            0,
        );
        let thresholds = [policy.t1_bytes, t2, t3];
        Ok(Self {
            policy,
            slots,
            thresholds,
            occupied: [0; TIER_COUNT],
            queues: Default::default(),
            tasks: BTreeMap::new(),
            engaged: BTreeSet::new(),
        })
    }

    pub fn policy(&self) -> &GatewayPolicy {
        &self.policy
    }

    pub fn thresholds(&self) -> [u64; TIER_COUNT] {
        self.thresholds
    }

    pub fn slots(&self) -> [usize; TIER_COUNT] {
        self.slots
    }

    pub fn queue_lens(&self) -> [usize; TIER_COUNT] {
        [self.queues[0].len(), self.queues[1].len(), self.queues[2].len()]
    }

    pub fn task(&self, id: TaskId) -> Option<&CompilationTask> {
        self.tasks.get(&id)
    }

    /// True if the task ever held a slot or waited in a queue.
    pub fn ever_engaged(&self, id: TaskId) -> bool {
        self.engaged.contains(&id)
    }

    /// Admits a new compilation with no memory and no held tiers.
    pub fn begin_task(&mut self, id: TaskId) -> Result<(), GatewayError> {
        if self.tasks.contains_key(&id) {
            return Err(GatewayError::DuplicateTask(id));
        }
        self.tasks.insert(
            id,
            CompilationTask { id, memory_bytes: 0, progress: 0.0, held: 0, state: TaskState::Running },
        );
        Ok(())
    }

    /// Records a task's grown memory and walks it through any tier
    /// thresholds that growth crossed. Acquisition is strictly in tier
    /// order; the first full tier parks the task in that tier's FIFO queue
    /// with a deadline. Memory is recorded even when the task blocks: the
    /// task keeps what it already allocated while it waits.
    pub fn on_allocation(
        &mut self,
        id: TaskId,
        new_memory_bytes: u64,
        progress: f64,
        now: f64,
    ) -> Result<AllocationOutcome, GatewayError> {
        let task = self.tasks.get_mut(&id).ok_or(GatewayError::UnknownTask(id))?;
        if task.state != TaskState::Running {
            return Err(GatewayError::NotRunning(id));
        }
        if new_memory_bytes < task.memory_bytes {
            return Err(GatewayError::MemoryDecrease { id, from: task.memory_bytes, to: new_memory_bytes });
        }
        task.memory_bytes = new_memory_bytes;
        task.progress = progress;
        Ok(self.acquire_crossed_tiers(id, now))
    }

    /// Walks the task upward while its memory sits at or above the next
    /// unheld tier's threshold. Returns the blocking outcome, if any.
    fn acquire_crossed_tiers(&mut self, id: TaskId, now: f64) -> AllocationOutcome {
        loop {
            let (held, memory) = {
                let task = &self.tasks[&id];
                (task.held, task.memory_bytes)
            };
            if held >= TIER_COUNT || memory < self.thresholds[held] {
                return AllocationOutcome::Proceed;
            }
            if self.occupied[held] < self.slots[held] {
                self.occupied[held] += 1;
                self.engaged.insert(id);
                self.tasks.get_mut(&id).expect("task exists").held = held + 1;
                continue;
            }
            let deadline_s = now + self.policy.timeouts_s[held];
            self.enqueue(held, id, now, deadline_s);
            return AllocationOutcome::Blocked { tier: held, deadline_s };
        }
    }

    /// FIFO insert, breaking equal-enqueue-time ties by task id so that
    /// simultaneous arrivals are ordered deterministically.
    fn enqueue(&mut self, tier: usize, id: TaskId, now: f64, deadline_s: f64) {
        self.engaged.insert(id);
        self.tasks.get_mut(&id).expect("task exists").state =
            TaskState::Blocked { tier, enqueued_s: now, deadline_s };
        let queue = &mut self.queues[tier];
        let mut pos = queue.len();
        while pos > 0 {
            let prev = &self.tasks[&queue[pos - 1]];
            match prev.state {
                TaskState::Blocked { enqueued_s, .. } if enqueued_s == now && queue[pos - 1] > id => {
                    pos -= 1;
                }
                _ => break,
            }
        }
        queue.insert(pos, id);
    }

    /// Hands a freed slot at `tier` to the queue head, if any. The granted
    /// task immediately retries its pending acquisition and may park again
    /// at a higher tier. Returns the task only if it came out running.
    fn grant_head(&mut self, tier: usize, now: f64) -> Option<TaskId> {
        if self.occupied[tier] >= self.slots[tier] {
            return None;
        }
        let id = self.queues[tier].pop_front()?;
        let task = self.tasks.get_mut(&id).expect("queued task exists");
        debug_assert_eq!(task.held, tier, "queued task must hold exactly the tiers below its queue");
        task.held = tier + 1;
        task.state = TaskState::Running;
        self.occupied[tier] += 1;
        match self.acquire_crossed_tiers(id, now) {
            AllocationOutcome::Proceed => Some(id),
            AllocationOutcome::Blocked { .. } => None,
        }
    }

    /// Releases every tier the task holds, highest first, handing each freed
    /// slot to that tier's queue head. Returns tasks that became runnable.
    fn release_held(&mut self, id: TaskId, now: f64, unblocked: &mut Vec<TaskId>) {
        let held = self.tasks[&id].held;
        self.tasks.get_mut(&id).expect("task exists").held = 0;
        for tier in (0..held).rev() {
            self.occupied[tier] -= 1;
            if let Some(granted) = self.grant_head(tier, now) {
                unblocked.push(granted);
            }
        }
    }

    /// Terminal transition: the task leaves any queue, its state becomes the
    /// outcome, and its tiers are released in reverse order with freed slots
    /// granted to waiters. Returns the tasks that became runnable.
    pub fn finish_task(
        &mut self,
        id: TaskId,
        outcome: TaskOutcome,
        now: f64,
    ) -> Result<Vec<TaskId>, GatewayError> {
        let task = self.tasks.get(&id).ok_or(GatewayError::UnknownTask(id))?;
        if task.state.is_terminal() {
            return Err(GatewayError::AlreadyTerminal(id));
        }
        if let TaskState::Blocked { tier, .. } = task.state {
            self.queues[tier].retain(|&q| q != id);
        }
        self.tasks.get_mut(&id).expect("task exists").state = outcome.state();
        let mut unblocked = Vec::new();
        self.release_held(id, now, &mut unblocked);
        Ok(unblocked)
    }

    /// Expires every waiter whose deadline has passed. Expired tasks abort,
    /// release their held tiers, and thereby wake other waiters. Tasks are
    /// reported per tier in queue order.
    pub fn check_timeouts(&mut self, now: f64) -> TimeoutSweep {
        let mut sweep = TimeoutSweep::default();
        for tier in 0..TIER_COUNT {
            // Deadlines are monotone in queue order (same timeout per tier),
            // so expired waiters form a prefix.
            loop {
                let Some(&head) = self.queues[tier].front() else { break };
                let expired = matches!(
                    self.tasks[&head].state,
                    TaskState::Blocked { deadline_s, .. } if deadline_s <= now
                );
                if !expired {
                    break;
                }
                self.queues[tier].pop_front();
                self.tasks.get_mut(&head).expect("task exists").state = TaskState::AbortedTimeout;
                self.release_held(head, now, &mut sweep.unblocked);
                sweep.timed_out.push(head);
            }
        }
        sweep
    }

    /// Decides what a memory-starved task does: finish with its best plan if
    /// it has explored enough, otherwise abort. A finalizing task leaves its
    /// wait queue (it stops growing, so it no longer needs the tier) but
    /// keeps its held tiers and memory until it completes.
    pub fn oom_imminent(&mut self, id: TaskId) -> Result<OomDecision, GatewayError> {
        let task = self.tasks.get(&id).ok_or(GatewayError::UnknownTask(id))?;
        if task.state.is_terminal() {
            return Err(GatewayError::AlreadyTerminal(id));
        }
        if task.state == TaskState::FinalizingBestPlan {
            return Ok(OomDecision::FinalizeBestPlan);
        }
        if task.progress < self.policy.best_plan_min_progress {
            return Ok(OomDecision::Abort);
        }
        if let TaskState::Blocked { tier, .. } = task.state {
            self.queues[tier].retain(|&q| q != id);
        }
        self.tasks.get_mut(&id).expect("task exists").state = TaskState::FinalizingBestPlan;
        Ok(OomDecision::FinalizeBestPlan)
    }

    /// Population counts used in threshold denominators: tasks topping out
    /// at tier 0 (small), holders of tier 1 (medium), holders of tier 2
    /// (large). Blocked tasks count; they hold slots and memory.
    pub fn active_counts(&self) -> (usize, usize, usize) {
        let small = self.occupied[0] - self.occupied[1];
        (small, self.occupied[1], self.occupied[2])
    }

    /// Recomputes the dynamic tier-1/2 thresholds from a fresh compilation
    /// target and population counts. Queued tasks are not re-evaluated; they
    /// see the new ladder on their next allocation attempt.
    pub fn recompute_thresholds(
        &mut self,
        compilation_target_bytes: f64,
        small_active: usize,
        medium_active: usize,
    ) -> (u64, u64) {
        let (t2, t3) = dynamic_thresholds(
            self.policy.t1_bytes,
            self.policy.f_small,
            self.policy.f_medium,
            compilation_target_bytes,
            small_active,
            medium_active,
        );
        self.thresholds[1] = t2;
        self.thresholds[2] = t3;
        (t2, t3)
    }

    /// Structural invariants, checked after every event in tests and
    /// validated simulations. Panics with a description on violation.
    pub fn validate(&self) {
        assert!(
            self.thresholds[0] < self.thresholds[1] && self.thresholds[1] < self.thresholds[2],
            "tier thresholds must be strictly increasing: {:?}",
            self.thresholds
        );
        let mut recount = [0usize; TIER_COUNT];
        for task in self.tasks.values() {
            for tier in 0..task.held {
                recount[tier] += 1;
            }
            if let TaskState::Blocked { tier, .. } = task.state {
                assert_eq!(task.held, tier, "blocked task {} must hold exactly the tiers below tier {tier}", task.id);
                assert!(
                    self.queues[tier].contains(&task.id),
                    "blocked task {} missing from queue {tier}",
                    task.id
                );
            }
        }
        for tier in 0..TIER_COUNT {
            assert_eq!(
                recount[tier], self.occupied[tier],
                "slot occupancy mismatch at tier {tier}"
            );
            assert!(
                self.occupied[tier] <= self.slots[tier],
                "tier {tier} over capacity: {} > {}",
                self.occupied[tier],
                self.slots[tier]
            );
            for id in &self.queues[tier] {
                assert!(
                    matches!(self.tasks[id].state, TaskState::Blocked { tier: t, .. } if t == tier),
                    "queue {tier} holds task {id} that is not blocked on it"
                );
            }
        }
        self.assert_wait_graph_acyclic();
    }

    /// A blocked task waits for every holder of its tier. Holders can only
    /// block at higher tiers, so the graph must be cycle-free; this verifies
    /// it directly rather than trusting the tier-ordering argument.
    fn assert_wait_graph_acyclic(&self) {
        let ids: Vec<TaskId> = self.tasks.keys().copied().collect();
        let index: BTreeMap<TaskId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for (i, &id) in ids.iter().enumerate() {
            if let TaskState::Blocked { tier, .. } = self.tasks[&id].state {
                for (&other, task) in &self.tasks {
                    if other != id && task.held > tier {
                        edges[i].push(index[&other]);
                    }
                }
            }
        }
        // Iterative three-color DFS.
        let mut color = vec![0u8; ids.len()];
        for start in 0..ids.len() {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                if *next < edges[node].len() {
                    let child = edges[node][*next];
                    *next += 1;
                    match color[child] {
                        0 => {
                            color[child] = 1;
                            stack.push((child, 0));
                        }
                        1 => panic!("wait-for cycle involving task {}", ids[child]),
                        _ => {}
                    }
                } else {
                    color[node] = 2;
                    stack.pop();
                }
            }
        }
    }
}

/// Result of a timeout sweep: who aborted, and who woke up because an
/// aborting task released slots.
#[derive(Debug, Default)]
pub struct TimeoutSweep {
    pub timed_out: Vec<TaskId>,
    pub unblocked: Vec<TaskId>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: u64 = 1024 * 1024;

    fn policy(cpus: u32) -> GatewayPolicy {
        GatewayPolicy {
            cpu_count: cpus,
            t1_bytes: 5 * MB,
            f_small: 0.5,
            f_medium: 0.35,
            timeouts_s: [60.0, 180.0, 600.0],
            best_plan_min_progress: 0.25,
        }
    }

    fn gateways(cpus: u32, target_mb: u64) -> GatewaySet {
        GatewaySet::new(policy(cpus), (target_mb * MB) as f64).unwrap()
    }

    #[test]
    fn slot_counts_scale_with_cpus() {
        assert_eq!(policy(1).slot_counts(), [4, 1, 1]);
        assert_eq!(policy(2).slot_counts(), [8, 2, 1]);
        assert_eq!(policy(8).slot_counts(), [32, 8, 1]);
    }

    #[test]
    fn policy_validation_rejects_bad_timeouts_and_fractions() {
        let mut p = policy(1);
        p.timeouts_s = [60.0, 60.0, 600.0];
        assert!(GatewaySet::new(p, 1e9).is_err());
        let mut p = policy(1);
        p.f_small = 0.7;
        p.f_medium = 0.4;
        assert!(GatewaySet::new(p, 1e9).is_err());
        let mut p = policy(1);
        p.f_medium = 0.0;
        assert!(GatewaySet::new(p, 1e9).is_err());
    }

    #[test]
    fn thresholds_divide_target_among_population() {
        // 1000 MB target, half for small queries, ten of them: 50 MB each.
        let (t2, _) = dynamic_thresholds(5 * MB, 0.5, 0.35, (1000 * MB) as f64, 10, 0);
        assert_eq!(t2, 50 * MB);
        // Empty population divides by one, not zero.
        let (t2, t3) = dynamic_thresholds(5 * MB, 0.5, 0.35, (1000 * MB) as f64, 0, 0);
        assert_eq!(t2, 500 * MB);
        assert_eq!(t3, 500 * MB + 1);
    }

    #[test]
    fn threshold_clamp_keeps_ladder_strictly_increasing() {
        // Tiny target: raw values collapse below t1 and must re-stack.
        let (t2, t3) = dynamic_thresholds(5 * MB, 0.5, 0.35, 1024.0, 40, 8);
        assert_eq!(t2, 5 * MB + 1);
        assert_eq!(t3, 5 * MB + 2);
        // Crowded small population pushes t2 under a quiet t3.
        let (t2, t3) = dynamic_thresholds(5 * MB, 0.5, 0.35, (1000 * MB) as f64, 64, 1);
        assert!(t2 > 5 * MB && t3 > t2);
    }

    #[test]
    fn small_tasks_bypass_every_gateway() {
        let mut g = gateways(1, 1000);
        g.begin_task(TaskId(1)).unwrap();
        let outcome = g.on_allocation(TaskId(1), 4 * MB, 0.5, 0.0).unwrap();
        assert_eq!(outcome, AllocationOutcome::Proceed);
        assert!(!g.ever_engaged(TaskId(1)));
        assert_eq!(g.active_counts(), (0, 0, 0));
        g.validate();
    }

    #[test]
    fn tier_zero_fills_then_blocks_fifo() {
        let mut g = gateways(1, 1000);
        for id in 0..5u64 {
            g.begin_task(TaskId(id)).unwrap();
        }
        for id in 0..4u64 {
            assert_eq!(
                g.on_allocation(TaskId(id), 6 * MB, 0.1, 1.0).unwrap(),
                AllocationOutcome::Proceed
            );
        }
        let blocked = g.on_allocation(TaskId(4), 6 * MB, 0.1, 2.0).unwrap();
        assert_eq!(blocked, AllocationOutcome::Blocked { tier: 0, deadline_s: 62.0 });
        assert_eq!(g.active_counts(), (4, 0, 0));
        g.validate();

        // Finishing one holder hands the slot to the waiter.
        let woken = g.finish_task(TaskId(0), TaskOutcome::Done, 5.0).unwrap();
        assert_eq!(woken, vec![TaskId(4)]);
        assert_eq!(g.task(TaskId(4)).unwrap().state(), TaskState::Running);
        g.validate();
    }

    #[test]
    fn equal_time_enqueues_order_by_task_id() {
        let mut g = gateways(1, 1000);
        for id in [9, 7, 3] {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.1, 0.0).unwrap();
        }
        g.begin_task(TaskId(0)).unwrap();
        g.on_allocation(TaskId(0), 6 * MB, 0.1, 0.0).unwrap();
        // Tier 0 is full (slots, ids 9/7/3/0). Two more block at t=10.
        for id in [8, 2] {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.1, 10.0).unwrap();
        }
        // Equal enqueue times order by id regardless of call order.
        let woken = g.finish_task(TaskId(9), TaskOutcome::Done, 11.0).unwrap();
        assert_eq!(woken, vec![TaskId(2)]);
        let woken = g.finish_task(TaskId(7), TaskOutcome::Done, 12.0).unwrap();
        assert_eq!(woken, vec![TaskId(8)]);
        g.validate();
    }

    #[test]
    fn one_allocation_can_climb_all_three_tiers() {
        let mut g = gateways(1, 100);
        // Thresholds with empty population: t1 5 MB, t2 50 MB, t3 35 MB -> clamped 50 MB + 1.
        g.begin_task(TaskId(1)).unwrap();
        let outcome = g.on_allocation(TaskId(1), 80 * MB, 0.2, 0.0).unwrap();
        assert_eq!(outcome, AllocationOutcome::Proceed);
        let task = g.task(TaskId(1)).unwrap();
        assert_eq!(task.held_tier_count(), 3);
        assert_eq!(g.active_counts(), (0, 1, 1));
        g.validate();
    }

    #[test]
    fn granted_waiter_can_park_again_at_the_next_tier() {
        let mut g = gateways(1, 100);
        // Occupy tier 1 and tier 0 fully.
        g.begin_task(TaskId(1)).unwrap();
        g.on_allocation(TaskId(1), 60 * MB, 0.2, 0.0).unwrap(); // holds 0,1,2
        for id in 2..=4u64 {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.2, 0.0).unwrap();
        }
        // Big task blocks at tier 0 (full), with memory beyond every ladder rung.
        g.begin_task(TaskId(5)).unwrap();
        let outcome = g.on_allocation(TaskId(5), 70 * MB, 0.2, 1.0).unwrap();
        assert!(matches!(outcome, AllocationOutcome::Blocked { tier: 0, .. }));
        // A small holder finishes; task 5 takes its slot but immediately
        // parks at tier 1, which task 1 still occupies. Nothing runs.
        let woken = g.finish_task(TaskId(2), TaskOutcome::Done, 2.0).unwrap();
        assert!(woken.is_empty());
        assert!(matches!(g.task(TaskId(5)).unwrap().state(), TaskState::Blocked { tier: 1, .. }));
        // The giant finishes: task 5 climbs through tiers 1 and 2.
        let woken = g.finish_task(TaskId(1), TaskOutcome::Done, 3.0).unwrap();
        assert_eq!(woken, vec![TaskId(5)]);
        assert_eq!(g.task(TaskId(5)).unwrap().held_tier_count(), 3);
        g.validate();
    }

    #[test]
    fn timeouts_expire_whole_prefixes_in_queue_order() {
        let mut g = gateways(1, 1000);
        for id in 0..4u64 {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.1, 0.0).unwrap();
        }
        g.begin_task(TaskId(10)).unwrap();
        g.on_allocation(TaskId(10), 6 * MB, 0.1, 0.0).unwrap();
        g.begin_task(TaskId(11)).unwrap();
        g.on_allocation(TaskId(11), 6 * MB, 0.1, 0.0).unwrap();

        assert!(g.check_timeouts(59.0).timed_out.is_empty());
        let sweep = g.check_timeouts(61.0);
        assert_eq!(sweep.timed_out, vec![TaskId(10), TaskId(11)]);
        assert!(sweep.unblocked.is_empty());
        assert_eq!(g.task(TaskId(10)).unwrap().state(), TaskState::AbortedTimeout);
        g.validate();
    }

    #[test]
    fn timed_out_waiter_releases_tiers_and_wakes_others() {
        let mut g = gateways(1, 100);
        // Tier 1 occupied by a long-running medium task.
        g.begin_task(TaskId(1)).unwrap();
        g.on_allocation(TaskId(1), 55 * MB, 0.3, 0.0).unwrap();
        // Three more fill tier 0 alongside task 1.
        for id in 2..=4u64 {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.3, 0.0).unwrap();
        }
        // Task 5 grabs the last... tier 0 is full; it queues.
        g.begin_task(TaskId(5)).unwrap();
        assert!(matches!(
            g.on_allocation(TaskId(5), 52 * MB, 0.3, 1.0).unwrap(),
            AllocationOutcome::Blocked { tier: 0, .. }
        ));
        // Free one tier-0 slot; task 5 takes it and queues at tier 1 at t=2.
        g.finish_task(TaskId(2), TaskOutcome::Done, 2.0).unwrap();
        assert!(matches!(g.task(TaskId(5)).unwrap().state(), TaskState::Blocked { tier: 1, .. }));
        // Task 6 waits for a tier-0 slot behind the full house, late enough
        // that its own deadline (t=210) outlives the sweep below.
        g.begin_task(TaskId(6)).unwrap();
        assert!(matches!(
            g.on_allocation(TaskId(6), 6 * MB, 0.3, 150.0).unwrap(),
            AllocationOutcome::Blocked { tier: 0, .. }
        ));
        // Tier-1 timeout is 180 s from t=2. When task 5 expires it must
        // surrender its tier-0 slot, waking task 6.
        let sweep = g.check_timeouts(182.5);
        assert_eq!(sweep.timed_out, vec![TaskId(5)]);
        assert_eq!(sweep.unblocked, vec![TaskId(6)]);
        g.validate();
    }

    #[test]
    fn oom_finalizes_with_enough_progress_and_aborts_without() {
        let mut g = gateways(1, 1000);
        g.begin_task(TaskId(1)).unwrap();
        g.on_allocation(TaskId(1), 6 * MB, 0.3, 0.0).unwrap();
        assert_eq!(g.oom_imminent(TaskId(1)).unwrap(), OomDecision::FinalizeBestPlan);
        assert_eq!(g.task(TaskId(1)).unwrap().state(), TaskState::FinalizingBestPlan);
        // Slots stay held while finalizing.
        assert_eq!(g.active_counts(), (1, 0, 0));

        g.begin_task(TaskId(2)).unwrap();
        g.on_allocation(TaskId(2), 6 * MB, 0.1, 0.0).unwrap();
        assert_eq!(g.oom_imminent(TaskId(2)).unwrap(), OomDecision::Abort);
        assert_eq!(g.task(TaskId(2)).unwrap().state(), TaskState::Running);

        g.finish_task(TaskId(1), TaskOutcome::Done, 1.0).unwrap();
        assert!(matches!(g.oom_imminent(TaskId(1)), Err(GatewayError::AlreadyTerminal(_))));
        g.validate();
    }

    #[test]
    fn blocked_task_that_finalizes_leaves_its_queue() {
        let mut g = gateways(1, 1000);
        for id in 0..4u64 {
            g.begin_task(TaskId(id)).unwrap();
            g.on_allocation(TaskId(id), 6 * MB, 0.5, 0.0).unwrap();
        }
        g.begin_task(TaskId(9)).unwrap();
        g.on_allocation(TaskId(9), 6 * MB, 0.5, 0.0).unwrap();
        assert_eq!(g.queue_lens()[0], 1);
        assert_eq!(g.oom_imminent(TaskId(9)).unwrap(), OomDecision::FinalizeBestPlan);
        assert_eq!(g.queue_lens()[0], 0);
        // It holds no tiers, so finishing it wakes nobody.
        let woken = g.finish_task(TaskId(9), TaskOutcome::Done, 1.0).unwrap();
        assert!(woken.is_empty());
        g.validate();
    }

    #[test]
    fn allocation_errors_cover_decrease_and_nonrunning_states() {
        let mut g = gateways(1, 1000);
        g.begin_task(TaskId(1)).unwrap();
        g.on_allocation(TaskId(1), 10 * MB, 0.1, 0.0).unwrap();
        assert!(matches!(
            g.on_allocation(TaskId(1), 9 * MB, 0.2, 1.0),
            Err(GatewayError::MemoryDecrease { .. })
        ));
        assert!(matches!(
            g.on_allocation(TaskId(7), MB, 0.1, 0.0),
            Err(GatewayError::UnknownTask(_))
        ));
        g.finish_task(TaskId(1), TaskOutcome::Done, 2.0).unwrap();
        assert!(matches!(
            g.on_allocation(TaskId(1), 20 * MB, 0.3, 3.0),
            Err(GatewayError::NotRunning(_))
        ));
        assert!(matches!(
            g.finish_task(TaskId(1), TaskOutcome::Done, 3.0),
            Err(GatewayError::AlreadyTerminal(_))
        ));
    }

    #[test]
    fn active_counts_track_highest_held_tier() {
        let mut g = gateways(2, 1000);
        // Thresholds: t1 5 MB, t2 = 1000*0.5 = 500 MB... population 0 -> 500 MB.
        g.begin_task(TaskId(1)).unwrap();
        g.on_allocation(TaskId(1), 600 * MB, 0.1, 0.0).unwrap();
        assert_eq!(g.active_counts(), (0, 1, 1));
        g.begin_task(TaskId(2)).unwrap();
        g.on_allocation(TaskId(2), 6 * MB, 0.1, 0.0).unwrap();
        g.begin_task(TaskId(3)).unwrap();
        g.on_allocation(TaskId(3), 6 * MB, 0.1, 0.0).unwrap();
        assert_eq!(g.active_counts(), (2, 1, 1));
        g.validate();
    }
}
