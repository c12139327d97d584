//! Memory broker: usage accounting, trend prediction, and target arbitration
//! for a set of registered memory subcomponents.
//!
//! The broker never moves memory itself. It watches per-component usage
//! samples, extrapolates near-term demand with a linear fit, divides a
//! physical-memory budget into per-component targets, and publishes advisory
//! notifications. Whoever drives the broker (in this crate, the simulation
//! engine) decides how components react to those notifications.
//!
//! Targets are kept as fractional bytes. Proportional division in integer
//! bytes needs a remainder-distribution rule, and the obvious ones break
//! demand monotonicity by a byte in edge cases; IEEE division is correctly
//! rounded, so it is weakly monotone and conserves the budget to far below
//! one byte at realistic scales. Usage samples and predictions stay integral.

use std::collections::VecDeque;

use thiserror::Error;

/// Advisory state for one component, recomputed at each broker tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Notification {
    /// Usage is comfortably below target; the component may allocate more.
    CanGrow,
    /// Usage is near target; hold at the current allocation rate.
    Stable,
    /// Usage exceeds target; the component should release memory.
    MustShrink,
}

/// Handle for a registered component, assigned in registration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub usize);

/// Broker tuning. `physical_bytes` is the budget base; everything else
/// shapes prediction and the grow/shrink bands.
#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub physical_bytes: u64,
    /// Cadence at which the driver is expected to call [`MemoryBroker::tick`].
    pub tick_s: f64,
    /// Number of usage samples retained per component for trend fitting.
    pub window: usize,
    /// How far past the newest sample the trend line is evaluated.
    pub horizon_s: f64,
    /// Fraction of physical memory withheld from the distributable budget.
    pub slack: f64,
    /// Fraction of target below which a component is told it can grow.
    pub low_water: f64,
}

impl BrokerConfig {
    fn validate(&self) -> Result<(), BrokerError> {
        if self.physical_bytes == 0 {
            return Err(BrokerError::InvalidConfig("physical_bytes must be positive".into()));
        }
        if self.tick_s <= 0.0 || !self.tick_s.is_finite() {
            return Err(BrokerError::InvalidConfig("tick_s must be positive".into()));
        }
        if self.window < 2 {
            return Err(BrokerError::InvalidConfig("window must be at least 2".into()));
        }
        if !self.horizon_s.is_finite() || self.horizon_s < 0.0 {
            return Err(BrokerError::InvalidConfig("horizon_s must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.slack) {
            return Err(BrokerError::InvalidConfig("slack must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.low_water) || self.low_water == 0.0 {
            return Err(BrokerError::InvalidConfig("low_water must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("invalid broker config: {0}")]
    InvalidConfig(String),
    #[error("component `{0}` is already registered")]
    DuplicateComponent(String),
    #[error("component floors ({total_floors} bytes) would not fit in physical memory ({physical} bytes)")]
    FloorsExceedPhysical { total_floors: u64, physical: u64 },
    #[error("unknown component id {0:?}")]
    UnknownComponent(ComponentId),
    #[error("usage sample at {now}s precedes the newest sample at {newest}s")]
    SampleTimeRegression { now: f64, newest: f64 },
}

#[derive(Debug)]
struct Account {
    name: String,
    floor_bytes: u64,
    shrinkable: bool,
    /// (time, usage) pairs with strictly increasing times; newest at the back.
    samples: VecDeque<(f64, u64)>,
    predicted_bytes: u64,
    target_bytes: f64,
    notification: Notification,
}

impl Account {
    fn usage(&self) -> u64 {
        self.samples.back().map_or(0, |&(_, u)| u)
    }
}

/// Central accounting and arbitration for a fixed set of memory consumers.
#[derive(Debug)]
pub struct MemoryBroker {
    config: BrokerConfig,
    accounts: Vec<Account>,
    last_tick: Option<f64>,
}

impl MemoryBroker {
    pub fn new(config: BrokerConfig) -> Result<Self, BrokerError> {
        config.validate()?;
        Ok(Self { config, accounts: Vec::new(), last_tick: None })
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    /// Distributable budget: physical memory minus the slack reserve.
    pub fn budget_bytes(&self) -> f64 {
        self.config.physical_bytes as f64 * (1.0 - self.config.slack)
    }

    /// Registers a component. Until the first tick, every target is the
    /// unconstrained default: physical minus the other components' floors.
    pub fn register_component(
        &mut self,
        name: &str,
        floor_bytes: u64,
        shrinkable: bool,
    ) -> Result<ComponentId, BrokerError> {
        if self.accounts.iter().any(|a| a.name == name) {
            return Err(BrokerError::DuplicateComponent(name.to_string()));
        }
        let total_floors: u64 = self.accounts.iter().map(|a| a.floor_bytes).sum::<u64>() + floor_bytes;
        if total_floors >= self.config.physical_bytes {
            return Err(BrokerError::FloorsExceedPhysical {
                total_floors,
                physical: self.config.physical_bytes,
            });
        }
        self.accounts.push(Account {
            name: name.to_string(),
            floor_bytes,
            shrinkable,
            samples: VecDeque::with_capacity(self.config.window),
            predicted_bytes: 0,
            target_bytes: 0.0,
            notification: Notification::CanGrow,
        });
        let physical = self.config.physical_bytes;
        for i in 0..self.accounts.len() {
            let others: u64 = self
                .accounts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, a)| a.floor_bytes)
                .sum();
            self.accounts[i].target_bytes = (physical - others) as f64;
        }
        Ok(ComponentId(self.accounts.len() - 1))
    }

    fn account(&self, id: ComponentId) -> Result<&Account, BrokerError> {
        self.accounts.get(id.0).ok_or(BrokerError::UnknownComponent(id))
    }

    /// Appends a usage sample. A sample at the newest sample's exact time
    /// overwrites it, so callers may report several times per instant; the
    /// window keeps only the newest `window` samples.
    pub fn record_usage(&mut self, id: ComponentId, usage_bytes: u64, now: f64) -> Result<(), BrokerError> {
        let window = self.config.window;
        let account = self.accounts.get_mut(id.0).ok_or(BrokerError::UnknownComponent(id))?;
        if let Some(&(newest, _)) = account.samples.back() {
            if now < newest {
                return Err(BrokerError::SampleTimeRegression { now, newest });
            }
            if now == newest {
                *account.samples.back_mut().expect("nonempty") = (now, usage_bytes);
                return Ok(());
            }
        }
        account.samples.push_back((now, usage_bytes));
        while account.samples.len() > window {
            account.samples.pop_front();
        }
        Ok(())
    }

    /// Least-squares trend over the sample window, evaluated `horizon_s`
    /// past the newest sample and clamped to [0, physical]. With fewer than
    /// two samples there is no trend; the current usage is returned.
    pub fn predict_usage(&self, id: ComponentId, horizon_s: f64) -> Result<u64, BrokerError> {
        let account = self.account(id)?;
        let samples = &account.samples;
        if samples.len() < 2 {
            return Ok(account.usage());
        }
        let n = samples.len() as f64;
        let mean_t = samples.iter().map(|&(t, _)| t).sum::<f64>() / n;
        let mean_u = samples.iter().map(|&(_, u)| u as f64).sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for &(t, u) in samples {
            let dt = t - mean_t;
            sxx += dt * dt;
            sxy += dt * (u as f64 - mean_u);
        }
        let newest_t = samples.back().expect("nonempty").0;
        let value = if sxx == 0.0 {
            mean_u
        } else {
            let slope = sxy / sxx;
            mean_u + slope * (newest_t + horizon_s - mean_t)
        };
        Ok(value.clamp(0.0, self.config.physical_bytes as f64).round() as u64)
    }

    /// Re-predicts demand, recomputes every target, and refreshes
    /// notifications. Returns the components whose notification changed.
    /// With no new samples since the last tick the result is empty.
    pub fn tick(&mut self, now: f64) -> Result<Vec<(ComponentId, Notification)>, BrokerError> {
        if let Some(last) = self.last_tick {
            debug_assert!(now >= last, "broker ticked backwards: {now} < {last}");
        }
        self.last_tick = Some(now);

        for i in 0..self.accounts.len() {
            self.accounts[i].predicted_bytes = self.predict_usage(ComponentId(i), self.config.horizon_s)?;
        }
        let floors: Vec<u64> = self.accounts.iter().map(|a| a.floor_bytes).collect();
        let demands: Vec<u64> = self
            .accounts
            .iter()
            .map(|a| a.predicted_bytes.max(a.floor_bytes))
            .collect();
        let targets = proportional_targets(self.budget_bytes(), &floors, &demands);

        let mut changed = Vec::new();
        for (i, target) in targets.into_iter().enumerate() {
            self.accounts[i].target_bytes = target;
            let fresh = self.classify(self.accounts[i].usage(), target);
            if fresh != self.accounts[i].notification {
                self.accounts[i].notification = fresh;
                changed.push((ComponentId(i), fresh));
            }
        }
        Ok(changed)
    }

    fn classify(&self, usage_bytes: u64, target_bytes: f64) -> Notification {
        let usage = usage_bytes as f64;
        if usage > target_bytes {
            Notification::MustShrink
        } else if usage < self.config.low_water * target_bytes {
            Notification::CanGrow
        } else {
            Notification::Stable
        }
    }

    /// Advisory state from the component's current usage and current target.
    /// Agrees with the stored notification at tick boundaries.
    pub fn notification_for(&self, id: ComponentId) -> Result<Notification, BrokerError> {
        let account = self.account(id)?;
        Ok(self.classify(account.usage(), account.target_bytes))
    }

    pub fn usage_bytes(&self, id: ComponentId) -> Result<u64, BrokerError> {
        Ok(self.account(id)?.usage())
    }

    pub fn predicted_bytes(&self, id: ComponentId) -> Result<u64, BrokerError> {
        Ok(self.account(id)?.predicted_bytes)
    }

    pub fn target_bytes(&self, id: ComponentId) -> Result<f64, BrokerError> {
        Ok(self.account(id)?.target_bytes)
    }

    pub fn floor_bytes(&self, id: ComponentId) -> Result<u64, BrokerError> {
        Ok(self.account(id)?.floor_bytes)
    }

    pub fn is_shrinkable(&self, id: ComponentId) -> Result<bool, BrokerError> {
        Ok(self.account(id)?.shrinkable)
    }

    pub fn component_names(&self) -> impl Iterator<Item = (ComponentId, &str)> {
        self.accounts.iter().enumerate().map(|(i, a)| (ComponentId(i), a.name.as_str()))
    }
}

/// Divides `budget` among components with the given floors and demands.
///
/// Demands at or under budget: everyone gets demand plus an equal share of
/// the surplus. Oversubscribed: floors are granted outright and the spare
/// budget is split in proportion to each component's demand above its floor.
///
/// Requires `demands[i] >= floors[i]` (callers clamp demand to the floor).
/// When the floors alone exceed the budget no proportional split exists;
/// the floors are returned unchanged.
pub fn proportional_targets(budget: f64, floors: &[u64], demands: &[u64]) -> Vec<f64> {
    assert_eq!(floors.len(), demands.len());
    debug_assert!(floors.iter().zip(demands).all(|(f, d)| d >= f));
    let n = floors.len();
    if n == 0 {
        return Vec::new();
    }
    let sum_demand: f64 = demands.iter().map(|&d| d as f64).sum();
    if sum_demand <= budget {
        let share = (budget - sum_demand) / n as f64;
        return demands.iter().map(|&d| d as f64 + share).collect();
    }
    let sum_floors: f64 = floors.iter().map(|&f| f as f64).sum();
    let spare = (budget - sum_floors).max(0.0);
    let sum_excess: f64 = floors.iter().zip(demands).map(|(&f, &d)| (d - f) as f64).sum();
    if sum_excess == 0.0 {
        return floors.iter().map(|&f| f as f64).collect();
    }
    floors
        .iter()
        .zip(demands)
        .map(|(&f, &d)| f as f64 + spare * ((d - f) as f64 / sum_excess))
        .collect()
}
