//! MASTER: multi-scale scheduling of base-algorithm instances with two
//! stationarity tests.
//!
//! A block of length 2ⁿ is partitioned, for every m = 0..=n, into dyadic
//! intervals of length 2ᵐ; each interval gets its own instance of the base
//! policy with probability ρ(2ⁿ)/ρ(2ᵐ). At every step the shortest scheduled
//! interval covering `t` is active. Longer instances are paused underneath
//! and resume with their old history once the shorter one ends.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{ArmHistory, IndexPolicy};
use crate::error::{Error, Result};
use crate::learner::{Counters, Learner};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhoForm {
    /// ρ(t) = 1/√t, the smallest rate the base algorithm may claim.
    #[serde(rename = "inv_sqrt")]
    InverseSqrt,
    /// ρ(t) = min(1, √(A ln(T/δ) / t)), floored at 1/√t.
    #[serde(rename = "mab")]
    MabSqrtALog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoConfig {
    form: RhoForm,
    arms: usize,
    horizon: u64,
    delta: f64,
    scale: f64,
}

impl RhoConfig {
    /// Builds the rate function and checks over t = 1..=T that ρ ≥ 1/√t,
    /// that ρ is non-increasing and that t·ρ(t) is non-decreasing.
    pub fn new(form: RhoForm, arms: usize, horizon: u64, delta: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("master.delta", format!("must lie in (0, 1), got {delta}")));
        }
        let scale = arms as f64 * (horizon as f64 / delta).ln();
        let cfg = Self {
            form,
            arms,
            horizon,
            delta,
            scale,
        };
        cfg.check_shape()?;
        Ok(cfg)
    }

    fn check_shape(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        let mut prev_c = 0.0;
        for t in 1..=self.horizon {
            let r = self.rho(t);
            let tf = t as f64;
            let c = tf * r;
            // Relative slack absorbs rounding in sqrt.
            if r < (1.0 - 1e-12) / tf.sqrt() || r > prev * (1.0 + 1e-12) || c < prev_c * (1.0 - 1e-12) {
                return Err(Error::param(
                    "master.rho",
                    format!("rate function violates its shape constraints at t = {t}"),
                ));
            }
            prev = r;
            prev_c = c;
        }
        Ok(())
    }

    pub fn form(&self) -> RhoForm {
        self.form
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self, t: u64) -> f64 {
        let t = t as f64;
        let floor = 1.0 / t.sqrt();
        match self.form {
            RhoForm::InverseSqrt => floor,
            RhoForm::MabSqrtALog => (self.scale / t).sqrt().min(1.0).max(floor),
        }
    }

    /// ρ̂ inflation factor 6·n̂·ln(T/δ) with n̂ = log₂T + 1; the Test 1 and
    /// Test 2 thresholds are 9ρ̂ and 3ρ̂ respectively.
    pub fn inflation(&self) -> f64 {
        let t = self.horizon as f64;
        6.0 * (t.log2() + 1.0) * (t / self.delta).ln()
    }
}

/// Which dyadic slots of one block carry an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    n: u32,
    start: u64,
    /// levels[m][k]: whether [start + k·2ᵐ, start + (k+1)·2ᵐ − 1] is scheduled.
    levels: Vec<Vec<bool>>,
}

impl BlockSchedule {
    /// Draws the slots of a block of order `n` starting at `start`. Slots
    /// that would start after `horizon` are never materialised.
    pub fn sample(n: u32, start: u64, horizon: u64, rho: &RhoConfig, rng: &mut SimRng) -> Self {
        let top = rho.rho(1u64 << n);
        let remaining = horizon.saturating_sub(start) + 1;
        let levels = (0..=n)
            .map(|m| {
                let len = 1u64 << m;
                let slots = (1u64 << (n - m)).min(remaining.div_ceil(len)) as usize;
                let p = top / rho.rho(len);
                if m == n || p >= 1.0 {
                    vec![true; slots]
                } else {
                    (0..slots).map(|_| rng.random::<f64>() < p).collect()
                }
            })
            .collect();
        Self { n, start, levels }
    }

    /// Build from explicit per-level slot flags. The top level must hold a
    /// single scheduled slot.
    pub fn from_levels(start: u64, levels: Vec<Vec<bool>>) -> Result<Self> {
        let n = levels.len().checked_sub(1).ok_or_else(|| Error::param("levels", "empty"))? as u32;
        if levels[n as usize] != [true] {
            return Err(Error::param("levels", "top level must be a single scheduled slot"));
        }
        for (m, slots) in levels.iter().enumerate() {
            if slots.len() > 1usize << (n as usize - m) {
                return Err(Error::param("levels", format!("too many slots at level {m}")));
            }
        }
        Ok(Self { n, start, levels })
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn is_scheduled(&self, m: u32, k: usize) -> bool {
        self.levels
            .get(m as usize)
            .and_then(|l| l.get(k))
            .copied()
            .unwrap_or(false)
    }

    pub fn scheduled(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.levels.iter().enumerate().flat_map(|(m, l)| {
            l.iter()
                .enumerate()
                .filter(|(_, &s)| s)
                .map(move |(k, _)| (m as u32, k))
        })
    }

    /// Shortest scheduled slot covering `t`.
    pub fn covering(&self, t: u64) -> (u32, usize) {
        let offset = t - self.start;
        for m in 0..=self.n {
            let k = (offset >> m) as usize;
            if self.is_scheduled(m, k) {
                return (m, k);
            }
        }
        (self.n, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Pending,
    Active,
    Paused,
    Finished,
}

#[derive(Debug, Clone)]
pub struct AlgInstance {
    pub start: u64,
    pub end: u64,
    pub level: u32,
    pub history: ArmHistory,
    pub last_f_tilde: f64,
    pub state: InstanceState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterConfig {
    pub rho: RhoConfig,
    pub base: IndexPolicy,
    /// Keep n = ⌊log₂T⌋ across restarts instead of the doubling outer loop.
    pub fixed_n: bool,
    /// Multiplies both test thresholds. Only meant for exercising the
    /// restart path in tests.
    pub threshold_scale: f64,
}

impl MasterConfig {
    pub fn new(rho: RhoConfig, base: IndexPolicy) -> Self {
        Self {
            rho,
            base,
            fixed_n: true,
            threshold_scale: 1.0,
        }
    }

    pub fn test1_threshold(&self, level: u32) -> f64 {
        9.0 * self.rho.inflation() * self.rho.rho(1u64 << level) * self.threshold_scale
    }

    pub fn test2_threshold(&self, elapsed: u64) -> f64 {
        3.0 * self.rho.inflation() * self.rho.rho(elapsed) * self.threshold_scale
    }
}

/// Test 1: mean reward over a finished instance's interval minus the block's
/// minimum optimistic estimate.
pub fn test1_statistic(interval_reward_sum: f64, level: u32, min_g: f64) -> f64 {
    interval_reward_sum / (1u64 << level) as f64 - min_g
}

/// Test 2: average of g̃ − R since the block start.
pub fn test2_statistic(gap_sum: f64, elapsed: u64) -> f64 {
    gap_sum / elapsed as f64
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Master {
    cfg: MasterConfig,
    horizon: u64,
    arms: usize,
    rng: SimRng,
    n: u32,
    block_start: u64,
    slot_ids: Vec<Vec<u32>>,
    instances: Vec<AlgInstance>,
    active: Option<usize>,
    /// Steps completed so far.
    t: u64,
    pending: Option<(usize, f64)>,
    g_trace: Vec<f64>,
    g_min: f64,
    gap_sum: f64,
    /// reward_prefix[i] = Σ R over the first i steps of the block.
    reward_prefix: Vec<f64>,
    counters: Counters,
    blocks: u64,
}

impl Master {
    pub fn new(cfg: MasterConfig, rng: SimRng) -> Self {
        let horizon = cfg.rho.horizon();
        let n = if cfg.fixed_n {
            63 - horizon.max(1).leading_zeros()
        } else {
            0
        };
        let mut master = Self::empty(cfg, rng, n);
        master.start_block(1);
        master
    }

    /// Start from a hand-made first block.
    pub fn with_schedule(cfg: MasterConfig, rng: SimRng, schedule: BlockSchedule) -> Self {
        let mut master = Self::empty(cfg, rng, schedule.order());
        master.install(schedule);
        master
    }

    fn empty(cfg: MasterConfig, rng: SimRng, n: u32) -> Self {
        Self {
            horizon: cfg.rho.horizon(),
            arms: cfg.rho.arms(),
            cfg,
            rng,
            n,
            block_start: 1,
            slot_ids: Vec::new(),
            instances: Vec::new(),
            active: None,
            t: 0,
            pending: None,
            g_trace: Vec::new(),
            g_min: f64::INFINITY,
            gap_sum: 0.0,
            reward_prefix: vec![0.0],
            counters: Counters::default(),
            blocks: 0,
        }
    }

    fn start_block(&mut self, start: u64) {
        let schedule = BlockSchedule::sample(self.n, start, self.horizon, &self.cfg.rho, &mut self.rng);
        self.install(schedule);
    }

    fn install(&mut self, schedule: BlockSchedule) {
        self.n = schedule.n;
        self.block_start = schedule.start;
        self.instances.clear();
        self.slot_ids.clear();
        for (m, level) in schedule.levels.iter().enumerate() {
            let len = 1u64 << m;
            let ids = level
                .iter()
                .enumerate()
                .map(|(k, &on)| {
                    if !on {
                        return NONE;
                    }
                    let start = schedule.start + k as u64 * len;
                    self.instances.push(AlgInstance {
                        start,
                        end: start + len - 1,
                        level: m as u32,
                        history: ArmHistory::new(self.arms),
                        last_f_tilde: 1.0,
                        state: InstanceState::Pending,
                    });
                    (self.instances.len() - 1) as u32
                })
                .collect();
            self.slot_ids.push(ids);
        }
        self.active = None;
        self.pending = None;
        self.g_trace.clear();
        self.g_min = f64::INFINITY;
        self.gap_sum = 0.0;
        self.reward_prefix.clear();
        self.reward_prefix.push(0.0);
        self.blocks += 1;
    }

    fn slot(&self, m: u32, k: u64) -> Option<usize> {
        match self.slot_ids.get(m as usize)?.get(k as usize) {
            Some(&id) if id != NONE => Some(id as usize),
            _ => None,
        }
    }

    /// Shortest scheduled instance covering `t`.
    fn covering(&self, t: u64) -> usize {
        let offset = t - self.block_start;
        (0..=self.n)
            .find_map(|m| self.slot(m, offset >> m))
            .expect("the length-2^n instance covers the whole block")
    }

    fn activate(&mut self, t: u64) -> usize {
        let id = self.covering(t);
        if self.active != Some(id) {
            if let Some(prev) = self.active {
                let p = &mut self.instances[prev];
                p.state = if p.end >= t {
                    InstanceState::Paused
                } else {
                    InstanceState::Finished
                };
            }
            self.instances[id].state = InstanceState::Active;
            self.active = Some(id);
        }
        id
    }

    fn restart(&mut self, triggered: bool) {
        if triggered {
            self.counters.declared_changes += 1;
            self.counters.restarts += 1;
        }
        if !self.cfg.fixed_n {
            self.n += 1;
        }
        self.start_block(self.t + 1);
    }

    /// Returns true when either test fires at the current step.
    fn run_tests(&mut self, t: u64) -> bool {
        let elapsed = t - self.block_start + 1;
        let mut fired = false;
        for m in 0..=self.n {
            let len = 1u64 << m;
            if !elapsed.is_multiple_of(len) {
                continue;
            }
            let Some(id) = self.slot(m, (elapsed - 1) >> m) else {
                continue;
            };
            self.instances[id].state = InstanceState::Finished;
            if self.active == Some(id) {
                self.active = None;
            }
            let first = (elapsed - len) as usize;
            let sum = self.reward_prefix[elapsed as usize] - self.reward_prefix[first];
            if test1_statistic(sum, m, self.g_min) >= self.cfg.test1_threshold(m) {
                fired = true;
            }
        }
        if test2_statistic(self.gap_sum, elapsed) >= self.cfg.test2_threshold(elapsed) {
            fired = true;
        }
        fired
    }

    pub fn config(&self) -> &MasterConfig {
        &self.cfg
    }

    /// Current block order n and block start t_n.
    pub fn block(&self) -> (u32, u64) {
        (self.n, self.block_start)
    }

    pub fn blocks_started(&self) -> u64 {
        self.blocks
    }

    pub fn instances(&self) -> &[AlgInstance] {
        &self.instances
    }

    pub fn instance_at(&self, m: u32, k: u64) -> Option<&AlgInstance> {
        self.slot(m, k).map(|id| &self.instances[id])
    }

    pub fn active_instance(&self) -> Option<&AlgInstance> {
        self.active.map(|id| &self.instances[id])
    }

    /// g̃ values recorded since the block start.
    pub fn g_trace(&self) -> &[f64] {
        &self.g_trace
    }

    pub fn min_g(&self) -> f64 {
        self.g_min
    }

    pub fn time(&self) -> u64 {
        self.t
    }
}

impl Learner for Master {
    fn select(&mut self) -> usize {
        let t = self.t + 1;
        let id = self.activate(t);
        let inst = &mut self.instances[id];
        let (arm, f) = self.cfg.base.select(&inst.history, t - inst.start + 1);
        inst.last_f_tilde = f;
        self.pending = Some((id, f));
        arm
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        let (id, g) = self.pending.take().expect("observe follows select");
        let t = self.t + 1;
        self.t = t;
        self.instances[id].history.update(arm, reward);
        self.g_trace.push(g);
        self.g_min = self.g_min.min(g);
        self.gap_sum += g - reward;
        let last = *self.reward_prefix.last().unwrap();
        self.reward_prefix.push(last + reward);

        if self.run_tests(t) {
            self.restart(true);
        } else if t == self.block_start + (1u64 << self.n) - 1 {
            self.restart(false);
        }
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}
