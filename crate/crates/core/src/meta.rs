//! Restarting wrappers around a stationary index policy: random restarts on
//! a geometric schedule (RR), per-step coin-flip restarts (RR_p), and GLR
//! change detection with global restarts (QCD+ and GLRklUCB).

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::bandit::{ArmHistory, IndexPolicy};
use crate::error::{Error, Result};
use crate::glr::{DetectorConfig, GlrDetector};
use crate::learner::{Counters, Learner};
use crate::rng::SimRng;

/// η_R = √(η / ln T): restart rate of RR given the change rate η.
pub fn auto_restart_rate(eta: f64, horizon: u64) -> f64 {
    (eta / (horizon as f64).ln()).sqrt()
}

/// Default forced-exploration rate α = √(A ln T / T).
pub fn auto_exploration_rate(arms: usize, horizon: u64) -> f64 {
    let t = horizon as f64;
    (arms as f64 * t.ln() / t).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RestartPolicy {
    /// Restart times with i.i.d. Geo(η_R) gaps, drawn up front.
    GeoSchedule { eta_r: f64, times: Vec<u64> },
    /// Restart before each step with probability `p`.
    PerStepProb { p: f64 },
}

impl RestartPolicy {
    pub fn geo_schedule(eta_r: f64, horizon: u64, rng: &mut SimRng) -> Result<Self> {
        if !(eta_r > 0.0 && eta_r < 1.0) {
            return Err(Error::param("rr.eta_r", format!("must lie in (0, 1), got {eta_r}")));
        }
        let gaps = Geometric::new(eta_r).map_err(|e| Error::param("rr.eta_r", e.to_string()))?;
        let mut times = Vec::new();
        let mut last = 1u64;
        loop {
            last = last.saturating_add(gaps.sample(rng).saturating_add(1));
            if last > horizon {
                break;
            }
            times.push(last);
        }
        Ok(RestartPolicy::GeoSchedule { eta_r, times })
    }

    pub fn per_step(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param("rr_p.p", format!("must lie in [0, 1), got {p}")));
        }
        Ok(RestartPolicy::PerStepProb { p })
    }
}

/// RR and RR_p: a base policy whose history is wiped at random times.
#[derive(Debug, Clone)]
pub struct RandomRestarts {
    policy: IndexPolicy,
    history: ArmHistory,
    restart: RestartPolicy,
    next_restart: usize,
    t: u64,
    rng: SimRng,
    counters: Counters,
}

impl RandomRestarts {
    pub fn new(policy: IndexPolicy, arms: usize, restart: RestartPolicy, rng: SimRng) -> Self {
        Self {
            policy,
            history: ArmHistory::new(arms),
            restart,
            next_restart: 0,
            t: 0,
            rng,
            counters: Counters::default(),
        }
    }

    pub fn history(&self) -> &ArmHistory {
        &self.history
    }

    fn due(&mut self, t: u64) -> bool {
        match &self.restart {
            RestartPolicy::GeoSchedule { times, .. } => {
                if times.get(self.next_restart) == Some(&t) {
                    self.next_restart += 1;
                    true
                } else {
                    false
                }
            }
            RestartPolicy::PerStepProb { p } => {
                let p = *p;
                p > 0.0 && self.rng.random_bool(p)
            }
        }
    }
}

impl Learner for RandomRestarts {
    fn select(&mut self) -> usize {
        let t = self.t + 1;
        if self.due(t) {
            self.history.reset();
            self.counters.restarts += 1;
        }
        self.policy.select(&self.history, self.history.total_pulls() + 1).0
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.t += 1;
        self.history.update(arm, reward);
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}

/// Round-robin forced exploration: the first `arms` steps of every cycle of
/// ⌈A / α⌉ steps (counted from the last restart) sweep the arms in order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedExploration {
    arms: u64,
    cycle: u64,
}

impl ForcedExploration {
    pub fn new(arms: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("glr.alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let cycle = (arms as f64 / alpha).ceil() as u64;
        Ok(Self {
            arms: arms as u64,
            cycle: cycle.max(arms as u64),
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Forced arm at `tau` steps after the last restart, if any.
    pub fn arm_at(&self, tau: u64) -> Option<usize> {
        let phase = tau % self.cycle;
        (phase < self.arms).then_some(phase as usize)
    }
}

/// QCD+ (no forced exploration) and GLRklUCB (with it): a base policy fed to
/// one GLR detector per arm; any detection wipes every arm's history and
/// every detector.
#[derive(Debug, Clone)]
pub struct DetectorRestarts {
    policy: IndexPolicy,
    history: ArmHistory,
    detectors: Vec<GlrDetector>,
    forced: Option<ForcedExploration>,
    since_restart: u64,
    counters: Counters,
}

impl DetectorRestarts {
    /// `detection = None` runs the wrapper without any change test.
    pub fn new(
        policy: IndexPolicy,
        arms: usize,
        detection: Option<DetectorConfig>,
        forced: Option<ForcedExploration>,
    ) -> Self {
        Self {
            policy,
            history: ArmHistory::new(arms),
            detectors: detection
                .map(|cfg| (0..arms).map(|_| GlrDetector::new(cfg)).collect())
                .unwrap_or_default(),
            forced,
            since_restart: 0,
            counters: Counters::default(),
        }
    }

    pub fn qcd_plus(policy: IndexPolicy, arms: usize, detection: DetectorConfig) -> Self {
        Self::new(policy, arms, Some(detection), None)
    }

    pub fn glr_klucb(
        policy: IndexPolicy,
        arms: usize,
        detection: DetectorConfig,
        alpha: f64,
    ) -> Result<Self> {
        Ok(Self::new(
            policy,
            arms,
            Some(detection),
            Some(ForcedExploration::new(arms, alpha)?),
        ))
    }

    pub fn history(&self) -> &ArmHistory {
        &self.history
    }

    pub fn detectors(&self) -> &[GlrDetector] {
        &self.detectors
    }

    fn global_restart(&mut self) {
        self.history.reset();
        self.detectors.iter_mut().for_each(GlrDetector::clear);
        self.since_restart = 0;
        self.counters.declared_changes += 1;
        self.counters.restarts += 1;
    }
}

impl Learner for DetectorRestarts {
    fn select(&mut self) -> usize {
        if let Some(arm) = self.forced.and_then(|f| f.arm_at(self.since_restart)) {
            return arm;
        }
        self.policy.select(&self.history, self.history.total_pulls() + 1).0
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.history.update(arm, reward);
        self.since_restart += 1;
        if let Some(d) = self.detectors.get_mut(arm) {
            d.push(reward);
            if d.detect() {
                self.global_restart();
            }
        }
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}
