//! Piecewise-stationary Bernoulli bandit environments.
//!
//! An environment is a change-point schedule plus a rule for moving the arm
//! means at each change. Means are constant between change points; a change
//! at time `ν` is in effect from step `ν` onwards.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// How change points are placed over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChangeModel {
    /// Inter-arrival gaps i.i.d. Geo(η) with η = T^(-ξ).
    Geometric { xi: f64 },
    /// `n_c` change points every round(T / n_c) steps.
    Deterministic { n_c: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSchedule {
    horizon: u64,
    points: Vec<u64>,
    model: ChangeModel,
}

impl ChangeSchedule {
    /// Sample change points with geometric gaps, starting from ν⁽⁰⁾ = 1.
    pub fn geometric(horizon: u64, xi: f64, rng: &mut SimRng) -> Result<Self> {
        let eta = geometric_rate(horizon, xi)?;
        let gaps = Geometric::new(eta).map_err(|e| Error::param("xi", e.to_string()))?;
        let mut points = Vec::new();
        let mut last = 1u64;
        loop {
            // rand_distr counts failures before the first success; shift to {1, 2, ...}.
            let gap = gaps.sample(rng).saturating_add(1);
            last = last.saturating_add(gap);
            if last > horizon {
                break;
            }
            points.push(last);
        }
        Ok(Self {
            horizon,
            points,
            model: ChangeModel::Geometric { xi },
        })
    }

    pub fn deterministic(horizon: u64, n_c: u64) -> Result<Self> {
        if n_c == 0 || n_c >= horizon {
            return Err(Error::param(
                "n_c",
                format!("need 1 <= n_c < T, got n_c = {n_c}, T = {horizon}"),
            ));
        }
        let spacing = deterministic_spacing(horizon, n_c);
        let points = (1..=n_c)
            .map(|k| 1 + k * spacing)
            .take_while(|&p| p <= horizon)
            .collect();
        Ok(Self {
            horizon,
            points,
            model: ChangeModel::Deterministic { n_c },
        })
    }

    /// A schedule with explicit change times, mostly useful for tests.
    pub fn from_points(horizon: u64, points: Vec<u64>, model: ChangeModel) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        let ordered = points.windows(2).all(|w| w[0] < w[1]);
        let in_range = points.iter().all(|&p| (2..=horizon).contains(&p));
        if !ordered || !in_range {
            return Err(Error::param(
                "points",
                "change points must be strictly increasing and lie in [2, T]",
            ));
        }
        Ok(Self {
            horizon,
            points,
            model,
        })
    }

    /// A schedule without any change (stationary environment).
    pub fn stationary(horizon: u64) -> Self {
        Self {
            horizon,
            points: Vec::new(),
            model: ChangeModel::Deterministic { n_c: 0 },
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn model(&self) -> ChangeModel {
        self.model
    }

    /// Change rate of the schedule's generating process: T^(-ξ) for geometric
    /// schedules and N_C / T for deterministic ones.
    pub fn eta(&self) -> f64 {
        model_eta(self.model, self.horizon)
    }
}

pub fn model_eta(model: ChangeModel, horizon: u64) -> f64 {
    match model {
        ChangeModel::Geometric { xi } => (horizon as f64).powf(-xi),
        ChangeModel::Deterministic { n_c } => n_c as f64 / horizon as f64,
    }
}

fn geometric_rate(horizon: u64, xi: f64) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::param("horizon", "geometric schedules need T >= 2"));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::param("xi", format!("must lie in (0, 1), got {xi}")));
    }
    let eta = (horizon as f64).powf(-xi);
    if eta >= 1.0 {
        return Err(Error::param("xi", "T^(-xi) must be below 1"));
    }
    Ok(eta)
}

pub fn deterministic_spacing(horizon: u64, n_c: u64) -> u64 {
    ((horizon as f64 / n_c as f64).round() as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// Random subsets of arms move by ±U[0.1, 0.4] at every change.
    Uniform,
    /// The lowest arm jumps just above the current best at every change.
    #[serde(rename = "worst")]
    WorstCase,
}

const WORST_BASE: f64 = 0.3;
const WORST_OFFSET: (f64, f64) = (0.0005, 0.005);
const WORST_GAP: (f64, f64) = (0.005, 0.05);
const WORST_CEILING: f64 = 0.99;
const UNIFORM_MAGNITUDE: (f64, f64) = (0.1, 0.4);

pub fn init_means(problem: Problem, arms: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if arms == 0 {
        return Err(Error::param("arms", "need at least one arm"));
    }
    Ok(match problem {
        Problem::Uniform => (0..arms).map(|_| rng.random::<f64>()).collect(),
        Problem::WorstCase => (0..arms)
            .map(|_| WORST_BASE + rng.random_range(WORST_OFFSET.0..=WORST_OFFSET.1))
            .collect(),
    })
}

/// Shift a Uniform-problem mean by a signed `delta`, reflecting the change
/// when it would leave [0, 1].
pub fn uniform_shift(mean: f64, delta: f64) -> f64 {
    let moved = mean + delta;
    if (0.0..=1.0).contains(&moved) {
        moved
    } else {
        mean - delta
    }
}

/// Lift the lowest arm to `max + gap`. Returns `false` without touching
/// `means` when that would cross the 0.99 ceiling.
pub fn worst_case_lift(means: &mut [f64], gap: f64) -> bool {
    let lowest = argmin(means);
    let top = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = top + gap;
    if target > WORST_CEILING {
        return false;
    }
    means[lowest] = target;
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeOutcome {
    Shifted,
    /// Worst-Case means were re-initialised after hitting the ceiling.
    Reset,
}

pub fn apply_change(problem: Problem, means: &mut [f64], rng: &mut SimRng) -> ChangeOutcome {
    let arms = means.len();
    match problem {
        Problem::Uniform => {
            let changing = if arms >= 2 {
                rng.random_range(2..=arms)
            } else {
                arms
            };
            for arm in rand::seq::index::sample(rng, arms, changing) {
                let magnitude = rng.random_range(UNIFORM_MAGNITUDE.0..=UNIFORM_MAGNITUDE.1);
                let delta = if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                };
                means[arm] = uniform_shift(means[arm], delta);
            }
            ChangeOutcome::Shifted
        }
        Problem::WorstCase => {
            let gap = rng.random_range(WORST_GAP.0..=WORST_GAP.1);
            if worst_case_lift(means, gap) {
                return ChangeOutcome::Shifted;
            }
            let lowest = argmin(means);
            for m in means.iter_mut() {
                *m = WORST_BASE + rng.random_range(WORST_OFFSET.0..=WORST_OFFSET.1);
            }
            let top = argmax(means);
            means.swap(lowest, top);
            ChangeOutcome::Reset
        }
    }
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-step oracle quantities: f*_t and the mean of the arm actually played.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleTrace {
    pub best_mean: Vec<f64>,
    pub chosen_mean: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub best_mean: f64,
    pub chosen_mean: f64,
}

impl StepOutcome {
    pub fn regret(&self) -> f64 {
        self.best_mean - self.chosen_mean
    }
}

#[derive(Debug, Clone)]
pub struct EnvState {
    problem: Problem,
    means: Vec<f64>,
    best_mean: f64,
    schedule: ChangeSchedule,
    next_change: usize,
    t: u64,
    change_rng: SimRng,
    reward_rng: SimRng,
    resets: u64,
    trace: Option<OracleTrace>,
}

impl EnvState {
    /// Build an environment. `change_rng` drives initial means and changes,
    /// `reward_rng` the Bernoulli draws.
    pub fn new(
        problem: Problem,
        arms: usize,
        schedule: ChangeSchedule,
        mut change_rng: SimRng,
        reward_rng: SimRng,
    ) -> Result<Self> {
        let means = init_means(problem, arms, &mut change_rng)?;
        Ok(Self::with_means(problem, means, schedule, change_rng, reward_rng))
    }

    pub fn with_means(
        problem: Problem,
        means: Vec<f64>,
        schedule: ChangeSchedule,
        change_rng: SimRng,
        reward_rng: SimRng,
    ) -> Self {
        let best_mean = means[argmax(&means)];
        Self {
            problem,
            means,
            best_mean,
            schedule,
            next_change: 0,
            t: 0,
            change_rng,
            reward_rng,
            resets: 0,
            trace: None,
        }
    }

    /// Keep the full per-step [`OracleTrace`].
    pub fn record_trace(mut self) -> Self {
        self.trace = Some(OracleTrace::default());
        self
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn horizon(&self) -> u64 {
        self.schedule.horizon
    }

    /// Number of steps served so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn schedule(&self) -> &ChangeSchedule {
        &self.schedule
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn worst_case_resets(&self) -> u64 {
        self.resets
    }

    pub fn trace(&self) -> Option<&OracleTrace> {
        self.trace.as_ref()
    }

    /// Means that will be in force at the next step, i.e. after any change
    /// scheduled for it has been applied.
    pub fn upcoming_means(&mut self) -> &[f64] {
        self.advance_changes(self.t + 1);
        &self.means
    }

    fn advance_changes(&mut self, now: u64) {
        while let Some(&p) = self.schedule.points.get(self.next_change) {
            if p > now {
                break;
            }
            if apply_change(self.problem, &mut self.means, &mut self.change_rng)
                == ChangeOutcome::Reset
            {
                self.resets += 1;
            }
            self.best_mean = self.means[argmax(&self.means)];
            self.next_change += 1;
        }
    }

    /// Serve one step: apply a scheduled change if `t` is a change point,
    /// then draw a Bernoulli reward for `arm`.
    pub fn step(&mut self, arm: usize) -> Result<StepOutcome> {
        let arms = self.means.len();
        if arm >= arms {
            return Err(Error::ArmIndex { arm, arms });
        }
        let now = self.t + 1;
        if now > self.schedule.horizon {
            return Err(Error::Exhausted {
                horizon: self.schedule.horizon,
            });
        }
        self.advance_changes(now);
        self.t = now;
        let mean = self.means[arm];
        let reward = if self.reward_rng.random::<f64>() < mean {
            1.0
        } else {
            0.0
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.best_mean.push(self.best_mean);
            trace.chosen_mean.push(mean);
        }
        Ok(StepOutcome {
            reward,
            best_mean: self.best_mean,
            chosen_mean: mean,
        })
    }
}
