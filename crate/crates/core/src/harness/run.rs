//! Trials and their aggregation.

use std::time::Instant;

use rayon::prelude::*;

use crate::env::{argmax, ChangeModel, ChangeSchedule, EnvState};
use crate::error::{Error, Result};
use crate::rng::{split, trial_stream, Stream};

use super::algo::{AlgoSpec, Cell};
use super::config::{AlgoKind, CpModel, ExperimentConfig};

/// Maximum number of points kept from each regret trace.
pub const TRACE_POINTS: u64 = 1000;

/// Steps at which the cumulative regret is recorded: ⌈i·T/K⌉ for
/// i = 1..=K with K = min(T, 1000), or every step when `full`.
pub fn checkpoints(horizon: u64, full: bool) -> Vec<u64> {
    let k = if full { horizon } else { horizon.min(TRACE_POINTS) };
    (1..=k).map(|i| (i * horizon).div_ceil(k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    /// Cumulative dynamic regret at each checkpoint.
    pub trace: Vec<f64>,
    pub final_regret: f64,
    pub declared_changes: u64,
    pub restarts: u64,
    pub wall_seconds: f64,
}

/// Everything needed to run trials of one algorithm on one cell.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub algo: AlgoKind,
    pub cell: Cell,
    pub spec: AlgoSpec,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    pub record_wall_time: bool,
}

impl TrialPlan {
    pub fn new(cfg: &ExperimentConfig, cell: Cell, algo: AlgoKind) -> Result<Self> {
        Ok(Self {
            algo,
            cell,
            spec: AlgoSpec::resolve(algo, cfg, &cell)?,
            master_seed: cfg.env.seed,
            checkpoints: checkpoints(cell.horizon, cfg.run.full_trace),
            record_wall_time: cfg.run.record_wall_time,
        })
    }

    /// Environment of trial `trial`. Every algorithm sees the same change
    /// points, means and reward draws for a given trial.
    pub fn environment(&self, trial_seed: u64) -> Result<EnvState> {
        let mut changes = trial_stream(trial_seed, Stream::Changes);
        let c = &self.cell;
        let schedule = match c.model {
            ChangeModel::Geometric { xi } => ChangeSchedule::geometric(c.horizon, xi, &mut changes)?,
            ChangeModel::Deterministic { n_c } => ChangeSchedule::deterministic(c.horizon, n_c)?,
        };
        EnvState::new(c.problem, c.arms, schedule, changes, trial_stream(trial_seed, Stream::Rewards))
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialResult> {
        let seed = split(self.master_seed, trial);
        self.run_seeded(trial, seed).map_err(|e| Error::Trial {
            trial,
            seed,
            source: Box::new(e),
        })
    }

    fn run_seeded(&self, trial: u64, seed: u64) -> Result<TrialResult> {
        let mut env = self.environment(seed)?;
        let mut learner = self.spec.build(&self.cell, trial_stream(seed, Stream::Algorithm))?;
        let mut trace = Vec::with_capacity(self.checkpoints.len());
        let mut next = self.checkpoints.iter().peekable();
        let mut regret = 0.0;
        let start = Instant::now();
        for t in 1..=self.cell.horizon {
            let outcome = match learner.as_mut() {
                Some(l) => l.play(&mut env)?,
                None => {
                    let arm = argmax(env.upcoming_means());
                    env.step(arm)?
                }
            };
            regret += outcome.regret();
            if next.peek() == Some(&&t) {
                next.next();
                trace.push(regret);
            }
        }
        let wall = start.elapsed().as_secs_f64();
        let counters = learner.map(|l| l.counters()).unwrap_or_default();
        Ok(TrialResult {
            trial,
            seed,
            trace,
            final_regret: regret,
            declared_changes: counters.declared_changes,
            restarts: counters.restarts,
            wall_seconds: if self.record_wall_time { wall } else { 0.0 },
        })
    }
}

/// Running mean and sample variance, folded in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation; 0 for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub algo: AlgoKind,
    pub cell: Cell,
    pub trials: u64,
    pub final_regret: Moments,
    pub declared_changes: Moments,
    pub restarts: Moments,
    pub wall_seconds: Moments,
    /// (t, mean, std) of the cumulative regret at each checkpoint.
    pub trace: Vec<(u64, f64, f64)>,
}

/// Trials are run in chunks so full traces never all sit in memory; within
/// and across chunks results are folded in trial order.
const CHUNK: u64 = 256;

pub fn aggregate_trials(plan: &TrialPlan, trials: u64) -> Result<AggregateResult> {
    let mut final_regret = Moments::default();
    let mut declared = Moments::default();
    let mut restarts = Moments::default();
    let mut wall = Moments::default();
    let mut trace = vec![Moments::default(); plan.checkpoints.len()];
    let mut lo = 0;
    while lo < trials {
        let hi = (lo + CHUNK).min(trials);
        let results: Vec<Result<TrialResult>> = (lo..hi).into_par_iter().map(|i| plan.run_trial(i)).collect();
        for r in results {
            let r = r?;
            final_regret.push(r.final_regret);
            declared.push(r.declared_changes as f64);
            restarts.push(r.restarts as f64);
            wall.push(r.wall_seconds);
            for (m, &x) in trace.iter_mut().zip(&r.trace) {
                m.push(x);
            }
        }
        lo = hi;
    }
    Ok(AggregateResult {
        algo: plan.algo,
        cell: plan.cell,
        trials,
        final_regret,
        declared_changes: declared,
        restarts,
        wall_seconds: wall,
        trace: plan
            .checkpoints
            .iter()
            .zip(&trace)
            .map(|(&t, m)| (t, m.mean(), m.std()))
            .collect(),
    })
}

/// The single cell described by the `env` section.
pub fn env_cell(cfg: &ExperimentConfig) -> Cell {
    Cell {
        problem: cfg.env.problem,
        model: cfg.env.change_model(),
        horizon: cfg.env.horizon,
        arms: cfg.env.arms,
    }
}

/// Cells of the `sweep` grid, ordered by horizon, problem, change model, ξ.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &horizon in &cfg.sweep.horizons {
        for &problem in &cfg.sweep.problems {
            let mut models: Vec<ChangeModel> = cfg.sweep.xis.iter().map(|&xi| ChangeModel::Geometric { xi }).collect();
            if cfg.sweep.deterministic {
                for &xi in &cfg.sweep.xis {
                    let env = super::config::EnvSection {
                        cp_model: CpModel::Deterministic,
                        horizon,
                        xi,
                        ..cfg.env.clone()
                    };
                    models.push(env.change_model());
                }
            }
            cells.extend(models.into_iter().map(|model| Cell {
                problem,
                model,
                horizon,
                arms: cfg.env.arms,
            }));
        }
    }
    cells
}

/// Run every configured algorithm on every cell, in order.
pub fn run_experiment(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<Vec<AggregateResult>> {
    // Resolve everything first so configuration problems surface before any
    // trial runs.
    let mut plans = Vec::new();
    for cell in cells {
        for &algo in &cfg.algos {
            plans.push(TrialPlan::new(cfg, *cell, algo)?);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads.count())
        .build()
        .map_err(|e| Error::config("run.threads", e.to_string()))?;
    pool.install(|| {
        plans
            .iter()
            .map(|plan| {
                let start = Instant::now();
                let agg = aggregate_trials(plan, cfg.run.trials)?;
                log::info!(
                    "{} {} {} T={} param={} regret={:.1} detections={:.2} ({:.1}s)",
                    plan.algo,
                    plan.cell.problem_name(),
                    plan.cell.cp_model_name(),
                    plan.cell.horizon,
                    plan.cell.param(),
                    agg.final_regret.mean(),
                    agg.declared_changes.mean(),
                    start.elapsed().as_secs_f64()
                );
                Ok(agg)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Problem;

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(10, false), (1..=10).collect::<Vec<_>>());
        let c = checkpoints(10_000, false);
        assert_eq!(c.len(), 1000);
        assert_eq!(c[0], 10);
        assert_eq!(*c.last().unwrap(), 10_000);
        let c = checkpoints(2500, false);
        assert_eq!(c.len(), 1000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*c.last().unwrap(), 2500);
        assert_eq!(checkpoints(5000, true).len(), 5000);
    }

    #[test]
    fn moments() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.std() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let mut one = Moments::default();
        one.push(7.0);
        assert_eq!(one.std(), 0.0);
    }

    #[test]
    fn sweep_cell_order() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.horizons = vec![1000, 2000];
        cfg.sweep.xis = vec![0.5];
        let cells = sweep_cells(&cfg);
        assert_eq!(cells.len(), 2 * 2 * 2);
        assert_eq!(cells[0].problem, Problem::Uniform);
        assert_eq!(cells[1].model, ChangeModel::Deterministic { n_c: 32 });
        assert_eq!(cells[4].horizon, 2000);
    }

    #[test]
    fn paper_algorithms_keep_regret_monotone() {
        let mut cfg = ExperimentConfig::default();
        cfg.env.horizon = 3000;
        let cell = env_cell(&cfg);
        for algo in AlgoKind::PAPER {
            let plan = TrialPlan::new(&cfg, cell, algo).unwrap();
            let r = plan.run_trial(0).unwrap();
            assert_eq!(r.trace.len(), 1000);
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0]), "{algo}");
            assert_eq!(*r.trace.last().unwrap(), r.final_regret);
            assert!(r.final_regret <= 3000.0);
            assert!(r.declared_changes <= r.restarts);
        }
    }

    #[test]
    fn per_step_increments_are_bounded() {
        let mut cfg = ExperimentConfig::default();
        cfg.env.horizon = 2000;
        cfg.env.problem = Problem::WorstCase;
        cfg.run.full_trace = true;
        let plan = TrialPlan::new(&cfg, env_cell(&cfg), AlgoKind::QcdUcb).unwrap();
        let r = plan.run_trial(3).unwrap();
        assert_eq!(r.trace.len(), 2000);
        let mut prev = 0.0;
        for &x in &r.trace {
            assert!((0.0..=1.0 + 1e-12).contains(&(x - prev)));
            prev = x;
        }
    }
}
