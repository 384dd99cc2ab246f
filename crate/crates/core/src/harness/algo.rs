//! Resolving configured algorithms against one grid cell.

use crate::bandit::IndexPolicy;
use crate::env::{model_eta, ChangeModel, Problem};
use crate::error::{Error, Result};
use crate::glr::DetectorConfig;
use crate::learner::Learner;
use crate::master::{Master, MasterConfig, RhoConfig};
use crate::meta::{
    auto_exploration_rate, auto_restart_rate, DetectorRestarts, ForcedExploration, RandomRestarts, RestartPolicy,
};
use crate::rng::SimRng;

use super::config::{AlgoKind, BaseAlg, ExperimentConfig};

/// One environment setting of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub problem: Problem,
    pub model: ChangeModel,
    pub horizon: u64,
    pub arms: usize,
}

impl Cell {
    pub fn cp_model_name(&self) -> &'static str {
        match self.model {
            ChangeModel::Geometric { .. } => "geometric",
            ChangeModel::Deterministic { .. } => "deterministic",
        }
    }

    pub fn problem_name(&self) -> &'static str {
        match self.problem {
            Problem::Uniform => "uniform",
            Problem::WorstCase => "worst",
        }
    }

    /// ξ for geometric cells, N_C for deterministic ones.
    pub fn param(&self) -> f64 {
        match self.model {
            ChangeModel::Geometric { xi } => xi,
            ChangeModel::Deterministic { n_c } => n_c as f64,
        }
    }
}

/// Fully resolved algorithm parameters for one cell.
#[derive(Debug, Clone)]
pub enum AlgoSpec {
    Master(MasterConfig),
    Rr { policy: IndexPolicy, eta_r: f64 },
    RrP { policy: IndexPolicy, p: f64 },
    Detector {
        policy: IndexPolicy,
        detector: DetectorConfig,
        forced: Option<ForcedExploration>,
    },
    Oracle,
    Fixed(usize),
}

impl AlgoSpec {
    /// Resolve the defaults that depend on the horizon and check ranges.
    pub fn resolve(kind: AlgoKind, cfg: &ExperimentConfig, cell: &Cell) -> Result<Self> {
        let horizon = cell.horizon;
        let klucb = cfg.bandit.klucb();
        if let IndexPolicy::KlUcb(p) = klucb {
            p.validate()?;
        }
        let detector = || {
            let delta = cfg.detector.delta.resolve(horizon, || 1.0 / horizon as f64);
            DetectorConfig::new(delta, cfg.detector.stride)
        };
        Ok(match kind {
            AlgoKind::Master => {
                let delta = cfg.master.delta.resolve(horizon, || 1.0 / horizon as f64);
                let rho = RhoConfig::new(cfg.master.rho, cell.arms, horizon, delta)?;
                let base = match cfg.master.base_alg {
                    BaseAlg::Ucb1 => IndexPolicy::Ucb1,
                    BaseAlg::Klucb => klucb,
                };
                let mut m = MasterConfig::new(rho, base);
                m.fixed_n = cfg.master.fixed_n;
                m.threshold_scale = cfg.master.debug_threshold_scale;
                AlgoSpec::Master(m)
            }
            AlgoKind::Rr => {
                let eta = model_eta(cell.model, horizon);
                let eta_r = cfg.rr.eta_r.resolve(horizon, || auto_restart_rate(eta, horizon));
                if !(eta_r > 0.0 && eta_r < 1.0) {
                    return Err(Error::param("rr.eta_r", format!("must lie in (0, 1), got {eta_r}")));
                }
                AlgoSpec::Rr { policy: klucb, eta_r }
            }
            AlgoKind::RrP => {
                RestartPolicy::per_step(cfg.rr_p.p)?;
                AlgoSpec::RrP {
                    policy: klucb,
                    p: cfg.rr_p.p,
                }
            }
            AlgoKind::QcdUcb | AlgoKind::QcdKlUcb => AlgoSpec::Detector {
                policy: if kind == AlgoKind::QcdUcb { IndexPolicy::Ucb1 } else { klucb },
                detector: detector()?,
                forced: None,
            },
            AlgoKind::GlrKlUcb => {
                let alpha = cfg.glr.alpha.resolve(horizon, || auto_exploration_rate(cell.arms, horizon));
                AlgoSpec::Detector {
                    policy: klucb,
                    detector: detector()?,
                    forced: Some(ForcedExploration::new(cell.arms, alpha)?),
                }
            }
            AlgoKind::Oracle => AlgoSpec::Oracle,
            AlgoKind::Fixed(arm) => {
                if arm >= cell.arms {
                    return Err(Error::ArmIndex { arm, arms: cell.arms });
                }
                AlgoSpec::Fixed(arm)
            }
        })
    }

    /// Instantiate a learner. The oracle needs the environment's means and
    /// is driven by the trial loop directly, so it yields `None`.
    pub fn build(&self, cell: &Cell, mut rng: SimRng) -> Result<Option<Box<dyn Learner>>> {
        Ok(Some(match self {
            AlgoSpec::Master(cfg) => Box::new(Master::new(*cfg, rng)),
            AlgoSpec::Rr { policy, eta_r } => {
                let restarts = RestartPolicy::geo_schedule(*eta_r, cell.horizon, &mut rng)?;
                Box::new(RandomRestarts::new(*policy, cell.arms, restarts, rng))
            }
            AlgoSpec::RrP { policy, p } => {
                Box::new(RandomRestarts::new(*policy, cell.arms, RestartPolicy::per_step(*p)?, rng))
            }
            AlgoSpec::Detector {
                policy,
                detector,
                forced,
            } => Box::new(DetectorRestarts::new(*policy, cell.arms, Some(*detector), *forced)),
            AlgoSpec::Fixed(arm) => Box::new(FixedArm(*arm)),
            AlgoSpec::Oracle => return Ok(None),
        }))
    }
}

/// Always pulls the same arm.
#[derive(Debug, Clone, Copy)]
pub struct FixedArm(pub usize);

impl Learner for FixedArm {
    fn select(&mut self) -> usize {
        self.0
    }

    fn observe(&mut self, _arm: usize, _reward: f64) {}

    fn counters(&self) -> crate::learner::Counters {
        Default::default()
    }
}
