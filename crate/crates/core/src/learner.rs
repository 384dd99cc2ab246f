use crate::env::{EnvState, StepOutcome};
use crate::error::Result;

/// Restart bookkeeping shared by every algorithm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Restarts triggered by a change test or detector.
    pub declared_changes: u64,
    /// All restarts, scheduled or triggered.
    pub restarts: u64,
}

/// A sequential decision maker over a fixed arm set.
pub trait Learner {
    fn select(&mut self) -> usize;

    /// Feed back the reward of the arm returned by the preceding `select`.
    fn observe(&mut self, arm: usize, reward: f64);

    fn counters(&self) -> Counters;

    fn play(&mut self, env: &mut EnvState) -> Result<StepOutcome> {
        let arm = self.select();
        let outcome = env.step(arm)?;
        self.observe(arm, outcome.reward);
        Ok(outcome)
    }
}
