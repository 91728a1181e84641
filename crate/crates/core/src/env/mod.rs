//! Deterministic, seed-driven environments.
//!
//! Both environments expose two observation streams per agent: a partial
//! (decentralized) one and a perfect (centralized) one. Reads of the
//! centralized stream are counted so execution-time decentralization can be
//! audited rather than assumed.

mod combat;
mod matrix;

pub use combat::{CombatConfig, CombatEnv};
pub use matrix::{MatrixGameConfig, MatrixGameEnv};

use crate::array::Array;
use crate::error::Result;

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Team reward for the step.
    pub reward: f64,
    pub terminated: bool,
    /// Valid when `terminated`; all opponent units eliminated.
    pub win: bool,
    /// Per-agent availability masks for the next step.
    pub avail_next: Vec<Vec<bool>>,
}

/// A cooperative multi-agent environment with dual observation streams.
pub trait Environment: Send {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Length of one agent's observation vector (identical for both streams).
    fn obs_len(&self) -> usize;
    fn state_len(&self) -> usize;
    fn max_steps(&self) -> usize;

    fn reset(&mut self, seed: u64) -> Result<()>;
    /// Global state vector for the mixing network.
    fn global_state(&self) -> Array;
    /// Partial observations, one per agent.
    fn decentralized_obs(&self) -> Vec<Array>;
    /// Perfect observations, one per agent. Every call increments the
    /// centralized-read audit counter.
    fn centralized_obs(&self) -> Vec<Array>;
    fn available_actions(&self) -> Vec<Vec<bool>>;
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome>;

    /// Number of centralized-observation reads since construction.
    fn centralized_reads(&self) -> u64;
}

/// A view of an environment that can only produce decentralized
/// observations: the executor for the student policy takes this type, so
/// reading centralized observations during execution is not expressible.
pub struct DecentralizedView<'a> {
    env: &'a mut dyn Environment,
}

impl<'a> DecentralizedView<'a> {
    pub fn new(env: &'a mut dyn Environment) -> Self {
        DecentralizedView { env }
    }

    pub fn n_agents(&self) -> usize {
        self.env.n_agents()
    }

    pub fn n_actions(&self) -> usize {
        self.env.n_actions()
    }

    pub fn obs_len(&self) -> usize {
        self.env.obs_len()
    }

    pub fn max_steps(&self) -> usize {
        self.env.max_steps()
    }

    pub fn reset(&mut self, seed: u64) -> Result<()> {
        self.env.reset(seed)
    }

    pub fn observations(&self) -> Vec<Array> {
        self.env.decentralized_obs()
    }

    pub fn available_actions(&self) -> Vec<Vec<bool>> {
        self.env.available_actions()
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        self.env.step(actions)
    }

    /// Audit counter of the wrapped environment.
    pub fn centralized_reads(&self) -> u64 {
        self.env.centralized_reads()
    }
}
