//! One-step cooperative matrix game, the training-correctness oracle.
//!
//! Two agents, a payoff table, a single step. Observations are constant
//! vectors (a bias plus the agent-identity one-hot) and the two sight
//! streams are identical, so the only learnable structure is the payoff.

use std::cell::Cell;

use crate::array::Array;
use crate::error::{CoreError, Result};

use super::{Environment, StepOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameConfig {
    /// payoff[a1][a2] — rectangular, finite.
    pub payoff: Vec<Vec<f64>>,
}

impl MatrixGameConfig {
    pub fn new(payoff: Vec<Vec<f64>>) -> Result<Self> {
        if payoff.is_empty() || payoff[0].is_empty() {
            return Err(CoreError::config("payoff table must be non-empty".into()));
        }
        let width = payoff[0].len();
        if payoff.iter().any(|row| row.len() != width) {
            return Err(CoreError::config("payoff table must be rectangular".into()));
        }
        if payoff.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::config("payoff table must be finite".into()));
        }
        Ok(MatrixGameConfig { payoff })
    }

    pub fn rows(&self) -> usize {
        self.payoff.len()
    }

    pub fn cols(&self) -> usize {
        self.payoff[0].len()
    }
}

pub struct MatrixGameEnv {
    config: MatrixGameConfig,
    done: bool,
    centralized_reads: Cell<u64>,
}

impl MatrixGameEnv {
    pub fn new(config: MatrixGameConfig) -> Self {
        MatrixGameEnv {
            config,
            done: true,
            centralized_reads: Cell::new(0),
        }
    }

    fn observation(&self, agent: usize) -> Array {
        let mut out = vec![0.0; self.obs_len()];
        out[0] = 1.0;
        out[1 + agent] = 1.0;
        Array::vector(&out)
    }
}

impl Environment for MatrixGameEnv {
    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        self.config.rows().max(self.config.cols())
    }

    fn obs_len(&self) -> usize {
        1 + self.n_agents()
    }

    fn state_len(&self) -> usize {
        1
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Result<()> {
        self.done = false;
        Ok(())
    }

    fn global_state(&self) -> Array {
        Array::vector(&[1.0])
    }

    fn decentralized_obs(&self) -> Vec<Array> {
        (0..2).map(|i| self.observation(i)).collect()
    }

    fn centralized_obs(&self) -> Vec<Array> {
        self.centralized_reads.set(self.centralized_reads.get() + 1);
        // Both sight ranges are identical in the matrix game.
        (0..2).map(|i| self.observation(i)).collect()
    }

    fn available_actions(&self) -> Vec<Vec<bool>> {
        let a = self.n_actions();
        vec![
            (0..a).map(|i| i < self.config.rows()).collect(),
            (0..a).map(|i| i < self.config.cols()).collect(),
        ]
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(CoreError::contract("step() on a terminated episode".into()));
        }
        if actions.len() != 2 {
            return Err(CoreError::contract(format!(
                "expected 2 actions, got {}",
                actions.len()
            )));
        }
        let masks = self.available_actions();
        for (i, &a) in actions.iter().enumerate() {
            if a >= masks[i].len() || !masks[i][a] {
                return Err(CoreError::contract(format!(
                    "action {a} unavailable for agent {i}"
                )));
            }
        }
        self.done = true;
        Ok(StepOutcome {
            reward: self.config.payoff[actions[0]][actions[1]],
            terminated: true,
            win: false,
            avail_next: self.available_actions(),
        })
    }

    fn centralized_reads(&self) -> u64 {
        self.centralized_reads.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn additive_table() -> MatrixGameConfig {
        // payoff[i][j] = i + j
        let payoff = (0..3)
            .map(|i| (0..3).map(|j| (i + j) as f64).collect())
            .collect();
        MatrixGameConfig::new(payoff).unwrap()
    }

    #[test]
    fn payoff_lookup() {
        let mut env = MatrixGameEnv::new(additive_table());
        env.reset(0).unwrap();
        let out = env.step(&[2, 1]).unwrap();
        assert_eq!(out.reward, 3.0);
        assert!(out.terminated);
    }

    #[test]
    fn zero_table_always_zero() {
        let config = MatrixGameConfig::new(vec![vec![0.0; 2]; 2]).unwrap();
        let mut env = MatrixGameEnv::new(config);
        for seed in 0..4 {
            env.reset(seed).unwrap();
            let out = env.step(&[(seed % 2) as usize, ((seed / 2) % 2) as usize]).unwrap();
            assert_eq!(out.reward, 0.0);
        }
    }

    #[test]
    fn terminates_after_exactly_one_step() {
        let mut env = MatrixGameEnv::new(additive_table());
        env.reset(0).unwrap();
        let out = env.step(&[0, 0]).unwrap();
        assert!(out.terminated);
        assert!(env.step(&[0, 0]).is_err());
    }

    #[test]
    fn rectangular_table_masks_extra_actions() {
        let config = MatrixGameConfig::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let env = MatrixGameEnv::new(config);
        let masks = env.available_actions();
        assert_eq!(masks[0], vec![true, true, false]);
        assert_eq!(masks[1], vec![true, true, true]);
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(MatrixGameConfig::new(vec![]).is_err());
        assert!(MatrixGameConfig::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(MatrixGameConfig::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn both_streams_identical() {
        let env = MatrixGameEnv::new(additive_table());
        let dec = env.decentralized_obs();
        let cen = env.centralized_obs();
        assert_eq!(dec, cen);
        assert_eq!(env.centralized_reads(), 1);
    }
}
