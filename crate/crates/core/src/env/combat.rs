//! Two-team grid battle with configurable sight ranges and a scripted
//! opponent.
//!
//! Rules (fixed here so every test is exact):
//! - Square grid; the learner team and the opponent team start in mirrored
//!   columns, vertically centered, shifted by a seed-driven common offset.
//! - Actions: noop, up, down, left, right, attack-opponent-slot-1..M.
//!   Moves are available iff the target cell is in-grid; attacks iff the
//!   slot's unit is alive and within Chebyshev attack range; dead agents
//!   have only noop.
//! - Step resolution: (1) learner movements in unit order — a move into a
//!   cell that is occupied (including cells claimed earlier this phase)
//!   becomes a noop; (2) the scripted opponent chooses and executes its
//!   actions against the post-movement positions, same movement rule;
//!   (3) all declared attacks resolve simultaneously, 1 damage each, against
//!   targets alive at the start of the phase. Damage is capped at the
//!   target's remaining hit points.
//! - Reward: 0.1·(damage dealt − damage received) + terminal bonus
//!   (+10 when all opponents are dead, −10 when all learners are dead and
//!   any opponent survives, 0 at the step limit). Mutual annihilation counts
//!   as a win.
//! - Scripted opponent: attacks a uniformly random learner in range,
//!   otherwise steps toward the nearest living learner by Manhattan
//!   distance, trying up, down, left, right in that order and moving only
//!   if the step reduces the distance and the cell is free.
//!
//! Observation layout per agent (length 3 + 4·(N−1+M) + |A| + N):
//! own (row, col, hp) normalized; per other unit [visible, Δrow, Δcol, hp]
//! — allies by index then opponents by index, all-zero beyond sight range
//! or when dead; one-hot of own last action (zeros at episode start);
//! one-hot agent identity. A dead observer emits zeros except its identity.

use std::cell::Cell;

use crate::array::Array;
use crate::error::{CoreError, Result};
use crate::rng::SeededRng;

use super::{Environment, StepOutcome};

/// Movement deltas in action order: up, down, left, right.
const MOVES: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombatConfig {
    pub grid_side: usize,
    pub team_size: usize,
    pub opponent_team_size: usize,
    pub initial_hp: u32,
    /// Chebyshev attack range.
    pub attack_range: usize,
    pub max_steps: usize,
    /// Partial (decentralized) Chebyshev sight range.
    pub sight_range: usize,
    /// Perfect (centralized) sight range; None means unlimited.
    pub perfect_sight_range: Option<usize>,
}

impl Default for CombatConfig {
    fn default() -> Self {
        CombatConfig {
            grid_side: 15,
            team_size: 5,
            opponent_team_size: 5,
            initial_hp: 3,
            attack_range: 1,
            max_steps: 40,
            sight_range: 2,
            perfect_sight_range: Some(4),
        }
    }
}

impl CombatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(CoreError::config("grid side must be at least 2".into()));
        }
        if self.team_size < 1 {
            return Err(CoreError::config("team size must be at least 1".into()));
        }
        if self.initial_hp < 1 {
            return Err(CoreError::config("hit points must be at least 1".into()));
        }
        if self.max_steps < 1 {
            return Err(CoreError::config("max episode length must be at least 1".into()));
        }
        if let Some(perfect) = self.perfect_sight_range {
            if self.sight_range > perfect {
                return Err(CoreError::config(format!(
                    "partial sight range {} exceeds perfect sight range {}",
                    self.sight_range, perfect
                )));
            }
        }
        if self.team_size.max(self.opponent_team_size) > self.grid_side {
            return Err(CoreError::config(format!(
                "team of {} does not fit on a grid of side {}",
                self.team_size.max(self.opponent_team_size),
                self.grid_side
            )));
        }
        if self.grid_side < 4 {
            return Err(CoreError::config(
                "grid side must be at least 4 to separate the two team columns".into(),
            ));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        5 + self.opponent_team_size
    }

    pub fn obs_len(&self) -> usize {
        let others = self.team_size - 1 + self.opponent_team_size;
        3 + 4 * others + self.n_actions() + self.team_size
    }

    pub fn state_len(&self) -> usize {
        4 * (self.team_size + self.opponent_team_size) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Unit {
    row: i64,
    col: i64,
    hp: u32,
}

impl Unit {
    fn alive(&self) -> bool {
        self.hp > 0
    }
}

fn chebyshev(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn manhattan(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

pub struct CombatEnv {
    config: CombatConfig,
    learners: Vec<Unit>,
    opponents: Vec<Unit>,
    step_count: usize,
    /// Learner actions from the previous step, for the last-action one-hot.
    last_actions: Option<Vec<usize>>,
    rng: SeededRng,
    terminated: bool,
    centralized_reads: Cell<u64>,
}

impl CombatEnv {
    pub fn new(config: CombatConfig) -> Result<Self> {
        config.validate()?;
        Ok(CombatEnv {
            config,
            learners: Vec::new(),
            opponents: Vec::new(),
            step_count: 0,
            last_actions: None,
            rng: SeededRng::with_stream_id(0, 0),
            terminated: false,
            centralized_reads: Cell::new(0),
        })
    }

    pub fn config(&self) -> &CombatConfig {
        &self.config
    }

    fn occupied(&self, cell: (i64, i64), skip_learner: Option<usize>) -> bool {
        for (i, u) in self.learners.iter().enumerate() {
            if Some(i) == skip_learner {
                continue;
            }
            if u.alive() && (u.row, u.col) == cell {
                return true;
            }
        }
        self.opponents.iter().any(|u| u.alive() && (u.row, u.col) == cell)
    }

    fn occupied_skip_opponent(&self, cell: (i64, i64), skip: usize) -> bool {
        if self.learners.iter().any(|u| u.alive() && (u.row, u.col) == cell) {
            return true;
        }
        self.opponents
            .iter()
            .enumerate()
            .any(|(j, u)| j != skip && u.alive() && (u.row, u.col) == cell)
    }

    fn in_grid(&self, cell: (i64, i64)) -> bool {
        let s = self.config.grid_side as i64;
        cell.0 >= 0 && cell.0 < s && cell.1 >= 0 && cell.1 < s
    }

    /// Observation for one agent at an explicit sight range (None = no
    /// limit). Exposed for the mask-nesting and sight-range tests.
    pub fn build_observation(&self, agent: usize, sight_range: Option<usize>) -> Array {
        let c = &self.config;
        let mut out = vec![0.0; c.obs_len()];
        let me = &self.learners[agent];
        // Identity is always present, even for dead observers.
        let id_base = c.obs_len() - c.team_size;
        out[id_base + agent] = 1.0;
        if !me.alive() {
            return Array::vector(&out);
        }
        let norm = (c.grid_side - 1).max(1) as f64;
        out[0] = me.row as f64 / norm;
        out[1] = me.col as f64 / norm;
        out[2] = me.hp as f64 / c.initial_hp as f64;

        let mut slot = 3;
        let mut write_unit = |out: &mut [f64], slot: usize, u: &Unit| {
            if !u.alive() {
                return;
            }
            let d = chebyshev((me.row, me.col), (u.row, u.col));
            if let Some(r) = sight_range {
                if d > r as i64 {
                    return;
                }
            }
            out[slot] = 1.0;
            out[slot + 1] = (u.row - me.row) as f64 / norm;
            out[slot + 2] = (u.col - me.col) as f64 / norm;
            out[slot + 3] = u.hp as f64 / c.initial_hp as f64;
        };
        for (j, u) in self.learners.iter().enumerate() {
            if j == agent {
                continue;
            }
            write_unit(&mut out, slot, u);
            slot += 4;
        }
        for u in &self.opponents {
            write_unit(&mut out, slot, u);
            slot += 4;
        }

        // Last-action one-hot; zeros at episode start.
        if let Some(actions) = &self.last_actions {
            out[slot + actions[agent]] = 1.0;
        }
        Array::vector(&out)
    }

    fn availability_for(&self, agent: usize) -> Vec<bool> {
        let c = &self.config;
        let me = &self.learners[agent];
        let mut mask = vec![false; c.n_actions()];
        mask[0] = true;
        if !me.alive() || self.terminated {
            return mask;
        }
        for (k, (dr, dc)) in MOVES.iter().enumerate() {
            if self.in_grid((me.row + dr, me.col + dc)) {
                mask[1 + k] = true;
            }
        }
        for (j, opp) in self.opponents.iter().enumerate() {
            if opp.alive()
                && chebyshev((me.row, me.col), (opp.row, opp.col)) <= c.attack_range as i64
            {
                mask[5 + j] = true;
            }
        }
        mask
    }

    /// Scripted opponent decisions against the current positions. Returns
    /// per-opponent (attack target learner index) or (movement delta).
    fn opponent_decisions(&mut self) -> Vec<OpponentAction> {
        let c = &self.config;
        let mut decisions = Vec::with_capacity(self.opponents.len());
        for j in 0..self.opponents.len() {
            let me = self.opponents[j];
            if !me.alive() {
                decisions.push(OpponentAction::Noop);
                continue;
            }
            let in_range: Vec<usize> = self
                .learners
                .iter()
                .enumerate()
                .filter(|(_, u)| {
                    u.alive()
                        && chebyshev((me.row, me.col), (u.row, u.col)) <= c.attack_range as i64
                })
                .map(|(i, _)| i)
                .collect();
            if !in_range.is_empty() {
                let pick = in_range[self.rng.below(in_range.len())];
                decisions.push(OpponentAction::Attack(pick));
                continue;
            }
            // Chase the nearest living learner (ties: lowest index).
            let target = self
                .learners
                .iter()
                .enumerate()
                .filter(|(_, u)| u.alive())
                .min_by_key(|(i, u)| (manhattan((me.row, me.col), (u.row, u.col)), *i))
                .map(|(_, u)| (u.row, u.col));
            let Some(target) = target else {
                decisions.push(OpponentAction::Noop);
                continue;
            };
            let current = manhattan((me.row, me.col), target);
            let mut chosen = OpponentAction::Noop;
            for (dr, dc) in MOVES {
                let cell = (me.row + dr, me.col + dc);
                if !self.in_grid(cell) {
                    continue;
                }
                if manhattan(cell, target) >= current {
                    continue;
                }
                if self.occupied_skip_opponent(cell, j) {
                    continue;
                }
                chosen = OpponentAction::Move(dr, dc);
                break;
            }
            decisions.push(chosen);
            // Execute the move immediately so later opponents see it.
            if let OpponentAction::Move(dr, dc) = chosen {
                self.opponents[j].row += dr;
                self.opponents[j].col += dc;
            }
        }
        decisions
    }
}

#[derive(Debug, Clone, Copy)]
enum OpponentAction {
    Noop,
    Move(i64, i64),
    Attack(usize),
}

impl Environment for CombatEnv {
    fn n_agents(&self) -> usize {
        self.config.team_size
    }

    fn n_actions(&self) -> usize {
        self.config.n_actions()
    }

    fn obs_len(&self) -> usize {
        self.config.obs_len()
    }

    fn state_len(&self) -> usize {
        self.config.state_len()
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: u64) -> Result<()> {
        let c = &self.config;
        self.rng = SeededRng::with_stream_id(seed, 101);
        self.step_count = 0;
        self.last_actions = None;
        self.terminated = false;

        let side = c.grid_side as i64;
        let place = |size: usize, start: i64, col: i64| -> Vec<Unit> {
            (0..size)
                .map(|i| Unit {
                    row: start + i as i64,
                    col,
                    hp: c.initial_hp,
                })
                .collect()
        };
        let max_size = c.team_size.max(c.opponent_team_size) as i64;
        let base_start = (side - max_size) / 2;
        // Common vertical offset keeps the layout mirrored while varying
        // episodes; bounded so both teams stay in-grid.
        let slack_up = base_start;
        let slack_down = side - (base_start + max_size);
        let bound = slack_up.min(slack_down).min(2);
        let offset = if bound > 0 {
            self.rng.below((2 * bound + 1) as usize) as i64 - bound
        } else {
            0
        };
        let learner_start = (side - c.team_size as i64) / 2 + offset;
        let opp_start = (side - c.opponent_team_size as i64) / 2 + offset;
        self.learners = place(c.team_size, learner_start, 1);
        self.opponents = place(c.opponent_team_size, opp_start, side - 2);
        Ok(())
    }

    fn global_state(&self) -> Array {
        let c = &self.config;
        let norm = (c.grid_side - 1).max(1) as f64;
        let mut out = Vec::with_capacity(c.state_len());
        for u in self.learners.iter().chain(&self.opponents) {
            if u.alive() {
                out.push(u.row as f64 / norm);
                out.push(u.col as f64 / norm);
                out.push(u.hp as f64 / c.initial_hp as f64);
                out.push(1.0);
            } else {
                out.extend_from_slice(&[0.0, 0.0, 0.0, 0.0]);
            }
        }
        out.push(self.step_count as f64 / c.max_steps as f64);
        Array::vector(&out)
    }

    fn decentralized_obs(&self) -> Vec<Array> {
        (0..self.config.team_size)
            .map(|i| self.build_observation(i, Some(self.config.sight_range)))
            .collect()
    }

    fn centralized_obs(&self) -> Vec<Array> {
        self.centralized_reads.set(self.centralized_reads.get() + 1);
        (0..self.config.team_size)
            .map(|i| self.build_observation(i, self.config.perfect_sight_range))
            .collect()
    }

    fn available_actions(&self) -> Vec<Vec<bool>> {
        (0..self.config.team_size)
            .map(|i| self.availability_for(i))
            .collect()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        let c = self.config.clone();
        if self.terminated {
            return Err(CoreError::contract("step() on a terminated episode".into()));
        }
        if actions.len() != c.team_size {
            return Err(CoreError::contract(format!(
                "expected {} actions, got {}",
                c.team_size,
                actions.len()
            )));
        }
        for (i, &a) in actions.iter().enumerate() {
            let mask = self.availability_for(i);
            if a >= mask.len() || !mask[a] {
                return Err(CoreError::contract(format!(
                    "action {a} unavailable for agent {i}"
                )));
            }
        }

        // Phase 1: learner movements, in unit order.
        for (i, &a) in actions.iter().enumerate() {
            if !(1..=4).contains(&a) {
                continue;
            }
            let (dr, dc) = MOVES[a - 1];
            let me = self.learners[i];
            if !me.alive() {
                continue;
            }
            let cell = (me.row + dr, me.col + dc);
            if self.in_grid(cell) && !self.occupied(cell, Some(i)) {
                self.learners[i].row = cell.0;
                self.learners[i].col = cell.1;
            }
        }

        // Phase 2: scripted opponent decides and moves.
        let opponent_actions = self.opponent_decisions();

        // Phase 3: simultaneous attacks against targets alive at phase start.
        let mut hits_on_opponents = vec![0u32; self.opponents.len()];
        let mut hits_on_learners = vec![0u32; self.learners.len()];
        for (i, &a) in actions.iter().enumerate() {
            if a >= 5 && self.learners[i].alive() {
                let j = a - 5;
                if self.opponents[j].alive() {
                    hits_on_opponents[j] += 1;
                }
            }
        }
        for action in &opponent_actions {
            if let OpponentAction::Attack(i) = action {
                if self.learners[*i].alive() {
                    hits_on_learners[*i] += 1;
                }
            }
        }
        let mut damage_dealt = 0u32;
        for (u, &h) in self.opponents.iter_mut().zip(&hits_on_opponents) {
            let loss = u.hp.min(h);
            u.hp -= loss;
            damage_dealt += loss;
        }
        let mut damage_received = 0u32;
        for (u, &h) in self.learners.iter_mut().zip(&hits_on_learners) {
            let loss = u.hp.min(h);
            u.hp -= loss;
            damage_received += loss;
        }

        self.step_count += 1;
        self.last_actions = Some(actions.to_vec());

        let all_opponents_dead = self.opponents.iter().all(|u| !u.alive());
        let all_learners_dead = self.learners.iter().all(|u| !u.alive());
        let win = all_opponents_dead;
        let timeout = self.step_count >= c.max_steps;
        let terminated = win || all_learners_dead || timeout;
        let bonus = if win {
            10.0
        } else if all_learners_dead {
            -10.0
        } else {
            0.0
        };
        let reward = 0.1 * (damage_dealt as f64 - damage_received as f64) + bonus;
        self.terminated = terminated;

        Ok(StepOutcome {
            reward,
            terminated,
            win,
            avail_next: self.available_actions(),
        })
    }

    fn centralized_reads(&self) -> u64 {
        self.centralized_reads.get()
    }
}

// Accessors used by the environment property tests.
impl CombatEnv {
    pub fn total_hp(&self) -> u32 {
        self.learners.iter().chain(&self.opponents).map(|u| u.hp).sum()
    }

    pub fn learner_positions(&self) -> Vec<(i64, i64)> {
        self.learners.iter().map(|u| (u.row, u.col)).collect()
    }

    pub fn opponent_positions(&self) -> Vec<(i64, i64)> {
        self.opponents.iter().map(|u| (u.row, u.col)).collect()
    }

    pub fn living_units(&self) -> usize {
        self.learners
            .iter()
            .chain(&self.opponents)
            .filter(|u| u.alive())
            .count()
    }

    pub fn learner_hp(&self) -> Vec<u32> {
        self.learners.iter().map(|u| u.hp).collect()
    }

    pub fn opponent_hp(&self) -> Vec<u32> {
        self.opponents.iter().map(|u| u.hp).collect()
    }

    /// Test hook: pin unit positions/hp to build exact scenarios.
    pub fn set_units(&mut self, learners: Vec<(i64, i64, u32)>, opponents: Vec<(i64, i64, u32)>) {
        assert_eq!(learners.len(), self.config.team_size);
        assert_eq!(opponents.len(), self.config.opponent_team_size);
        self.learners = learners
            .into_iter()
            .map(|(row, col, hp)| Unit { row, col, hp })
            .collect();
        self.opponents = opponents
            .into_iter()
            .map(|(row, col, hp)| Unit { row, col, hp })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CombatConfig {
        CombatConfig {
            grid_side: 7,
            team_size: 2,
            opponent_team_size: 2,
            initial_hp: 2,
            attack_range: 1,
            max_steps: 10,
            sight_range: 2,
            perfect_sight_range: Some(4),
        }
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let mut a = CombatEnv::new(CombatConfig::default()).unwrap();
        let mut b = CombatEnv::new(CombatConfig::default()).unwrap();
        a.reset(42).unwrap();
        b.reset(42).unwrap();
        assert_eq!(a.learner_positions(), b.learner_positions());
        assert_eq!(a.opponent_positions(), b.opponent_positions());
    }

    #[test]
    fn five_v_five_initializes_full() {
        let mut env = CombatEnv::new(CombatConfig::default()).unwrap();
        env.reset(0).unwrap();
        assert_eq!(env.living_units(), 10);
        assert!(env.learner_hp().iter().all(|&h| h == 3));
        assert!(env.opponent_hp().iter().all(|&h| h == 3));
    }

    #[test]
    fn observation_length_formula() {
        // 3 + 4*(2N-1) + |A| + N with |A| = 5 + N
        let config = CombatConfig::default();
        assert_eq!(config.obs_len(), 3 + 4 * 9 + 10 + 5);
        let mut env = CombatEnv::new(config).unwrap();
        env.reset(1).unwrap();
        let obs = env.decentralized_obs();
        assert_eq!(obs.len(), 5);
        assert!(obs.iter().all(|o| o.len() == 54));
    }

    #[test]
    fn movement_into_free_cell() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(3, 3, 2), (0, 0, 2)], vec![(6, 6, 2), (6, 5, 2)]);
        // action 4 = right
        env.step(&[4, 0]).unwrap();
        assert_eq!(env.learner_positions()[0], (3, 4));
    }

    #[test]
    fn contested_cell_resolves_by_unit_order() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        // Both learners adjacent to (2,3): unit 0 above moving down, unit 1
        // below moving up. Unit 0 wins; unit 1 becomes a noop.
        env.set_units(vec![(1, 3, 2), (3, 3, 2)], vec![(6, 6, 2), (6, 5, 2)]);
        env.step(&[2, 1]).unwrap();
        assert_eq!(env.learner_positions()[0], (2, 3));
        assert_eq!(env.learner_positions()[1], (3, 3));
    }

    #[test]
    fn attack_kills_and_wins_with_bonus() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        // All opponents at 1 hp and adjacent; both learners attack.
        env.set_units(vec![(3, 3, 2), (3, 4, 2)], vec![(4, 3, 1), (4, 4, 1)]);
        let out = env.step(&[5, 6]).unwrap();
        assert!(out.terminated);
        assert!(out.win);
        // damage dealt 2, received up to 2 (opponents attack back before dying)
        assert!(out.reward >= 10.0 - 0.2 + 0.2 - 0.4);
        assert!(out.reward <= 10.2);
    }

    #[test]
    fn draw_at_step_limit() {
        let mut config = small_config();
        config.max_steps = 2;
        // Teams far apart with sight/attack range too small to meet.
        config.grid_side = 12;
        let mut env = CombatEnv::new(config).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(0, 0, 2), (0, 1, 2)], vec![(11, 11, 2), (11, 10, 2)]);
        let o1 = env.step(&[0, 0]).unwrap();
        assert!(!o1.terminated);
        let o2 = env.step(&[0, 0]).unwrap();
        assert!(o2.terminated);
        assert!(!o2.win);
        // no combat happened: reward is the 0 terminal bonus
        assert_eq!(o2.reward, 0.0);
    }

    #[test]
    fn availability_rules() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(0, 0, 2), (3, 3, 2)], vec![(3, 4, 2), (6, 6, 2)]);
        let masks = env.available_actions();
        // agent 0 at the corner: up and left unavailable, no enemy in range
        assert!(masks[0][0]);
        assert!(!masks[0][1]); // up
        assert!(masks[0][2]); // down
        assert!(!masks[0][3]); // left
        assert!(masks[0][4]); // right
        assert!(!masks[0][5] && !masks[0][6]);
        // agent 1 adjacent to opponent 0 (Chebyshev 1): attack slot 0 available
        assert!(masks[1][5]);
        assert!(!masks[1][6]);
    }

    #[test]
    fn dead_agent_has_only_noop() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(3, 3, 0), (0, 0, 2)], vec![(6, 6, 2), (6, 5, 2)]);
        let masks = env.available_actions();
        assert_eq!(masks[0], vec![true, false, false, false, false, false, false]);
    }

    #[test]
    fn unavailable_action_rejected() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(0, 0, 2), (3, 3, 2)], vec![(6, 6, 2), (6, 5, 2)]);
        // up at the top edge
        let err = env.step(&[1, 0]).unwrap_err();
        assert!(matches!(err, CoreError::Contract(_)));
    }

    #[test]
    fn sight_masking_zeroes_out_of_range_slots() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        // Opponent 0 at Chebyshev distance 3 from agent 0: invisible at
        // sight 2, visible at sight 4.
        env.set_units(vec![(0, 0, 2), (6, 0, 2)], vec![(3, 3, 2), (6, 6, 2)]);
        let partial = env.build_observation(0, Some(2));
        let perfect = env.build_observation(0, Some(4));
        // Opponent slots start after own(3) + allies(4*(N-1)=4).
        let slot = 3 + 4;
        assert_eq!(&partial.data()[slot..slot + 4], &[0.0; 4]);
        assert_eq!(perfect.data()[slot], 1.0);
        // within-range slots agree between the two ranges (mask nesting)
        let ally = &partial.data()[3..7];
        let ally_perfect = &perfect.data()[3..7];
        assert_eq!(ally, &[0.0; 4]); // ally at distance 6: invisible at 2
        assert_eq!(ally_perfect, &[0.0; 4]); // and still invisible at 4
    }

    #[test]
    fn infinite_sight_sees_all_living_units() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(0, 0, 2), (6, 0, 2)], vec![(3, 3, 2), (6, 6, 1)]);
        let obs = env.build_observation(0, None);
        // visible flags at slots: ally (3), opponents (7, 11)
        assert_eq!(obs.data()[3], 1.0);
        assert_eq!(obs.data()[7], 1.0);
        assert_eq!(obs.data()[11], 1.0);
    }

    #[test]
    fn dead_observer_emits_zeros_except_identity() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(3, 3, 0), (0, 0, 2)], vec![(6, 6, 2), (6, 5, 2)]);
        let obs = env.build_observation(0, None);
        let id_base = env.obs_len() - 2;
        for (i, &v) in obs.data().iter().enumerate() {
            if i == id_base {
                assert_eq!(v, 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn opponent_attacks_sole_adjacent_learner() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        env.set_units(vec![(3, 3, 2), (0, 0, 2)], vec![(3, 4, 2), (6, 6, 2)]);
        let hp_before = env.learner_hp()[0];
        env.step(&[0, 0]).unwrap();
        assert_eq!(env.learner_hp()[0], hp_before - 1);
    }

    #[test]
    fn opponent_chases_nearest_learner() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        // Opponent 0 at (3,0); nearest learner 3 cells right at (3,3):
        // no reducing up/down move, left is out-of-question, right reduces.
        env.set_units(vec![(3, 3, 2), (0, 6, 2)], vec![(3, 0, 2), (6, 6, 2)]);
        env.step(&[0, 0]).unwrap();
        assert_eq!(env.opponent_positions()[0], (3, 1));
    }

    #[test]
    fn zero_opponents_is_an_immediate_win() {
        let mut config = small_config();
        config.opponent_team_size = 0;
        let mut env = CombatEnv::new(config).unwrap();
        env.reset(0).unwrap();
        let out = env.step(&[0, 0]).unwrap();
        assert!(out.terminated && out.win);
        assert_eq!(out.reward, 10.0);
    }

    #[test]
    fn centralized_reads_are_counted() {
        let mut env = CombatEnv::new(small_config()).unwrap();
        env.reset(0).unwrap();
        assert_eq!(env.centralized_reads(), 0);
        let _ = env.decentralized_obs();
        assert_eq!(env.centralized_reads(), 0);
        let _ = env.centralized_obs();
        let _ = env.centralized_obs();
        assert_eq!(env.centralized_reads(), 2);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = CombatConfig::default();
        c.sight_range = 5;
        c.perfect_sight_range = Some(4);
        assert!(c.validate().is_err());
        let mut c = CombatConfig::default();
        c.team_size = 20;
        assert!(c.validate().is_err());
    }
}
