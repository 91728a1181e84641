//! Duplex-dueling mixing with a non-positive advantage.
//!
//! Q_tot = Σ_i [w_i(s)·v_i + b_i(s)] + Σ_i λ_i(s,a)·w_i(s)·(q_i − v_i)
//!
//! with w_i(s) > 0 and λ_i(s,a) > 0 (abs plus a small constant). Since
//! q_i ≤ v_i by construction, the advantage term is ≤ 0 and vanishes exactly
//! when every agent picks its greedy action, which pins the joint argmax to
//! the per-agent argmaxes.

use crate::array::Array;
use crate::autodiff::{NodeId, Tape};
use crate::error::{CoreError, Result};
use crate::math::{self, Activation};
use crate::params::{init_bias, init_weight, ParameterSet};
use crate::rng::SeededRng;

/// Additive floor keeping w and λ strictly positive.
pub const POSITIVITY_EPS: f64 = 1e-6;
/// Hidden width of the λ head.
pub const LAMBDA_HIDDEN: usize = 64;

#[derive(Debug, Clone)]
pub struct QplexMixer {
    pub n_agents: usize,
    pub state_dim: usize,
    pub n_actions: usize,
    pub lambda_hidden: usize,
    pub params: ParameterSet,
}

impl QplexMixer {
    pub fn new(n_agents: usize, state_dim: usize, n_actions: usize, rng: &mut SeededRng) -> Self {
        Self::with_dims(n_agents, state_dim, n_actions, LAMBDA_HIDDEN, rng)
    }

    pub fn with_dims(
        n_agents: usize,
        state_dim: usize,
        n_actions: usize,
        lambda_hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut params = ParameterSet::new();
        params.insert("w.w", init_weight(rng, n_agents, state_dim)).unwrap();
        params.insert("w.b", init_bias(n_agents)).unwrap();
        params.insert("b.w", init_weight(rng, n_agents, state_dim)).unwrap();
        params.insert("b.b", init_bias(n_agents)).unwrap();
        let lam_in = state_dim + n_agents * n_actions;
        params.insert("lam.l1.w", init_weight(rng, lambda_hidden, lam_in)).unwrap();
        params.insert("lam.l1.b", init_bias(lambda_hidden)).unwrap();
        params.insert("lam.l2.w", init_weight(rng, n_agents, lambda_hidden)).unwrap();
        params.insert("lam.l2.b", init_bias(n_agents)).unwrap();
        QplexMixer {
            n_agents,
            state_dim,
            n_actions,
            lambda_hidden,
            params,
        }
    }

    /// λ-head input: the state concatenated with each agent's chosen-action
    /// one-hot. Built as constant data; gradients flow only into the head's
    /// weights.
    pub fn lambda_input(&self, state: &[f64], actions: &[usize]) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.state_dim);
        debug_assert_eq!(actions.len(), self.n_agents);
        let mut input = vec![0.0; self.state_dim + self.n_agents * self.n_actions];
        input[..self.state_dim].copy_from_slice(state);
        for (i, &a) in actions.iter().enumerate() {
            debug_assert!(a < self.n_actions);
            input[self.state_dim + i * self.n_actions + a] = 1.0;
        }
        input
    }

    fn heads_value(&self, state: &[f64], actions: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_agents;
        let mut w = vec![0.0; n];
        math::matmul_nt(state, 1, self.state_dim, self.params.value("w.w").data(), n, &mut w);
        for (v, b) in w.iter_mut().zip(self.params.value("w.b").data()) {
            *v = (*v + b).abs() + POSITIVITY_EPS;
        }
        let mut b_out = vec![0.0; n];
        math::matmul_nt(state, 1, self.state_dim, self.params.value("b.w").data(), n, &mut b_out);
        for (v, b) in b_out.iter_mut().zip(self.params.value("b.b").data()) {
            *v += b;
        }
        let lam_in = self.lambda_input(state, actions);
        let hh = self.lambda_hidden;
        let mut hidden = vec![0.0; hh];
        math::matmul_nt(&lam_in, 1, lam_in.len(), self.params.value("lam.l1.w").data(), hh, &mut hidden);
        for (h, b) in hidden.iter_mut().zip(self.params.value("lam.l1.b").data()) {
            *h = Activation::Relu.apply(*h + b);
        }
        let mut lam = vec![0.0; n];
        math::matmul_nt(&hidden, 1, hh, self.params.value("lam.l2.w").data(), n, &mut lam);
        for (v, b) in lam.iter_mut().zip(self.params.value("lam.l2.b").data()) {
            *v = (*v + b).abs() + POSITIVITY_EPS;
        }
        (w, b_out, lam)
    }

    pub fn mix_value(
        &self,
        q_taken: &[f64],
        v_greedy: &[f64],
        state: &[f64],
        actions: &[usize],
    ) -> Result<f64> {
        for (i, (&q, &v)) in q_taken.iter().zip(v_greedy).enumerate() {
            if q > v {
                return Err(CoreError::contract(format!(
                    "qplex: q[{i}] = {q} exceeds its greedy value {v}"
                )));
            }
        }
        let (w, b, lam) = self.heads_value(state, actions);
        let base: f64 = (0..self.n_agents).map(|i| w[i] * v_greedy[i] + b[i]).sum();
        let adv: f64 = (0..self.n_agents)
            .map(|i| lam[i] * w[i] * (q_taken[i] - v_greedy[i]))
            .sum();
        Ok(base + adv)
    }

    /// The advantage term alone (≤ 0; exactly 0 at the greedy joint action).
    pub fn advantage_value(
        &self,
        q_taken: &[f64],
        v_greedy: &[f64],
        state: &[f64],
        actions: &[usize],
    ) -> f64 {
        let (w, _, lam) = self.heads_value(state, actions);
        (0..self.n_agents)
            .map(|i| lam[i] * w[i] * (q_taken[i] - v_greedy[i]))
            .sum()
    }

    pub fn tape_params(&self, tape: &mut Tape) -> QplexTapeParams {
        let mut leaf = |name: &str| tape.leaf(self.params.value(name).clone());
        QplexTapeParams {
            w_w: leaf("w.w"),
            w_b: leaf("w.b"),
            b_w: leaf("b.w"),
            b_b: leaf("b.b"),
            lam_l1_w: leaf("lam.l1.w"),
            lam_l1_b: leaf("lam.l1.b"),
            lam_l2_w: leaf("lam.l2.w"),
            lam_l2_b: leaf("lam.l2.b"),
            state: None,
            lambda_in: None,
        }
    }

    /// q_taken, v_greedy: [B,N] nodes; actions: row-major [B*N]. The state
    /// rows are read from the λ input (built internally as a constant
    /// together with the action one-hots); pass them via `states` here.
    pub fn mix_tape(
        &self,
        tape: &mut Tape,
        p: &QplexTapeParams,
        q_taken: NodeId,
        v_greedy: NodeId,
        actions: &[usize],
    ) -> Result<NodeId> {
        let b = tape.value(q_taken).rows();
        debug_assert_eq!(actions.len(), b * self.n_agents);
        // Recover the state rows recorded on the λ-input constant leaf.
        let state_node = p.state.ok_or_else(|| {
            CoreError::contract("qplex mix_tape requires prepare_states() before mixing".into())
        })?;

        let w_pre = tape.affine(state_node, p.w_w, p.w_b)?;
        let w_abs = tape.activation(Activation::Abs, w_pre);
        let w = tape.add_scalar(w_abs, POSITIVITY_EPS);
        let b_out = tape.affine(state_node, p.b_w, p.b_b)?;

        let lam_in_node = p.lambda_in.ok_or_else(|| {
            CoreError::contract("qplex mix_tape requires prepare_states() before mixing".into())
        })?;
        let l1 = tape.affine(lam_in_node, p.lam_l1_w, p.lam_l1_b)?;
        let l1 = tape.activation(Activation::Relu, l1);
        let lam_pre = tape.affine(l1, p.lam_l2_w, p.lam_l2_b)?;
        let lam_abs = tape.activation(Activation::Abs, lam_pre);
        let lam = tape.add_scalar(lam_abs, POSITIVITY_EPS);

        let wv = tape.mul(w, v_greedy);
        let base_terms = tape.add(wv, b_out);
        let base = tape.sum_rows(base_terms);

        let gap = tape.sub(q_taken, v_greedy);
        let wgap = tape.mul(w, gap);
        let adv_terms = tape.mul(lam, wgap);
        let adv = tape.sum_rows(adv_terms);

        Ok(tape.add(base, adv))
    }

    pub fn accumulate_grads(&self, tape: &Tape, p: &QplexTapeParams, into: &mut ParameterSet) {
        for (name, id) in p.named() {
            let src = tape.grad(id);
            let dst = into.grad_mut(name).data_mut();
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

pub struct QplexTapeParams {
    w_w: NodeId,
    w_b: NodeId,
    b_w: NodeId,
    b_b: NodeId,
    lam_l1_w: NodeId,
    lam_l1_b: NodeId,
    lam_l2_w: NodeId,
    lam_l2_b: NodeId,
    /// Constant leaves set per batch by `prepare_states`.
    pub state: Option<NodeId>,
    pub lambda_in: Option<NodeId>,
}

impl QplexTapeParams {
    fn named(&self) -> [(&'static str, NodeId); 8] {
        [
            ("w.w", self.w_w),
            ("w.b", self.w_b),
            ("b.w", self.b_w),
            ("b.b", self.b_b),
            ("lam.l1.w", self.lam_l1_w),
            ("lam.l1.b", self.lam_l1_b),
            ("lam.l2.w", self.lam_l2_w),
            ("lam.l2.b", self.lam_l2_b),
        ]
    }
}

impl QplexMixer {
    /// Installs the per-batch constant inputs (state rows and λ-head input)
    /// on the tape before `mix_tape`.
    pub fn prepare_states(
        &self,
        tape: &mut Tape,
        p: &mut QplexTapeParams,
        states: &[f64],
        actions: &[usize],
        rows: usize,
    ) -> Result<()> {
        debug_assert_eq!(states.len(), rows * self.state_dim);
        debug_assert_eq!(actions.len(), rows * self.n_agents);
        let mut lam_in = Vec::with_capacity(rows * (self.state_dim + self.n_agents * self.n_actions));
        for r in 0..rows {
            let srow = &states[r * self.state_dim..(r + 1) * self.state_dim];
            let arow = &actions[r * self.n_agents..(r + 1) * self.n_agents];
            lam_in.extend_from_slice(&self.lambda_input(srow, arow));
        }
        let lam_width = self.state_dim + self.n_agents * self.n_actions;
        p.state = Some(tape.leaf(Array::from_vec(&[rows, self.state_dim], states.to_vec())?));
        p.lambda_in = Some(tape.leaf(Array::from_vec(&[rows, lam_width], lam_in)?));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn greedy_joint_action_has_zero_advantage() {
        let mut rng = SeededRng::new(4, Stream::ParamInit);
        let m = QplexMixer::with_dims(3, 4, 5, 8, &mut rng);
        let v = [1.0, -0.5, 2.0];
        let s = [0.1, 0.2, 0.3, 0.4];
        let a = [0, 1, 2];
        let adv = m.advantage_value(&v, &v, &s, &a);
        assert_eq!(adv, 0.0);
        let (w, b, _) = m.heads_value(&s, &a);
        let expected: f64 = (0..3).map(|i| w[i] * v[i] + b[i]).sum();
        assert_eq!(m.mix_value(&v, &v, &s, &a).unwrap(), expected);
    }

    #[test]
    fn single_agent_identity_reduction() {
        // w=1, b=0, λ=1 -> Q_tot = q
        let mut rng = SeededRng::new(5, Stream::ParamInit);
        let mut m = QplexMixer::with_dims(1, 2, 3, 4, &mut rng);
        for (_, p) in m.params.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        // abs(0) + eps = eps, so force exact 1 via the bias entries.
        m.params.value_mut("w.b").data_mut()[0] = 1.0 - POSITIVITY_EPS;
        m.params.value_mut("lam.l2.b").data_mut()[0] = 1.0 - POSITIVITY_EPS;
        let q = [0.25];
        let v = [0.75];
        let s = [0.0, 0.0];
        let tot = m.mix_value(&q, &v, &s, &[1]).unwrap();
        // Q_tot = 1·v + 0 + 1·1·(q−v) = q
        assert!((tot - q[0]).abs() < 1e-12);
    }

    #[test]
    fn q_above_v_is_contract_violation() {
        let mut rng = SeededRng::new(6, Stream::ParamInit);
        let m = QplexMixer::with_dims(2, 2, 2, 4, &mut rng);
        let err = m.mix_value(&[1.0, 0.0], &[0.5, 0.0], &[0.0, 0.0], &[0, 0]);
        assert!(err.is_err());
    }

    #[test]
    fn advantage_is_nonpositive() {
        let mut rng = SeededRng::new(7, Stream::ParamInit);
        let m = QplexMixer::with_dims(3, 3, 4, 8, &mut rng);
        let mut draw = SeededRng::new(8, Stream::Problems);
        for _ in 0..200 {
            let v: Vec<f64> = (0..3).map(|_| draw.uniform(-2.0, 2.0)).collect();
            let q: Vec<f64> = v.iter().map(|&vi| vi - draw.uniform(0.0, 1.5)).collect();
            let s: Vec<f64> = (0..3).map(|_| draw.uniform(-1.0, 1.0)).collect();
            let a: Vec<usize> = (0..3).map(|_| draw.below(4)).collect();
            let adv = m.advantage_value(&q, &v, &s, &a);
            assert!(adv <= 1e-12, "advantage {adv} positive");
        }
    }

    #[test]
    fn value_and_tape_paths_agree() {
        let mut rng = SeededRng::new(9, Stream::ParamInit);
        let m = QplexMixer::with_dims(2, 3, 4, 8, &mut rng);
        let q = [0.2, -0.9];
        let v = [0.6, -0.1];
        let s = [0.5, -0.5, 0.25];
        let a = [3usize, 1usize];
        let direct = m.mix_value(&q, &v, &s, &a).unwrap();

        let mut tape = Tape::new();
        let mut p = m.tape_params(&mut tape);
        m.prepare_states(&mut tape, &mut p, &s, &a, 1).unwrap();
        let qn = tape.leaf(Array::from_vec(&[1, 2], q.to_vec()).unwrap());
        let vn = tape.leaf(Array::from_vec(&[1, 2], v.to_vec()).unwrap());
        let tot = m.mix_tape(&mut tape, &p, qn, vn, &a).unwrap();
        assert!((tape.value(tot).at(0) - direct).abs() < 1e-12);
    }
}
