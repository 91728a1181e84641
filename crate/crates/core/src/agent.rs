//! Per-agent recurrent Q-network: affine → relu → GRU → affine.
//!
//! One parameter set is shared by every agent within a module (teacher or
//! student); the two modules hold disjoint copies. The observation already
//! carries the agent-identity and last-action one-hots, so the network input
//! is exactly the observation vector.

use crate::array::Array;
use crate::autodiff::{GruParamNodes, NodeId, Tape};
use crate::error::{CoreError, Result};
use crate::math::{self, Activation, GruWeights};
use crate::params::{init_bias, init_weight, ParameterSet};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentNetConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_actions: usize,
}

/// Q-network weights: fc1 (input→hidden), GRU cell (hidden→hidden),
/// fc2 (hidden→|A|).
#[derive(Debug, Clone)]
pub struct AgentNetwork {
    pub config: AgentNetConfig,
    pub params: ParameterSet,
}

const GRU_GATES: [&str; 3] = ["z", "r", "n"];

impl AgentNetwork {
    pub fn new(config: AgentNetConfig, rng: &mut SeededRng) -> Self {
        let mut params = ParameterSet::new();
        let h = config.hidden_dim;
        params.insert("fc1.w", init_weight(rng, h, config.input_dim)).unwrap();
        params.insert("fc1.b", init_bias(h)).unwrap();
        for gate in GRU_GATES {
            params.insert(&format!("gru.w{gate}"), init_weight(rng, h, h)).unwrap();
            params.insert(&format!("gru.u{gate}"), init_weight(rng, h, h)).unwrap();
            params.insert(&format!("gru.b{gate}"), init_bias(h)).unwrap();
        }
        params.insert("fc2.w", init_weight(rng, config.n_actions, h)).unwrap();
        params.insert("fc2.b", init_bias(config.n_actions)).unwrap();
        AgentNetwork { config, params }
    }

    /// All-zero weights; every Q-value is 0. Used by tests.
    pub fn zeros(config: AgentNetConfig) -> Self {
        let mut rng = SeededRng::new(0, crate::rng::Stream::ParamInit);
        let mut net = AgentNetwork::new(config, &mut rng);
        for (_, p) in net.params.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        net
    }

    /// Fresh all-zero hidden state for `n_agents` agents, flattened row-major
    /// [n_agents, hidden_dim].
    pub fn init_hidden(&self, n_agents: usize) -> Vec<f64> {
        vec![0.0; n_agents * self.config.hidden_dim]
    }

    fn gru_weights(&self) -> GruWeights<'_> {
        GruWeights {
            wz: self.params.value("gru.wz").data(),
            uz: self.params.value("gru.uz").data(),
            bz: self.params.value("gru.bz").data(),
            wr: self.params.value("gru.wr").data(),
            ur: self.params.value("gru.ur").data(),
            br: self.params.value("gru.br").data(),
            wn: self.params.value("gru.wn").data(),
            un: self.params.value("gru.un").data(),
            bn: self.params.value("gru.bn").data(),
        }
    }

    /// No-gradient forward for `rows` stacked inputs. `hidden` is updated in
    /// place; returns Q-values as [rows, n_actions].
    pub fn forward_value(&self, inputs: &[f64], hidden: &mut [f64], rows: usize) -> Vec<f64> {
        let c = self.config;
        debug_assert_eq!(inputs.len(), rows * c.input_dim);
        debug_assert_eq!(hidden.len(), rows * c.hidden_dim);

        let mut pre = vec![0.0; rows * c.hidden_dim];
        math::matmul_nt(inputs, rows, c.input_dim, self.params.value("fc1.w").data(), c.hidden_dim, &mut pre);
        let b1 = self.params.value("fc1.b").data();
        for row in pre.chunks_mut(c.hidden_dim) {
            for (v, b) in row.iter_mut().zip(b1) {
                *v = Activation::Relu.apply(*v + b);
            }
        }

        let mut new_hidden = vec![0.0; rows * c.hidden_dim];
        math::gru_forward(&pre, hidden, rows, c.hidden_dim, c.hidden_dim, self.gru_weights(), &mut new_hidden);
        hidden.copy_from_slice(&new_hidden);

        let mut q = vec![0.0; rows * c.n_actions];
        math::matmul_nt(&new_hidden, rows, c.hidden_dim, self.params.value("fc2.w").data(), c.n_actions, &mut q);
        let b2 = self.params.value("fc2.b").data();
        for row in q.chunks_mut(c.n_actions) {
            for (v, b) in row.iter_mut().zip(b2) {
                *v += b;
            }
        }
        q
    }

    /// Inserts the parameters as tape leaves for a differentiable pass.
    pub fn tape_params(&self, tape: &mut Tape) -> AgentTapeParams {
        let leaf = |tape: &mut Tape, name: &str| tape.leaf(self.params.value(name).clone());
        AgentTapeParams {
            fc1_w: leaf(tape, "fc1.w"),
            fc1_b: leaf(tape, "fc1.b"),
            gru: GruParamNodes {
                wz: leaf(tape, "gru.wz"),
                uz: leaf(tape, "gru.uz"),
                bz: leaf(tape, "gru.bz"),
                wr: leaf(tape, "gru.wr"),
                ur: leaf(tape, "gru.ur"),
                br: leaf(tape, "gru.br"),
                wn: leaf(tape, "gru.wn"),
                un: leaf(tape, "gru.un"),
                bn: leaf(tape, "gru.bn"),
            },
            fc2_w: leaf(tape, "fc2.w"),
            fc2_b: leaf(tape, "fc2.b"),
        }
    }

    /// Differentiable forward. `inputs`: [rows, input_dim] leaf; `hidden`:
    /// [rows, hidden_dim] node. Returns (q_values, next_hidden).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        p: &AgentTapeParams,
        inputs: NodeId,
        hidden: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let pre = tape.affine(inputs, p.fc1_w, p.fc1_b)?;
        let act = tape.activation(Activation::Relu, pre);
        let next_hidden = tape.gru_cell(act, hidden, p.gru)?;
        let q = tape.affine(next_hidden, p.fc2_w, p.fc2_b)?;
        Ok((q, next_hidden))
    }
}

/// Tape leaf ids of one agent network's parameters.
pub struct AgentTapeParams {
    pub fc1_w: NodeId,
    pub fc1_b: NodeId,
    pub gru: GruParamNodes,
    pub fc2_w: NodeId,
    pub fc2_b: NodeId,
}

impl AgentTapeParams {
    fn named(&self) -> [(&'static str, NodeId); 13] {
        [
            ("fc1.w", self.fc1_w),
            ("fc1.b", self.fc1_b),
            ("gru.wz", self.gru.wz),
            ("gru.uz", self.gru.uz),
            ("gru.bz", self.gru.bz),
            ("gru.wr", self.gru.wr),
            ("gru.ur", self.gru.ur),
            ("gru.br", self.gru.br),
            ("gru.wn", self.gru.wn),
            ("gru.un", self.gru.un),
            ("gru.bn", self.gru.bn),
            ("fc2.w", self.fc2_w),
            ("fc2.b", self.fc2_b),
        ]
    }

    /// Adds the tape's leaf gradients into the parameter set's accumulators.
    pub fn accumulate_grads(&self, tape: &Tape, params: &mut ParameterSet) {
        for (name, id) in self.named() {
            let src = tape.grad(id);
            let dst = params.grad_mut(name).data_mut();
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

/// Argmax over available actions only; ties break to the lowest index.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Result<usize> {
    debug_assert_eq!(q.len(), mask.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if !ok {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| CoreError::contract("masked_argmax: no available action".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn small_config() -> AgentNetConfig {
        AgentNetConfig {
            input_dim: 5,
            hidden_dim: 6,
            n_actions: 4,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = AgentNetwork::zeros(small_config());
        let mut hidden = net.init_hidden(2);
        let q = net.forward_value(&[0.3; 10], &mut hidden, 2);
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_pure_given_same_hidden() {
        let mut rng = SeededRng::new(11, Stream::ParamInit);
        let net = AgentNetwork::new(small_config(), &mut rng);
        let inputs = [0.1, -0.2, 0.3, 0.4, -0.5];
        let mut h1 = net.init_hidden(1);
        let mut h2 = net.init_hidden(1);
        let q1 = net.forward_value(&inputs, &mut h1, 1);
        let q2 = net.forward_value(&inputs, &mut h2, 1);
        assert_eq!(q1, q2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn hidden_reset_makes_episodes_independent() {
        let mut rng = SeededRng::new(5, Stream::ParamInit);
        let net = AgentNetwork::new(small_config(), &mut rng);
        let ep1 = [0.7, 0.1, -0.3, 0.9, 0.0];
        let ep2 = [-0.4, 0.6, 0.2, -0.8, 0.5];

        // Run ep1 then (after reset) ep2.
        let mut h = net.init_hidden(1);
        net.forward_value(&ep1, &mut h, 1);
        let mut h = net.init_hidden(1);
        let q_after_reset = net.forward_value(&ep2, &mut h, 1);

        // Run ep2 alone.
        let mut h_fresh = net.init_hidden(1);
        let q_alone = net.forward_value(&ep2, &mut h_fresh, 1);
        assert_eq!(q_after_reset, q_alone);
    }

    #[test]
    fn tape_and_value_forward_agree() {
        let mut rng = SeededRng::new(23, Stream::ParamInit);
        let net = AgentNetwork::new(small_config(), &mut rng);
        let inputs = vec![0.25, -0.5, 0.75, 0.1, -0.9, 0.12, 0.44, -0.31, 0.08, 0.6];

        let mut hidden = net.init_hidden(2);
        let q_value = net.forward_value(&inputs, &mut hidden, 2);

        let mut tape = Tape::new();
        let p = net.tape_params(&mut tape);
        let x = tape.leaf(Array::from_vec(&[2, 5], inputs).unwrap());
        let h0 = tape.leaf(Array::zeros(&[2, 6]));
        let (q, h1) = net.forward_tape(&mut tape, &p, x, h0).unwrap();
        assert_eq!(tape.value(q).data(), q_value.as_slice());
        assert_eq!(tape.value(h1).data(), hidden.as_slice());
    }

    #[test]
    fn masked_argmax_examples() {
        // plain argmax
        assert_eq!(masked_argmax(&[1.0, 5.0, 3.0], &[true, true, true]).unwrap(), 1);
        // best action masked off
        assert_eq!(masked_argmax(&[1.0, 5.0, 3.0], &[true, false, true]).unwrap(), 2);
        // ties break low
        assert_eq!(masked_argmax(&[2.0, 2.0, 2.0], &[true, true, true]).unwrap(), 0);
        // empty mask is a contract violation
        assert!(masked_argmax(&[1.0], &[false]).is_err());
    }

    #[test]
    fn teacher_and_student_copies_are_disjoint() {
        let mut rng = SeededRng::new(3, Stream::ParamInit);
        let teacher = AgentNetwork::new(small_config(), &mut rng);
        let mut student = teacher.clone();
        student.params.value_mut("fc1.w").data_mut()[0] += 1.0;
        assert_ne!(
            teacher.params.value("fc1.w").data()[0],
            student.params.value("fc1.w").data()[0]
        );
    }
}
