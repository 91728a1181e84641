//! State-conditioned monotone mixing.
//!
//! Q_tot = W₂(s)·elu(W₁(s)·q + b₁(s)) + b₂(s), where the hypernetwork
//! outputs W₁ and W₂ pass through abs so every weight applied to a Q-value
//! is nonnegative — the source of ∂Q_tot/∂q_i ≥ 0 and hence joint/individual
//! argmax consistency.

use crate::array::Array;
use crate::autodiff::{NodeId, Tape};
use crate::error::Result;
use crate::math::{self, Activation};
use crate::params::{init_bias, init_weight, ParameterSet};
use crate::rng::SeededRng;

/// Mixing-layer embedding width.
pub const EMBED_DIM: usize = 32;
/// Hidden width of the two-layer hypernetworks.
pub const HYPER_HIDDEN: usize = 64;

#[derive(Debug, Clone)]
pub struct QmixMixer {
    pub n_agents: usize,
    pub state_dim: usize,
    pub embed_dim: usize,
    pub hyper_hidden: usize,
    pub params: ParameterSet,
}

impl QmixMixer {
    pub fn new(n_agents: usize, state_dim: usize, rng: &mut SeededRng) -> Self {
        Self::with_dims(n_agents, state_dim, EMBED_DIM, HYPER_HIDDEN, rng)
    }

    pub fn with_dims(
        n_agents: usize,
        state_dim: usize,
        embed_dim: usize,
        hyper_hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut params = ParameterSet::new();
        // W1 hypernetwork: state -> hidden -> n_agents*embed
        params.insert("hw1.l1.w", init_weight(rng, hyper_hidden, state_dim)).unwrap();
        params.insert("hw1.l1.b", init_bias(hyper_hidden)).unwrap();
        params.insert("hw1.l2.w", init_weight(rng, n_agents * embed_dim, hyper_hidden)).unwrap();
        params.insert("hw1.l2.b", init_bias(n_agents * embed_dim)).unwrap();
        // b1 hypernetwork: state -> embed (linear)
        params.insert("hb1.w", init_weight(rng, embed_dim, state_dim)).unwrap();
        params.insert("hb1.b", init_bias(embed_dim)).unwrap();
        // W2 hypernetwork: state -> hidden -> embed
        params.insert("hw2.l1.w", init_weight(rng, hyper_hidden, state_dim)).unwrap();
        params.insert("hw2.l1.b", init_bias(hyper_hidden)).unwrap();
        params.insert("hw2.l2.w", init_weight(rng, embed_dim, hyper_hidden)).unwrap();
        params.insert("hw2.l2.b", init_bias(embed_dim)).unwrap();
        // scalar bias head: state -> hidden -> 1
        params.insert("vh.l1.w", init_weight(rng, hyper_hidden, state_dim)).unwrap();
        params.insert("vh.l1.b", init_bias(hyper_hidden)).unwrap();
        params.insert("vh.l2.w", init_weight(rng, 1, hyper_hidden)).unwrap();
        params.insert("vh.l2.b", init_bias(1)).unwrap();
        QmixMixer {
            n_agents,
            state_dim,
            embed_dim,
            hyper_hidden,
            params,
        }
    }

    fn two_layer_value(&self, l1w: &str, l1b: &str, l2w: &str, l2b: &str, state: &[f64]) -> Vec<f64> {
        let hidden_w = self.params.value(l1w);
        let hh = hidden_w.shape()[0];
        let mut hidden = vec![0.0; hh];
        math::matmul_nt(state, 1, self.state_dim, hidden_w.data(), hh, &mut hidden);
        for (h, b) in hidden.iter_mut().zip(self.params.value(l1b).data()) {
            *h = Activation::Relu.apply(*h + b);
        }
        let out_w = self.params.value(l2w);
        let rows = out_w.shape()[0];
        let mut out = vec![0.0; rows];
        math::matmul_nt(&hidden, 1, hh, out_w.data(), rows, &mut out);
        for (o, b) in out.iter_mut().zip(self.params.value(l2b).data()) {
            *o += b;
        }
        out
    }

    pub fn mix_value(&self, q_taken: &[f64], state: &[f64]) -> f64 {
        debug_assert_eq!(q_taken.len(), self.n_agents);
        debug_assert_eq!(state.len(), self.state_dim);
        let e = self.embed_dim;

        let mut w1 = self.two_layer_value("hw1.l1.w", "hw1.l1.b", "hw1.l2.w", "hw1.l2.b", state);
        for v in &mut w1 {
            *v = v.abs();
        }
        let b1w = self.params.value("hb1.w");
        let mut b1 = vec![0.0; e];
        math::matmul_nt(state, 1, self.state_dim, b1w.data(), e, &mut b1);
        for (v, b) in b1.iter_mut().zip(self.params.value("hb1.b").data()) {
            *v += b;
        }

        let mut hidden = b1;
        for (ni, &q) in q_taken.iter().enumerate() {
            for (ei, h) in hidden.iter_mut().enumerate() {
                *h += q * w1[ni * e + ei];
            }
        }
        for h in &mut hidden {
            *h = Activation::Elu.apply(*h);
        }

        let mut w2 = self.two_layer_value("hw2.l1.w", "hw2.l1.b", "hw2.l2.w", "hw2.l2.b", state);
        for v in &mut w2 {
            *v = v.abs();
        }
        let v_head = self.two_layer_value("vh.l1.w", "vh.l1.b", "vh.l2.w", "vh.l2.b", state);

        hidden.iter().zip(&w2).map(|(&h, &w)| h * w).sum::<f64>() + v_head[0]
    }

    pub fn tape_params(&self, tape: &mut Tape) -> QmixTapeParams {
        let mut leaf = |name: &str| tape.leaf(self.params.value(name).clone());
        QmixTapeParams {
            hw1_l1_w: leaf("hw1.l1.w"),
            hw1_l1_b: leaf("hw1.l1.b"),
            hw1_l2_w: leaf("hw1.l2.w"),
            hw1_l2_b: leaf("hw1.l2.b"),
            hb1_w: leaf("hb1.w"),
            hb1_b: leaf("hb1.b"),
            hw2_l1_w: leaf("hw2.l1.w"),
            hw2_l1_b: leaf("hw2.l1.b"),
            hw2_l2_w: leaf("hw2.l2.w"),
            hw2_l2_b: leaf("hw2.l2.b"),
            vh_l1_w: leaf("vh.l1.w"),
            vh_l1_b: leaf("vh.l1.b"),
            vh_l2_w: leaf("vh.l2.w"),
            vh_l2_b: leaf("vh.l2.b"),
        }
    }

    /// q_taken: [B,N], state: [B,S] → Q_tot: [B].
    pub fn mix_tape(
        &self,
        tape: &mut Tape,
        p: &QmixTapeParams,
        q_taken: NodeId,
        state: NodeId,
    ) -> Result<NodeId> {
        let b = tape.value(q_taken).rows();
        let e = self.embed_dim;

        let h1 = tape.affine(state, p.hw1_l1_w, p.hw1_l1_b)?;
        let h1 = tape.activation(Activation::Relu, h1);
        let w1 = tape.affine(h1, p.hw1_l2_w, p.hw1_l2_b)?;
        let w1 = tape.activation(Activation::Abs, w1);

        let b1 = tape.affine(state, p.hb1_w, p.hb1_b)?;

        let mixed = tape.row_mat_vec(q_taken, w1, self.n_agents, e);
        let pre = tape.add(mixed, b1);
        let hidden = tape.activation(Activation::Elu, pre);

        let h2 = tape.affine(state, p.hw2_l1_w, p.hw2_l1_b)?;
        let h2 = tape.activation(Activation::Relu, h2);
        let w2 = tape.affine(h2, p.hw2_l2_w, p.hw2_l2_b)?;
        let w2 = tape.activation(Activation::Abs, w2);

        let out = tape.dot_rows(hidden, w2);

        let v1 = tape.affine(state, p.vh_l1_w, p.vh_l1_b)?;
        let v1 = tape.activation(Activation::Relu, v1);
        let v2 = tape.affine(v1, p.vh_l2_w, p.vh_l2_b)?;
        let v2 = tape.reshape(v2, &[b])?;

        Ok(tape.add(out, v2))
    }

    pub fn accumulate_grads(&self, tape: &Tape, p: &QmixTapeParams, into: &mut ParameterSet) {
        for (name, id) in p.named() {
            let src = tape.grad(id);
            let dst = into.grad_mut(name).data_mut();
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

pub struct QmixTapeParams {
    hw1_l1_w: NodeId,
    hw1_l1_b: NodeId,
    hw1_l2_w: NodeId,
    hw1_l2_b: NodeId,
    hb1_w: NodeId,
    hb1_b: NodeId,
    hw2_l1_w: NodeId,
    hw2_l1_b: NodeId,
    hw2_l2_w: NodeId,
    hw2_l2_b: NodeId,
    vh_l1_w: NodeId,
    vh_l1_b: NodeId,
    vh_l2_w: NodeId,
    vh_l2_b: NodeId,
}

impl QmixTapeParams {
    fn named(&self) -> [(&'static str, NodeId); 14] {
        [
            ("hw1.l1.w", self.hw1_l1_w),
            ("hw1.l1.b", self.hw1_l1_b),
            ("hw1.l2.w", self.hw1_l2_w),
            ("hw1.l2.b", self.hw1_l2_b),
            ("hb1.w", self.hb1_w),
            ("hb1.b", self.hb1_b),
            ("hw2.l1.w", self.hw2_l1_w),
            ("hw2.l1.b", self.hw2_l1_b),
            ("hw2.l2.w", self.hw2_l2_w),
            ("hw2.l2.b", self.hw2_l2_b),
            ("vh.l1.w", self.vh_l1_w),
            ("vh.l1.b", self.vh_l1_b),
            ("vh.l2.w", self.vh_l2_w),
            ("vh.l2.b", self.vh_l2_b),
        ]
    }
}
