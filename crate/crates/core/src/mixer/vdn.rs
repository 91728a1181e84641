//! Additive value decomposition: Q_tot = Σ_i Q_i. No parameters, no state.

use crate::autodiff::{NodeId, Tape};
use crate::params::ParameterSet;

#[derive(Debug, Clone, Default)]
pub struct VdnMixer {
    /// Always empty; kept so every mixer exposes the same surface.
    pub params: ParameterSet,
}

impl VdnMixer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mix_value(&self, q_taken: &[f64]) -> f64 {
        q_taken.iter().sum()
    }

    /// q_taken: [B,N] → [B].
    pub fn mix_tape(&self, tape: &mut Tape, q_taken: NodeId) -> NodeId {
        tape.sum_rows(q_taken)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Array;

    #[test]
    fn zero_case() {
        assert_eq!(VdnMixer::new().mix_value(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn linear_sum() {
        assert_eq!(VdnMixer::new().mix_value(&[1.5, -0.5, 2.0]), 3.0);
    }

    #[test]
    fn gradient_is_one_per_agent() {
        let m = VdnMixer::new();
        let mut tape = Tape::new();
        let q = tape.leaf(Array::from_vec(&[1, 3], vec![1.5, -0.5, 2.0]).unwrap());
        let tot = m.mix_tape(&mut tape, q);
        let loss = tape.sum_all(tot);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(q), &[1.0, 1.0, 1.0]);
    }
}
