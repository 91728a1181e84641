//! Named parameter collections, their gradient accumulators, and the
//! RMSprop update rule.

use std::collections::BTreeMap;

use crate::array::Array;
use crate::error::{CoreError, Result};
use crate::rng::SeededRng;

/// One named parameter and its gradient accumulator of identical shape.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array,
    pub grad: Array,
}

/// Named parameters with paired gradient accumulators.
///
/// Iteration order is the name order (BTreeMap), which keeps global-norm
/// reductions, updates, and serialization deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    entries: BTreeMap<String, Param>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Array) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(CoreError::config(format!("duplicate parameter name {name:?}")));
        }
        let grad = Array::zeros(value.shape());
        self.entries.insert(name.to_string(), Param { value, grad });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, name: &str) -> &Array {
        &self.entries[name].value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Array {
        &mut self.entries.get_mut(name).expect("unknown parameter").value
    }

    pub fn grad(&self, name: &str) -> &Array {
        &self.entries[name].grad
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut Array {
        &mut self.entries.get_mut(name).expect("unknown parameter").grad
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Total number of scalar parameter entries.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    /// Copies values from another set with identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParameterSet) {
        assert_eq!(self.entries.len(), other.entries.len(), "parameter set mismatch");
        for (name, p) in self.entries.iter_mut() {
            let src = &other.entries[name];
            assert_eq!(p.value.shape(), src.value.shape(), "shape mismatch for {name}");
            p.value.data_mut().copy_from_slice(src.value.data());
        }
    }
}

/// Global L2-norm gradient clipping.
///
/// If the norm over all gradients exceeds `max_norm`, every gradient is
/// scaled by `max_norm / norm`. Returns the pre-clip norm.
pub fn clip_grad_norm(params: &mut ParameterSet, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, p) in params.iter() {
        for g in p.grad.data() {
            sq += g * g;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, p) in params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

/// RMSprop optimizer state: a squared-gradient moving average per parameter.
#[derive(Debug, Clone)]
pub struct RmspropState {
    sq_avg: BTreeMap<String, Array>,
    pub alpha: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl RmspropState {
    pub fn new(params: &ParameterSet, learning_rate: f64, alpha: f64, epsilon: f64) -> Self {
        let sq_avg = params
            .iter()
            .map(|(name, p)| (name.to_string(), Array::zeros(p.value.shape())))
            .collect();
        RmspropState {
            sq_avg,
            alpha,
            epsilon,
            learning_rate,
        }
    }

    pub fn sq_avg(&self, name: &str) -> &Array {
        &self.sq_avg[name]
    }

    pub fn sq_avg_mut(&mut self, name: &str) -> &mut Array {
        self.sq_avg.get_mut(name).expect("unknown parameter")
    }
}

/// One RMSprop step: s ← α·s + (1−α)·g²; w ← w − lr·g/(√s + ε).
/// Gradients are zeroed afterwards.
pub fn rmsprop_update(params: &mut ParameterSet, state: &mut RmspropState) {
    let alpha = state.alpha;
    let eps = state.epsilon;
    let lr = state.learning_rate;
    for (name, p) in params.iter_mut() {
        let s = state.sq_avg.get_mut(name).expect("optimizer state missing parameter");
        let sv = s.data_mut();
        let wv = p.value.data_mut();
        let gv = p.grad.data_mut();
        for i in 0..wv.len() {
            let g = gv[i];
            sv[i] = alpha * sv[i] + (1.0 - alpha) * g * g;
            wv[i] -= lr * g / (sv[i].sqrt() + eps);
            gv[i] = 0.0;
        }
    }
}

/// Uniform init in ±1/√fan_in for a weight matrix of shape [rows, fan_in].
pub fn init_weight(rng: &mut SeededRng, rows: usize, fan_in: usize) -> Array {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data: Vec<f64> = (0..rows * fan_in).map(|_| rng.uniform(-bound, bound)).collect();
    Array::from_vec(&[rows, fan_in], data).expect("shape matches data")
}

/// Zero-initialized bias vector.
pub fn init_bias(rows: usize) -> Array {
    Array::zeros(&[rows])
}
