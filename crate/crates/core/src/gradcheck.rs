//! Central finite-difference gradient checking.
//!
//! The closure under test evaluates a scalar loss from a [`ParameterSet`]
//! *and* accumulates reverse-mode gradients into it. The checker re-evaluates
//! the same closure at perturbed parameters to form central differences, so
//! the comparison probes exactly the forward path the tape differentiates.

use crate::error::{CoreError, Result};
use crate::params::ParameterSet;

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error between an analytic and a finite-difference derivative.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1e-8, a.abs() + b.abs())
}

/// Compares reverse-mode gradients against central finite differences with
/// the given `step`, entry by entry, over every parameter in `params`.
///
/// `f` must: evaluate the scalar loss at the current parameter values,
/// accumulate dloss/dparam into the gradient slots, and be deterministic.
pub fn grad_check<F>(mut f: F, params: &mut ParameterSet, step: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParameterSet) -> Result<f64>,
{
    params.zero_grads();
    let base = f(params)?;
    if !base.is_finite() {
        return Err(CoreError::numeric("grad_check: loss is not finite".into()));
    }
    // Snapshot the analytic gradients before probing perturbations.
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let analytic: Vec<Vec<f64>> = names.iter().map(|n| params.grad(n).data().to_vec()).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        entries_checked: 0,
    };

    for (name, grads) in names.iter().zip(&analytic) {
        for idx in 0..grads.len() {
            let original = params.value(name).data()[idx];

            params.value_mut(name).data_mut()[idx] = original + step;
            params.zero_grads();
            let plus = f(params)?;

            params.value_mut(name).data_mut()[idx] = original - step;
            params.zero_grads();
            let minus = f(params)?;

            params.value_mut(name).data_mut()[idx] = original;

            if !plus.is_finite() || !minus.is_finite() {
                return Err(CoreError::numeric(format!(
                    "grad_check: non-finite loss while perturbing {name}[{idx}]"
                )));
            }
            let fd = (plus - minus) / (2.0 * step);
            let err = relative_error(grads[idx], fd);
            report.entries_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    params.zero_grads();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Array;
    use crate::autodiff::Tape;

    #[test]
    fn linear_function_is_exact() {
        // loss = 3*a + 2*b: analytic and central differences agree to ~1e-10
        let mut params = ParameterSet::new();
        params.insert("w", Array::vector(&[0.4, -1.2])).unwrap();
        let report = grad_check(
            |p: &mut ParameterSet| {
                let w = p.value("w").data();
                let loss = 3.0 * w[0] + 2.0 * w[1];
                let g = p.grad_mut("w").data_mut();
                g[0] += 3.0;
                g[1] += 2.0;
                Ok(loss)
            },
            &mut params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-10, "err {}", report.max_rel_err);
        assert_eq!(report.entries_checked, 2);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut params = ParameterSet::new();
        params.insert("w", Array::vector(&[1.0, 2.0, 3.0])).unwrap();
        let report = grad_check(|_| Ok(42.0), &mut params, 1e-5).unwrap();
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn tape_quadratic_passes() {
        // loss = sum((w ∘ w)), via the tape
        let mut params = ParameterSet::new();
        params.insert("w", Array::vector(&[0.3, -0.8, 1.1])).unwrap();
        let report = grad_check(
            |p: &mut ParameterSet| {
                let mut t = Tape::new();
                let w = t.leaf(p.value("w").clone());
                let sq = t.mul(w, w);
                let loss = t.sum_all(sq);
                t.backward(loss)?;
                let gw = t.grad(w).to_vec();
                for (dst, src) in p.grad_mut("w").data_mut().iter_mut().zip(&gw) {
                    *dst += src;
                }
                Ok(t.value(loss).at(0))
            },
            &mut params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-9, "err {}", report.max_rel_err);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let mut params = ParameterSet::new();
        params.insert("w", Array::vector(&[1.0])).unwrap();
        let err = grad_check(|_| Ok(f64::NAN), &mut params, 1e-5).unwrap_err();
        assert!(matches!(err, CoreError::Numeric(_)));
    }
}
