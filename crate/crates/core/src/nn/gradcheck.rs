//! Central finite-difference gradient checking.

use super::{LstmCellParams, Tensor};

/// Indexed access to a collection of parameter tensors.
pub trait ParamSet {
    fn param_count(&self) -> usize;
    fn param(&self, i: usize) -> &Tensor;
    fn param_mut(&mut self, i: usize) -> &mut Tensor;
    fn param_name(&self, i: usize) -> String;

    fn zero_grads(&mut self) {
        for i in 0..self.param_count() {
            self.param_mut(i).zero_grad();
        }
    }
}

impl ParamSet for Vec<Tensor> {
    fn param_count(&self) -> usize {
        self.len()
    }
    fn param(&self, i: usize) -> &Tensor {
        &self[i]
    }
    fn param_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self[i]
    }
    fn param_name(&self, i: usize) -> String {
        format!("p{i}")
    }
}

impl ParamSet for LstmCellParams {
    fn param_count(&self) -> usize {
        3
    }
    fn param(&self, i: usize) -> &Tensor {
        self.tensors()[i]
    }
    fn param_mut(&mut self, i: usize) -> &mut Tensor {
        let [a, b, c] = self.tensors_mut();
        [a, b, c].into_iter().nth(i).expect("index < 3")
    }
    fn param_name(&self, i: usize) -> String {
        ["w_x", "w_h", "b"][i].to_string()
    }
}

/// Denominator floor of [`relative_error`]. Central differences at `eps = 1e-5`
/// on an O(1) loss carry roughly 1e-11 of roundoff, so coordinates whose true
/// gradient is far below this floor are compared on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Relative error used throughout: `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(tensor name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Compare analytic grads against central differences.
///
/// `loss_fn` must recompute the loss from the current parameter values and
/// accumulate analytic grads into each tensor's grad buffer. Every coordinate
/// of every tensor is checked.
pub fn grad_check<P, F>(params: &mut P, mut loss_fn: F, eps: f64) -> GradCheckReport
where
    P: ParamSet + ?Sized,
    F: FnMut(&mut P) -> f64,
{
    params.zero_grads();
    loss_fn(params);
    let analytic: Vec<Vec<f64>> = (0..params.param_count())
        .map(|i| {
            let t = params.param(i);
            if t.has_grad() {
                t.grad().to_vec()
            } else {
                vec![0.0; t.len()]
            }
        })
        .collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        coords_checked: 0,
    };
    for (i, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = params.param(i).values()[j];
            params.param_mut(i).values_mut()[j] = orig + eps;
            let plus = loss_fn(params);
            params.param_mut(i).values_mut()[j] = orig - eps;
            let minus = loss_fn(params);
            params.param_mut(i).values_mut()[j] = orig;
            params.zero_grads();
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(a, numeric);
            report.coords_checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((params.param_name(i), j));
            }
        }
    }
    params.zero_grads();
    report
}
