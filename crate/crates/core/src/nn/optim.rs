use super::{NnError, Tensor};

/// One learning-rate group for [`sgd_step`].
pub struct SgdGroup<'a> {
    pub lr: f64,
    pub frozen: bool,
    pub params: Vec<(String, &'a mut Tensor)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Global gradient norm over unfrozen parameters before clipping.
    pub grad_norm: f64,
    /// Factor applied to every gradient (1.0 when no clipping happened).
    pub clip_scale: f64,
}

/// Plain SGD with global norm clipping.
///
/// Frozen groups are never written; every gradient buffer is zeroed afterwards.
pub fn sgd_step(groups: &mut [SgdGroup<'_>], clip_norm: Option<f64>) -> Result<StepStats, NnError> {
    let mut sq = 0.0;
    for g in groups.iter().filter(|g| !g.frozen) {
        for (name, t) in &g.params {
            if t.grad().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGrad(name.clone()));
            }
            sq += t.grad().iter().map(|v| v * v).sum::<f64>();
        }
    }
    let grad_norm = sq.sqrt();
    let clip_scale = match clip_norm {
        Some(c) if grad_norm > c => c / grad_norm,
        _ => 1.0,
    };
    for g in groups.iter_mut() {
        let (lr, frozen) = (g.lr, g.frozen);
        for (_, t) in g.params.iter_mut() {
            if !frozen {
                t.descend(lr, clip_scale);
            }
            t.zero_grad();
        }
    }
    Ok(StepStats { grad_norm, clip_scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, g: f64) -> Tensor {
        let mut t = Tensor::vector(vec![v]);
        t.grad_mut()[0] = g;
        t
    }

    #[test]
    fn single_scalar_step() {
        let mut t = scalar(1.0, 0.5);
        let mut groups = [SgdGroup { lr: 0.04, frozen: false, params: vec![("t".into(), &mut t)] }];
        sgd_step(&mut groups, None).unwrap();
        assert!((t.values()[0] - 0.98).abs() < 1e-15);
        assert_eq!(t.grad(), &[0.0]);
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut t = scalar(0.3, 0.0);
        let before = t.values().to_vec();
        let mut groups = [SgdGroup { lr: 0.04, frozen: false, params: vec![("t".into(), &mut t)] }];
        sgd_step(&mut groups, Some(5.0)).unwrap();
        assert_eq!(t.values(), &before[..]);
    }

    #[test]
    fn halved_rate_halves_the_update_exactly() {
        let mut a = scalar(0.0, 0.731);
        let mut b = scalar(0.0, 0.731);
        let mut groups = [
            SgdGroup { lr: 0.02, frozen: false, params: vec![("deep".into(), &mut a)] },
            SgdGroup { lr: 0.04, frozen: false, params: vec![("shallow".into(), &mut b)] },
        ];
        sgd_step(&mut groups, None).unwrap();
        assert_eq!(b.values()[0], 2.0 * a.values()[0]);
    }

    #[test]
    fn frozen_group_is_bitwise_untouched() {
        let mut t = scalar(0.123_456_789, 3.0);
        let bits = t.values()[0].to_bits();
        let mut groups = [SgdGroup { lr: 0.04, frozen: true, params: vec![("t".into(), &mut t)] }];
        sgd_step(&mut groups, Some(1.0)).unwrap();
        assert_eq!(t.values()[0].to_bits(), bits);
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut a = scalar(0.0, 3.0);
        let mut b = scalar(0.0, 4.0);
        let mut groups = [SgdGroup {
            lr: 1.0,
            frozen: false,
            params: vec![("a".into(), &mut a), ("b".into(), &mut b)],
        }];
        let stats = sgd_step(&mut groups, Some(1.0)).unwrap();
        assert_eq!(stats.grad_norm, 5.0);
        let applied = (a.values()[0].powi(2) + b.values()[0].powi(2)).sqrt();
        assert!(applied <= 1.0 + 1e-9);
    }

    #[test]
    fn non_finite_grad_names_the_tensor() {
        let mut t = scalar(0.0, f64::NAN);
        let mut groups = [SgdGroup { lr: 0.1, frozen: false, params: vec![("lstm1.w_x".into(), &mut t)] }];
        match sgd_step(&mut groups, None) {
            Err(NnError::NonFiniteGrad(name)) => assert_eq!(name, "lstm1.w_x"),
            other => panic!("expected NonFiniteGrad, got {other:?}"),
        }
    }
}
