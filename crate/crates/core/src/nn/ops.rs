//! Differentiable building blocks with hand-written backward passes.

use super::kernels::{axpy, matvec, matvec_t_acc};
use super::{NnError, RngState, Tensor};

/// Gather rows of `table` (`|V| x d`) into an `n x d` tensor.
pub fn embed_lookup(table: &Tensor, ids: &[usize]) -> Result<Tensor, NnError> {
    let vocab = table.rows();
    let d = table.cols();
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= vocab {
            return Err(NnError::IdOutOfRange { id, size: vocab });
        }
        out.extend_from_slice(table.row(id));
    }
    Tensor::from_vec(&[ids.len(), d], out)
}

/// Scatter-add `d_out` rows into `table.grad`; repeated ids accumulate.
pub fn embed_backward(table: &mut Tensor, ids: &[usize], d_out: &[f64]) {
    let d = table.cols();
    let grad = table.grad_mut();
    for (t, &id) in ids.iter().enumerate() {
        axpy(1.0, &d_out[t * d..(t + 1) * d], &mut grad[id * d..(id + 1) * d]);
    }
}

/// `W x + b` with `W: k x m`, `b: k`, `x: m`.
pub fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Result<Vec<f64>, NnError> {
    let (k, m) = (w.rows(), w.cols());
    if x.len() != m || b.len() != k {
        return Err(NnError::Shape(format!(
            "affine: W is {k}x{m}, b has {}, x has {}",
            b.len(),
            x.len()
        )));
    }
    let mut y = vec![0.0; k];
    matvec(w.values(), x, &mut y);
    for (yi, bi) in y.iter_mut().zip(b.values()) {
        *yi += bi;
    }
    Ok(y)
}

/// Accumulate parameter grads of an affine map; optionally add `W^T dy` into `dx`.
pub fn affine_backward(
    w: &mut Tensor,
    b: &mut Tensor,
    x: &[f64],
    dy: &[f64],
    params: bool,
    dx: Option<&mut [f64]>,
) {
    if let Some(dx) = dx {
        matvec_t_acc(w.values(), dy, dx);
    }
    if params {
        let m = x.len();
        let gw = w.grad_mut();
        for (r, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, x, &mut gw[r * m..(r + 1) * m]);
            }
        }
        axpy(1.0, dy, b.grad_mut());
    }
}

/// Column-wise max over time with the winning row per column
/// (ties resolve to the earliest row).
pub fn maxpool_time(h: &Tensor) -> Result<(Vec<f64>, Vec<usize>), NnError> {
    if h.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let k = h.cols();
    let mut best = h.row(0).to_vec();
    let mut arg = vec![0usize; k];
    for t in 1..h.rows() {
        for (j, &v) in h.row(t).iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = t;
            }
        }
    }
    Ok((best, arg))
}

pub fn maxpool_backward(argmax: &[usize], d_pool: &[f64], d_h: &mut Tensor) {
    let k = d_h.cols();
    let vals = d_h.values_mut();
    for (j, (&t, &g)) in argmax.iter().zip(d_pool).enumerate() {
        vals[t * k + j] += g;
    }
}

pub fn avgpool_time(h: &Tensor) -> Result<Vec<f64>, NnError> {
    if h.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let n = h.rows();
    let mut acc = vec![0.0; h.cols()];
    for t in 0..n {
        axpy(1.0, h.row(t), &mut acc);
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    Ok(acc)
}

pub fn avgpool_backward(d_pool: &[f64], d_h: &mut Tensor) {
    let inv = 1.0 / d_h.rows() as f64;
    for t in 0..d_h.rows() {
        axpy(inv, d_pool, d_h.row_mut(t));
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Softmax and categorical cross-entropy `-ln p[target]`.
///
/// The loss is computed from the log-sum-exp form so it stays finite even when
/// `p[target]` underflows.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(Vec<f64>, f64), NnError> {
    if target >= logits.len() {
        return Err(NnError::IdOutOfRange {
            id: target,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let loss = sum.ln() - (logits[target] - max);
    Ok((softmax(logits), loss))
}

/// `scale * (probs - onehot(target))`
pub fn softmax_xent_backward(probs: &[f64], target: usize, scale: f64) -> Vec<f64> {
    let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    d[target] -= scale;
    d
}

/// Inverted dropout mask: 0 for dropped units, `1/(1-rate)` for survivors.
/// `None` means identity (evaluation mode or zero rate).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Option<Vec<f64>>);

impl DropoutMask {
    pub fn identity() -> Self {
        Self(None)
    }

    pub fn apply(&self, x: &mut [f64]) {
        if let Some(m) = &self.0 {
            x.iter_mut().zip(m).for_each(|(v, s)| *v *= s);
        }
    }

    /// The backward pass is the same elementwise scaling.
    pub fn backward(&self, d: &mut [f64]) {
        self.apply(d)
    }

    pub fn scales(&self) -> Option<&[f64]> {
        self.0.as_deref()
    }
}

pub fn dropout(
    x: &Tensor,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<(Tensor, DropoutMask), NnError> {
    let mask = dropout_mask(x.len(), rate, rng, training)?;
    let mut out = x.clone();
    mask.apply(out.values_mut());
    Ok((out, mask))
}

pub fn dropout_mask(
    len: usize,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<DropoutMask, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::DropoutRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(DropoutMask::identity());
    }
    let keep = 1.0 / (1.0 - rate);
    let m = (0..len)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    Ok(DropoutMask(Some(m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Tensor {
        let c = rows[0].len();
        Tensor::from_vec(&[rows.len(), c], rows.concat()).unwrap()
    }

    #[test]
    fn embed_identity_rows() {
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.values_mut()[i * 3 + i] = 1.0;
        }
        let out = embed_lookup(&eye, &[1]).unwrap();
        assert_eq!(out.values(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            embed_lookup(&eye, &[3]),
            Err(NnError::IdOutOfRange { id: 3, size: 3 })
        ));
    }

    #[test]
    fn repeated_ids_accumulate_twice() {
        let mut e = Tensor::zeros(&[2, 2]);
        embed_backward(&mut e, &[1, 1], &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(e.grad(), &[0.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn affine_identity_and_bias() {
        let mut w = Tensor::zeros(&[2, 2]);
        w.values_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let b = Tensor::vector(vec![0.5, -0.5]);
        assert_eq!(affine(&w, &Tensor::zeros(&[2]), &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(affine(&w, &b, &[0.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        assert!(affine(&w, &b, &[1.0]).is_err());
    }

    #[test]
    fn pooling_examples() {
        let h = mat(&[&[1.0, 4.0], &[3.0, 2.0]]);
        let (mx, arg) = maxpool_time(&h).unwrap();
        assert_eq!(mx, vec![3.0, 4.0]);
        assert_eq!(arg, vec![1, 0]);
        assert_eq!(avgpool_time(&h).unwrap(), vec![2.0, 3.0]);

        let one = mat(&[&[0.25, -1.0]]);
        assert_eq!(maxpool_time(&one).unwrap().0, one.values());
        assert_eq!(avgpool_time(&one).unwrap(), one.values());
        assert!(maxpool_time(&Tensor::zeros(&[0, 2])).is_err());
    }

    #[test]
    fn maxpool_ties_pick_earliest() {
        let h = mat(&[&[2.0], &[2.0]]);
        assert_eq!(maxpool_time(&h).unwrap().1, vec![0]);
    }

    #[test]
    fn softmax_xent_examples() {
        let (p, loss) = softmax_xent(&[0.0, 0.0, 0.0], 1).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!((loss - 3f64.ln()).abs() < 1e-12);

        let (_, loss) = softmax_xent(&[0.0, 10.0, 0.0], 1).unwrap();
        assert!(loss < 1e-4);
        assert!(softmax_xent(&[0.0, 0.0], 2).is_err());

        let d = softmax_xent_backward(&[0.2, 0.5, 0.3], 1, 1.0);
        assert_eq!(d, vec![0.2, -0.5, 0.3]);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let (p, loss) = softmax_xent(&[1000.0, -1000.0], 1).unwrap();
        assert!(loss.is_finite() && loss > 1999.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = RngState::new(1);
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap().0, x);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap().0, x);
        assert!(matches!(
            dropout(&x, 1.0, &mut rng, true),
            Err(NnError::DropoutRate(_))
        ));
    }

    #[test]
    fn dropout_zero_fraction_matches_rate() {
        let mut rng = RngState::new(2024);
        let n = 100_000;
        let x = Tensor::vector(vec![1.0; n]);
        let (y, _) = dropout(&x, 0.2, &mut rng, true).unwrap();
        let zeros = y.values().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / n as f64;
        assert!((frac - 0.2).abs() < 0.01, "zero fraction {frac}");
        assert!(y
            .values()
            .iter()
            .all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-15));
    }
}
