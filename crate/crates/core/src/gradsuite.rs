//! Finite-difference sweep over every differentiable op and every task loss.
//!
//! Each op is checked on `cases` random shapes and seeds; the report keeps the
//! worst relative error per op. [`SuiteOptions::fault`] scales the analytic
//! gradients of one op so callers can confirm the sweep actually trips.

use crate::corpus::{EncodedSample, RESERVED};
use crate::model::{HierModel, LossOptions, ModelDims, Task};
use crate::nn::*;

/// Every op the sweep covers, in report order.
pub const OPS: &[&str] = &[
    "embed_lookup",
    "affine",
    "maxpool_time",
    "avgpool_time",
    "softmax_xent",
    "dropout",
    "lstm_cell",
    "bilstm",
    "loss:lang",
    "loss:pos",
    "loss:pos+lang",
    "loss:lm",
    "loss:sentiment",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub cases: u64,
    pub eps: f64,
    pub tol: f64,
    /// `(op, factor)`: multiply that op's analytic gradients by `factor`.
    pub fault: Option<(String, f64)>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            cases: 20,
            eps: 1e-5,
            tol: 1e-4,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub op: &'static str,
    pub cases: u64,
    pub coords_checked: usize,
    pub max_rel_err: f64,
    /// Seed of the worst case and the offending coordinate.
    pub worst: Option<(u64, String, usize)>,
}

impl OpReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub tol: f64,
    pub ops: Vec<OpReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.ops.iter().all(|r| r.passed(self.tol))
    }

    pub fn max_rel_err(&self) -> f64 {
        self.ops.iter().map(|r| r.max_rel_err).fold(0.0, f64::max)
    }
}

pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    SuiteReport {
        tol: opts.tol,
        ops: OPS.iter().map(|op| check_op(op, opts).expect("listed op")).collect(),
    }
}

/// Sweep a single op; `None` for a name outside [`OPS`].
pub fn check_op(op: &str, opts: &SuiteOptions) -> Option<OpReport> {
    let name = *OPS.iter().find(|&&o| o == op)?;
    let factor = match &opts.fault {
        Some((o, f)) if o == op => *f,
        _ => 1.0,
    };
    let mut out = OpReport {
        op: name,
        cases: opts.cases,
        coords_checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let base = 1000 * (OPS.iter().position(|&o| o == op).unwrap() as u64 + 1);
    for case in 0..opts.cases {
        let seed = base + case;
        let rep = run_case(name, seed, opts.eps, factor);
        out.coords_checked += rep.coords_checked;
        if out.worst.is_none() || rep.max_rel_err > out.max_rel_err {
            out.max_rel_err = rep.max_rel_err;
            out.worst = rep.worst.map(|(t, j)| (seed, t, j));
        }
    }
    Some(out)
}

fn run_case(op: &str, seed: u64, eps: f64, factor: f64) -> GradCheckReport {
    let mut rng = RngState::new(seed);
    match op {
        "embed_lookup" => embed_case(&mut rng, eps, factor),
        "affine" => affine_case(&mut rng, eps, factor),
        "maxpool_time" => pool_case(&mut rng, eps, factor, true),
        "avgpool_time" => pool_case(&mut rng, eps, factor, false),
        "softmax_xent" => xent_case(&mut rng, eps, factor),
        "dropout" => dropout_case(&mut rng, seed, eps, factor),
        "lstm_cell" => cell_case(&mut rng, eps, factor),
        "bilstm" => {
            let (n, d, h) = (dim(&mut rng, 1, 5), dim(&mut rng, 1, 4), dim(&mut rng, 1, 4));
            bilstm_case(seed + 500, n, d, h, eps, factor)
        }
        "loss:lang" => model_case(Task::Lang, &mut rng, seed, eps, factor),
        "loss:pos" => model_case(Task::Pos, &mut rng, seed, eps, factor),
        "loss:pos+lang" => model_case(Task::PosLang, &mut rng, seed, eps, factor),
        "loss:lm" => model_case(Task::Lm, &mut rng, seed, eps, factor),
        "loss:sentiment" => model_case(Task::Sentiment, &mut rng, seed, eps, factor),
        _ => unreachable!("unlisted op {op}"),
    }
}

fn dim(rng: &mut RngState, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn rand_vec(rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn rand_tensor(rng: &mut RngState, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, rand_vec(rng, n)).expect("shape matches length")
}

/// `sum(r * y)`, so the upstream gradient is `r`.
fn project(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn add_into(t: &mut Tensor, g: &[f64]) {
    t.grad_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

/// Run `grad_check`, scaling the analytic gradients by `factor` after each
/// evaluation.
fn check<P, F>(params: &mut P, mut loss: F, eps: f64, factor: f64) -> GradCheckReport
where
    P: ParamSet + ?Sized,
    F: FnMut(&mut P) -> f64,
{
    grad_check(
        params,
        |p| {
            let l = loss(p);
            if factor != 1.0 {
                for i in 0..p.param_count() {
                    if p.param(i).has_grad() {
                        p.param_mut(i).grad_mut().iter_mut().for_each(|g| *g *= factor);
                    }
                }
            }
            l
        },
        eps,
    )
}

fn embed_case(rng: &mut RngState, eps: f64, factor: f64) -> GradCheckReport {
    let (v, d, n) = (dim(rng, 2, 6), dim(rng, 1, 4), dim(rng, 1, 5));
    let ids: Vec<usize> = (0..n).map(|_| rng.below(v)).collect();
    let r = rand_vec(rng, n * d);
    let mut ps = vec![rand_tensor(rng, &[v, d])];
    check(
        &mut ps,
        |p| {
            let out = embed_lookup(&p[0], &ids).expect("ids in range");
            embed_backward(&mut p[0], &ids, &r);
            project(out.values(), &r)
        },
        eps,
        factor,
    )
}

fn affine_case(rng: &mut RngState, eps: f64, factor: f64) -> GradCheckReport {
    let (k, m) = (dim(rng, 1, 5), dim(rng, 1, 6));
    let r = rand_vec(rng, k);
    let mut ps = vec![rand_tensor(rng, &[k, m]), rand_tensor(rng, &[k]), rand_tensor(rng, &[m])];
    check(
        &mut ps,
        |p| {
            let x = p[2].values().to_vec();
            let y = affine(&p[0], &p[1], &x).expect("shapes agree");
            let mut dx = vec![0.0; m];
            let (w, rest) = p.split_at_mut(1);
            let (b, xs) = rest.split_at_mut(1);
            affine_backward(&mut w[0], &mut b[0], &x, &r, true, Some(&mut dx));
            add_into(&mut xs[0], &dx);
            project(&y, &r)
        },
        eps,
        factor,
    )
}

fn pool_case(rng: &mut RngState, eps: f64, factor: f64, max: bool) -> GradCheckReport {
    let (n, k) = (dim(rng, 1, 6), dim(rng, 1, 5));
    let r = rand_vec(rng, k);
    let mut ps = vec![rand_tensor(rng, &[n, k])];
    check(
        &mut ps,
        |p| {
            let mut dh = Tensor::zeros(&[n, k]);
            let y = if max {
                let (y, arg) = maxpool_time(&p[0]).expect("non-empty");
                maxpool_backward(&arg, &r, &mut dh);
                y
            } else {
                let y = avgpool_time(&p[0]).expect("non-empty");
                avgpool_backward(&r, &mut dh);
                y
            };
            add_into(&mut p[0], dh.values());
            project(&y, &r)
        },
        eps,
        factor,
    )
}

fn xent_case(rng: &mut RngState, eps: f64, factor: f64) -> GradCheckReport {
    let k = dim(rng, 2, 7);
    let target = rng.below(k);
    let mut ps = vec![rand_tensor(rng, &[k])];
    check(
        &mut ps,
        |p| {
            let (probs, loss) = softmax_xent(p[0].values(), target).expect("target in range");
            let d = softmax_xent_backward(&probs, target, 1.0);
            add_into(&mut p[0], &d);
            loss
        },
        eps,
        factor,
    )
}

fn dropout_case(rng: &mut RngState, seed: u64, eps: f64, factor: f64) -> GradCheckReport {
    let n = dim(rng, 1, 10);
    let r = rand_vec(rng, n);
    let mut ps = vec![rand_tensor(rng, &[n])];
    check(
        &mut ps,
        |p| {
            // same mask on every evaluation
            let mut mask_rng = RngState::new(seed);
            let (y, mask) = dropout(&p[0], 0.2, &mut mask_rng, true).expect("valid rate");
            let mut d = r.clone();
            mask.backward(&mut d);
            add_into(&mut p[0], &d);
            project(y.values(), &r)
        },
        eps,
        factor,
    )
}

fn cell_case(rng: &mut RngState, eps: f64, factor: f64) -> GradCheckReport {
    let (d, h) = (dim(rng, 1, 4), dim(rng, 1, 4));
    let cell = LstmCellParams::init(d, h, rng);
    let r_h = rand_vec(rng, h);
    let r_c = rand_vec(rng, h);
    let [w_x, w_h, b] = cell.tensors();
    let mut ps = vec![
        w_x.clone(),
        w_h.clone(),
        b.clone(),
        rand_tensor(rng, &[d]),
        rand_tensor(rng, &[h]),
        rand_tensor(rng, &[h]),
    ];
    check(
        &mut ps,
        |p| {
            let mut cell = LstmCellParams {
                w_x: p[0].clone(),
                w_h: p[1].clone(),
                b: p[2].clone(),
            };
            let (hh, cc, cache) = lstm_cell(p[3].values(), p[4].values(), p[5].values(), &cell)
                .expect("shapes agree");
            let (dx, dh, dc) = lstm_cell_backward(&mut cell, &cache, &r_h, &r_c);
            let grads = [
                cell.w_x.grad().to_vec(),
                cell.w_h.grad().to_vec(),
                cell.b.grad().to_vec(),
                dx,
                dh,
                dc,
            ];
            for (t, g) in p.iter_mut().zip(grads) {
                add_into(t, &g);
            }
            project(&hh, &r_h) + project(&cc, &r_c)
        },
        eps,
        factor,
    )
}

/// BPTT through both directions, checking weights and inputs, for a fixed
/// `(n, d, h)`.
pub fn bilstm_case(seed: u64, n: usize, d: usize, h: usize, eps: f64, factor: f64) -> GradCheckReport {
    let mut rng = RngState::new(seed);
    let f = LstmCellParams::init(d, h, &mut rng);
    let b = LstmCellParams::init(d, h, &mut rng);
    let r_states = rand_vec(&mut rng, n * 2 * h);
    let r_term = rand_vec(&mut rng, 2 * h);
    let mut ps: Vec<Tensor> = f
        .tensors()
        .into_iter()
        .chain(b.tensors())
        .cloned()
        .chain([rand_tensor(&mut rng, &[n, d])])
        .collect();
    check(
        &mut ps,
        |p| {
            let mut f = LstmCellParams { w_x: p[0].clone(), w_h: p[1].clone(), b: p[2].clone() };
            let mut b = LstmCellParams { w_x: p[3].clone(), w_h: p[4].clone(), b: p[5].clone() };
            let out = bilstm_forward(&p[6], &f, &b).expect("shapes agree");
            let dx = bilstm_backward(&mut f, &mut b, &out, &r_states, &r_term, true, true)
                .expect("shapes agree");
            let grads: Vec<Vec<f64>> = f
                .tensors()
                .into_iter()
                .chain(b.tensors())
                .map(|t| t.grad().to_vec())
                .chain([dx])
                .collect();
            for (t, g) in p.iter_mut().zip(grads) {
                add_into(t, &g);
            }
            project(out.states.values(), &r_states) + project(&out.terminal, &r_term)
        },
        eps,
        factor,
    )
}

/// Three labelled samples of length 1..=4 over non-reserved ids.
pub fn micro_corpus(d: &ModelDims, rng: &mut RngState) -> Vec<EncodedSample> {
    let r = RESERVED.len();
    (0..3)
        .map(|_| {
            let n = 1 + rng.below(4);
            let mut s = EncodedSample::from_ids((0..n).map(|_| r + rng.below(d.vocab - r)).collect());
            s.pos_labels = Some((0..n).map(|_| rng.below(d.n_pos)).collect());
            s.lang_labels = Some((0..n).map(|_| rng.below(d.n_lang)).collect());
            s.sentiment = Some(rng.below(3));
            s
        })
        .collect()
}

fn model_case(task: Task, rng: &mut RngState, seed: u64, eps: f64, factor: f64) -> GradCheckReport {
    let d = ModelDims {
        vocab: RESERVED.len() + 2 + rng.below(5),
        emb: dim(rng, 1, 3),
        hidden: dim(rng, 1, 3),
        n_pos: dim(rng, 2, 4),
        n_lang: dim(rng, 2, 3),
    };
    let batch = micro_corpus(&d, rng);
    let mut model = HierModel::init(d, seed);
    let opts = LossOptions::default();
    check(
        &mut model,
        |m| {
            // dropout draws the same mask every evaluation
            let mut loss_rng = RngState::new(seed);
            m.task_loss(task, &batch, &opts, &mut loss_rng).expect("labels present")
        },
        eps,
        factor,
    )
}
