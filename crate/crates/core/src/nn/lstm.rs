//! LSTM cells and bidirectional sequence layers with backpropagation through time.
//!
//! Gate layout inside every `4h` block is `(input, forget, cell, output)`:
//!
//! ```text
//! z = W_x x + W_h h_prev + b
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```

use super::kernels::{
    axpy, matvec, matvec_acc, matvec_t_acc, outer_acc, rows_times_w_acc, rows_times_wt_acc, sigmoid_slice,
    tanh, tanh_slice,
};
use super::{NnError, RngState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    /// `4h x d`
    pub w_x: Tensor,
    /// `4h x h`
    pub w_h: Tensor,
    /// `4h`
    pub b: Tensor,
}

impl LstmCellParams {
    /// Glorot-uniform matrices, zero bias except the forget block at 1.0.
    pub fn init(input: usize, hidden: usize, rng: &mut RngState) -> Self {
        let glorot = |rows: usize, cols: usize, rng: &mut RngState| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let vals = (0..rows * cols).map(|_| rng.uniform(-limit, limit)).collect();
            Tensor::from_vec(&[rows, cols], vals).expect("shape matches")
        };
        let w_x = glorot(4 * hidden, input, rng);
        let w_h = glorot(4 * hidden, hidden, rng);
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.values_mut()[hidden..2 * hidden].fill(1.0);
        Self { w_x, w_h, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.w_x, &self.w_h, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.b]
    }

    fn check(&self) -> Result<(), NnError> {
        let h = self.hidden();
        if self.w_h.rows() != 4 * h || self.w_x.rows() != 4 * h || self.b.len() != 4 * h {
            return Err(NnError::Shape(format!(
                "lstm params inconsistent: W_x {:?}, W_h {:?}, b {:?}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

fn activate(z: &mut [f64], h: usize) {
    let (ifg, o) = z.split_at_mut(3 * h);
    let (if_, g) = ifg.split_at_mut(2 * h);
    sigmoid_slice(if_);
    tanh_slice(g);
    sigmoid_slice(o);
}

/// Gate pre-activation grads for one step. `dc` holds the incoming cell grad on
/// entry and the grad w.r.t. `c_prev` on exit.
fn step_backward(
    acts: &[f64],
    c_prev: &[f64],
    tanh_c: &[f64],
    dh: &[f64],
    dc: &mut [f64],
    dz: &mut [f64],
    h: usize,
) {
    for j in 0..h {
        let (i, f, g, o) = (acts[j], acts[h + j], acts[2 * h + j], acts[3 * h + j]);
        let tc = tanh_c[j];
        let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dct * g * i * (1.0 - i);
        dz[h + j] = dct * c_prev[j] * f * (1.0 - f);
        dz[2 * h + j] = dct * i * (1.0 - g * g);
        dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
        dc[j] = dct * f;
    }
}

/// Everything a single cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    acts: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>, CellCache), NnError> {
    p.check()?;
    let h = p.hidden();
    if x.len() != p.input() || h_prev.len() != h || c_prev.len() != h {
        return Err(NnError::Shape(format!(
            "lstm_cell: expected x {}, h/c {h}; got {}, {}, {}",
            p.input(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = p.b.values().to_vec();
    let mut tmp = vec![0.0; 4 * h];
    matvec(p.w_x.values(), x, &mut tmp);
    axpy(1.0, &tmp, &mut z);
    matvec(p.w_h.values(), h_prev, &mut tmp);
    axpy(1.0, &tmp, &mut z);
    activate(&mut z, h);
    let c: Vec<f64> = (0..h)
        .map(|j| z[h + j] * c_prev[j] + z[j] * z[2 * h + j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| tanh(*v)).collect();
    let h_out = (0..h).map(|j| z[3 * h + j] * tanh_c[j]).collect();
    let cache = CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        acts: z,
        tanh_c,
    };
    Ok((h_out, c, cache))
}

/// Returns `(dx, dh_prev, dc_prev)` and accumulates parameter grads into `p`.
pub fn lstm_cell_backward(
    p: &mut LstmCellParams,
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = p.hidden();
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = dc.to_vec();
    step_backward(&cache.acts, &cache.c_prev, &cache.tanh_c, dh, &mut dc_prev, &mut dz, h);
    let mut dx = vec![0.0; p.input()];
    let mut dh_prev = vec![0.0; h];
    matvec_t_acc(p.w_x.values(), &dz, &mut dx);
    matvec_t_acc(p.w_h.values(), &dz, &mut dh_prev);
    outer_acc(&dz, 4 * h, &cache.x, cache.x.len(), p.w_x.grad_mut());
    outer_acc(&dz, 4 * h, &cache.h_prev, h, p.w_h.grad_mut());
    axpy(1.0, &dz, p.b.grad_mut());
    (dx, dh_prev, dc_prev)
}

/// One direction of an LSTM run over a whole sequence, indexed by original
/// position regardless of processing direction.
#[derive(Debug, Clone)]
pub struct LstmSeqCache {
    n: usize,
    reverse: bool,
    x: Vec<f64>,
    acts: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmSeqCache {
    /// Hidden state at original position `t`.
    pub fn h(&self, t: usize) -> &[f64] {
        let hd = self.h.len() / self.n;
        &self.h[t * hd..(t + 1) * hd]
    }

    fn order(&self) -> Box<dyn Iterator<Item = usize>> {
        order(self.n, self.reverse)
    }

    fn prev(&self, t: usize) -> Option<usize> {
        if self.reverse {
            (t + 1 < self.n).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    }
}

fn order(n: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    }
}

/// Run one direction from a zero state. `x` is `n x d` row-major.
pub fn lstm_seq_forward(
    p: &LstmCellParams,
    x: &[f64],
    reverse: bool,
) -> Result<LstmSeqCache, NnError> {
    p.check()?;
    let (d, h) = (p.input(), p.hidden());
    if x.is_empty() {
        return Err(NnError::EmptySequence);
    }
    if !x.len().is_multiple_of(d) {
        return Err(NnError::Shape(format!(
            "sequence length {} not a multiple of input width {d}",
            x.len()
        )));
    }
    let n = x.len() / d;
    let g4 = 4 * h;
    let mut acts = vec![0.0; n * g4];
    for t in 0..n {
        acts[t * g4..(t + 1) * g4].copy_from_slice(p.b.values());
    }
    rows_times_wt_acc(x, d, p.w_x.values(), g4, &mut acts);

    let mut c = vec![0.0; n * h];
    let mut tanh_c = vec![0.0; n * h];
    let mut hs = vec![0.0; n * h];
    let mut prev: Option<usize> = None;
    for t in order(n, reverse) {
        let z = &mut acts[t * g4..(t + 1) * g4];
        if let Some(pt) = prev {
            matvec_acc(p.w_h.values(), &hs[pt * h..(pt + 1) * h], z);
        }
        activate(z, h);
        for j in 0..h {
            let cp = prev.map_or(0.0, |pt| c[pt * h + j]);
            let ct = z[h + j] * cp + z[j] * z[2 * h + j];
            let tc = tanh(ct);
            c[t * h + j] = ct;
            tanh_c[t * h + j] = tc;
            hs[t * h + j] = z[3 * h + j] * tc;
        }
        prev = Some(t);
    }
    Ok(LstmSeqCache {
        n,
        reverse,
        x: x.to_vec(),
        acts,
        c,
        tanh_c,
        h: hs,
    })
}

/// Backpropagation through time for one direction.
///
/// `dh` is `n x h`, the loss gradient w.r.t. every emitted hidden state.
/// Parameter grads are accumulated only when `params` is set; the input
/// gradient is returned only when `want_dx` is set.
pub fn lstm_seq_backward(
    p: &mut LstmCellParams,
    cache: &LstmSeqCache,
    dh: &[f64],
    params: bool,
    want_dx: bool,
) -> Option<Vec<f64>> {
    let (d, h, n) = (p.input(), p.hidden(), cache.n);
    let g4 = 4 * h;
    let zero = vec![0.0; h];
    let mut dz = vec![0.0; n * g4];
    let mut dh_rec = vec![0.0; h];
    let mut dc = vec![0.0; h];
    let mut dh_t = vec![0.0; h];
    for t in cache.order().collect::<Vec<_>>().into_iter().rev() {
        dh_t.copy_from_slice(&dh[t * h..(t + 1) * h]);
        axpy(1.0, &dh_rec, &mut dh_t);
        let c_prev = cache.prev(t).map_or(&zero[..], |pt| &cache.c[pt * h..(pt + 1) * h]);
        let dzt = &mut dz[t * g4..(t + 1) * g4];
        step_backward(
            &cache.acts[t * g4..(t + 1) * g4],
            c_prev,
            &cache.tanh_c[t * h..(t + 1) * h],
            &dh_t,
            &mut dc,
            dzt,
            h,
        );
        dh_rec.fill(0.0);
        if cache.prev(t).is_some() {
            matvec_t_acc(p.w_h.values(), dzt, &mut dh_rec);
        }
    }

    if params {
        outer_acc(&dz, g4, &cache.x, d, p.w_x.grad_mut());
        let mut h_prev = vec![0.0; n * h];
        for t in 0..n {
            if let Some(pt) = cache.prev(t) {
                h_prev[t * h..(t + 1) * h].copy_from_slice(&cache.h[pt * h..(pt + 1) * h]);
            }
        }
        outer_acc(&dz, g4, &h_prev, h, p.w_h.grad_mut());
        let gb = p.b.grad_mut();
        for t in 0..n {
            axpy(1.0, &dz[t * g4..(t + 1) * g4], gb);
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; n * d];
        rows_times_w_acc(&dz, g4, p.w_x.values(), d, &mut dx);
        dx
    })
}

/// Output of a bidirectional layer plus the per-direction caches.
#[derive(Debug, Clone)]
pub struct BiLstmOutput {
    /// `n x 2h`: row `i` is `[forward h_i ; backward h_i]`.
    pub states: Tensor,
    /// `2h`: forward state at `n-1` joined with backward state at `0`.
    pub terminal: Vec<f64>,
    fwd: LstmSeqCache,
    bwd: LstmSeqCache,
}

impl BiLstmOutput {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }
}

pub fn bilstm_forward(
    x: &Tensor,
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
) -> Result<BiLstmOutput, NnError> {
    if x.rows() == 0 || x.is_empty() {
        return Err(NnError::EmptySequence);
    }
    if fwd.hidden() != bwd.hidden() || fwd.input() != bwd.input() || x.cols() != fwd.input() {
        return Err(NnError::Shape(format!(
            "bilstm: input width {} vs cells {}/{}",
            x.cols(),
            fwd.input(),
            bwd.input()
        )));
    }
    let f = lstm_seq_forward(fwd, x.values(), false)?;
    let b = lstm_seq_forward(bwd, x.values(), true)?;
    let (n, h) = (x.rows(), fwd.hidden());
    let mut states = Vec::with_capacity(n * 2 * h);
    for t in 0..n {
        states.extend_from_slice(f.h(t));
        states.extend_from_slice(b.h(t));
    }
    let mut terminal = f.h(n - 1).to_vec();
    terminal.extend_from_slice(b.h(0));
    Ok(BiLstmOutput {
        states: Tensor::from_vec(&[n, 2 * h], states)?,
        terminal,
        fwd: f,
        bwd: b,
    })
}

/// Backward through a bidirectional layer given grads w.r.t. the per-step
/// states (`n x 2h`) and the terminal vector (`2h`).
pub fn bilstm_backward(
    fwd: &mut LstmCellParams,
    bwd: &mut LstmCellParams,
    out: &BiLstmOutput,
    d_states: &[f64],
    d_terminal: &[f64],
    params: bool,
    want_dx: bool,
) -> Option<Vec<f64>> {
    let (n, h) = (out.len(), fwd.hidden());
    let mut dh_f = vec![0.0; n * h];
    let mut dh_b = vec![0.0; n * h];
    for t in 0..n {
        let row = &d_states[t * 2 * h..(t + 1) * 2 * h];
        dh_f[t * h..(t + 1) * h].copy_from_slice(&row[..h]);
        dh_b[t * h..(t + 1) * h].copy_from_slice(&row[h..]);
    }
    axpy(1.0, &d_terminal[..h], &mut dh_f[(n - 1) * h..n * h]);
    axpy(1.0, &d_terminal[h..], &mut dh_b[..h]);
    let dx_f = lstm_seq_backward(fwd, &out.fwd, &dh_f, params, want_dx);
    let dx_b = lstm_seq_backward(bwd, &out.bwd, &dh_b, params, want_dx);
    match (dx_f, dx_b) {
        (Some(mut a), Some(b)) => {
            axpy(1.0, &b, &mut a);
            Some(a)
        }
        _ => None,
    }
}
