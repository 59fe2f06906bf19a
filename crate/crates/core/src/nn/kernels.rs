//! Small dense kernels over row-major slices.
//!
//! Reductions use a fixed lane layout so results are bitwise reproducible
//! while still letting the compiler vectorize them.

const LANES: usize = 8;
/// Output columns held in registers by the transposed kernels.
const BLOCK: usize = 32;

/// `a * b + c`, fused where the target supports it.
#[inline(always)]
fn madd(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(target_feature = "fma")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        a * b + c
    }
}

#[inline(always)]
fn reduce(acc: &[f64; LANES], tail: f64) -> f64 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = madd(xa[l], xb[l], acc[l]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail = madd(*x, *y, tail);
    }
    reduce(&acc, tail)
}

/// Four dot products against a shared `x`; each equals [`dot`] bitwise.
#[inline]
fn dot4(rows: [&[f64]; 4], x: &[f64]) -> [f64; 4] {
    #[cfg(all(target_arch = "x86_64", target_feature = "avx", target_feature = "fma"))]
    {
        simd::dot4(rows, x)
    }
    #[cfg(not(all(target_arch = "x86_64", target_feature = "avx", target_feature = "fma")))]
    {
        rows.map(|r| dot(r, x))
    }
}

#[cfg(all(target_arch = "x86_64", target_feature = "avx", target_feature = "fma"))]
mod simd {
    use super::{madd, LANES};
    use std::arch::x86_64::*;

    #[inline(always)]
    pub(super) fn dot4(rows: [&[f64]; 4], x: &[f64]) -> [f64; 4] {
        let m = x.len();
        let full = m - m % LANES;
        for r in &rows {
            assert!(r.len() >= m);
        }
        let mut out = [0.0; 4];
        // SAFETY: avx and fma are enabled at compile time; every load reads
        // `LANES` elements starting below `full <= m <= len`.
        unsafe {
            let mut lo = [_mm256_setzero_pd(); 4];
            let mut hi = [_mm256_setzero_pd(); 4];
            let mut c = 0;
            while c < full {
                let xl = _mm256_loadu_pd(x.as_ptr().add(c));
                let xh = _mm256_loadu_pd(x.as_ptr().add(c + 4));
                for j in 0..4 {
                    let p = rows[j].as_ptr().add(c);
                    lo[j] = _mm256_fmadd_pd(_mm256_loadu_pd(p), xl, lo[j]);
                    hi[j] = _mm256_fmadd_pd(_mm256_loadu_pd(p.add(4)), xh, hi[j]);
                }
                c += LANES;
            }
            for j in 0..4 {
                let mut s = [0.0; 4];
                _mm256_storeu_pd(s.as_mut_ptr(), _mm256_add_pd(lo[j], hi[j]));
                let tail = (full..m).fold(0.0, |t, i| madd(rows[j][i], x[i], t));
                out[j] = ((s[0] + s[1]) + (s[2] + s[3])) + tail;
            }
        }
        out
    }
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = madd(alpha, *xi, *yi);
    }
}

/// `y[i] = f(y[i], (W x)[i])` over the rows of `W`.
#[inline]
fn matvec_with(w: &[f64], x: &[f64], y: &mut [f64], f: impl Fn(f64, f64) -> f64) {
    let m = x.len();
    debug_assert_eq!(w.len(), y.len() * m);
    let rows = y.len();
    let row = |i: usize| &w[i * m..(i + 1) * m];
    let mut i = 0;
    while i + 4 <= rows {
        let r = dot4([row(i), row(i + 1), row(i + 2), row(i + 3)], x);
        for j in 0..4 {
            y[i + j] = f(y[i + j], r[j]);
        }
        i += 4;
    }
    for i in i..rows {
        y[i] = f(y[i], dot(row(i), x));
    }
}

/// `y = W x` for `W` of shape `rows x x.len()`.
pub fn matvec(w: &[f64], x: &[f64], y: &mut [f64]) {
    matvec_with(w, x, y, |_, v| v);
}

/// `y += W x`
pub fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    matvec_with(w, x, y, |a, v| a + v);
}

/// `out[j] += sum_i coeff(i) * row(i)[j]` for `i < n`, visiting `i` in order
/// for every column so the result does not depend on blocking.
#[inline]
fn combine_rows<'a>(
    out: &mut [f64],
    n: usize,
    coeff: impl Fn(usize) -> f64,
    row: impl Fn(usize) -> &'a [f64],
) {
    let m = out.len();
    let mut cb = 0;
    while cb + BLOCK <= m {
        let mut acc = [0.0f64; BLOCK];
        acc.copy_from_slice(&out[cb..cb + BLOCK]);
        for i in 0..n {
            let c = coeff(i);
            let r = &row(i)[cb..cb + BLOCK];
            for l in 0..BLOCK {
                acc[l] = madd(c, r[l], acc[l]);
            }
        }
        out[cb..cb + BLOCK].copy_from_slice(&acc);
        cb += BLOCK;
    }
    if cb < m {
        for i in 0..n {
            let c = coeff(i);
            let r = row(i);
            for j in cb..m {
                out[j] = madd(c, r[j], out[j]);
            }
        }
    }
}

/// `x_grad += W^T g`
pub fn matvec_t_acc(w: &[f64], g: &[f64], x_grad: &mut [f64]) {
    let m = x_grad.len();
    debug_assert_eq!(w.len(), g.len() * m);
    combine_rows(x_grad, g.len(), |i| g[i], |i| &w[i * m..(i + 1) * m]);
}

/// `Y[t] += W X[t]` for every row `t` of `X` (`n x m`), with `W` of shape `k x m`
/// and `Y` of shape `n x k`.
pub fn rows_times_wt_acc(x: &[f64], m: usize, w: &[f64], k: usize, y: &mut [f64]) {
    debug_assert_eq!(w.len(), k * m);
    let n = x.len() / m;
    debug_assert_eq!(y.len(), n * k);
    // Row blocks outermost so each block of `W` stays cached across all `t`.
    let row = |i: usize| &w[i * m..(i + 1) * m];
    let mut r = 0;
    while r + 4 <= k {
        let rows = [row(r), row(r + 1), row(r + 2), row(r + 3)];
        for (xt, yt) in x.chunks_exact(m).zip(y.chunks_exact_mut(k)) {
            let v = dot4(rows, xt);
            for j in 0..4 {
                yt[r + j] += v[j];
            }
        }
        r += 4;
    }
    for r in r..k {
        for (xt, yt) in x.chunks_exact(m).zip(y.chunks_exact_mut(k)) {
            yt[r] += dot(row(r), xt);
        }
    }
}

/// `G += sum_t D[t] (outer) X[t]`, with `D` of shape `n x k`, `X` of shape `n x m`,
/// `G` of shape `k x m`.
pub fn outer_acc(d: &[f64], k: usize, x: &[f64], m: usize, g: &mut [f64]) {
    let n = d.len() / k;
    debug_assert_eq!(x.len(), n * m);
    debug_assert_eq!(g.len(), k * m);
    const TR: usize = 4;
    const TC: usize = 16;
    let full_r = k - k % TR;
    let full_c = m - m % TC;
    for r0 in (0..full_r).step_by(TR) {
        for c0 in (0..full_c).step_by(TC) {
            let mut acc = [[0.0f64; TC]; TR];
            for (i, a) in acc.iter_mut().enumerate() {
                a.copy_from_slice(&g[(r0 + i) * m + c0..(r0 + i) * m + c0 + TC]);
            }
            for t in 0..n {
                let xs: &[f64; TC] = x[t * m + c0..t * m + c0 + TC].try_into().expect("tile");
                let ds = &d[t * k + r0..t * k + r0 + TR];
                for (a, &dv) in acc.iter_mut().zip(ds) {
                    for l in 0..TC {
                        a[l] = madd(dv, xs[l], a[l]);
                    }
                }
            }
            for (i, a) in acc.iter().enumerate() {
                g[(r0 + i) * m + c0..(r0 + i) * m + c0 + TC].copy_from_slice(a);
            }
        }
        for r in r0..r0 + TR {
            for t in 0..n {
                let dv = d[t * k + r];
                for j in full_c..m {
                    g[r * m + j] = madd(dv, x[t * m + j], g[r * m + j]);
                }
            }
        }
    }
    for r in full_r..k {
        combine_rows(&mut g[r * m..(r + 1) * m], n, |t| d[t * k + r], |t| &x[t * m..(t + 1) * m]);
    }
}

/// `DX[t] += W^T D[t]` for every row, `W` of shape `k x m`, `D` of shape `n x k`,
/// `DX` of shape `n x m`.
pub fn rows_times_w_acc(d: &[f64], k: usize, w: &[f64], m: usize, dx: &mut [f64]) {
    debug_assert_eq!(dx.len(), d.len() / k * m);
    const ROWS: usize = 8;
    for r0 in (0..k).step_by(ROWS) {
        let nr = ROWS.min(k - r0);
        for (dt, dxt) in d.chunks_exact(k).zip(dx.chunks_exact_mut(m)) {
            combine_rows(dxt, nr, |j| dt[r0 + j], |j| &w[(r0 + j) * m..(r0 + j + 1) * m]);
        }
    }
}

/// `exp` without branches so slice loops vectorize. Cody-Waite reduction to
/// `|r| <= ln2/2` and a degree-12 Taylor polynomial; within a few ulp of libm.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.clamp(-708.0, 709.0);
    let k = (x * std::f64::consts::LOG2_E).round();
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    for d in [39_916_800.0, 3_628_800.0, 362_880.0, 40_320.0, 5040.0, 720.0, 120.0, 24.0, 6.0, 2.0, 1.0, 1.0] {
        p = madd(p, r, 1.0 / d);
    }
    p * f64::from_bits(((k as i64 + 1023) as u64) << 52)
}

#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// Odd Taylor series below `|x| = 0.125`, where `1 - 2/(e^2x + 1)` cancels.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    const C: [f64; 7] = [
        -929_569.0 / 638_512_875.0,
        21_844.0 / 6_081_075.0,
        -1382.0 / 155_925.0,
        62.0 / 2835.0,
        -17.0 / 315.0,
        2.0 / 15.0,
        -1.0 / 3.0,
    ];
    let x2 = x * x;
    let mut p = C[0];
    for c in &C[1..] {
        p = madd(p, x2, *c);
    }
    let small = madd(x * x2, p, x);
    let large = 1.0 - 2.0 / (exp(2.0 * x) + 1.0);
    if x.abs() < 0.125 {
        small
    } else {
        large
    }
}

pub fn sigmoid_slice(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = sigmoid(*x));
}

pub fn tanh_slice(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = tanh(*x));
}
