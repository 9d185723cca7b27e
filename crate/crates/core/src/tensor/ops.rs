//! Tape-free tensor operations. The tape in [`super::Tape`] records these
//! forward computations and supplies their gradients.

use super::{lit, shape_err, Scalar, Tensor, TensorError};

pub const BN_EPS: f64 = 1e-5;
/// Weight kept on the old running statistic per update.
pub const BN_MOMENTUM: f64 = 0.9;

const GELU_C: f64 = 0.044715;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

fn check_2d<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize), TensorError> {
    if t.shape().len() != 2 {
        return shape_err(format!("{what} must be 2-D, got {:?}", t.shape()));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// `out += a * b` for row-major `a [m, k]`, `b [k, n]`.
pub(crate) fn gemm_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out += a^T * g` for `a [m, k]`, `g [m, n]`, `out [k, n]`.
pub(crate) fn gemm_tn_acc<T: Scalar>(
    a: &[T],
    g: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o = *o + av * gv;
            }
        }
    }
}

/// `out += g * b^T` for `g [m, n]`, `b [k, n]`, `out [m, k]`.
pub(crate) fn gemm_nt_acc<T: Scalar>(
    g: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let dot = grow
                .iter()
                .zip(brow)
                .fold(T::zero(), |s, (&x, &y)| s + x * y);
            out[i * k + p] = out[i * k + p] + dot;
        }
    }
}

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (m, k) = check_2d(a, "matmul lhs")?;
    let (k2, n) = check_2d(b, "matmul rhs")?;
    if k != k2 {
        return shape_err(format!("matmul inner dims {k} vs {k2}"));
    }
    let mut out = vec![T::zero(); m * n];
    gemm_acc(a.data(), b.data(), &mut out, m, k, n);
    Tensor::new(&[m, n], out)
}

pub fn add_row_bias<T: Scalar>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (_, c) = check_2d(x, "bias input")?;
    if bias.len() != c {
        return shape_err(format!("bias of {} for {c} columns", bias.len()));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
    Ok(out)
}

/// `input [rows, in] * weight [in, out] + bias [out]`.
pub fn linear<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    add_row_bias(&matmul(input, weight)?, bias)
}

pub fn transpose<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (r, c) = check_2d(x, "transpose input")?;
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = x.data()[i * c + j];
        }
    }
    Tensor::new(&[c, r], out)
}

/// Transposes every `[block_rows, cols]` block of a `[blocks * block_rows, cols]`
/// tensor, giving `[blocks * cols, block_rows]`.
pub fn block_transpose<T: Scalar>(
    x: &Tensor<T>,
    block_rows: usize,
) -> Result<Tensor<T>, TensorError> {
    let (r, c) = check_2d(x, "block transpose input")?;
    if block_rows == 0 || r % block_rows != 0 {
        return shape_err(format!(
            "{r} rows not divisible into blocks of {block_rows}"
        ));
    }
    let blocks = r / block_rows;
    let mut out = vec![T::zero(); r * c];
    for b in 0..blocks {
        let src = &x.data()[b * block_rows * c..(b + 1) * block_rows * c];
        let dst = &mut out[b * block_rows * c..(b + 1) * block_rows * c];
        for i in 0..block_rows {
            for j in 0..c {
                dst[j * block_rows + i] = src[i * c + j];
            }
        }
    }
    Tensor::new(&[blocks * c, block_rows], out)
}

/// Tanh-approximated Gaussian error linear unit.
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    let half: T = lit(0.5);
    let inner = lit::<T>(SQRT_2_OVER_PI) * (x + lit::<T>(GELU_C) * x * x * x);
    half * x * (T::one() + inner.tanh())
}

pub fn gelu_derivative<T: Scalar>(x: T) -> T {
    let half: T = lit(0.5);
    let k: T = lit(SQRT_2_OVER_PI);
    let c: T = lit(GELU_C);
    let inner = k * (x + c * x * x * x);
    let t = inner.tanh();
    let dinner = k * (T::one() + lit::<T>(3.0) * c * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * dinner
}

pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let c = x.cols();
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }

    /// Folds one batch's mean and biased variance into the running values;
    /// the variance is stored unbiased.
    pub fn update(&mut self, batch_mean: &[T], batch_var: &[T], count: usize) {
        let keep: T = lit(BN_MOMENTUM);
        let take = T::one() - keep;
        let unbias: T = lit(count as f64 / (count as f64 - 1.0).max(1.0));
        for c in 0..self.mean.len() {
            self.mean[c] = keep * self.mean[c] + take * batch_mean[c];
            self.var[c] = keep * self.var[c] + take * batch_var[c] * unbias;
        }
    }
}

/// Per-channel batch mean and biased variance of `x [cells, channels]`.
pub fn batch_moments<T: Scalar>(x: &Tensor<T>) -> (Vec<T>, Vec<T>) {
    let (r, c) = (x.rows(), x.cols());
    let n: T = lit(r as f64);
    let mut mean = vec![T::zero(); c];
    for row in x.data().chunks(c) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![T::zero(); c];
    for row in x.data().chunks(c) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s = *s + (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s = *s / n);
    (mean, var)
}

/// Batch normalization over the rows of `input [cells, channels]`.
///
/// Train mode normalizes with batch statistics and folds them into `running`;
/// eval mode uses `running` as is.
pub fn batchnorm<T: Scalar>(
    input: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running: &mut RunningStats<T>,
    mode: Mode,
) -> Result<Tensor<T>, TensorError> {
    let (r, c) = check_2d(input, "batchnorm input")?;
    if gamma.len() != c || beta.len() != c || running.mean.len() != c {
        return shape_err(format!("batchnorm parameters do not match {c} channels"));
    }
    let (mean, var) = match mode {
        Mode::Train => {
            if r < 2 {
                return Err(TensorError::DegenerateBatch(format!(
                    "batchnorm needs at least 2 cells in train mode, got {r}"
                )));
            }
            let (mean, var) = batch_moments(input);
            running.update(&mean, &var, r);
            (mean, var)
        }
        Mode::Eval => (running.mean.clone(), running.var.clone()),
    };
    let eps: T = lit(BN_EPS);
    let mut out = input.clone();
    for row in out.data_mut().chunks_mut(c) {
        for ch in 0..c {
            let xhat = (row[ch] - mean[ch]) / (var[ch] + eps).sqrt();
            row[ch] = gamma[ch] * xhat + beta[ch];
        }
    }
    Ok(out)
}

/// Mean over unmasked cells of `weights[label] * -log softmax(logits)[label]`.
pub fn weighted_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    weights: &[T],
    mask: &[bool],
) -> Result<T, TensorError> {
    let (r, c) = check_2d(logits, "logits")?;
    if labels.len() != r || mask.len() != r || weights.len() != c {
        return shape_err("cross-entropy labels, mask and weights must match logits");
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= c) {
        return shape_err(format!("label {bad} out of range for {c} classes"));
    }
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(TensorError::DegenerateBatch("every cell is masked".into()));
    }
    let probs = softmax_rows(logits);
    let mut total = T::zero();
    for i in (0..r).filter(|&i| mask[i]) {
        let p = probs.at(i, labels[i]).max(T::min_positive_value());
        total = total - weights[labels[i]] * p.ln();
    }
    Ok(total / lit(valid as f64))
}

/// Pairwise cosine similarity of the rows of `a [ra, d]` and `b [rb, d]`;
/// 0 when either norm is below `1e-12`.
pub fn cosine_matrix<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (ra, d) = check_2d(a, "cosine lhs")?;
    let (rb, d2) = check_2d(b, "cosine rhs")?;
    if d != d2 {
        return shape_err(format!("cosine widths {d} vs {d2}"));
    }
    let norms = |t: &Tensor<T>| -> Vec<T> {
        (0..t.rows())
            .map(|i| t.row(i).iter().fold(T::zero(), |s, &v| s + v * v).sqrt())
            .collect()
    };
    let (na, nb) = (norms(a), norms(b));
    let tiny: T = lit(1e-12);
    let mut out = vec![T::zero(); ra * rb];
    for i in 0..ra {
        for j in 0..rb {
            if na[i] < tiny || nb[j] < tiny {
                continue;
            }
            let dot = a
                .row(i)
                .iter()
                .zip(b.row(j))
                .fold(T::zero(), |s, (&x, &y)| s + x * y);
            out[i * rb + j] = dot / (na[i] * nb[j]);
        }
    }
    Tensor::new(&[ra, rb], out)
}
