use super::ops::{self, gemm_nt_acc, gemm_tn_acc, Mode, RunningStats, BN_EPS};
use super::{lit, shape_err, ParamId, ParamStore, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Batch statistics observed by a train-mode batchnorm, to be folded into
/// the running statistics by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub count: usize,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Gather {
        table: ParamId,
        ids: Vec<usize>,
    },
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Gelu(Var),
    Transpose(Var),
    BlockTranspose(Var),
    ReplicatePad(Var),
    SliceRows(Var, usize),
    SelectRows(Var, Vec<usize>),
    Cosine(Var, Var),
    StackChannels(Vec<Var>),
    ConcatRows(Vec<Var>),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        train: bool,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        weights: Vec<T>,
        mask: Vec<bool>,
        probs: Tensor<T>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records forward computations so that [`Tape::backward`] can accumulate
/// parameter gradients. One tape per thread; inference can simply drop it.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// Rows `ids` of the 2-D parameter `table`.
    pub fn gather(
        &mut self,
        store: &ParamStore<T>,
        table: ParamId,
        ids: &[usize],
    ) -> Result<Var, TensorError> {
        let t = store.value(table);
        if let Some(bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return shape_err(format!("row {bad} outside table of {} rows", t.rows()));
        }
        let d = t.cols();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(&[ids.len(), d], data)?;
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let value = ops::add_row_bias(self.value(x), self.value(bias))?;
        Ok(self.push(value, Op::AddRowBias(x, bias)))
    }

    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var, TensorError> {
        let h = self.matmul(x, weight)?;
        self.add_row_bias(h, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return shape_err(format!("add {:?} + {:?}", va.shape(), vb.shape()));
        }
        let mut value = va.clone();
        value.add_assign(vb);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let value = ops::gelu(self.value(x));
        self.push(value, Op::Gelu(x))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        let value = ops::transpose(self.value(x))?;
        Ok(self.push(value, Op::Transpose(x)))
    }

    pub fn block_transpose(&mut self, x: Var, block_rows: usize) -> Result<Var, TensorError> {
        let value = ops::block_transpose(self.value(x), block_rows)?;
        Ok(self.push(value, Op::BlockTranspose(x)))
    }

    /// Extends `x` to `rows` rows by repeating its last row.
    pub fn replicate_pad(&mut self, x: Var, rows: usize) -> Result<Var, TensorError> {
        let v = self.value(x);
        let (r, c) = (v.rows(), v.cols());
        if r == 0 || rows < r {
            return shape_err(format!("cannot pad {r} rows to {rows}"));
        }
        let mut data = v.data().to_vec();
        let last = v.row(r - 1).to_vec();
        for _ in r..rows {
            data.extend_from_slice(&last);
        }
        let value = Tensor::new(&[rows, c], data)?;
        Ok(self.push(value, Op::ReplicatePad(x)))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let v = self.value(x);
        if start > end || end > v.rows() {
            return shape_err(format!("rows {start}..{end} of {}", v.rows()));
        }
        let c = v.cols();
        let value = Tensor::new(&[end - start, c], v.data()[start * c..end * c].to_vec())?;
        Ok(self.push(value, Op::SliceRows(x, start)))
    }

    pub fn select_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let v = self.value(x);
        if let Some(bad) = idx.iter().find(|&&i| i >= v.rows()) {
            return shape_err(format!("row {bad} of {}", v.rows()));
        }
        let mut data = Vec::with_capacity(idx.len() * v.cols());
        for &i in idx {
            data.extend_from_slice(v.row(i));
        }
        let value = Tensor::new(&[idx.len(), v.cols()], data)?;
        Ok(self.push(value, Op::SelectRows(x, idx.to_vec())))
    }

    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = ops::cosine_matrix(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Cosine(a, b)))
    }

    /// Flattens each equally shaped input and uses it as one output channel:
    /// `k` inputs of `[r, c]` give `[r * c, k]`.
    pub fn stack_channels(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let k = xs.len();
        let len = self.value(xs[0]).len();
        if xs.iter().any(|&x| self.value(x).len() != len) {
            return shape_err("stacked channels differ in size");
        }
        let mut data = vec![T::zero(); len * k];
        for (ch, &x) in xs.iter().enumerate() {
            for (i, &v) in self.value(x).data().iter().enumerate() {
                data[i * k + ch] = v;
            }
        }
        let value = Tensor::new(&[len, k], data)?;
        Ok(self.push(value, Op::StackChannels(xs.to_vec())))
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let c = self.value(xs[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &x in xs {
            let v = self.value(x);
            if v.cols() != c {
                return shape_err("concatenated rows differ in width");
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let value = Tensor::new(&[rows, c], data)?;
        Ok(self.push(value, Op::ConcatRows(xs.to_vec())))
    }

    /// Batch normalization of `x [cells, channels]`. In train mode the batch
    /// statistics are returned so the caller can update its running copy.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: &RunningStats<T>,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats<T>>), TensorError> {
        let v = self.value(x);
        let (r, c) = (v.rows(), v.cols());
        if self.value(gamma).len() != c || self.value(beta).len() != c || running.mean.len() != c {
            return shape_err(format!("batchnorm parameters do not match {c} channels"));
        }
        let (mean, var, stats) = match mode {
            Mode::Train => {
                if r < 2 {
                    return Err(TensorError::DegenerateBatch(format!(
                        "batchnorm needs at least 2 cells in train mode, got {r}"
                    )));
                }
                let (mean, var) = ops::batch_moments(v);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                    count: r,
                };
                (mean, var, Some(stats))
            }
            Mode::Eval => (running.mean.clone(), running.var.clone(), None),
        };
        let eps: T = lit(BN_EPS);
        let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s + eps).sqrt()).collect();
        let mut xhat = v.data().to_vec();
        for row in xhat.chunks_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - mean[ch]) * inv_std[ch];
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = xhat.clone();
        for row in out.chunks_mut(c) {
            for ch in 0..c {
                row[ch] = g[ch] * row[ch] + b[ch];
            }
        }
        let value = Tensor::new(&[r, c], out)?;
        let var = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train: mode == Mode::Train,
            },
        );
        Ok((var, stats))
    }

    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: &[T],
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        let lv = self.value(logits);
        let loss = ops::weighted_cross_entropy(lv, labels, weights, mask)?;
        let probs = ops::softmax_rows(lv);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
                mask: mask.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Reverse-mode sweep from the scalar `loss`, adding parameter gradients
    /// into `store`. The tape is cleared afterwards.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        if loss.0 >= self.nodes.len() {
            return Err(TensorError::NoTrace);
        }
        if self.nodes[loss.0].value.len() != 1 {
            return shape_err("backward needs a scalar loss");
        }
        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(nodes[loss.0].value.shape(), T::one()));

        fn acc<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }
        fn zeros_like<T: Scalar>(nodes: &[Node<T>], v: Var) -> Tensor<T> {
            Tensor::zeros(nodes[v.0].value.shape())
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => store.get_mut(*id).grad.add_assign(&g),
                Op::Gather { table, ids } => {
                    let grad = &mut store.get_mut(*table).grad;
                    let d = grad.cols();
                    let gd = grad.data_mut();
                    for (k, &row) in ids.iter().enumerate() {
                        for j in 0..d {
                            gd[row * d + j] = gd[row * d + j] + g.data()[k * d + j];
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    let mut ga = zeros_like(&nodes, *a);
                    gemm_nt_acc(g.data(), vb.data(), ga.data_mut(), m, k, n);
                    let mut gb = zeros_like(&nodes, *b);
                    gemm_tn_acc(va.data(), g.data(), gb.data_mut(), m, k, n);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRowBias(x, b) => {
                    let c = g.cols();
                    let mut gb = zeros_like(&nodes, *b);
                    for row in g.data().chunks(c) {
                        for (s, &v) in gb.data_mut().iter_mut().zip(row) {
                            *s = *s + v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Gelu(x) => {
                    let vx = &nodes[x.0].value;
                    let mut gx = g;
                    for (gv, &xv) in gx.data_mut().iter_mut().zip(vx.data()) {
                        *gv = *gv * ops::gelu_derivative(xv);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Transpose(x) => acc(&mut grads, *x, ops::transpose(&g)?),
                Op::BlockTranspose(x) => {
                    // the inverse regroups by the input's column count
                    let cols = nodes[x.0].value.cols();
                    acc(&mut grads, *x, ops::block_transpose(&g, cols)?);
                }
                Op::ReplicatePad(x) => {
                    let vx = &nodes[x.0].value;
                    let (r, c) = (vx.rows(), vx.cols());
                    let mut gx = Tensor::new(&[r, c], g.data()[..r * c].to_vec())?;
                    let last = &mut gx.data_mut()[(r - 1) * c..];
                    for extra in g.data()[r * c..].chunks(c) {
                        for (s, &v) in last.iter_mut().zip(extra) {
                            *s = *s + v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SliceRows(x, start) => {
                    let mut gx = zeros_like(&nodes, *x);
                    let c = gx.cols();
                    gx.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *x, gx);
                }
                Op::SelectRows(x, idx) => {
                    let mut gx = zeros_like(&nodes, *x);
                    let c = gx.cols();
                    let gd = gx.data_mut();
                    for (k, &row) in idx.iter().enumerate() {
                        for j in 0..c {
                            gd[row * c + j] = gd[row * c + j] + g.data()[k * c + j];
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Cosine(a, b) => {
                    let (ga, gb) =
                        cosine_backward(&nodes[a.0].value, &nodes[b.0].value, &node.value, &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::StackChannels(xs) => {
                    let k = xs.len();
                    for (ch, &x) in xs.iter().enumerate() {
                        let mut gx = zeros_like(&nodes, x);
                        for (i, s) in gx.data_mut().iter_mut().enumerate() {
                            *s = g.data()[i * k + ch];
                        }
                        acc(&mut grads, x, gx);
                    }
                }
                Op::ConcatRows(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = nodes[x.0].value.len();
                        let gx = Tensor::new(
                            nodes[x.0].value.shape(),
                            g.data()[offset..offset + len].to_vec(),
                        )?;
                        offset += len;
                        acc(&mut grads, x, gx);
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    train,
                } => {
                    let (r, c) = (g.rows(), g.cols());
                    let gam = nodes[gamma.0].value.data();
                    let mut ggamma = vec![T::zero(); c];
                    let mut gbeta = vec![T::zero(); c];
                    for i in 0..r {
                        for ch in 0..c {
                            let dy = g.data()[i * c + ch];
                            ggamma[ch] = ggamma[ch] + dy * xhat[i * c + ch];
                            gbeta[ch] = gbeta[ch] + dy;
                        }
                    }
                    let mut gx = vec![T::zero(); r * c];
                    let n: T = lit(r as f64);
                    for ch in 0..c {
                        if *train {
                            // dx = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
                            let sum_dxhat = gbeta[ch] * gam[ch];
                            let sum_dxhat_xhat = ggamma[ch] * gam[ch];
                            for i in 0..r {
                                let dxhat = g.data()[i * c + ch] * gam[ch];
                                gx[i * c + ch] = inv_std[ch] / n
                                    * (n * dxhat - sum_dxhat - xhat[i * c + ch] * sum_dxhat_xhat);
                            }
                        } else {
                            for i in 0..r {
                                gx[i * c + ch] = g.data()[i * c + ch] * gam[ch] * inv_std[ch];
                            }
                        }
                    }
                    acc(&mut grads, *x, Tensor::new(&[r, c], gx)?);
                    acc(
                        &mut grads,
                        *gamma,
                        Tensor::new(&[c], ggamma)?.reshape(nodes[gamma.0].value.shape())?,
                    );
                    acc(
                        &mut grads,
                        *beta,
                        Tensor::new(&[c], gbeta)?.reshape(nodes[beta.0].value.shape())?,
                    );
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    weights,
                    mask,
                    probs,
                } => {
                    let upstream = g.item();
                    let valid = mask.iter().filter(|&&m| m).count();
                    let scale = upstream / lit(valid as f64);
                    let c = probs.cols();
                    let mut gl = vec![T::zero(); probs.len()];
                    for (i, &label) in labels.iter().enumerate() {
                        if !mask[i] {
                            continue;
                        }
                        let w = weights[label] * scale;
                        for j in 0..c {
                            let onehot = if j == label { T::one() } else { T::zero() };
                            gl[i * c + j] = w * (probs.at(i, j) - onehot);
                        }
                    }
                    acc(&mut grads, *logits, Tensor::new(probs.shape(), gl)?);
                }
                Op::Sum(x) => {
                    let gx = Tensor::full(nodes[x.0].value.shape(), g.item());
                    acc(&mut grads, *x, gx);
                }
            }
        }
        Ok(())
    }
}

fn cosine_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    cos: &Tensor<T>,
    g: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let (ra, rb, d) = (a.rows(), b.rows(), a.cols());
    let norm = |row: &[T]| row.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
    let na: Vec<T> = (0..ra).map(|i| norm(a.row(i))).collect();
    let nb: Vec<T> = (0..rb).map(|j| norm(b.row(j))).collect();
    let tiny: T = lit(1e-12);
    let mut ga = vec![T::zero(); ra * d];
    let mut gb = vec![T::zero(); rb * d];
    for i in 0..ra {
        for j in 0..rb {
            if na[i] < tiny || nb[j] < tiny {
                continue;
            }
            let gij = g.at(i, j);
            if gij == T::zero() {
                continue;
            }
            let c = cos.at(i, j);
            let inv = T::one() / (na[i] * nb[j]);
            let (ar, br) = (a.row(i), b.row(j));
            for k in 0..d {
                ga[i * d + k] = ga[i * d + k] + gij * (br[k] * inv - c * ar[k] / (na[i] * na[i]));
                gb[j * d + k] = gb[j * d + k] + gij * (ar[k] * inv - c * br[k] / (nb[j] * nb[j]));
            }
        }
    }
    (
        Tensor::new(&[ra, d], ga).expect("cosine grad shape"),
        Tensor::new(&[rb, d], gb).expect("cosine grad shape"),
    )
}
