//! Reverse-mode automatic differentiation over a flat tape of matrix ops.
//!
//! Every forward pass appends nodes to a [`Tape`]; [`Tape::backward`] then
//! walks the tape once in reverse, accumulating vector-Jacobian products.
//! Node inputs always precede the node itself, so a single reverse sweep
//! visits each node after all of its consumers.
//!
//! The op set is exactly what the transformer forward pass and the losses
//! need — nothing speculative. Shape violations panic: they are programming
//! errors, not runtime conditions, and the public model APIs validate user
//! input before anything reaches the tape.

use super::Matrix;

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC_COEF: f64 = 0.044_715;

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TapeId(usize);

enum Op {
    Leaf,
    Add(TapeId, TapeId),
    Sub(TapeId, TapeId),
    /// Elementwise product.
    Mul(TapeId, TapeId),
    AddScalar(TapeId, f64),
    Scale(TapeId, f64),
    /// Product of a `1 x 1` node broadcast over a matrix node.
    ScaleBroadcast(TapeId, TapeId),
    MatMul(TapeId, TapeId),
    /// `A * B^T` without materializing the transpose.
    MatMulNT(TapeId, TapeId),
    /// Add a `1 x d` row to every row of an `n x d` matrix.
    AddRow(TapeId, TapeId),
    /// Multiply every row of an `n x d` matrix elementwise by a `1 x d` row.
    MulRow(TapeId, TapeId),
    SoftmaxRows(TapeId),
    LayerNormRows(TapeId),
    Gelu(TapeId),
    Relu(TapeId),
    Exp(TapeId),
    Ln(TapeId),
    Sigmoid(TapeId),
    Softplus(TapeId),
    Clamp(TapeId, f64, f64),
    SliceCols(TapeId, usize),
    ConcatCols(Vec<TapeId>),
    Reshape(TapeId),
    MeanAll(TapeId),
    SumAll(TapeId),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Gradients of a scalar root with respect to every tape node.
pub struct Gradients {
    grads: Vec<Matrix>,
}

impl Gradients {
    /// Gradient with respect to the node `id`, same shape as its value.
    pub fn get(&self, id: TapeId) -> &Matrix {
        &self.grads[id.0]
    }
}

/// A growing record of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, id: TapeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> TapeId {
        self.nodes.push(Node { value, op });
        TapeId(self.nodes.len() - 1)
    }

    /// Register a differentiable input (parameter).
    pub fn leaf(&mut self, value: Matrix) -> TapeId {
        self.push(value, Op::Leaf)
    }

    /// Register a non-trainable input (data, noise, masks). Gradients are
    /// still computed but callers simply never read them.
    pub fn constant(&mut self, value: Matrix) -> TapeId {
        self.leaf(value)
    }

    pub fn add(&mut self, a: TapeId, b: TapeId) -> TapeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TapeId, b: TapeId) -> TapeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TapeId, b: TapeId) -> TapeId {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_scalar(&mut self, a: TapeId, c: f64) -> TapeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a, c))
    }

    pub fn scale(&mut self, a: TapeId, c: f64) -> TapeId {
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    /// `s * b` where `s` is a `1 x 1` node.
    pub fn scale_broadcast(&mut self, s: TapeId, b: TapeId) -> TapeId {
        let sv = self.value(s).item();
        let v = self.value(b).map(|x| sv * x);
        self.push(v, Op::ScaleBroadcast(s, b))
    }

    pub fn matmul(&mut self, a: TapeId, b: TapeId) -> TapeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: TapeId, b: TapeId) -> TapeId {
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn add_row(&mut self, x: TapeId, row: TapeId) -> TapeId {
        let (xv, rv) = (self.value(x), self.value(row));
        assert_eq!(rv.rows(), 1, "add_row expects a 1 x d row");
        assert_eq!(xv.cols(), rv.cols(), "add_row width mismatch");
        let mut v = xv.clone();
        for i in 0..v.rows() {
            for (o, &r) in v.row_mut(i).iter_mut().zip(rv.row(0)) {
                *o += r;
            }
        }
        self.push(v, Op::AddRow(x, row))
    }

    pub fn mul_row(&mut self, x: TapeId, row: TapeId) -> TapeId {
        let (xv, rv) = (self.value(x), self.value(row));
        assert_eq!(rv.rows(), 1, "mul_row expects a 1 x d row");
        assert_eq!(xv.cols(), rv.cols(), "mul_row width mismatch");
        let mut v = xv.clone();
        for i in 0..v.rows() {
            for (o, &r) in v.row_mut(i).iter_mut().zip(rv.row(0)) {
                *o *= r;
            }
        }
        self.push(v, Op::MulRow(x, row))
    }

    pub fn softmax_rows(&mut self, x: TapeId) -> TapeId {
        let xv = self.value(x);
        let mut v = xv.clone();
        for i in 0..v.rows() {
            softmax_row_in_place(v.row_mut(i));
        }
        self.push(v, Op::SoftmaxRows(x))
    }

    /// Normalize each row to zero mean and unit variance (no affine part;
    /// compose with [`Tape::mul_row`]/[`Tape::add_row`] for gain and bias).
    pub fn layer_norm_rows(&mut self, x: TapeId) -> TapeId {
        let xv = self.value(x);
        let mut v = xv.clone();
        for i in 0..v.rows() {
            let row = v.row_mut(i);
            let (mean, std) = row_mean_std(row);
            for r in row.iter_mut() {
                *r = (*r - mean) / std;
            }
        }
        self.push(v, Op::LayerNormRows(x))
    }

    pub fn gelu(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(gelu_value);
        self.push(v, Op::Gelu(x))
    }

    pub fn relu(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(|t| t.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn exp(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(f64::exp);
        self.push(v, Op::Exp(x))
    }

    pub fn ln(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(f64::ln);
        self.push(v, Op::Ln(x))
    }

    pub fn sigmoid(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(sigmoid_value);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn softplus(&mut self, x: TapeId) -> TapeId {
        let v = self.value(x).map(|t| t.max(0.0) + (-t.abs()).exp().ln_1p());
        self.push(v, Op::Softplus(x))
    }

    pub fn clamp(&mut self, x: TapeId, lo: f64, hi: f64) -> TapeId {
        let v = self.value(x).map(|t| t.clamp(lo, hi));
        self.push(v, Op::Clamp(x, lo, hi))
    }

    pub fn slice_cols(&mut self, x: TapeId, start: usize, len: usize) -> TapeId {
        let v = self.value(x).slice_cols(start, len);
        self.push(v, Op::SliceCols(x, start))
    }

    pub fn concat_cols(&mut self, parts: &[TapeId]) -> TapeId {
        assert!(!parts.is_empty(), "concat_cols with no parts");
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows(), rows, "concat_cols row mismatch");
            for i in 0..rows {
                v.row_mut(i)[at..at + pv.cols()].copy_from_slice(pv.row(i));
            }
            at += pv.cols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn reshape(&mut self, x: TapeId, rows: usize, cols: usize) -> TapeId {
        let xv = self.value(x);
        assert_eq!(xv.len(), rows * cols, "reshape element count mismatch");
        let v = Matrix::from_vec(rows, cols, xv.as_slice().to_vec());
        self.push(v, Op::Reshape(x))
    }

    pub fn mean_all(&mut self, x: TapeId) -> TapeId {
        let xv = self.value(x);
        let v = Matrix::scalar(xv.as_slice().iter().sum::<f64>() / xv.len() as f64);
        self.push(v, Op::MeanAll(x))
    }

    pub fn sum_all(&mut self, x: TapeId) -> TapeId {
        let v = Matrix::scalar(self.value(x).as_slice().iter().sum::<f64>());
        self.push(v, Op::SumAll(x))
    }

    /// Accumulate gradients of the `1 x 1` node `root` with respect to every
    /// node on the tape.
    pub fn backward(&self, root: TapeId) -> Gradients {
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[root.0].set(0, 0, 1.0);

        for i in (0..=root.0).rev() {
            // Inputs always precede node `i`, so the split borrows are disjoint.
            let (lower, upper) = grads.split_at_mut(i);
            let g = &upper[0];
            if g.as_slice().iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    lower[a.0].add_assign(g);
                    lower[b.0].add_assign(g);
                }
                Op::Sub(a, b) => {
                    lower[a.0].add_assign(g);
                    accumulate(&mut lower[b.0], g, |gv, _| -gv);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate_zip(&mut lower[a.0], g, bv, |gv, o| gv * o);
                    accumulate_zip(&mut lower[b.0], g, av, |gv, o| gv * o);
                }
                Op::AddScalar(a, _) => lower[a.0].add_assign(g),
                Op::Scale(a, c) => accumulate(&mut lower[a.0], g, |gv, _| c * gv),
                Op::ScaleBroadcast(s, b) => {
                    let bv = &self.nodes[b.0].value;
                    let ds: f64 = g
                        .as_slice()
                        .iter()
                        .zip(bv.as_slice())
                        .map(|(&gv, &x)| gv * x)
                        .sum();
                    let cur = lower[s.0].get(0, 0);
                    lower[s.0].set(0, 0, cur + ds);
                    let sv = self.nodes[s.0].value.item();
                    accumulate(&mut lower[b.0], g, |gv, _| sv * gv);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    lower[a.0].add_assign(&g.matmul_nt(bv));
                    lower[b.0].add_assign(&av.matmul_tn(g));
                }
                Op::MatMulNT(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    lower[a.0].add_assign(&g.matmul(bv));
                    lower[b.0].add_assign(&g.matmul_tn(av));
                }
                Op::AddRow(x, row) => {
                    lower[x.0].add_assign(g);
                    let dr = lower[row.0].row_mut(0);
                    for i in 0..g.rows() {
                        for (d, &gv) in dr.iter_mut().zip(g.row(i)) {
                            *d += gv;
                        }
                    }
                }
                Op::MulRow(x, row) => {
                    let (xv, rv) = (&self.nodes[x.0].value, &self.nodes[row.0].value);
                    {
                        let dx = &mut lower[x.0];
                        for i in 0..g.rows() {
                            for ((d, &gv), &r) in
                                dx.row_mut(i).iter_mut().zip(g.row(i)).zip(rv.row(0))
                            {
                                *d += gv * r;
                            }
                        }
                    }
                    let dr = lower[row.0].row_mut(0);
                    for i in 0..g.rows() {
                        for ((d, &gv), &x) in dr.iter_mut().zip(g.row(i)).zip(xv.row(i)) {
                            *d += gv * x;
                        }
                    }
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let dx = &mut lower[x.0];
                    for i in 0..y.rows() {
                        let dot: f64 = g
                            .row(i)
                            .iter()
                            .zip(y.row(i))
                            .map(|(&gv, &yv)| gv * yv)
                            .sum();
                        for ((d, &gv), &yv) in
                            dx.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i))
                        {
                            *d += yv * (gv - dot);
                        }
                    }
                }
                Op::LayerNormRows(x) => {
                    let xv = &self.nodes[x.0].value;
                    let y = &node.value;
                    let dx = &mut lower[x.0];
                    let d = xv.cols() as f64;
                    for i in 0..xv.rows() {
                        let (_, std) = row_mean_std(xv.row(i));
                        let g_mean: f64 = g.row(i).iter().sum::<f64>() / d;
                        let gy_mean: f64 = g
                            .row(i)
                            .iter()
                            .zip(y.row(i))
                            .map(|(&gv, &yv)| gv * yv)
                            .sum::<f64>()
                            / d;
                        for ((o, &gv), &yv) in
                            dx.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i))
                        {
                            *o += (gv - g_mean - yv * gy_mean) / std;
                        }
                    }
                }
                Op::Gelu(x) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate_zip(&mut lower[x.0], g, xv, |gv, t| gv * gelu_derivative(t));
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate_zip(&mut lower[x.0], g, xv, |gv, t| {
                        if t > 0.0 {
                            gv
                        } else {
                            0.0
                        }
                    });
                }
                Op::Exp(x) => {
                    accumulate_zip(&mut lower[x.0], g, &node.value, |gv, yv| gv * yv);
                }
                Op::Ln(x) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate_zip(&mut lower[x.0], g, xv, |gv, t| gv / t);
                }
                Op::Sigmoid(x) => {
                    accumulate_zip(&mut lower[x.0], g, &node.value, |gv, yv| {
                        gv * yv * (1.0 - yv)
                    });
                }
                Op::Softplus(x) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate_zip(&mut lower[x.0], g, xv, |gv, t| gv * sigmoid_value(t));
                }
                Op::Clamp(x, lo, hi) => {
                    let xv = &self.nodes[x.0].value;
                    accumulate_zip(&mut lower[x.0], g, xv, |gv, t| {
                        if t >= *lo && t <= *hi {
                            gv
                        } else {
                            0.0
                        }
                    });
                }
                Op::SliceCols(x, start) => {
                    let dx = &mut lower[x.0];
                    for i in 0..g.rows() {
                        for (d, &gv) in dx.row_mut(i)[*start..*start + g.cols()]
                            .iter_mut()
                            .zip(g.row(i))
                        {
                            *d += gv;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let dp = &mut lower[p.0];
                        let w = dp.cols();
                        for i in 0..g.rows() {
                            for (d, &gv) in
                                dp.row_mut(i).iter_mut().zip(&g.row(i)[at..at + w])
                            {
                                *d += gv;
                            }
                        }
                        at += w;
                    }
                }
                Op::Reshape(x) => {
                    let dx = &mut lower[x.0];
                    for (d, &gv) in dx.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *d += gv;
                    }
                }
                Op::MeanAll(x) => {
                    let dx = &mut lower[x.0];
                    let gv = g.item() / dx.len() as f64;
                    for d in dx.as_mut_slice() {
                        *d += gv;
                    }
                }
                Op::SumAll(x) => {
                    let dx = &mut lower[x.0];
                    let gv = g.item();
                    for d in dx.as_mut_slice() {
                        *d += gv;
                    }
                }
            }
        }
        Gradients { grads }
    }
}

/// `out[i] += f(g[i], other[i])` where `other` is a same-shape value matrix.
fn accumulate_zip(out: &mut Matrix, g: &Matrix, other: &Matrix, f: impl Fn(f64, f64) -> f64) {
    for ((o, &gv), &ov) in out
        .as_mut_slice()
        .iter_mut()
        .zip(g.as_slice())
        .zip(other.as_slice())
    {
        *o += f(gv, ov);
    }
}

/// `out[i] += f(g[i], i-th existing value)` (second argument unused by most callers).
fn accumulate(out: &mut Matrix, g: &Matrix, f: impl Fn(f64, f64) -> f64) {
    for (o, &gv) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *o += f(gv, *o);
    }
}

fn softmax_row_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for r in row.iter_mut() {
        *r = (*r - max).exp();
        sum += *r;
    }
    for r in row.iter_mut() {
        *r /= sum;
    }
}

fn row_mean_std(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, (var + LAYER_NORM_EPS).sqrt())
}

fn sigmoid_value(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu_value(x: f64) -> f64 {
    let u = GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC_COEF * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let u = GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC_COEF * x * x * x);
    let t = u.tanh();
    let du = GELU_SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC_COEF * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
