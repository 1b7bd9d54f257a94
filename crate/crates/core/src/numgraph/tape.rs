use crate::error::{Error, Result};

use super::Matrix;

/// Handle to a node on a [`Tape`].
///
/// Handles are only meaningful for the tape that issued them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

impl Tensor {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    AddRow(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    Scale(Tensor, f64),
    AddScalar(Tensor),
    ScaleBy(Tensor, Tensor),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Exp(Tensor),
    Log(Tensor),
    Sqrt(Tensor),
    Square(Tensor),
    Relu(Tensor),
    Mean(Tensor),
    Sum(Tensor),
    MeanRows(Tensor),
    Transpose(Tensor),
    ConcatRows(Vec<Tensor>),
    SliceRows(Tensor, usize),
    SliceCols(Tensor, usize),
    SoftmaxRows(Tensor),
    Clamp(Tensor, f64, f64),
    GradReverse(Tensor, f64),
    Pick(Tensor, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of executed operations.
///
/// Nodes are appended in execution order, so parents always precede their
/// children and a reverse sweep is a valid topological order. A tape built
/// with [`Tape::no_grad`] computes the same values but records no parents.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    recording: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            recording: true,
        }
    }

    /// Tape that evaluates values only.
    pub fn no_grad() -> Self {
        Tape {
            recording: false,
            ..Self::new()
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input.
    pub fn param(&mut self, value: Matrix) -> Tensor {
        let rg = self.recording;
        self.push_leaf(value, rg)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.push_leaf(value, false)
    }

    pub fn scalar(&mut self, value: f64) -> Tensor {
        self.constant(Matrix::scalar(value))
    }

    fn push_leaf(&mut self, value: Matrix, requires_grad: bool) -> Tensor {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        self.nodes[t.0].value.shape()
    }

    pub fn item(&self, t: Tensor) -> Result<f64> {
        self.value(t).item()
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    /// Gradient accumulated by the last [`Tape::backward`], if `t` was reached.
    pub fn grad(&self, t: Tensor) -> Option<&Matrix> {
        self.grads.get(t.0).and_then(Option::as_ref)
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, parents: &[Tensor]) -> Result<Tensor> {
        #[cfg(debug_assertions)]
        if !value.is_finite() {
            return Err(Error::Numeric { op: name });
        }
        #[cfg(not(debug_assertions))]
        let _ = name;
        let requires_grad = self.recording && parents.iter().any(|p| self.nodes[p.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Tensor(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Tensor, b: Tensor) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim(
                op,
                format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::dim(
                "matmul",
                format!("{}x{} · {}x{}", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        let v = self.value(a).matmul(self.value(b));
        self.push("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    /// Adds a 1 x cols row to every row of `a`.
    pub fn add_row(&mut self, a: Tensor, row: Tensor) -> Result<Tensor> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(Error::dim(
                "add_row",
                format!("{}x{} + row {}x{}", sa.0, sa.1, sr.0, sr.1),
            ));
        }
        let mut v = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for chunk in v.data_mut().chunks_mut(sa.1) {
            for (x, b) in chunk.iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push("add_row", v, Op::AddRow(a, row), &[a, row])
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", v, Op::Mul(a, b), &[a, b])
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("div", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x / y);
        self.push("div", v, Op::Div(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Tensor, s: f64) -> Result<Tensor> {
        let v = self.value(a).map(|x| x * s);
        self.push("scale", v, Op::Scale(a, s), &[a])
    }

    pub fn add_scalar(&mut self, a: Tensor, s: f64) -> Result<Tensor> {
        let v = self.value(a).map(|x| x + s);
        self.push("add_scalar", v, Op::AddScalar(a), &[a])
    }

    pub fn neg(&mut self, a: Tensor) -> Result<Tensor> {
        self.scale(a, -1.0)
    }

    /// Multiplies every entry of `a` by the 1x1 tensor `s`.
    pub fn scale_by(&mut self, a: Tensor, s: Tensor) -> Result<Tensor> {
        let k = self.value(s).item().map_err(|_| {
            Error::dim("scale_by", format!("scale factor must be 1x1, got {:?}", self.shape(s)))
        })?;
        let v = self.value(a).map(|x| x * k);
        self.push("scale_by", v, Op::ScaleBy(a, s), &[a, s])
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(f64::tanh);
        self.push("tanh", v, Op::Tanh(a), &[a])
    }

    pub fn exp(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(f64::exp);
        self.push("exp", v, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(f64::ln);
        self.push("log", v, Op::Log(a), &[a])
    }

    pub fn sqrt(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(f64::sqrt);
        self.push("sqrt", v, Op::Sqrt(a), &[a])
    }

    pub fn square(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(|x| x * x);
        self.push("square", v, Op::Square(a), &[a])
    }

    pub fn relu(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push("relu", v, Op::Relu(a), &[a])
    }

    /// Mean of all entries, as 1x1.
    pub fn mean(&mut self, a: Tensor) -> Result<Tensor> {
        let v = Matrix::scalar(self.value(a).mean());
        self.push("mean", v, Op::Mean(a), &[a])
    }

    /// Sum of all entries, as 1x1.
    pub fn sum(&mut self, a: Tensor) -> Result<Tensor> {
        let v = Matrix::scalar(self.value(a).sum());
        self.push("sum", v, Op::Sum(a), &[a])
    }

    /// Column means, as a 1 x cols row.
    pub fn mean_rows(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).col_means();
        self.push("mean_rows", v, Op::MeanRows(a), &[a])
    }

    pub fn transpose(&mut self, a: Tensor) -> Result<Tensor> {
        let v = self.value(a).transpose();
        self.push("transpose", v, Op::Transpose(a), &[a])
    }

    /// Stacks tensors with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::dim("concat_rows", "no inputs"));
        }
        let values: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Matrix::vstack(&values).map_err(|_| Error::dim("concat_rows", "column counts differ"))?;
        self.push("concat_rows", v, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Tensor, start: usize, end: usize) -> Result<Tensor> {
        let (r, _) = self.shape(a);
        if start >= end || end > r {
            return Err(Error::dim("slice_rows", format!("range {start}..{end} of {r} rows")));
        }
        let v = self.value(a).slice_rows(start, end);
        self.push("slice_rows", v, Op::SliceRows(a, start), &[a])
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Tensor, start: usize, end: usize) -> Result<Tensor> {
        let (r, c) = self.shape(a);
        if start >= end || end > c {
            return Err(Error::dim("slice_cols", format!("range {start}..{end} of {c} cols")));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&src.row(i)[start..end]);
        }
        let v = Matrix::from_vec(r, end - start, data)?;
        self.push("slice_cols", v, Op::SliceCols(a, start), &[a])
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Tensor) -> Result<Tensor> {
        let src = self.value(a);
        let (r, c) = src.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = src.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            data.extend(exps.iter().map(|e| e / z));
        }
        let v = Matrix::from_vec(r, c, data)?;
        self.push("softmax_rows", v, Op::SoftmaxRows(a), &[a])
    }

    /// Clamps into `[lo, hi]`; gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: Tensor, lo: f64, hi: f64) -> Result<Tensor> {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push("clamp", v, Op::Clamp(a, lo, hi), &[a])
    }

    /// Identity on the forward pass; multiplies the incoming gradient by `-coef`.
    pub fn grad_reverse(&mut self, a: Tensor, coef: f64) -> Result<Tensor> {
        let v = self.value(a).clone();
        self.push("grad_reverse", v, Op::GradReverse(a, coef), &[a])
    }

    /// Single entry as 1x1.
    pub fn pick(&mut self, a: Tensor, r: usize, c: usize) -> Result<Tensor> {
        let (nr, nc) = self.shape(a);
        if r >= nr || c >= nc {
            return Err(Error::dim("pick", format!("({r},{c}) outside {nr}x{nc}")));
        }
        let v = Matrix::scalar(self.value(a).get(r, c));
        self.push("pick", v, Op::Pick(a, r, c), &[a])
    }

    /// Reverse sweep from a scalar loss.
    ///
    /// Gradients of previous sweeps are discarded. A tensor used on several
    /// paths receives the sum of the path gradients.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            self.grads = grads;
            return Ok(());
        }
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let nodes = &self.nodes;
            let val = |t: Tensor| &nodes[t.0].value;
            let mut contributions: Vec<(Tensor, Matrix)> = Vec::with_capacity(2);
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    contributions.push((*a, g.matmul_t(val(*b))));
                    contributions.push((*b, val(*a).t_matmul(&g)));
                }
                Op::Add(a, b) => {
                    contributions.push((*a, g.clone()));
                    contributions.push((*b, g.clone()));
                }
                Op::AddRow(a, row) => {
                    contributions.push((*row, col_sums(&g)));
                    contributions.push((*a, g.clone()));
                }
                Op::Sub(a, b) => {
                    contributions.push((*a, g.clone()));
                    contributions.push((*b, g.map(|x| -x)));
                }
                Op::Mul(a, b) => {
                    contributions.push((*a, g.zip_map(val(*b), |g, y| g * y)));
                    contributions.push((*b, g.zip_map(val(*a), |g, x| g * x)));
                }
                Op::Div(a, b) => {
                    let bv = val(*b);
                    contributions.push((*a, g.zip_map(bv, |g, y| g / y)));
                    let ga = g.zip_map(&node.value, |g, q| g * q);
                    contributions.push((*b, ga.zip_map(bv, |gq, y| -gq / y)));
                }
                Op::Scale(a, s) => contributions.push((*a, g.map(|x| x * s))),
                Op::AddScalar(a) => contributions.push((*a, g.clone())),
                Op::ScaleBy(a, s) => {
                    let k = val(*s).data()[0];
                    contributions.push((*a, g.map(|x| x * k)));
                    let dot: f64 = g.data().iter().zip(val(*a).data()).map(|(g, x)| g * x).sum();
                    contributions.push((*s, Matrix::scalar(dot)));
                }
                Op::Sigmoid(a) => {
                    contributions.push((*a, g.zip_map(&node.value, |g, y| g * y * (1.0 - y))))
                }
                Op::Tanh(a) => contributions.push((*a, g.zip_map(&node.value, |g, y| g * (1.0 - y * y)))),
                Op::Exp(a) => contributions.push((*a, g.zip_map(&node.value, |g, y| g * y))),
                Op::Log(a) => contributions.push((*a, g.zip_map(val(*a), |g, x| g / x))),
                Op::Sqrt(a) => contributions.push((*a, g.zip_map(&node.value, |g, y| 0.5 * g / y))),
                Op::Square(a) => contributions.push((*a, g.zip_map(val(*a), |g, x| 2.0 * g * x))),
                Op::Relu(a) => {
                    contributions.push((*a, g.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 })))
                }
                Op::Mean(a) => {
                    let (r, c) = val(*a).shape();
                    let k = g.data()[0] / (r * c) as f64;
                    contributions.push((*a, Matrix::filled(r, c, k)));
                }
                Op::Sum(a) => {
                    let (r, c) = val(*a).shape();
                    contributions.push((*a, Matrix::filled(r, c, g.data()[0])));
                }
                Op::MeanRows(a) => {
                    let (r, c) = val(*a).shape();
                    let mut out = Matrix::zeros(r, c);
                    let n = r as f64;
                    for chunk in out.data_mut().chunks_mut(c) {
                        for (o, gv) in chunk.iter_mut().zip(g.data()) {
                            *o = gv / n;
                        }
                    }
                    contributions.push((*a, out));
                }
                Op::Transpose(a) => contributions.push((*a, g.transpose())),
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let r = val(*p).rows();
                        contributions.push((*p, g.slice_rows(start, start + r)));
                        start += r;
                    }
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = val(*a).shape();
                    let mut out = Matrix::zeros(r, c);
                    let off = start * c;
                    out.data_mut()[off..off + g.len()].copy_from_slice(g.data());
                    contributions.push((*a, out));
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = val(*a).shape();
                    let w = g.cols();
                    let mut out = Matrix::zeros(r, c);
                    for i in 0..r {
                        out.data_mut()[i * c + start..i * c + start + w].copy_from_slice(g.row(i));
                    }
                    contributions.push((*a, out));
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let (r, c) = y.shape();
                    let mut out = Matrix::zeros(r, c);
                    for i in 0..r {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for j in 0..c {
                            out.set(i, j, yr[j] * (gr[j] - dot));
                        }
                    }
                    contributions.push((*a, out));
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    contributions.push((
                        *a,
                        g.zip_map(val(*a), |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
                    ))
                }
                Op::GradReverse(a, coef) => contributions.push((*a, g.map(|x| -coef * x))),
                Op::Pick(a, r, c) => {
                    let (nr, nc) = val(*a).shape();
                    let mut out = Matrix::zeros(nr, nc);
                    out.set(*r, *c, g.data()[0]);
                    contributions.push((*a, out));
                }
            }
            for (parent, contrib) in contributions {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }
}

fn col_sums(g: &Matrix) -> Matrix {
    let c = g.cols();
    let mut out = vec![0.0; c];
    for i in 0..g.rows() {
        for (o, v) in out.iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    Matrix::row_vector(&out)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
