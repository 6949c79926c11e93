//! Reverse-mode differentiation over a dynamically recorded tape.
//!
//! Every operation appends a [`DiffNode`] to a [`Tape`] and returns a
//! [`Var`] handle. Nodes are stored in creation order, which is a
//! topological order, so [`Tape::backward`] is a single reverse sweep.
//! A tape is built per query and dropped afterwards.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::shape_err;
use crate::math;
use crate::tensor::dot;
use crate::{Error, Result, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Broadcast(Var),
    Concat(Var, Var),
    SliceLast { src: Var, start: usize },
    Stack(Vec<Var>),
    Column { table: Var, col: usize },
    Sum(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    Softplus(Var),
    /// `x / sum(x)`; `degenerate` marks the uniform fallback (no gradient).
    Normalize { src: Var, degenerate: bool },
    BinaryCrossEntropy { probs: Var, truth: Vec<f64>, eps: f64 },
    PairSoftplus { scores: Var, pairs: Vec<(usize, usize)>, tau: f64, norm: f64 },
}

/// A recorded value, its accumulated gradient, and the operation that
/// produced it.
#[derive(Debug, Clone)]
pub struct DiffNode {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
}

impl DiffNode {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    /// Accumulated gradient; `None` until a backward pass reaches the node.
    pub fn grad(&self) -> Option<&Tensor> {
        self.grad.as_ref()
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<DiffNode>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &DiffNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Gradient of `v`, or zeros when the backward pass never reached it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        match &self.nodes[v.0].grad {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.value(v).shape()),
        }
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        value.check_finite(name)?;
        self.nodes.push(DiffNode { value, grad: None, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    /// `[r,c] x [c] -> [r]` or `[r,c] x [c,k] -> [r,k]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (r, c) = av.dims2()?;
        let out = match bv.shape() {
            [n] if *n == c => Tensor::vector(av.matvec(bv.data())?),
            [n, k] if *n == c => {
                let k = *k;
                let mut out = vec![0.0; r * k];
                let (ad, bd) = (av.data(), bv.data());
                for i in 0..r {
                    for j in 0..c {
                        let aij = ad[i * c + j];
                        if aij == 0.0 {
                            continue;
                        }
                        let brow = &bd[j * k..(j + 1) * k];
                        for (o, b) in out[i * k..(i + 1) * k].iter_mut().zip(brow) {
                            *o += aij * b;
                        }
                    }
                }
                Tensor::matrix(r, k, out)?
            }
            s => return Err(shape_err!("matmul [{r}, {c}] x {s:?}")),
        };
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims2()?;
        let d = av.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let out = Tensor::matrix(c, r, out)?;
        self.push(out, Op::Transpose(a), "transpose")
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        self.push(out, Op::Reshape(a), "reshape")
    }

    fn zip_with(&self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err!("{what} {:?} and {:?}", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let av = self.value(a);
        let data = av.data().iter().map(|x| f(*x)).collect();
        Tensor::new(av.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        self.push(out, Op::Sub(a, b), "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "mul", |x, y| x * y)?;
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.map(a, |x| x * factor);
        self.push(out, Op::Scale(a, factor), "scale")
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.map(a, |x| x + c);
        self.push(out, Op::AddConst(a), "add_const")
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let neg = self.scale(a, -1.0)?;
        self.add_const(neg, 1.0)
    }

    /// Repeats a one-element tensor `n` times.
    pub fn broadcast(&mut self, a: Var, n: usize) -> Result<Var> {
        let av = self.value(a);
        if av.len() != 1 {
            return Err(shape_err!("broadcast needs one element, got {:?}", av.shape()));
        }
        let out = Tensor::filled(&[n], av.data()[0]);
        self.push(out, Op::Broadcast(a), "broadcast")
    }

    /// Concatenates two vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 1 || bv.rank() != 1 {
            return Err(shape_err!("concat {:?} and {:?}", av.shape(), bv.shape()));
        }
        let mut data = av.data().to_vec();
        data.extend_from_slice(bv.data());
        self.push(Tensor::vector(data), Op::Concat(a, b), "concat")
    }

    /// Slices `len` entries along the last axis starting at `start`.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let last = *av.shape().last().expect("non-empty shape");
        if start + len > last || len == 0 {
            return Err(shape_err!("slice {start}..{} of {:?}", start + len, av.shape()));
        }
        let rows = av.len() / last;
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&av.data()[r * last + start..r * last + start + len]);
        }
        let mut shape = av.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let out = Tensor::new(shape, data)?;
        self.push(out, Op::SliceLast { src: a, start }, "slice_last")
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows.first().ok_or_else(|| shape_err!("stack of zero rows"))?;
        let width = self.value(*first).len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            let v = self.value(*r);
            if v.rank() != 1 || v.len() != width {
                return Err(shape_err!("stack row {:?}, expected [{width}]", v.shape()));
            }
            data.extend_from_slice(v.data());
        }
        let out = Tensor::matrix(rows.len(), width, data)?;
        self.push(out, Op::Stack(rows.to_vec()), "stack")
    }

    /// Column `col` of a matrix; equal to `table x one_hot(col)`.
    pub fn column(&mut self, table: Var, col: usize) -> Result<Var> {
        let tv = self.value(table);
        let (r, c) = tv.dims2()?;
        if col >= c {
            return Err(Error::OutOfRange { what: "column", index: col, len: c });
        }
        let data = (0..r).map(|i| tv.data()[i * c + col]).collect();
        self.push(Tensor::vector(data), Op::Column { table, col }, "column")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), "sum")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.value(a).check_finite("sigmoid")?;
        let out = self.map(a, math::sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.value(a).check_finite("tanh")?;
        let out = self.map(a, math::tanh);
        self.push(out, Op::Tanh(a), "tanh")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.value(a).check_finite("relu")?;
        let out = self.map(a, |x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a), "relu")
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.value(a).check_finite("softplus")?;
        let out = self.map(a, math::softplus);
        self.push(out, Op::Softplus(a), "softplus")
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        av.check_finite("softmax")?;
        let last = *av.shape().last().unwrap();
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(last) {
            softmax_in_place(row);
        }
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push(out, Op::Softmax(a), "softmax")
    }

    /// Scales a nonnegative vector to sum to one. An all-zero vector maps to
    /// the uniform distribution and passes no gradient.
    pub fn normalize(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 {
            return Err(shape_err!("normalize needs a vector, got {:?}", av.shape()));
        }
        let total = av.sum();
        let n = av.len();
        let (data, degenerate) = if total > 0.0 {
            (av.data().iter().map(|x| x / total).collect(), false)
        } else {
            (vec![1.0 / n as f64; n], true)
        };
        let op = Op::Normalize { src: a, degenerate };
        self.push(Tensor::vector(data), op, "normalize")
    }

    /// Summed per-label binary cross entropy of `probs` against a 0/1
    /// `truth`, with probabilities clamped to `[eps, 1 - eps]`.
    pub fn binary_cross_entropy(&mut self, probs: Var, truth: &[f64], eps: f64) -> Result<Var> {
        let pv = self.value(probs);
        if pv.len() != truth.len() {
            return Err(shape_err!("cross entropy over {} probs and {} labels", pv.len(), truth.len()));
        }
        let total = bce_value(pv.data(), truth, eps);
        let op = Op::BinaryCrossEntropy { probs, truth: truth.to_vec(), eps };
        self.push(Tensor::scalar(total), op, "binary_cross_entropy")
    }

    /// `(1/norm) * sum over (p, q) in pairs of softplus(tau * (y_q - y_p)) / tau`.
    ///
    /// The pair set is fixed by the caller, so nothing upstream of the
    /// selection receives gradient.
    pub fn pair_softplus(
        &mut self,
        scores: Var,
        pairs: Vec<(usize, usize)>,
        tau: f64,
        norm: f64,
    ) -> Result<Var> {
        let y = self.value(scores).data();
        if let Some(&(p, q)) = pairs.iter().find(|(p, q)| *p >= y.len() || *q >= y.len()) {
            return Err(Error::OutOfRange { what: "pair", index: p.max(q), len: y.len() });
        }
        let total: f64 = pairs
            .iter()
            .map(|&(p, q)| math::softplus(tau * (y[q] - y[p])) / tau)
            .sum::<f64>()
            / norm;
        let op = Op::PairSoftplus { scores, pairs, tau, norm };
        self.push(Tensor::scalar(total), op, "pair_softplus")
    }

    /// Accumulates `d root / d node` into every node reachable from `root`.
    /// Calling it twice without [`Tape::zero_grad`] adds the gradients.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(shape_err!("backward root must be scalar, got {:?}", self.value(root).shape()));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Tensor::filled(self.value(root).shape(), 1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g)?,
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        let val = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (r, c) = av.dims2().unwrap();
                let (ad, bd) = (av.data(), bv.data());
                let k = if bv.rank() == 1 { 1 } else { bv.shape()[1] };
                if k == 1 {
                    let ga = slot(adj, *a, av);
                    for (row, g) in gd.iter().enumerate() {
                        axpy(&mut ga[row * c..(row + 1) * c], *g, bd);
                    }
                    let gb = slot(adj, *b, bv);
                    for (row, g) in gd.iter().enumerate() {
                        axpy(gb, *g, &ad[row * c..(row + 1) * c]);
                    }
                    return;
                }
                let ga = slot(adj, *a, av);
                for row in 0..r {
                    let grow = &gd[row * k..(row + 1) * k];
                    let out = &mut ga[row * c..(row + 1) * c];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += dot(grow, &bd[j * k..(j + 1) * k]);
                    }
                }
                let gb = slot(adj, *b, bv);
                for row in 0..r {
                    let grow = &gd[row * k..(row + 1) * k];
                    for j in 0..c {
                        let aij = ad[row * c + j];
                        for (o, g) in gb[j * k..(j + 1) * k].iter_mut().zip(grow) {
                            *o += aij * g;
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let av = self.value(*a);
                let (r, c) = av.dims2().unwrap();
                let ga = slot(adj, *a, av);
                for row in 0..r {
                    for col in 0..c {
                        ga[row * c + col] += gd[col * r + row];
                    }
                }
            }
            Op::Reshape(a) | Op::AddConst(a) => {
                axpy(slot(adj, *a, self.value(*a)), 1.0, gd);
            }
            Op::Add(a, b) => {
                axpy(slot(adj, *a, self.value(*a)), 1.0, gd);
                axpy(slot(adj, *b, self.value(*b)), 1.0, gd);
            }
            Op::Sub(a, b) => {
                axpy(slot(adj, *a, self.value(*a)), 1.0, gd);
                axpy(slot(adj, *b, self.value(*b)), -1.0, gd);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                for ((o, g), y) in slot(adj, *a, av).iter_mut().zip(gd).zip(bv.data()) {
                    *o += g * y;
                }
                for ((o, g), x) in slot(adj, *b, bv).iter_mut().zip(gd).zip(av.data()) {
                    *o += g * x;
                }
            }
            Op::Scale(a, f) => axpy(slot(adj, *a, self.value(*a)), *f, gd),
            Op::Broadcast(a) => {
                slot(adj, *a, self.value(*a))[0] += gd.iter().sum::<f64>();
            }
            Op::Concat(a, b) => {
                let n = self.value(*a).len();
                axpy(slot(adj, *a, self.value(*a)), 1.0, &gd[..n]);
                axpy(slot(adj, *b, self.value(*b)), 1.0, &gd[n..]);
            }
            Op::SliceLast { src, start } => {
                let sv = self.value(*src);
                let last = *sv.shape().last().unwrap();
                let len = *node.value.shape().last().unwrap();
                let gs = slot(adj, *src, sv);
                for (r, grow) in gd.chunks(len).enumerate() {
                    axpy(&mut gs[r * last + start..r * last + start + len], 1.0, grow);
                }
            }
            Op::Stack(rows) => {
                let width = node.value.shape()[1];
                for (r, v) in rows.iter().enumerate() {
                    axpy(slot(adj, *v, self.value(*v)), 1.0, &gd[r * width..(r + 1) * width]);
                }
            }
            Op::Column { table, col } => {
                let tv = self.value(*table);
                let c = tv.shape()[1];
                let gt = slot(adj, *table, tv);
                for (r, g) in gd.iter().enumerate() {
                    gt[r * c + col] += g;
                }
            }
            Op::Sum(a) => {
                let g0 = gd[0];
                for o in slot(adj, *a, self.value(*a)).iter_mut() {
                    *o += g0;
                }
            }
            Op::Sigmoid(a) => {
                for ((o, g), y) in slot(adj, *a, self.value(*a)).iter_mut().zip(gd).zip(val) {
                    *o += g * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                for ((o, g), y) in slot(adj, *a, self.value(*a)).iter_mut().zip(gd).zip(val) {
                    *o += g * (1.0 - y * y);
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                for ((o, g), x) in slot(adj, *a, av).iter_mut().zip(gd).zip(av.data()) {
                    if *x > 0.0 {
                        *o += g;
                    }
                }
            }
            Op::Softplus(a) => {
                let av = self.value(*a);
                for ((o, g), x) in slot(adj, *a, av).iter_mut().zip(gd).zip(av.data()) {
                    *o += g * math::sigmoid(*x);
                }
            }
            Op::Softmax(a) => {
                let last = *node.value.shape().last().unwrap();
                let ga = slot(adj, *a, self.value(*a));
                for ((orow, grow), yrow) in
                    ga.chunks_mut(last).zip(gd.chunks(last)).zip(val.chunks(last))
                {
                    let gy = dot(grow, yrow);
                    for ((o, g), y) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o += y * (g - gy);
                    }
                }
            }
            Op::Normalize { src, degenerate } => {
                if *degenerate {
                    return;
                }
                let sv = self.value(*src);
                let total = sv.sum();
                let gs = dot(gd, val);
                for (o, g) in slot(adj, *src, sv).iter_mut().zip(gd) {
                    *o += (g - gs) / total;
                }
            }
            Op::BinaryCrossEntropy { probs, truth, eps } => {
                let pv = self.value(*probs);
                let g0 = gd[0];
                for ((o, p), y) in slot(adj, *probs, pv).iter_mut().zip(pv.data()).zip(truth) {
                    if *p > *eps && *p < 1.0 - eps {
                        *o += g0 * (-y / p + (1.0 - y) / (1.0 - p));
                    }
                }
            }
            Op::PairSoftplus { scores, pairs, tau, norm } => {
                let sv = self.value(*scores);
                let y = sv.data();
                let g0 = gd[0] / norm;
                let gs = slot(adj, *scores, sv);
                for &(p, q) in pairs {
                    let d = math::sigmoid(tau * (y[q] - y[p])) * g0;
                    gs[q] += d;
                    gs[p] -= d;
                }
            }
        }
    }
}

/// Adjoint buffer for `v`, created as zeros on first use.
fn slot<'a>(adj: &'a mut [Option<Tensor>], v: Var, like: &Tensor) -> &'a mut [f64] {
    adj[v.0]
        .get_or_insert_with(|| Tensor::zeros(like.shape()))
        .data_mut()
}

fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

pub(crate) fn bce_value(probs: &[f64], truth: &[f64], eps: f64) -> f64 {
    -probs
        .iter()
        .zip(truth)
        .map(|(p, y)| {
            let p = p.clamp(eps, 1.0 - eps);
            y * math::ln(p) + (1.0 - y) * math::ln(1.0 - p)
        })
        .sum::<f64>()
}

/// Central finite-difference gradient of a scalar function of one tensor.
pub fn numeric_gradient(
    x: &Tensor,
    h: f64,
    mut f: impl FnMut(&Tensor) -> Result<f64>,
) -> Result<Tensor> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// Relative error `|a - n| / max(1, |a|, |n|)`, maximised over entries.
///
/// Entries whose gradients are both tiny are compared absolutely.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}
