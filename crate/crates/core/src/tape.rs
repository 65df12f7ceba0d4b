//! Reverse-mode differentiation over dense matrix operations.
//!
//! A [`Tape`] records every operation together with its forward value.
//! Node ids are handed out in recording order, so inputs always precede
//! their consumers and [`Tape::backward`] is a single reverse sweep.
//!
//! ```
//! use afen_core::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
//! let loss = tape.sum(x).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().as_slice(), &[1.0; 4]);
//! ```

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor used by [`Tape::log`] when callers do not pick their own.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Log {
        input: NodeId,
        floor: f64,
    },
    SoftmaxRows(NodeId),
    LogSumExpRows(NodeId),
    L2NormalizeRows(NodeId),
    Transpose(NodeId),
    ConcatCols(NodeId, NodeId),
    /// Per-row mean, `r x c -> r x 1`.
    MeanRows(NodeId),
    /// Per-column mean, `r x c -> 1 x c`.
    MeanCols(NodeId),
    Sum(NodeId),
    Slice {
        input: NodeId,
        rows: Range<usize>,
        cols: Range<usize>,
    },
    /// Repeat a `1 x c` row `n` times.
    BroadcastRows {
        input: NodeId,
        n: usize,
    },
    /// Pick `input[i, indices[i]]` into an `n x 1` column.
    Gather {
        input: NodeId,
        indices: Vec<usize>,
    },
    /// Replace `c = cos(theta)` at `(i, targets[i])` with `cos(theta + margin)`.
    AngularMargin {
        input: NodeId,
        targets: Vec<usize>,
        margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// An all-zero row was passed through l2 normalization and left at zero.
    ZeroRowNormalized { node: NodeId, row: usize },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    warnings: Vec<Warning>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when the node does not influence the loss.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Matrix> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

fn row_logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + libm::log(row.iter().map(|&v| libm::exp(v - max)).sum::<f64>())
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let lse = row_logsumexp(x.row(r));
        for v in out.row_mut(r) {
            *v = libm::exp(*v - lse);
        }
    }
    out
}

fn angle_shift(c: f64, margin: f64) -> f64 {
    libm::cos(libm::acos(c.clamp(-1.0, 1.0)) + margin)
}

fn angle_shift_grad(c: f64, margin: f64) -> f64 {
    let cc = c.clamp(-1.0, 1.0);
    let sin_theta = libm::sqrt(1.0 - cc * cc);
    // derivative is unbounded at theta = 0 or pi
    if sin_theta <= f64::EPSILON {
        return 0.0;
    }
    libm::sin(libm::acos(cc) + margin) / sin_theta
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.as_slice()[0]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(id.0));
        }
        Ok(())
    }

    fn push(&mut self, op: Op, value: Matrix, name: &'static str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn unary(
        &mut self,
        a: NodeId,
        op: Op,
        name: &'static str,
        f: impl Fn(f64) -> f64,
    ) -> Result<NodeId> {
        self.check(a)?;
        let value = self.value(a).map(f);
        self.push(op, value, name)
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        op: Op,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let value = self.value(a).zip_map(self.value(b), name, f)?;
        self.push(op, value, name)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let value = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), value, "matmul")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Div(a, b), "div", |x, y| x / y)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.unary(a, Op::Scale(a, factor), "scale", |x| x * factor)
    }

    pub fn add_scalar(&mut self, a: NodeId, offset: f64) -> Result<NodeId> {
        self.unary(a, Op::AddScalar(a, offset), "add_scalar", |x| x + offset)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh(a), "tanh", libm::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sigmoid(a), "sigmoid", sigmoid)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Relu(a), "relu", |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Exp(a), "exp", libm::exp)
    }

    /// Natural log with inputs below [`LOG_FLOOR`] replaced by the floor.
    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.log_floored(a, LOG_FLOOR)
    }

    pub fn log_floored(&mut self, a: NodeId, floor: f64) -> Result<NodeId> {
        self.unary(a, Op::Log { input: a, floor }, "log", |x| {
            libm::log(x.max(floor))
        })
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let value = softmax_rows(self.value(a));
        self.push(Op::SoftmaxRows(a), value, "softmax_rows")
    }

    pub fn logsumexp_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        let value = Matrix::from_fn(x.rows(), 1, |r, _| row_logsumexp(x.row(r)));
        self.push(Op::LogSumExpRows(a), value, "logsumexp_rows")
    }

    pub fn l2_normalize_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let mut value = self.value(a).clone();
        let id = NodeId(self.nodes.len());
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
            if norm == 0.0 {
                self.warnings
                    .push(Warning::ZeroRowNormalized { node: id, row: r });
                continue;
            }
            for v in row {
                *v /= norm;
            }
        }
        self.push(Op::L2NormalizeRows(a), value, "l2_normalize_rows")
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, "transpose")
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(Error::Shape {
                op: "concat_cols",
                lhs: x.shape(),
                rhs: y.shape(),
            });
        }
        let split = x.cols();
        let value = Matrix::from_fn(x.rows(), x.cols() + y.cols(), |r, c| {
            if c < split {
                x[(r, c)]
            } else {
                y[(r, c - split)]
            }
        });
        self.push(Op::ConcatCols(a, b), value, "concat_cols")
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::Empty("mean_rows"));
        }
        let n = x.cols() as f64;
        let value = Matrix::from_fn(x.rows(), 1, |r, _| x.row(r).iter().sum::<f64>() / n);
        self.push(Op::MeanRows(a), value, "mean_rows")
    }

    pub fn mean_cols(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::Empty("mean_cols"));
        }
        let n = x.rows() as f64;
        let value = Matrix::from_fn(1, x.cols(), |_, c| {
            (0..x.rows()).map(|r| x[(r, c)]).sum::<f64>() / n
        });
        self.push(Op::MeanCols(a), value, "mean_cols")
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let value = Matrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value, "sum")
    }

    /// Mean of all entries as a 1x1 node.
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::Empty("mean"));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn slice(&mut self, a: NodeId, rows: Range<usize>, cols: Range<usize>) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if rows.start > rows.end
            || cols.start > cols.end
            || rows.end > x.rows()
            || cols.end > x.cols()
        {
            return Err(Error::Shape {
                op: "slice",
                lhs: x.shape(),
                rhs: (rows.end, cols.end),
            });
        }
        let value = Matrix::from_fn(rows.len(), cols.len(), |r, c| {
            x[(rows.start + r, cols.start + c)]
        });
        self.push(
            Op::Slice {
                input: a,
                rows,
                cols,
            },
            value,
            "slice",
        )
    }

    pub fn col(&mut self, a: NodeId, c: usize) -> Result<NodeId> {
        let rows = self.value(a).rows();
        self.slice(a, 0..rows, c..c + 1)
    }

    pub fn broadcast_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if x.rows() != 1 {
            return Err(Error::Shape {
                op: "broadcast_rows",
                lhs: x.shape(),
                rhs: (1, x.cols()),
            });
        }
        let value = Matrix::from_fn(n, x.cols(), |_, c| x[(0, c)]);
        self.push(Op::BroadcastRows { input: a, n }, value, "broadcast_rows")
    }

    /// `a + row` with a `1 x c` row broadcast over every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let n = self.value(a).rows();
        let b = self.broadcast_rows(row, n)?;
        self.add(a, b)
    }

    pub fn gather(&mut self, a: NodeId, indices: &[usize]) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if indices.len() != x.rows() {
            return Err(Error::Length {
                what: "gather",
                left: indices.len(),
                right: x.rows(),
            });
        }
        for &i in indices {
            if i >= x.cols() {
                return Err(Error::IndexOutOfRange {
                    what: "gather",
                    index: i,
                    bound: x.cols(),
                });
            }
        }
        let value = Matrix::from_fn(x.rows(), 1, |r, _| x[(r, indices[r])]);
        self.push(
            Op::Gather {
                input: a,
                indices: indices.to_vec(),
            },
            value,
            "gather",
        )
    }

    /// Additive angular margin on cosine entries: `cos(acos(c) + margin)`
    /// at each row's target column, other entries pass through. Cosines are
    /// clamped to `[-1, 1]` before `acos`.
    pub fn angular_margin(&mut self, a: NodeId, targets: &[usize], margin: f64) -> Result<NodeId> {
        self.check(a)?;
        let x = self.value(a);
        if targets.len() != x.rows() {
            return Err(Error::Length {
                what: "angular_margin",
                left: targets.len(),
                right: x.rows(),
            });
        }
        let mut value = x.clone();
        for (r, &t) in targets.iter().enumerate() {
            if t >= x.cols() {
                return Err(Error::IndexOutOfRange {
                    what: "angular_margin",
                    index: t,
                    bound: x.cols(),
                });
            }
            value[(r, t)] = angle_shift(x[(r, t)], margin);
        }
        self.push(
            Op::AngularMargin {
                input: a,
                targets: targets.to_vec(),
                margin,
            },
            value,
            "angular_margin",
        )
    }

    /// Reverse sweep from a 1x1 loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        self.check(loss)?;
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let node = &self.nodes[i];
        let out = &node.value;
        let val = |id: NodeId| &self.nodes[id.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul(&val(*b).transpose())?)?;
                accumulate(grads, *b, val(*a).transpose().matmul(g)?)?;
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone())?;
                accumulate(grads, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone())?;
                accumulate(grads, *b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip_map(val(*b), "mul'", |g, y| g * y)?)?;
                accumulate(grads, *b, g.zip_map(val(*a), "mul'", |g, x| g * x)?)?;
            }
            Op::Div(a, b) => {
                let y = val(*b);
                accumulate(grads, *a, g.zip_map(y, "div'", |g, y| g / y)?)?;
                let q = out.zip_map(y, "div'", |q, y| q / y)?;
                accumulate(grads, *b, g.zip_map(&q, "div'", |g, q| -g * q)?)?;
            }
            Op::Scale(a, f) => accumulate(grads, *a, g.scale(*f))?,
            Op::AddScalar(a, _) => accumulate(grads, *a, g.clone())?,
            Op::Tanh(a) => accumulate(
                grads,
                *a,
                g.zip_map(out, "tanh'", |g, t| g * (1.0 - t * t))?,
            )?,
            Op::Sigmoid(a) => accumulate(
                grads,
                *a,
                g.zip_map(out, "sigmoid'", |g, s| g * s * (1.0 - s))?,
            )?,
            Op::Relu(a) => accumulate(
                grads,
                *a,
                g.zip_map(val(*a), "relu'", |g, x| if x > 0.0 { g } else { 0.0 })?,
            )?,
            Op::Exp(a) => accumulate(grads, *a, g.zip_map(out, "exp'", |g, e| g * e)?)?,
            Op::Log { input, floor } => {
                let f = *floor;
                accumulate(
                    grads,
                    *input,
                    g.zip_map(val(*input), "log'", |g, x| if x > f { g / x } else { 0.0 })?,
                )?
            }
            Op::SoftmaxRows(a) => {
                let mut d = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for (c, dv) in d.row_mut(r).iter_mut().enumerate() {
                        *dv = y[c] * (gr[c] - dot);
                    }
                }
                accumulate(grads, *a, d)?;
            }
            Op::LogSumExpRows(a) => {
                let mut d = softmax_rows(val(*a));
                for r in 0..d.rows() {
                    let gr = g[(r, 0)];
                    for v in d.row_mut(r) {
                        *v *= gr;
                    }
                }
                accumulate(grads, *a, d)?;
            }
            Op::L2NormalizeRows(a) => {
                let x = val(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let norm = libm::sqrt(x.row(r).iter().map(|v| v * v).sum());
                    if norm == 0.0 {
                        continue;
                    }
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for (c, dv) in d.row_mut(r).iter_mut().enumerate() {
                        *dv = (gr[c] - y[c] * dot) / norm;
                    }
                }
                accumulate(grads, *a, d)?;
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose())?,
            Op::ConcatCols(a, b) => {
                let split = val(*a).cols();
                let right = val(*b).cols();
                accumulate(
                    grads,
                    *a,
                    Matrix::from_fn(g.rows(), split, |r, c| g[(r, c)]),
                )?;
                accumulate(
                    grads,
                    *b,
                    Matrix::from_fn(g.rows(), right, |r, c| g[(r, split + c)]),
                )?;
            }
            Op::MeanRows(a) => {
                let x = val(*a);
                let n = x.cols() as f64;
                accumulate(
                    grads,
                    *a,
                    Matrix::from_fn(x.rows(), x.cols(), |r, _| g[(r, 0)] / n),
                )?;
            }
            Op::MeanCols(a) => {
                let x = val(*a);
                let n = x.rows() as f64;
                accumulate(
                    grads,
                    *a,
                    Matrix::from_fn(x.rows(), x.cols(), |_, c| g[(0, c)] / n),
                )?;
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(grads, *a, Matrix::filled(r, c, g[(0, 0)]))?;
            }
            Op::Slice { input, rows, cols } => {
                let (r, c) = val(*input).shape();
                let d = Matrix::from_fn(r, c, |i, j| {
                    if rows.contains(&i) && cols.contains(&j) {
                        g[(i - rows.start, j - cols.start)]
                    } else {
                        0.0
                    }
                });
                accumulate(grads, *input, d)?;
            }
            Op::BroadcastRows { input, n } => {
                let c = val(*input).cols();
                let d = Matrix::from_fn(1, c, |_, j| (0..*n).map(|i| g[(i, j)]).sum());
                accumulate(grads, *input, d)?;
            }
            Op::Gather { input, indices } => {
                let (r, c) = val(*input).shape();
                let mut d = Matrix::zeros(r, c);
                for (i, &j) in indices.iter().enumerate() {
                    d[(i, j)] = g[(i, 0)];
                }
                accumulate(grads, *input, d)?;
            }
            Op::AngularMargin {
                input,
                targets,
                margin,
            } => {
                let x = val(*input);
                let mut d = g.clone();
                for (i, &t) in targets.iter().enumerate() {
                    d[(i, t)] = g[(i, t)] * angle_shift_grad(x[(i, t)], *margin);
                }
                accumulate(grads, *input, d)?;
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, delta: Matrix) -> Result<()> {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&delta),
        slot @ None => {
            *slot = Some(delta);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn l2_normalize_three_four_five() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::row_vector(&[3.0, 4.0]));
        let y = t.l2_normalize_rows(x).unwrap();
        let v = t.value(y).as_slice();
        assert!(close(v[0], 0.6, 1e-15) && close(v[1], 0.8, 1e-15));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(1, 7));
        let y = t.softmax_rows(x).unwrap();
        for &v in t.value(y).as_slice() {
            assert!(close(v, 1.0 / 7.0, 1e-15));
        }
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_fn(2, 2, |r, c| (r + 2 * c) as f64));
        let s = t.sum(x).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn half_squared_norm_gradient_is_input() {
        let mut t = Tape::new();
        let x0 = Matrix::from_fn(3, 2, |r, c| r as f64 - 1.5 * c as f64);
        let x = t.leaf(x0.clone());
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        let l = t.scale(s, 0.5).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &x0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(2, 1));
        assert_eq!(
            t.backward(x).unwrap_err(),
            Error::NonScalarLoss { rows: 2, cols: 1 }
        );
    }

    #[test]
    fn log_below_floor_uses_floor() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::row_vector(&[0.0, -3.0, 1.0]));
        let y = t.log(x).unwrap();
        let v = t.value(y).as_slice();
        assert_eq!(v[0], libm::log(LOG_FLOOR));
        assert_eq!(v[1], libm::log(LOG_FLOOR));
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn zero_row_normalizes_to_zero_with_warning() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap());
        let y = t.l2_normalize_rows(x).unwrap();
        assert_eq!(t.value(y).row(0), &[0.0, 0.0]);
        assert_eq!(
            t.warnings(),
            &[Warning::ZeroRowNormalized { node: y, row: 0 }]
        );
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::row_vector(&[0.0, 2.0]));
        let y = t.relu(x).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn shape_errors_name_op_and_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3));
        let b = t.leaf(Matrix::zeros(3, 2));
        assert_eq!(
            t.add(a, b).unwrap_err(),
            Error::Shape {
                op: "add",
                lhs: (2, 3),
                rhs: (3, 2)
            }
        );
    }

    #[test]
    fn overflow_is_reported_not_stored() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(1000.0));
        assert_eq!(t.exp(a).unwrap_err(), Error::NonFinite { op: "exp" });
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(1.0));
        let b = t.leaf(Matrix::scalar(2.0));
        let s = t.sum(a).unwrap();
        let g = t.backward(s).unwrap();
        assert!(g.get(b).is_none());
    }

    #[test]
    fn backward_twice_is_identical() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::from_fn(3, 4, |r, c| (r as f64 - c as f64) * 0.3));
        let s = t.softmax_rows(a).unwrap();
        let l = t.log(s).unwrap();
        let m = t.mean(l).unwrap();
        assert_eq!(t.backward(m).unwrap(), t.backward(m).unwrap());
    }
}
