use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Named access to trainable matrices. `params_mut` and the ids pushed by a
/// model's `bind` must follow the order of `named_params`.
pub trait Parameters {
    fn named_params(&self) -> Vec<(String, &Matrix)>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, m)| m.len()).sum()
    }

    /// Overwrite every parameter from `lookup` by name; shapes must match.
    fn load_params(&mut self, lookup: &dyn Fn(&str) -> Option<Matrix>) -> Result<()> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(self.params_mut()) {
            let m =
                lookup(name).ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
            if m.shape() != slot.shape() {
                return Err(Error::Shape {
                    op: "load_params",
                    lhs: slot.shape(),
                    rhs: m.shape(),
                });
            }
            *slot = m;
        }
        Ok(())
    }
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    inner: Vec<(String, &'a Matrix)>,
) -> Vec<(String, &'a Matrix)> {
    inner
        .into_iter()
        .map(|(n, m)| (format!("{prefix}.{n}"), m))
        .collect()
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Linear => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// `act(x W + b)` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundDense {
    pub weight: NodeId,
    pub bias: NodeId,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: glorot_uniform(inputs, outputs, rng),
            bias: Matrix::zeros(1, outputs),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundDense {
        let weight = tape.leaf(self.weight.clone());
        let bias = tape.leaf(self.bias.clone());
        ids.extend([weight, bias]);
        BoundDense {
            weight,
            bias,
            activation: self.activation,
        }
    }
}

impl Parameters for DenseLayer {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        alloc::vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        alloc::vec![&mut self.weight, &mut self.bias]
    }
}

pub fn dense_forward(tape: &mut Tape, layer: &BoundDense, x: NodeId) -> Result<NodeId> {
    let xw = tape.matmul(x, layer.weight)?;
    let z = tape.add_row(xw, layer.bias)?;
    layer.activation.apply(tape, z)
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStack {
    pub layers: Vec<DenseLayer>,
}

impl DenseStack {
    /// `widths = [in, h1, ..., out]`; hidden layers use `hidden`, the last `last`.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        let n = widths.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { last } else { hidden };
                DenseLayer::new(widths[i], widths[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::outputs)
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> Vec<BoundDense> {
        self.layers.iter().map(|l| l.bind(tape, ids)).collect()
    }
}

impl Parameters for DenseStack {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("{i}"), l.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }
}

impl super::train::Model for DenseStack {
    type Bound = Vec<BoundDense>;

    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> Vec<BoundDense> {
        DenseStack::bind(self, tape, ids)
    }
}

pub fn stack_forward(tape: &mut Tape, layers: &[BoundDense], mut x: NodeId) -> Result<NodeId> {
    for l in layers {
        x = dense_forward(tape, l, x)?;
    }
    Ok(x)
}

/// Inverted dropout: in training, zero each entry with probability `rate`
/// and scale survivors by `1 / (1 - rate)`; identity otherwise.
pub fn dropout_apply<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: NodeId,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<NodeId> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::OutOfRange {
            what: "dropout rate",
            value: rate,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let (r, c) = tape.shape(x);
    let keep = 1.0 / (1.0 - rate);
    let mask = Matrix::from_fn(r, c, |_, _| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    });
    let m = tape.leaf(mask);
    tape.mul(x, m)
}
