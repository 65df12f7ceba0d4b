//! Stacked GRU with the reset gate applied before the candidate matmul:
//!
//! ```text
//! z  = sigmoid(x Wz + h Uz + bz)
//! r  = sigmoid(x Wr + h Ur + br)
//! h~ = tanh(x Wh + (r * h) Uh + bh)
//! h' = (1 - z) * h + z * h~
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{glorot_uniform, prefixed, Parameters};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_update: Matrix,
    pub u_update: Matrix,
    pub b_update: Matrix,
    pub w_reset: Matrix,
    pub u_reset: Matrix,
    pub b_reset: Matrix,
    pub w_candidate: Matrix,
    pub u_candidate: Matrix,
    pub b_candidate: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundGruCell {
    w_update: NodeId,
    u_update: NodeId,
    b_update: NodeId,
    w_reset: NodeId,
    u_reset: NodeId,
    b_reset: NodeId,
    w_candidate: NodeId,
    u_candidate: NodeId,
    b_candidate: NodeId,
    hidden: usize,
}

/// Nodes produced by one cell application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruStep {
    pub update: NodeId,
    pub reset: NodeId,
    pub candidate: NodeId,
    pub hidden: NodeId,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_update: glorot_uniform(inputs, hidden, rng),
            u_update: glorot_uniform(hidden, hidden, rng),
            b_update: Matrix::zeros(1, hidden),
            w_reset: glorot_uniform(inputs, hidden, rng),
            u_reset: glorot_uniform(hidden, hidden, rng),
            b_reset: Matrix::zeros(1, hidden),
            w_candidate: glorot_uniform(inputs, hidden, rng),
            u_candidate: glorot_uniform(hidden, hidden, rng),
            b_candidate: Matrix::zeros(1, hidden),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_update.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_update.cols()
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundGruCell {
        let mut leaf = |m: &Matrix| {
            let id = tape.leaf(m.clone());
            ids.push(id);
            id
        };
        BoundGruCell {
            w_update: leaf(&self.w_update),
            u_update: leaf(&self.u_update),
            b_update: leaf(&self.b_update),
            w_reset: leaf(&self.w_reset),
            u_reset: leaf(&self.u_reset),
            b_reset: leaf(&self.b_reset),
            w_candidate: leaf(&self.w_candidate),
            u_candidate: leaf(&self.u_candidate),
            b_candidate: leaf(&self.b_candidate),
            hidden: self.hidden(),
        }
    }
}

impl Parameters for GruCell {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        alloc::vec![
            ("w_update".into(), &self.w_update),
            ("u_update".into(), &self.u_update),
            ("b_update".into(), &self.b_update),
            ("w_reset".into(), &self.w_reset),
            ("u_reset".into(), &self.u_reset),
            ("b_reset".into(), &self.b_reset),
            ("w_candidate".into(), &self.w_candidate),
            ("u_candidate".into(), &self.u_candidate),
            ("b_candidate".into(), &self.b_candidate),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        alloc::vec![
            &mut self.w_update,
            &mut self.u_update,
            &mut self.b_update,
            &mut self.w_reset,
            &mut self.u_reset,
            &mut self.b_reset,
            &mut self.w_candidate,
            &mut self.u_candidate,
            &mut self.b_candidate,
        ]
    }
}

fn gate(tape: &mut Tape, x: NodeId, h: NodeId, w: NodeId, u: NodeId, b: NodeId) -> Result<NodeId> {
    let xw = tape.matmul(x, w)?;
    let hu = tape.matmul(h, u)?;
    let s = tape.add(xw, hu)?;
    tape.add_row(s, b)
}

/// One GRU step on a `batch x in` input and `batch x hidden` state.
pub fn gru_cell_step(
    tape: &mut Tape,
    cell: &BoundGruCell,
    x: NodeId,
    h: NodeId,
) -> Result<GruStep> {
    let pre_z = gate(tape, x, h, cell.w_update, cell.u_update, cell.b_update)?;
    let update = tape.sigmoid(pre_z)?;
    let pre_r = gate(tape, x, h, cell.w_reset, cell.u_reset, cell.b_reset)?;
    let reset = tape.sigmoid(pre_r)?;
    let rh = tape.mul(reset, h)?;
    let pre_c = gate(
        tape,
        x,
        rh,
        cell.w_candidate,
        cell.u_candidate,
        cell.b_candidate,
    )?;
    let candidate = tape.tanh(pre_c)?;
    // h' = h + z * (h~ - h)
    let diff = tape.sub(candidate, h)?;
    let step = tape.mul(update, diff)?;
    let hidden = tape.add(h, step)?;
    Ok(GruStep {
        update,
        reset,
        candidate,
        hidden,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruStack {
    pub cells: Vec<GruCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundGru {
    cells: Vec<BoundGruCell>,
    inputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruOutput {
    /// Top-layer hidden state per timestep.
    pub outputs: Vec<NodeId>,
    /// Final hidden state per layer.
    pub last: Vec<NodeId>,
    /// Every cell application, `steps[layer][t]`.
    pub steps: Vec<Vec<GruStep>>,
}

impl GruStack {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let cells = (0..layers)
            .map(|l| GruCell::new(if l == 0 { inputs } else { hidden }, hidden, rng))
            .collect();
        Self { cells }
    }

    pub fn inputs(&self) -> usize {
        self.cells.first().map_or(0, GruCell::inputs)
    }

    pub fn hidden(&self) -> usize {
        self.cells.last().map_or(0, GruCell::hidden)
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundGru {
        BoundGru {
            cells: self.cells.iter().map(|c| c.bind(tape, ids)).collect(),
            inputs: self.inputs(),
        }
    }
}

impl Parameters for GruStack {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(i, c)| prefixed(&format!("{i}"), c.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.cells.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}

/// Run the stack over `sequence` (each `batch x in`). Layer `l` consumes the
/// hidden states of layer `l - 1`. `initial` gives one state per layer;
/// zeros when `None`.
pub fn gru_forward(
    tape: &mut Tape,
    stack: &BoundGru,
    sequence: &[NodeId],
    initial: Option<&[NodeId]>,
) -> Result<GruOutput> {
    let first = *sequence.first().ok_or(Error::Empty("gru_forward"))?;
    let batch = tape.shape(first).0;
    for &x in sequence {
        let shape = tape.shape(x);
        if shape != (batch, stack.inputs) {
            return Err(Error::Shape {
                op: "gru_forward",
                lhs: shape,
                rhs: (batch, stack.inputs),
            });
        }
    }
    if let Some(init) = initial {
        if init.len() != stack.cells.len() {
            return Err(Error::Length {
                what: "gru initial states",
                left: init.len(),
                right: stack.cells.len(),
            });
        }
    }

    let mut layer_input: Vec<NodeId> = sequence.to_vec();
    let mut last = Vec::with_capacity(stack.cells.len());
    let mut steps = Vec::with_capacity(stack.cells.len());
    for (l, cell) in stack.cells.iter().enumerate() {
        let mut h = match initial {
            Some(init) => init[l],
            None => tape.leaf(Matrix::zeros(batch, cell.hidden)),
        };
        let mut layer_steps = Vec::with_capacity(layer_input.len());
        for &x in &layer_input {
            let s = gru_cell_step(tape, cell, x, h)?;
            h = s.hidden;
            layer_steps.push(s);
        }
        layer_input = layer_steps.iter().map(|s| s.hidden).collect();
        last.push(h);
        steps.push(layer_steps);
    }
    Ok(GruOutput {
        outputs: layer_input,
        last,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_input_and_state_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stack = GruStack::new(3, 4, 2, &mut rng);
        let mut t = Tape::new();
        let b = stack.bind(&mut t, &mut Vec::new());
        let seq: Vec<NodeId> = (0..6).map(|_| t.leaf(Matrix::zeros(2, 3))).collect();
        let out = gru_forward(&mut t, &b, &seq, None).unwrap();
        for &h in &out.outputs {
            assert_eq!(t.value(h), &Matrix::zeros(2, 4));
        }
    }

    #[test]
    fn single_step_equals_cell_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stack = GruStack::new(3, 4, 1, &mut rng);
        let x0 = Matrix::from_fn(2, 3, |r, c| 0.3 * r as f64 - 0.2 * c as f64 + 0.1);
        let h0 = Matrix::from_fn(2, 4, |r, c| 0.05 * (r + c) as f64);

        let mut t = Tape::new();
        let b = stack.bind(&mut t, &mut Vec::new());
        let x = t.leaf(x0.clone());
        let h = t.leaf(h0.clone());
        let out = gru_forward(&mut t, &b, &[x], Some(&[h])).unwrap();

        // hand evaluation of the cell equations
        let c = &stack.cells[0];
        let sig = |v: f64| 1.0 / (1.0 + libm::exp(-v));
        let lin = |w: &Matrix, u: &Matrix, bias: &Matrix, hh: &Matrix| {
            let mut m = x0.matmul(w).unwrap().add(&hh.matmul(u).unwrap()).unwrap();
            for r in 0..m.rows() {
                for (v, bv) in m.row_mut(r).iter_mut().zip(bias.as_slice()) {
                    *v += bv;
                }
            }
            m
        };
        let z = lin(&c.w_update, &c.u_update, &c.b_update, &h0).map(sig);
        let r = lin(&c.w_reset, &c.u_reset, &c.b_reset, &h0).map(sig);
        let rh = r.zip_map(&h0, "t", |a, b| a * b).unwrap();
        let cand = lin(&c.w_candidate, &c.u_candidate, &c.b_candidate, &rh).map(libm::tanh);
        let expected = Matrix::from_fn(2, 4, |i, j| {
            (1.0 - z[(i, j)]) * h0[(i, j)] + z[(i, j)] * cand[(i, j)]
        });
        let got = t.value(out.outputs[0]);
        for (a, b) in got.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stack = GruStack::new(3, 4, 2, &mut rng);
        let mut t = Tape::new();
        let b = stack.bind(&mut t, &mut Vec::new());
        let x = t.leaf(Matrix::zeros(1, 5));
        assert!(matches!(
            gru_forward(&mut t, &b, &[x], None),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            gru_forward(&mut t, &b, &[], None),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn gates_in_open_interval_and_state_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stack = GruStack::new(4, 6, 2, &mut rng);
        let mut t = Tape::new();
        let b = stack.bind(&mut t, &mut Vec::new());
        let seq: Vec<NodeId> = (0..20)
            .map(|k| {
                t.leaf(Matrix::from_fn(3, 4, |r, c| {
                    libm::sin((k * 7 + r * 3 + c) as f64)
                }))
            })
            .collect();
        let out = gru_forward(&mut t, &b, &seq, None).unwrap();
        for layer in &out.steps {
            for s in layer {
                for &g in t
                    .value(s.update)
                    .as_slice()
                    .iter()
                    .chain(t.value(s.reset).as_slice())
                {
                    assert!(g > 0.0 && g < 1.0);
                }
                assert!(t.value(s.hidden).max_abs() <= 1.0);
            }
        }
    }
}
