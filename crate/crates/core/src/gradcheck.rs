//! Central finite-difference oracle for tape gradients.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst entry.
    pub worst: Option<(usize, usize)>,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Evaluate `f` on a fresh tape with `inputs` as leaves; returns the loss
/// value and the gradient for each input (zeros where unreachable).
pub fn analytic_gradient<F>(inputs: &[Matrix], f: &F) -> Result<(f64, Vec<Matrix>)>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = f(&mut tape, &ids)?;
    let value = tape.scalar(loss);
    let grads = tape.backward(loss)?;
    let out = ids
        .iter()
        .zip(inputs)
        .map(|(&id, m)| {
            grads
                .get(id)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()))
        })
        .collect();
    Ok((value, out))
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every coordinate.
pub fn numeric_gradient<E>(inputs: &[Matrix], h: f64, eval: &E) -> Result<Vec<Matrix>>
where
    E: Fn(&[Matrix]) -> Result<f64>,
{
    let mut point: Vec<Matrix> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Matrix::zeros(inputs[i].rows(), inputs[i].cols());
        for k in 0..inputs[i].len() {
            let x0 = inputs[i].as_slice()[k];
            let probe = |point: &mut Vec<Matrix>, x: f64| -> Result<f64> {
                point[i].as_mut_slice()[k] = x;
                match eval(point) {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::NonFiniteAt { input: i, coord: k }),
                }
            };
            let plus = probe(&mut point, x0 + h)?;
            let minus = probe(&mut point, x0 - h)?;
            point[i].as_mut_slice()[k] = x0;
            g.as_mut_slice()[k] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Max over coordinates of `|a - n| / max(1, |a|, |n|)`.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> GradCheck {
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        for (k, (&a, &n)) in a.as_slice().iter().zip(n.as_slice()).enumerate() {
            let err = (a - n).abs() / 1f64.max(a.abs()).max(n.abs());
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, k));
            }
        }
    }
    report
}

/// Compare the tape gradient of `f` against central differences at `inputs`.
pub fn grad_check<F>(inputs: &[Matrix], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let (_, analytic) = analytic_gradient(inputs, &f)?;
    let numeric = numeric_gradient(inputs, h, &|point: &[Matrix]| {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = point.iter().map(|m| tape.leaf(m.clone())).collect();
        let loss = f(&mut tape, &ids)?;
        Ok(tape.scalar(loss))
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}
