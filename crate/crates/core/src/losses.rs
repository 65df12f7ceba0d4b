//! Task losses on the tape: categorical and binary cross entropy,
//! concordance, MSE, their multi-task sum, and the additive angular margin
//! (ArcFace) classifier.

use alloc::vec::Vec;

use crate::config::NUM_EXPRESSIONS;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Concordance denominators below this are treated as degenerate.
pub const CCC_EPSILON: f64 = 1e-12;

fn check_classes(targets: &[usize], bound: usize) -> Result<()> {
    match targets.iter().find(|&&t| t >= bound) {
        Some(&index) => Err(Error::IndexOutOfRange {
            what: "class target",
            index,
            bound,
        }),
        None => Ok(()),
    }
}

fn check_binary(m: &Matrix) -> Result<()> {
    match m.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&value) => Err(Error::NotBinary {
            what: "binary target",
            value,
        }),
        None => Ok(()),
    }
}

/// Mean over the batch of `logsumexp(logits) - logits[target]`.
pub fn cce_loss(tape: &mut Tape, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
    let (rows, cols) = tape.shape(logits);
    if rows == 0 {
        return Err(Error::Empty("cce_loss"));
    }
    if targets.len() != rows {
        return Err(Error::Length {
            what: "cce_loss",
            left: targets.len(),
            right: rows,
        });
    }
    check_classes(targets, cols)?;
    let lse = tape.logsumexp_rows(logits)?;
    let picked = tape.gather(logits, targets)?;
    let per_sample = tape.sub(lse, picked)?;
    tape.mean(per_sample)
}

/// Mean over the batch of `-sum_k [t log p + (1 - t) log(1 - p)]` on
/// post-sigmoid probabilities, with floored logs.
pub fn bce_loss(tape: &mut Tape, probs: NodeId, targets: &Matrix) -> Result<NodeId> {
    let shape = tape.shape(probs);
    if shape != targets.shape() {
        return Err(Error::Shape {
            op: "bce_loss",
            lhs: shape,
            rhs: targets.shape(),
        });
    }
    if shape.0 == 0 {
        return Err(Error::Empty("bce_loss"));
    }
    check_binary(targets)?;
    let t = tape.leaf(targets.clone());
    let not_t = tape.leaf(targets.map(|v| 1.0 - v));
    let log_p = tape.log(probs)?;
    let neg_p = tape.scale(probs, -1.0)?;
    let one_minus_p = tape.add_scalar(neg_p, 1.0)?;
    let log_q = tape.log(one_minus_p)?;
    let pos = tape.mul(t, log_p)?;
    let neg = tape.mul(not_t, log_q)?;
    let both = tape.add(pos, neg)?;
    let total = tape.sum(both)?;
    tape.scale(total, -1.0 / shape.0 as f64)
}

/// Result of a concordance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ccc {
    pub value: f64,
    /// Set when the denominator vanished (both sequences constant and equal).
    pub degenerate: bool,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Length {
            what: "ccc",
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Length {
            what: "ccc needs at least 2 samples",
            left: x.len(),
            right: 2,
        });
    }
    Ok(())
}

/// Concordance correlation coefficient with population (1/n) moments:
/// `2 s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2)`.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<Ccc> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let denom = sxx + syy + (mx - my) * (mx - my);
    if denom < CCC_EPSILON {
        return Ok(Ccc {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Ccc {
        value: 2.0 * sxy / denom,
        degenerate: false,
    })
}

/// Concordance between two `n x 1` nodes, differentiable in both.
/// Returns a constant zero node and `true` when degenerate.
pub fn ccc_node(tape: &mut Tape, x: NodeId, y: NodeId) -> Result<(NodeId, bool)> {
    let (xs, ys) = (tape.shape(x), tape.shape(y));
    if xs != ys || xs.1 != 1 {
        return Err(Error::Shape {
            op: "ccc",
            lhs: xs,
            rhs: ys,
        });
    }
    check_pair(tape.value(x).as_slice(), tape.value(y).as_slice())?;
    let n = xs.0;
    let mx = tape.mean_cols(x)?;
    let my = tape.mean_cols(y)?;
    let mxb = tape.broadcast_rows(mx, n)?;
    let myb = tape.broadcast_rows(my, n)?;
    let dx = tape.sub(x, mxb)?;
    let dy = tape.sub(y, myb)?;
    let dxx = tape.mul(dx, dx)?;
    let dyy = tape.mul(dy, dy)?;
    let dxy = tape.mul(dx, dy)?;
    let vx = tape.mean_cols(dxx)?;
    let vy = tape.mean_cols(dyy)?;
    let cov = tape.mean_cols(dxy)?;
    let dm = tape.sub(mx, my)?;
    let dm2 = tape.mul(dm, dm)?;
    let v = tape.add(vx, vy)?;
    let denom = tape.add(v, dm2)?;
    if tape.scalar(denom) < CCC_EPSILON {
        return Ok((tape.leaf(Matrix::scalar(0.0)), true));
    }
    let num = tape.scale(cov, 2.0)?;
    Ok((tape.div(num, denom)?, false))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CccLoss {
    pub loss: NodeId,
    pub degenerate_valence: bool,
    pub degenerate_arousal: bool,
}

/// `1 - 0.5 (ccc_arousal + ccc_valence)` over `n x 1` prediction nodes.
pub fn ccc_loss(
    tape: &mut Tape,
    pred_valence: NodeId,
    pred_arousal: NodeId,
    label_valence: &[f64],
    label_arousal: &[f64],
) -> Result<CccLoss> {
    let lv = tape.leaf(Matrix::column(label_valence));
    let la = tape.leaf(Matrix::column(label_arousal));
    let (rho_v, degenerate_valence) = ccc_node(tape, pred_valence, lv)?;
    let (rho_a, degenerate_arousal) = ccc_node(tape, pred_arousal, la)?;
    let sum = tape.add(rho_a, rho_v)?;
    let half = tape.scale(sum, -0.5)?;
    let loss = tape.add_scalar(half, 1.0)?;
    Ok(CccLoss {
        loss,
        degenerate_valence,
        degenerate_arousal,
    })
}

/// Mean squared error over all entries.
pub fn mse_loss(tape: &mut Tape, pred: NodeId, labels: &Matrix) -> Result<NodeId> {
    let shape = tape.shape(pred);
    if shape != labels.shape() {
        return Err(Error::Shape {
            op: "mse_loss",
            lhs: shape,
            rhs: labels.shape(),
        });
    }
    let l = tape.leaf(labels.clone());
    let d = tape.sub(pred, l)?;
    let sq = tape.mul(d, d)?;
    tape.mean(sq)
}

/// Per-task labels for one batch; `None` marks a task absent from it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiTaskTargets {
    /// `n x 2` (valence, arousal) in `[-1, 1]`.
    pub va: Option<Matrix>,
    /// `n x K` binary action-unit activations.
    pub aus: Option<Matrix>,
    /// Expression class in `0..7`.
    pub expr: Option<Vec<usize>>,
}

impl MultiTaskTargets {
    pub fn validate(&self) -> Result<()> {
        if self.va.is_none() && self.aus.is_none() && self.expr.is_none() {
            return Err(Error::NoTask);
        }
        if let Some(va) = &self.va {
            if va.cols() != 2 {
                return Err(Error::Shape {
                    op: "va targets",
                    lhs: va.shape(),
                    rhs: (va.rows(), 2),
                });
            }
            if let Some(&value) = va.as_slice().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                return Err(Error::OutOfRange {
                    what: "va target",
                    value,
                    lo: -1.0,
                    hi: 1.0,
                });
            }
        }
        if let Some(aus) = &self.aus {
            check_binary(aus)?;
        }
        if let Some(expr) = &self.expr {
            check_classes(expr, NUM_EXPRESSIONS)?;
        }
        Ok(())
    }
}

/// Head outputs of a multi-task network for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadOutputs {
    /// `n x 2`, valence then arousal.
    pub va: Option<NodeId>,
    /// `n x K` logits (sigmoid is applied inside the loss).
    pub au_logits: Option<NodeId>,
    /// `n x 7` logits.
    pub expr_logits: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VaMode {
    #[default]
    Ccc,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskWeights {
    pub va: f64,
    pub au: f64,
    pub expr: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        Self {
            va: 1.0,
            au: 1.0,
            expr: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskLoss {
    pub total: NodeId,
    pub expr: Option<NodeId>,
    pub au: Option<NodeId>,
    pub va: Option<NodeId>,
    pub degenerate_va: bool,
}

fn missing_head(what: &'static str) -> Error {
    Error::Config(alloc::format!(
        "{what} targets present but the network has no {what} head"
    ))
}

/// Sum of the losses of every task present in `targets`, in the order
/// expression, action units, valence/arousal.
pub fn multitask_loss(
    tape: &mut Tape,
    outputs: &HeadOutputs,
    targets: &MultiTaskTargets,
    va_mode: VaMode,
    weights: &TaskWeights,
) -> Result<MultiTaskLoss> {
    targets.validate()?;
    let weighted = |tape: &mut Tape, node: NodeId, w: f64| -> Result<NodeId> {
        if w == 1.0 {
            Ok(node)
        } else {
            tape.scale(node, w)
        }
    };

    let expr = match &targets.expr {
        Some(classes) => {
            let logits = outputs.expr_logits.ok_or_else(|| missing_head("expr"))?;
            Some(cce_loss(tape, logits, classes)?)
        }
        None => None,
    };
    let au = match &targets.aus {
        Some(aus) => {
            let logits = outputs.au_logits.ok_or_else(|| missing_head("au"))?;
            let probs = tape.sigmoid(logits)?;
            Some(bce_loss(tape, probs, aus)?)
        }
        None => None,
    };
    let mut degenerate_va = false;
    let va = match &targets.va {
        Some(labels) => {
            let pred = outputs.va.ok_or_else(|| missing_head("va"))?;
            Some(match va_mode {
                VaMode::Mse => mse_loss(tape, pred, labels)?,
                VaMode::Ccc => {
                    let n = tape.shape(pred).0;
                    let pv = tape.slice(pred, 0..n, 0..1)?;
                    let pa = tape.slice(pred, 0..n, 1..2)?;
                    let l = ccc_loss(tape, pv, pa, &labels.col(0), &labels.col(1))?;
                    degenerate_va = l.degenerate_valence || l.degenerate_arousal;
                    l.loss
                }
            })
        }
        None => None,
    };

    let mut total: Option<NodeId> = None;
    for (node, w) in [(expr, weights.expr), (au, weights.au), (va, weights.va)] {
        let Some(node) = node else { continue };
        let node = weighted(tape, node, w)?;
        total = Some(match total {
            None => node,
            Some(acc) => tape.add(acc, node)?,
        });
    }
    Ok(MultiTaskLoss {
        total: total.ok_or(Error::NoTask)?,
        expr,
        au,
        va,
        degenerate_va,
    })
}

fn check_nonzero_rows(m: &Matrix, what: &'static str) -> Result<()> {
    for r in 0..m.rows() {
        if m.row(r).iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector(what));
        }
    }
    Ok(())
}

/// Scaled cosine logits between l2-normalized embeddings (`n x d`) and
/// l2-normalized weight columns (`d x C`). With `targets`, each row's
/// target angle is increased by `margin` before scaling.
pub fn arcface_logits(
    tape: &mut Tape,
    embeddings: NodeId,
    weights: NodeId,
    scale: f64,
    margin: f64,
    targets: Option<&[usize]>,
) -> Result<NodeId> {
    let (es, ws) = (tape.shape(embeddings), tape.shape(weights));
    if es.1 != ws.0 {
        return Err(Error::Shape {
            op: "arcface_logits",
            lhs: es,
            rhs: ws,
        });
    }
    if es.1 < 2 {
        return Err(Error::Config(alloc::format!(
            "embedding dimension {} < 2",
            es.1
        )));
    }
    if !(scale > 0.0) || !(margin >= 0.0) {
        return Err(Error::Config(alloc::format!(
            "arcface scale {scale} / margin {margin} out of range"
        )));
    }
    check_nonzero_rows(tape.value(embeddings), "arcface embedding")?;
    check_nonzero_rows(&tape.value(weights).transpose(), "arcface weight column")?;

    let e = tape.l2_normalize_rows(embeddings)?;
    let wt = tape.transpose(weights)?;
    let wt = tape.l2_normalize_rows(wt)?;
    let w = tape.transpose(wt)?;
    let mut cos = tape.matmul(e, w)?;
    if let Some(t) = targets {
        check_classes(t, ws.1)?;
        cos = tape.angular_margin(cos, t, margin)?;
    }
    tape.scale(cos, scale)
}

/// Cross entropy over margin-adjusted, scaled cosine logits.
pub fn arcface_loss(
    tape: &mut Tape,
    embeddings: NodeId,
    weights: NodeId,
    scale: f64,
    margin: f64,
    targets: &[usize],
) -> Result<NodeId> {
    let logits = arcface_logits(tape, embeddings, weights, scale, margin, Some(targets))?;
    cce_loss(tape, logits, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn eval(f: impl FnOnce(&mut Tape) -> Result<NodeId>) -> f64 {
        let mut t = Tape::new();
        let n = f(&mut t).unwrap();
        t.scalar(n)
    }

    #[test]
    fn cce_uniform_logits_is_ln7() {
        let v = eval(|t| {
            let l = t.leaf(Matrix::zeros(3, 7));
            cce_loss(t, l, &[0, 3, 6])
        });
        assert!((v - libm::log(7.0)).abs() < 1e-12);
        assert!((v - 1.945910).abs() < 1e-6);
    }

    #[test]
    fn cce_saturated_correct_is_near_zero() {
        let mut row = [0.0; 7];
        row[4] = 50.0;
        let v = eval(|t| {
            let l = t.leaf(Matrix::row_vector(&row));
            cce_loss(t, l, &[4])
        });
        assert!(v < 1e-9);
    }

    #[test]
    fn cce_rejects_bad_index() {
        let mut t = Tape::new();
        let l = t.leaf(Matrix::zeros(1, 7));
        assert!(matches!(
            cce_loss(&mut t, l, &[7]),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn bce_half_probability_is_k_ln2() {
        let v = eval(|t| {
            let p = t.leaf(Matrix::filled(2, 8, 0.5));
            bce_loss(t, p, &Matrix::from_fn(2, 8, |r, c| ((r + c) % 2) as f64))
        });
        assert!((v - 8.0 * libm::log(2.0)).abs() < 1e-12);
        assert!((v - 5.545177).abs() < 1e-6);
    }

    #[test]
    fn bce_perfect_prediction_is_zero() {
        let targets = Matrix::from_fn(3, 8, |r, c| ((r * c) % 2) as f64);
        let v = eval(|t| {
            let p = t.leaf(targets.clone());
            bce_loss(t, p, &targets)
        });
        assert!(v < 1e-9);
    }

    #[test]
    fn bce_rejects_non_binary_targets() {
        let mut t = Tape::new();
        let p = t.leaf(Matrix::filled(1, 2, 0.5));
        let err = bce_loss(&mut t, p, &Matrix::row_vector(&[0.0, 0.5])).unwrap_err();
        assert!(matches!(err, Error::NotBinary { .. }));
    }

    #[test]
    fn ccc_identity_and_constant_cases() {
        let x = [0.1, -0.4, 0.7, 0.2];
        assert_eq!(ccc(&x, &x).unwrap().value, 1.0);
        let c = ccc(&[0.3; 4], &x).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(!c.degenerate);
        let d = ccc(&[0.3; 4], &[0.3; 4]).unwrap();
        assert_eq!(
            d,
            Ccc {
                value: 0.0,
                degenerate: true
            }
        );
    }

    #[test]
    fn ccc_hand_example() {
        // means 0.5 / 0.4; var_x = 0.32/3, var_y = 0.08/3, cov = 0.16/3
        let expected = 2.0 * (0.16 / 3.0) / (0.32 / 3.0 + 0.08 / 3.0 + 0.01);
        let v = ccc(&[0.1, 0.5, 0.9], &[0.2, 0.4, 0.6]).unwrap().value;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert!((v - 0.32 / 0.43).abs() < 1e-12);
    }

    #[test]
    fn ccc_rejects_short_or_unequal() {
        assert!(ccc(&[1.0], &[1.0]).is_err());
        assert!(ccc(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ccc_node_matches_plain() {
        let x = [0.1, -0.4, 0.7, 0.2, 0.05];
        let y = [0.3, -0.1, 0.2, 0.25, -0.6];
        let mut t = Tape::new();
        let a = t.leaf(Matrix::column(&x));
        let b = t.leaf(Matrix::column(&y));
        let (n, deg) = ccc_node(&mut t, a, b).unwrap();
        assert!(!deg);
        assert!((t.scalar(n) - ccc(&x, &y).unwrap().value).abs() < 1e-15);
    }

    #[test]
    fn ccc_loss_perfect_and_half() {
        let v = [0.1, 0.5, -0.3];
        let a = [0.4, -0.2, 0.0];
        let mut t = Tape::new();
        let pv = t.leaf(Matrix::column(&v));
        let pa = t.leaf(Matrix::column(&a));
        let l = ccc_loss(&mut t, pv, pa, &v, &a).unwrap();
        assert!(t.scalar(l.loss).abs() < 1e-15);

        // valence perfect, arousal prediction constant -> rho_a = 0
        let mut t = Tape::new();
        let pv = t.leaf(Matrix::column(&v));
        let pa = t.leaf(Matrix::column(&[0.2; 3]));
        let l = ccc_loss(&mut t, pv, pa, &v, &a).unwrap();
        assert!((t.scalar(l.loss) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mse_cases() {
        let labels = Matrix::from_fn(4, 2, |r, c| r as f64 * 0.1 - c as f64 * 0.2);
        let v = eval(|t| {
            let p = t.leaf(labels.clone());
            mse_loss(t, p, &labels)
        });
        assert_eq!(v, 0.0);
        let v = eval(|t| {
            let p = t.leaf(labels.map(|x| x + 0.5));
            mse_loss(t, p, &labels)
        });
        assert!((v - 0.25).abs() < 1e-15);
        let mut t = Tape::new();
        let p = t.leaf(Matrix::zeros(4, 3));
        assert!(matches!(
            mse_loss(&mut t, p, &labels),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn multitask_single_task_is_that_loss() {
        let logits = Matrix::from_fn(3, 7, |r, c| (r as f64 - c as f64) * 0.37);
        let classes = vec![1, 5, 2];
        let mut t = Tape::new();
        let l = t.leaf(logits.clone());
        let out = HeadOutputs {
            expr_logits: Some(l),
            ..Default::default()
        };
        let targets = MultiTaskTargets {
            expr: Some(classes.clone()),
            ..Default::default()
        };
        let mt =
            multitask_loss(&mut t, &out, &targets, VaMode::Ccc, &TaskWeights::default()).unwrap();
        let direct = eval(|t| {
            let l = t.leaf(logits.clone());
            cce_loss(t, l, &classes)
        });
        assert_eq!(t.scalar(mt.total).to_bits(), direct.to_bits());
    }

    #[test]
    fn multitask_requires_a_task() {
        let mut t = Tape::new();
        let err = multitask_loss(
            &mut t,
            &HeadOutputs::default(),
            &MultiTaskTargets::default(),
            VaMode::Ccc,
            &TaskWeights::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::NoTask);
    }

    #[test]
    fn multitask_validates_va_range() {
        let targets = MultiTaskTargets {
            va: Some(Matrix::from_rows(&[&[0.0, 1.5], &[0.0, 0.0]]).unwrap()),
            ..Default::default()
        };
        assert!(matches!(targets.validate(), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn arcface_aligned_target_logit() {
        // embedding along the target column: theta = 0, logit = s cos(m)
        let w = Matrix::from_fn(7, 7, |r, c| if r == c { 1.0 } else { 0.0 });
        let mut e = Matrix::zeros(1, 7);
        e[(0, 3)] = 2.5;
        let mut t = Tape::new();
        let en = t.leaf(e);
        let wn = t.leaf(w);
        let logits = arcface_logits(&mut t, en, wn, 64.0, 0.5, Some(&[3])).unwrap();
        let v = t.value(logits)[(0, 3)];
        assert!((v - 64.0 * libm::cos(0.5)).abs() < 1e-12);
        assert!((v - 56.1653).abs() < 1e-3);
    }

    #[test]
    fn arcface_rejects_zero_embedding() {
        let mut t = Tape::new();
        let en = t.leaf(Matrix::zeros(1, 4));
        let wn = t.leaf(Matrix::filled(4, 7, 1.0));
        let err = arcface_logits(&mut t, en, wn, 1.0, 0.0, None).unwrap_err();
        assert_eq!(err, Error::ZeroVector("arcface embedding"));
    }

    #[test]
    fn arcface_margin_beyond_pi_follows_formula() {
        // theta = pi/2, m = 3: cos(pi/2 + 3) as written, no fallback
        let w = Matrix::identity(2);
        let mut t = Tape::new();
        let en = t.leaf(Matrix::row_vector(&[0.0, 1.0]));
        let wn = t.leaf(w);
        let logits = arcface_logits(&mut t, en, wn, 1.0, 3.0, Some(&[0])).unwrap();
        let expected = libm::cos(core::f64::consts::FRAC_PI_2 + 3.0);
        assert!((t.value(logits)[(0, 0)] - expected).abs() < 1e-12);
    }
}
