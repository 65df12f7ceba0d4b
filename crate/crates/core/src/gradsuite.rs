//! Finite-difference verification of every loss and network block at
//! seeded random points.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::NUM_EXPRESSIONS;
use crate::error::{Error, Result};
use crate::gradcheck::{max_relative_error, numeric_gradient, GradCheck, DEFAULT_STEP};
use crate::losses::{self, HeadOutputs, MultiTaskTargets, TaskWeights, VaMode};
use crate::matrix::Matrix;
use crate::nets::{
    dense_forward, gru_forward, multitask_forward, Activation, ArcFaceHead, AudioVisualNet,
    DenseLayer, GruStack, Model, MultiTaskHead, Parameters, RecurrentMultiTaskNet,
};
use crate::synthetic::normal_matrix;
use crate::tape::{NodeId, Tape};

/// Pass threshold on the max relative error.
pub const TOLERANCE: f64 = 1e-5;

/// Random points per item.
pub const DEFAULT_POINTS: usize = 10;

/// ArcFace settings for the checks.
pub const CHECK_SCALE: f64 = crate::config::arcface::DEFAULT_SCALE;
pub const CHECK_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteItem {
    pub name: &'static str,
    pub description: &'static str,
}

pub const ITEMS: &[SuiteItem] = &[
    SuiteItem {
        name: "cce",
        description: "categorical cross entropy over 7 expression logits",
    },
    SuiteItem {
        name: "bce",
        description: "binary cross entropy over 8 AU probabilities",
    },
    SuiteItem {
        name: "ccc",
        description: "1 - mean concordance correlation of valence and arousal",
    },
    SuiteItem {
        name: "mse",
        description: "mean squared error on valence/arousal",
    },
    SuiteItem {
        name: "arcface",
        description: "additive angular margin loss on normalized embeddings",
    },
    SuiteItem {
        name: "multitask",
        description: "sum of expression, AU and VA losses",
    },
    SuiteItem {
        name: "dense",
        description: "affine layer with tanh activation",
    },
    SuiteItem {
        name: "gru",
        description: "2-layer GRU over a length-5 sequence",
    },
    SuiteItem {
        name: "multitask_heads",
        description: "VA, AU and expression heads on shared features",
    },
    SuiteItem {
        name: "arcface_head",
        description: "ArcFace weights through normalization and margin",
    },
    SuiteItem {
        name: "recurrent_net",
        description: "fc, 2-layer GRU and task heads per timestep",
    },
    SuiteItem {
        name: "av_fusion",
        description: "audio and visual streams fused by a 2-layer GRU",
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub points: usize,
    pub step: f64,
    /// Item whose analytic gradient is deliberately corrupted.
    pub fault: Option<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            points: DEFAULT_POINTS,
            step: DEFAULT_STEP,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemReport {
    pub name: &'static str,
    pub description: &'static str,
    pub max_rel_error: f64,
    pub points: usize,
    /// Point index with the largest error.
    pub worst_point: usize,
}

impl ItemReport {
    pub fn passes(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

#[derive(Clone)]
struct NoParams;

impl Parameters for NoParams {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        Vec::new()
    }
}

type LossFn<'a, B> = Box<dyn Fn(&mut Tape, &B, &[NodeId]) -> Result<NodeId> + 'a>;

/// Gradient check over a block's parameters and the data inputs together.
fn check_block<P, B>(
    block: &P,
    data: &[Matrix],
    bind: impl Fn(&P, &mut Tape, &mut Vec<NodeId>) -> B,
    loss: LossFn<'_, B>,
    h: f64,
    fault: bool,
) -> Result<GradCheck>
where
    P: Parameters + Clone,
{
    let run = |params: Option<&[Matrix]>,
               data: &[Matrix],
               with_grad: bool|
     -> Result<(f64, Vec<Matrix>)> {
        let mut b = block.clone();
        if let Some(params) = params {
            for (slot, m) in b.params_mut().into_iter().zip(params) {
                *slot = m.clone();
            }
        }
        let mut tape = Tape::new();
        let mut ids = Vec::new();
        let bound = bind(&b, &mut tape, &mut ids);
        ids.extend(data.iter().map(|m| tape.leaf(m.clone())));
        let node = loss(&mut tape, &bound, &ids[ids.len() - data.len()..])?;
        let value = tape.scalar(node);
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(node)?;
        let out = ids
            .iter()
            .map(|&id| {
                let (r, c) = tape.shape(id);
                grads
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(r, c))
            })
            .collect();
        Ok((value, out))
    };

    let params: Vec<Matrix> = block
        .named_params()
        .into_iter()
        .map(|(_, m)| m.clone())
        .collect();
    let k = params.len();
    let mut point = params;
    point.extend_from_slice(data);

    let (_, mut analytic) = run(None, data, true)?;
    if fault {
        if let Some(v) = analytic
            .first_mut()
            .and_then(|g| g.as_mut_slice().first_mut())
        {
            *v += 1e-3 * v.abs().max(1.0);
        }
    }
    let numeric = numeric_gradient(&point, h, &|p: &[Matrix]| {
        run(Some(&p[..k]), &p[k..], false).map(|r| r.0)
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn classes(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n)
        .map(|_| rng.random_range(0..NUM_EXPRESSIONS))
        .collect()
}

fn binary(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(
        rows,
        cols,
        |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 },
    )
}

fn full_targets(n: usize, au: usize, rng: &mut ChaCha8Rng) -> MultiTaskTargets {
    MultiTaskTargets {
        va: Some(uniform_matrix(n, 2, -1.0, 1.0, rng)),
        aus: Some(binary(n, au, rng)),
        expr: Some(classes(n, rng)),
    }
}

fn projected_sum(tape: &mut Tape, x: NodeId, weights: &Matrix) -> Result<NodeId> {
    let w = tape.leaf(weights.clone());
    let p = tape.mul(x, w)?;
    tape.sum(p)
}

fn sequence_loss(
    tape: &mut Tape,
    outputs: &[HeadOutputs],
    targets: &[MultiTaskTargets],
) -> Result<NodeId> {
    let mut total: Option<NodeId> = None;
    for (o, t) in outputs.iter().zip(targets) {
        let l = losses::multitask_loss(tape, o, t, VaMode::Ccc, &TaskWeights::default())?.total;
        total = Some(match total {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    total.ok_or(Error::Empty("sequence"))
}

fn check_point(name: &str, rng: &mut ChaCha8Rng, h: f64, fault: bool) -> Result<GradCheck> {
    match name {
        "cce" => {
            let t = classes(4, rng);
            check_block(
                &NoParams,
                &[normal_matrix(4, 7, 1.0, rng)],
                |_, _, _| (),
                Box::new(move |tape, _, x| losses::cce_loss(tape, x[0], &t)),
                h,
                fault,
            )
        }
        "bce" => {
            let t = binary(4, 8, rng);
            let p = uniform_matrix(4, 8, 0.05, 0.95, rng);
            check_block(
                &NoParams,
                &[p],
                |_, _, _| (),
                Box::new(move |tape, _, x| losses::bce_loss(tape, x[0], &t)),
                h,
                fault,
            )
        }
        "ccc" => {
            let labels = uniform_matrix(6, 2, -1.0, 1.0, rng);
            let pred = [normal_matrix(6, 1, 0.5, rng), normal_matrix(6, 1, 0.5, rng)];
            check_block(
                &NoParams,
                &pred,
                |_, _, _| (),
                Box::new(move |tape, _, x| {
                    Ok(losses::ccc_loss(tape, x[0], x[1], &labels.col(0), &labels.col(1))?.loss)
                }),
                h,
                fault,
            )
        }
        "mse" => {
            let labels = uniform_matrix(5, 2, -1.0, 1.0, rng);
            check_block(
                &NoParams,
                &[normal_matrix(5, 2, 0.5, rng)],
                |_, _, _| (),
                Box::new(move |tape, _, x| losses::mse_loss(tape, x[0], &labels)),
                h,
                fault,
            )
        }
        "arcface" => {
            let t = classes(5, rng);
            let data = [normal_matrix(5, 8, 1.0, rng), normal_matrix(8, 7, 1.0, rng)];
            check_block(
                &NoParams,
                &data,
                |_, _, _| (),
                Box::new(move |tape, _, x| {
                    losses::arcface_loss(tape, x[0], x[1], CHECK_SCALE, CHECK_MARGIN, &t)
                }),
                h,
                fault,
            )
        }
        "multitask" => {
            let t = full_targets(5, 8, rng);
            let data = [
                normal_matrix(5, 2, 0.5, rng),
                normal_matrix(5, 8, 1.0, rng),
                normal_matrix(5, 7, 1.0, rng),
            ];
            check_block(
                &NoParams,
                &data,
                |_, _, _| (),
                Box::new(move |tape, _, x| {
                    let out = HeadOutputs {
                        va: Some(x[0]),
                        au_logits: Some(x[1]),
                        expr_logits: Some(x[2]),
                    };
                    Ok(losses::multitask_loss(
                        tape,
                        &out,
                        &t,
                        VaMode::Ccc,
                        &TaskWeights::default(),
                    )?
                    .total)
                }),
                h,
                fault,
            )
        }
        "dense" => {
            let layer = DenseLayer {
                weight: normal_matrix(3, 4, 0.7, rng),
                bias: normal_matrix(1, 4, 0.3, rng),
                activation: Activation::Tanh,
            };
            let proj = normal_matrix(4, 4, 1.0, rng);
            check_block(
                &layer,
                &[normal_matrix(4, 3, 1.0, rng)],
                |l, tape, ids| l.bind(tape, ids),
                Box::new(move |tape, b, x| {
                    let y = dense_forward(tape, b, x[0])?;
                    projected_sum(tape, y, &proj)
                }),
                h,
                fault,
            )
        }
        "gru" => {
            let stack = GruStack::new(3, 4, 2, rng);
            let seq: Vec<Matrix> = (0..5).map(|_| normal_matrix(2, 3, 1.0, rng)).collect();
            let proj: Vec<Matrix> = (0..5).map(|_| normal_matrix(2, 4, 1.0, rng)).collect();
            check_block(
                &stack,
                &seq,
                |s, tape, ids| s.bind(tape, ids),
                Box::new(move |tape, b, x| {
                    let out = gru_forward(tape, b, x, None)?;
                    let mut total = projected_sum(tape, out.outputs[0], &proj[0])?;
                    for (&h, p) in out.outputs.iter().zip(&proj).skip(1) {
                        let s = projected_sum(tape, h, p)?;
                        total = tape.add(total, s)?;
                    }
                    Ok(total)
                }),
                h,
                fault,
            )
        }
        "multitask_heads" => {
            let heads = MultiTaskHead::new(6, 8, rng);
            let t = full_targets(5, 8, rng);
            check_block(
                &heads,
                &[normal_matrix(5, 6, 1.0, rng)],
                |m, tape, ids| m.bind(tape, ids),
                Box::new(move |tape, b, x| {
                    let out = multitask_forward(tape, b, x[0])?;
                    Ok(losses::multitask_loss(
                        tape,
                        &out,
                        &t,
                        VaMode::Ccc,
                        &TaskWeights::default(),
                    )?
                    .total)
                }),
                h,
                fault,
            )
        }
        "arcface_head" => {
            let head = ArcFaceHead::new(8, CHECK_SCALE, CHECK_MARGIN, rng)?;
            let t = classes(5, rng);
            check_block(
                &head,
                &[normal_matrix(5, 8, 1.0, rng)],
                |m, tape, ids| m.bind(tape, ids),
                Box::new(move |tape, b: &crate::nets::BoundArcFace, x| b.loss(tape, x[0], &t)),
                h,
                fault,
            )
        }
        "recurrent_net" => {
            let net = RecurrentMultiTaskNet::new(4, 5, 4, 2, 3, rng);
            let seq: Vec<Matrix> = (0..5).map(|_| normal_matrix(3, 4, 1.0, rng)).collect();
            let targets: Vec<MultiTaskTargets> = (0..5).map(|_| full_targets(3, 3, rng)).collect();
            check_block(
                &net,
                &seq,
                |m, tape, ids| m.bind(tape, ids),
                Box::new(move |tape, b, x| {
                    let out = RecurrentMultiTaskNet::forward(tape, b, x)?;
                    sequence_loss(tape, &out, &targets)
                }),
                h,
                fault,
            )
        }
        "av_fusion" => {
            let net = AudioVisualNet::new(4, 3, 3, 4, 2, 3, rng);
            let mut data: Vec<Matrix> = (0..3).map(|_| normal_matrix(3, 4, 1.0, rng)).collect();
            data.extend((0..3).map(|_| normal_matrix(3, 3, 1.0, rng)));
            let targets: Vec<MultiTaskTargets> = (0..3).map(|_| full_targets(3, 3, rng)).collect();
            check_block(
                &net,
                &data,
                |m, tape, ids| m.bind(tape, ids),
                Box::new(move |tape, b, x| {
                    let out = AudioVisualNet::forward(tape, b, &x[..3], &x[3..])?;
                    sequence_loss(tape, &out, &targets)
                }),
                h,
                fault,
            )
        }
        other => Err(Error::Config(alloc::format!(
            "unknown grad-check item `{other}`"
        ))),
    }
}

/// Check one named item at `cfg.points` random points.
pub fn run_item(name: &str, cfg: &SuiteConfig) -> Result<ItemReport> {
    let (index, item) = ITEMS
        .iter()
        .enumerate()
        .find(|(_, it)| it.name == name)
        .ok_or_else(|| Error::Config(alloc::format!("unknown grad-check item `{name}`")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let fault = cfg.fault.as_deref() == Some(name);
    let mut report = ItemReport {
        name: item.name,
        description: item.description,
        max_rel_error: 0.0,
        points: cfg.points,
        worst_point: 0,
    };
    for p in 0..cfg.points {
        let r = check_point(name, &mut rng, cfg.step, fault)?;
        if r.max_rel_error > report.max_rel_error {
            report.max_rel_error = r.max_rel_error;
            report.worst_point = p;
        }
    }
    Ok(report)
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<ItemReport>> {
    if let Some(f) = &cfg.fault {
        if !ITEMS.iter().any(|it| it.name == f) {
            return Err(Error::Config(alloc::format!(
                "unknown grad-check item `{f}`"
            )));
        }
    }
    ITEMS.iter().map(|it| run_item(it.name, cfg)).collect()
}
