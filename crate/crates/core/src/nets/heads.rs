use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::gru::{gru_forward, BoundGru, GruOutput};
use super::layers::{
    dense_forward, glorot_uniform, prefixed, Activation, BoundDense, DenseLayer, Parameters,
};
use crate::config::{arcface, DEFAULT_AU_COUNT, NUM_EXPRESSIONS};
use crate::error::{Error, Result};
use crate::losses::{self, HeadOutputs};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Three linear heads reading one shared feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskHead {
    pub va: DenseLayer,
    pub au: DenseLayer,
    pub expr: DenseLayer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundHeads {
    pub va: BoundDense,
    pub au: BoundDense,
    pub expr: BoundDense,
}

impl MultiTaskHead {
    pub fn new<R: Rng + ?Sized>(features: usize, au_count: usize, rng: &mut R) -> Self {
        Self {
            va: DenseLayer::new(features, 2, Activation::Linear, rng),
            au: DenseLayer::new(features, au_count, Activation::Linear, rng),
            expr: DenseLayer::new(features, NUM_EXPRESSIONS, Activation::Linear, rng),
        }
    }

    pub fn with_default_aus<R: Rng + ?Sized>(features: usize, rng: &mut R) -> Self {
        Self::new(features, DEFAULT_AU_COUNT, rng)
    }

    pub fn zeros(features: usize, au_count: usize) -> Self {
        Self {
            va: DenseLayer::zeros(features, 2, Activation::Linear),
            au: DenseLayer::zeros(features, au_count, Activation::Linear),
            expr: DenseLayer::zeros(features, NUM_EXPRESSIONS, Activation::Linear),
        }
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundHeads {
        BoundHeads {
            va: self.va.bind(tape, ids),
            au: self.au.bind(tape, ids),
            expr: self.expr.bind(tape, ids),
        }
    }
}

impl Parameters for MultiTaskHead {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = prefixed("va", self.va.named_params());
        v.extend(prefixed("au", self.au.named_params()));
        v.extend(prefixed("expr", self.expr.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.va.params_mut();
        v.extend(self.au.params_mut());
        v.extend(self.expr.params_mut());
        v
    }
}

/// VA pair, AU logits and expression logits from the same features.
pub fn multitask_forward(
    tape: &mut Tape,
    heads: &BoundHeads,
    features: NodeId,
) -> Result<HeadOutputs> {
    Ok(HeadOutputs {
        va: Some(dense_forward(tape, &heads.va, features)?),
        au_logits: Some(dense_forward(tape, &heads.au, features)?),
        expr_logits: Some(dense_forward(tape, &heads.expr, features)?),
    })
}

/// Class-weight matrix `d x 7` with scale `s` and additive angular margin `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcFaceHead {
    pub weights: Matrix,
    pub scale: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundArcFace {
    pub weights: NodeId,
    pub scale: f64,
    pub margin: f64,
}

impl ArcFaceHead {
    pub fn new<R: Rng + ?Sized>(dim: usize, scale: f64, margin: f64, rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(alloc::format!(
                "embedding dimension {dim} < 2"
            )));
        }
        if !(scale > 0.0) || !(margin >= 0.0) {
            return Err(Error::Config(alloc::format!(
                "arcface scale {scale} / margin {margin} out of range"
            )));
        }
        Ok(Self {
            weights: glorot_uniform(dim, NUM_EXPRESSIONS, rng),
            scale,
            margin,
        })
    }

    pub fn with_defaults<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(
            arcface::DEFAULT_DIM,
            arcface::DEFAULT_SCALE,
            arcface::DEFAULT_MARGIN,
            rng,
        )
        .expect("defaults are valid")
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundArcFace {
        let weights = tape.leaf(self.weights.clone());
        ids.push(weights);
        BoundArcFace {
            weights,
            scale: self.scale,
            margin: self.margin,
        }
    }
}

impl Parameters for ArcFaceHead {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        alloc::vec![("weights".into(), &self.weights)]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        alloc::vec![&mut self.weights]
    }
}

impl BoundArcFace {
    /// Training logits when `targets` is given, inference logits otherwise.
    pub fn logits(
        &self,
        tape: &mut Tape,
        embeddings: NodeId,
        targets: Option<&[usize]>,
    ) -> Result<NodeId> {
        losses::arcface_logits(
            tape,
            embeddings,
            self.weights,
            self.scale,
            self.margin,
            targets,
        )
    }

    pub fn loss(&self, tape: &mut Tape, embeddings: NodeId, targets: &[usize]) -> Result<NodeId> {
        losses::arcface_loss(
            tape,
            embeddings,
            self.weights,
            self.scale,
            self.margin,
            targets,
        )
    }
}

/// Per-timestep `[visual | audio]` concatenation fed through the fusion GRU.
/// Stream order matters: the fusion weights see visual features first.
pub fn av_fusion_forward(
    tape: &mut Tape,
    visual: &[NodeId],
    audio: &[NodeId],
    fusion: &BoundGru,
) -> Result<GruOutput> {
    if visual.len() != audio.len() {
        return Err(Error::Length {
            what: "av_fusion_forward sequence",
            left: visual.len(),
            right: audio.len(),
        });
    }
    let fused: Vec<NodeId> = visual
        .iter()
        .zip(audio)
        .map(|(&v, &a)| tape.concat_cols(v, a))
        .collect::<Result<_>>()?;
    gru_forward(tape, fusion, &fused, None)
}

/// Apply a dense layer to every timestep.
pub fn time_distributed(
    tape: &mut Tape,
    layer: &BoundDense,
    sequence: &[NodeId],
) -> Result<Vec<NodeId>> {
    sequence
        .iter()
        .map(|&x| dense_forward(tape, layer, x))
        .collect()
}
