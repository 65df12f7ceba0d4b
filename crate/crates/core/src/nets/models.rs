//! Toy networks with the topologies of the multi-task, recurrent, audio-visual
//! and ArcFace models: dense layers stand in for the convolutional backbones.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::gru::{gru_forward, BoundGru, GruStack};
use super::heads::{
    av_fusion_forward, multitask_forward, time_distributed, ArcFaceHead, BoundArcFace, BoundHeads,
    MultiTaskHead,
};
use super::layers::{
    dropout_apply, prefixed, stack_forward, Activation, BoundDense, DenseLayer, DenseStack,
    Parameters,
};
use super::train::{Model, StepContext};
use crate::error::Result;
use crate::losses::HeadOutputs;
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Dense backbone feeding the three task heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskNet {
    pub backbone: DenseStack,
    pub heads: MultiTaskHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundMultiTaskNet {
    pub backbone: Vec<BoundDense>,
    pub heads: BoundHeads,
}

/// Inference outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub va: Matrix,
    pub au_probs: Matrix,
    pub expr_logits: Matrix,
}

impl Predictions {
    pub fn au_active(&self) -> Vec<Vec<bool>> {
        (0..self.au_probs.rows())
            .map(|r| self.au_probs.row(r).iter().map(|&p| p >= 0.5).collect())
            .collect()
    }

    pub fn expr(&self) -> Vec<usize> {
        self.expr_logits.argmax_rows()
    }
}

impl MultiTaskNet {
    /// `widths = [input, hidden..., features]`, ReLU throughout.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], au_count: usize, rng: &mut R) -> Self {
        let backbone = DenseStack::new(widths, Activation::Relu, Activation::Relu, rng);
        let heads = MultiTaskHead::new(backbone.outputs(), au_count, rng);
        Self { backbone, heads }
    }

    /// Head outputs; dropout on the shared features when `ctx` is given.
    pub fn forward(
        tape: &mut Tape,
        bound: &BoundMultiTaskNet,
        x: NodeId,
        ctx: Option<&mut StepContext>,
    ) -> Result<HeadOutputs> {
        let mut features = stack_forward(tape, &bound.backbone, x)?;
        if let Some(ctx) = ctx {
            features = dropout_apply(tape, features, ctx.dropout, &mut ctx.rng, true)?;
        }
        multitask_forward(tape, &bound.heads, features)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Predictions> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, &mut Vec::new());
        let input = tape.leaf(x.clone());
        let out = Self::forward(&mut tape, &bound, input, None)?;
        let au = out.au_logits.expect("all heads present");
        let probs = tape.sigmoid(au)?;
        Ok(Predictions {
            va: tape.value(out.va.expect("all heads present")).clone(),
            au_probs: tape.value(probs).clone(),
            expr_logits: tape
                .value(out.expr_logits.expect("all heads present"))
                .clone(),
        })
    }
}

impl Parameters for MultiTaskNet {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = prefixed("backbone", self.backbone.named_params());
        v.extend(prefixed("heads", self.heads.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.backbone.params_mut();
        v.extend(self.heads.params_mut());
        v
    }
}

impl Model for MultiTaskNet {
    type Bound = BoundMultiTaskNet;

    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundMultiTaskNet {
        BoundMultiTaskNet {
            backbone: self.backbone.bind(tape, ids),
            heads: self.heads.bind(tape, ids),
        }
    }
}

/// Dense embedding network trained through an ArcFace head.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcFaceNet {
    pub backbone: DenseStack,
    pub head: ArcFaceHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundArcFaceNet {
    pub backbone: Vec<BoundDense>,
    pub head: BoundArcFace,
}

impl ArcFaceNet {
    /// `widths = [input, hidden..., embedding]`; the embedding layer is linear.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        scale: f64,
        margin: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let backbone = DenseStack::new(widths, Activation::Relu, Activation::Linear, rng);
        let head = ArcFaceHead::new(backbone.outputs(), scale, margin, rng)?;
        Ok(Self { backbone, head })
    }

    pub fn embed_node(tape: &mut Tape, bound: &BoundArcFaceNet, x: NodeId) -> Result<NodeId> {
        stack_forward(tape, &bound.backbone, x)
    }

    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, &mut Vec::new());
        let input = tape.leaf(x.clone());
        let e = Self::embed_node(&mut tape, &bound, input)?;
        Ok(tape.value(e).clone())
    }
}

impl Parameters for ArcFaceNet {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = prefixed("backbone", self.backbone.named_params());
        v.extend(prefixed("arcface", self.head.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.backbone.params_mut();
        v.extend(self.head.params_mut());
        v
    }
}

impl Model for ArcFaceNet {
    type Bound = BoundArcFaceNet;

    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundArcFaceNet {
        BoundArcFaceNet {
            backbone: self.backbone.bind(tape, ids),
            head: self.head.bind(tape, ids),
        }
    }
}

/// fc -> stacked GRU -> per-timestep task heads.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentMultiTaskNet {
    pub fc: DenseLayer,
    pub gru: GruStack,
    pub heads: MultiTaskHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRecurrentNet {
    pub fc: BoundDense,
    pub gru: BoundGru,
    pub heads: BoundHeads,
}

impl RecurrentMultiTaskNet {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        fc: usize,
        hidden: usize,
        layers: usize,
        au_count: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            fc: DenseLayer::new(inputs, fc, Activation::Relu, rng),
            gru: GruStack::new(fc, hidden, layers, rng),
            heads: MultiTaskHead::new(hidden, au_count, rng),
        }
    }

    /// Head outputs at every timestep of `sequence` (each `batch x inputs`).
    pub fn forward(
        tape: &mut Tape,
        bound: &BoundRecurrentNet,
        sequence: &[NodeId],
    ) -> Result<Vec<HeadOutputs>> {
        let features = time_distributed(tape, &bound.fc, sequence)?;
        let states = gru_forward(tape, &bound.gru, &features, None)?;
        states
            .outputs
            .iter()
            .map(|&h| multitask_forward(tape, &bound.heads, h))
            .collect()
    }
}

impl Parameters for RecurrentMultiTaskNet {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = prefixed("fc", self.fc.named_params());
        v.extend(prefixed("gru", self.gru.named_params()));
        v.extend(prefixed("heads", self.heads.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.fc.params_mut();
        v.extend(self.gru.params_mut());
        v.extend(self.heads.params_mut());
        v
    }
}

impl Model for RecurrentMultiTaskNet {
    type Bound = BoundRecurrentNet;

    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundRecurrentNet {
        BoundRecurrentNet {
            fc: self.fc.bind(tape, ids),
            gru: self.gru.bind(tape, ids),
            heads: self.heads.bind(tape, ids),
        }
    }
}

/// Separate visual and audio fc streams, concatenated per timestep and fed
/// through a fusion GRU, with task heads on top.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioVisualNet {
    pub visual: DenseLayer,
    pub audio: DenseLayer,
    pub fusion: GruStack,
    pub heads: MultiTaskHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundAudioVisualNet {
    pub visual: BoundDense,
    pub audio: BoundDense,
    pub fusion: BoundGru,
    pub heads: BoundHeads,
}

impl AudioVisualNet {
    /// Each stream produces `stream` features; the fusion GRU reads `2 * stream`.
    pub fn new<R: Rng + ?Sized>(
        visual_in: usize,
        audio_in: usize,
        stream: usize,
        hidden: usize,
        layers: usize,
        au_count: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            visual: DenseLayer::new(visual_in, stream, Activation::Relu, rng),
            audio: DenseLayer::new(audio_in, stream, Activation::Relu, rng),
            fusion: GruStack::new(2 * stream, hidden, layers, rng),
            heads: MultiTaskHead::new(hidden, au_count, rng),
        }
    }

    pub fn forward(
        tape: &mut Tape,
        bound: &BoundAudioVisualNet,
        visual: &[NodeId],
        audio: &[NodeId],
    ) -> Result<Vec<HeadOutputs>> {
        let v = time_distributed(tape, &bound.visual, visual)?;
        let a = time_distributed(tape, &bound.audio, audio)?;
        let fused = av_fusion_forward(tape, &v, &a, &bound.fusion)?;
        fused
            .outputs
            .iter()
            .map(|&h| multitask_forward(tape, &bound.heads, h))
            .collect()
    }
}

impl Parameters for AudioVisualNet {
    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v = prefixed("visual", self.visual.named_params());
        v.extend(prefixed("audio", self.audio.named_params()));
        v.extend(prefixed("fusion", self.fusion.named_params()));
        v.extend(prefixed("heads", self.heads.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.visual.params_mut();
        v.extend(self.audio.params_mut());
        v.extend(self.fusion.params_mut());
        v.extend(self.heads.params_mut());
        v
    }
}

impl Model for AudioVisualNet {
    type Bound = BoundAudioVisualNet;

    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> BoundAudioVisualNet {
        BoundAudioVisualNet {
            visual: self.visual.bind(tape, ids),
            audio: self.audio.bind(tape, ids),
            fusion: self.fusion.bind(tape, ids),
            heads: self.heads.bind(tape, ids),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_order<M: Model>(m: &M) {
        let mut t = Tape::new();
        let mut ids = Vec::new();
        m.bind(&mut t, &mut ids);
        let named = m.named_params();
        assert_eq!(ids.len(), named.len());
        for (id, (_, mat)) in ids.iter().zip(&named) {
            assert_eq!(t.value(*id), *mat);
        }
    }

    #[test]
    fn bind_order_matches_named_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        check_order(&MultiTaskNet::new(&[4, 6, 5], 8, &mut rng));
        check_order(&ArcFaceNet::new(&[2, 6, 4], 16.0, 0.5, &mut rng).unwrap());
        check_order(&RecurrentMultiTaskNet::new(4, 5, 3, 2, 8, &mut rng));
        check_order(&AudioVisualNet::new(4, 3, 5, 3, 2, 8, &mut rng));
    }

    #[test]
    fn param_names_are_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = AudioVisualNet::new(4, 3, 5, 3, 2, 8, &mut rng);
        let mut names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        let before = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), before);
        assert!(names.iter().any(|n| n == "fusion.1.u_candidate"));
    }

    #[test]
    fn load_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = MultiTaskNet::new(&[3, 4], 8, &mut rng);
        let mut b = MultiTaskNet::new(&[3, 4], 8, &mut rng);
        assert_ne!(a, b);
        let lookup = |name: &str| {
            a.named_params()
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m.clone())
        };
        b.load_params(&lookup).unwrap();
        assert_eq!(a, b);
    }
}
