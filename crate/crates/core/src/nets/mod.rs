//! Toy-scale network blocks: dense layers, stacked GRUs, multi-task and
//! ArcFace heads, audio-visual fusion, optimizers, and a seeded training loop.

mod gru;
mod heads;
mod layers;
mod models;
mod optim;
mod train;

pub use gru::{
    gru_cell_step, gru_forward, BoundGru, BoundGruCell, GruCell, GruOutput, GruStack, GruStep,
};
pub use heads::{
    av_fusion_forward, multitask_forward, time_distributed, ArcFaceHead, BoundArcFace, BoundHeads,
    MultiTaskHead,
};
pub use layers::{
    dense_forward, dropout_apply, glorot_uniform, stack_forward, Activation, BoundDense,
    DenseLayer, DenseStack, Parameters,
};
pub use models::{
    ArcFaceNet, AudioVisualNet, BoundArcFaceNet, BoundAudioVisualNet, BoundMultiTaskNet,
    BoundRecurrentNet, MultiTaskNet, Predictions, RecurrentMultiTaskNet,
};
pub use optim::{adam_step, sgd_momentum_step, AdamConfig, Optimizer, OptimizerKind};
pub use train::{train, BatchSource, Model, StepContext, TrainConfig, TrainTrace};
