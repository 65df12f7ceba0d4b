//! Shared constants and training defaults.

/// Seven basic expression classes (six basic emotions plus neutral).
pub const NUM_EXPRESSIONS: usize = 7;

/// FACS action units carried by the annotation set.
pub const AU_IDS: [u8; 8] = [1, 2, 4, 6, 12, 15, 20, 25];

pub const DEFAULT_AU_COUNT: usize = AU_IDS.len();

pub const DEFAULT_DROPOUT: f64 = 0.4;

/// Learning rates per network family.
pub mod learning_rate {
    pub const CNN: f64 = 1e-4;
    pub const CNN_RNN: f64 = 1e-5;
    pub const AV_CNN_RNN: f64 = 1e-5;
    pub const ARCFACE: f64 = 1e-4;
}

/// Batch sizes per network family.
pub mod batch_size {
    pub const CNN: usize = 256;
    pub const CNN_RNN: usize = 10;
    pub const AV_CNN_RNN: usize = 5;
    pub const ARCFACE: usize = 300;
}

pub const DEFAULT_SEQUENCE_LENGTH: usize = 90;

pub const GRU_HIDDEN: usize = 128;
pub const GRU_LAYERS: usize = 2;

/// ArcFace search grids and defaults.
pub mod arcface {
    pub const EMBEDDING_DIMS: [usize; 2] = [32, 512];
    pub const SCALES: [f64; 2] = [32.0, 64.0];
    pub const MARGINS: [f64; 7] = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    /// The two best margins reported for the two ArcFace networks; which
    /// network each belongs to is not stated, so both are exposed.
    pub const MARGIN_PRESETS: [f64; 2] = [0.1, 1.0];
    pub const DEFAULT_DIM: usize = 32;
    pub const DEFAULT_SCALE: f64 = 64.0;
    pub const DEFAULT_MARGIN: f64 = MARGIN_PRESETS[0];
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const SGD_MOMENTUM: f64 = 0.9;
