use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },

    #[error("non-finite function value at input {input}, coordinate {coord}")]
    NonFiniteAt { input: usize, coord: usize },

    #[error("loss node must be 1x1, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("{what}: index {index} out of range 0..{bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("{what}: value {value} is not binary")]
    NotBinary { what: &'static str, value: f64 },

    #[error("{what}: value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{what}: length mismatch {left} vs {right}")]
    Length {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("{0}: zero vector")]
    ZeroVector(&'static str),

    #[error("no task present in batch")]
    NoTask,

    #[error("classes without samples: {0:?}")]
    MissingClasses(Vec<usize>),

    #[error("frame alignment mismatch in video {video}: track {track} has frame {found:?}, expected {expected:?}")]
    Misaligned {
        video: String,
        track: usize,
        expected: Option<u32>,
        found: Option<u32>,
    },

    #[error("signal of {len} samples is shorter than one window of {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}
