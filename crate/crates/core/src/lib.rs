//! Numerical core for multi-task affect recognition.
//!
//! Everything here is `no_std` + `alloc`: a reverse-mode [`Tape`] over dense
//! [`Matrix`] values, the task losses built on it, evaluation metrics,
//! audio/visual preprocessing math, toy recurrent and multi-task networks,
//! nearest-centroid embedding inference, and the annotation procedures used
//! to assemble a subject-independent dataset.
#![no_std]

extern crate alloc;

pub mod config;
pub mod dataset;
pub mod embedspace;
pub mod error;
pub mod gradcheck;
pub mod gradsuite;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nets;
pub mod signals;
pub mod synthetic;
pub mod tape;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tape::{Gradients, NodeId, Tape};
