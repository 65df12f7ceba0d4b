use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Parameters;
use super::optim::{Optimizer, OptimizerKind};
use crate::config::{batch_size, learning_rate, DEFAULT_DROPOUT, DEFAULT_SEQUENCE_LENGTH};
use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};

/// A parameterized network that can place its parameters on a tape.
pub trait Model: Parameters {
    type Bound;

    /// Push one leaf per parameter, in `named_params` order, onto `ids`.
    fn bind(&self, tape: &mut Tape, ids: &mut Vec<NodeId>) -> Self::Bound;
}

/// Indexable training data.
pub trait BatchSource {
    type Batch;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch(&self, indices: &[usize]) -> Self::Batch;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub sequence_length: usize,
    pub dropout: f64,
    pub seed: u64,
    pub steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: learning_rate::CNN,
            batch_size: batch_size::CNN,
            sequence_length: DEFAULT_SEQUENCE_LENGTH,
            dropout: DEFAULT_DROPOUT,
            seed: 0,
            steps: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // zero is allowed: it freezes the parameters
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(alloc::format!(
                "learning_rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(alloc::format!(
                "dropout {} must lie in [0, 1)",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.sequence_length == 0 {
            return Err(Error::Config("sequence_length must be positive".into()));
        }
        Ok(())
    }
}

/// Randomness and settings visible to the loss closure for one step.
pub struct StepContext {
    pub rng: ChaCha8Rng,
    pub dropout: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Loss before the update at each step.
    pub losses: Vec<f64>,
}

/// Seeded epoch-wise shuffling; incomplete trailing batches are skipped.
struct Sampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self {
            order,
            cursor: 0,
            batch: batch.min(n),
            rng,
        }
    }

    fn next(&mut self) -> &[usize] {
        if self.cursor + self.batch > self.order.len() {
            // a full-batch epoch keeps its order so the summation order is fixed
            if self.batch < self.order.len() {
                self.order.shuffle(&mut self.rng);
            }
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch;
        &self.order[start..self.cursor]
    }
}

/// Minimize `loss_fn` over `data` for `cfg.steps` steps. Fully determined by
/// `cfg.seed`: batch order and the per-step randomness in [`StepContext`].
pub fn train<M, D, F>(
    model: &mut M,
    data: &D,
    cfg: &TrainConfig,
    mut loss_fn: F,
) -> Result<TrainTrace>
where
    M: Model,
    D: BatchSource,
    F: FnMut(&mut Tape, &M::Bound, &D::Batch, &mut StepContext) -> Result<NodeId>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let mut sampler = Sampler::new(data.len(), cfg.batch_size, cfg.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise.set_stream(1);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut trace = TrainTrace {
        losses: Vec::with_capacity(cfg.steps),
    };

    for step in 0..cfg.steps {
        let batch = data.batch(sampler.next());
        let mut ctx = StepContext {
            rng: ChaCha8Rng::seed_from_u64(rand::Rng::random(&mut noise)),
            dropout: cfg.dropout,
            step,
        };
        let mut tape = Tape::new();
        let mut ids = Vec::new();
        let bound = model.bind(&mut tape, &mut ids);
        let loss = match loss_fn(&mut tape, &bound, &batch, &mut ctx) {
            Ok(l) => l,
            Err(Error::NonFinite { .. }) => return Err(Error::Diverged { step }),
            Err(e) => return Err(e),
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Diverged { step });
        }
        trace.losses.push(value);

        let mut grads = tape.backward(loss)?;
        let grads: Vec<_> = ids.iter().map(|&id| grads.take(id)).collect();
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step });
        }
        let mut params = model.params_mut();
        opt.step(&mut params, &grads)?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Ok(trace)
}
