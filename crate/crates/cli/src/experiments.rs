//! Toy-scale training runs shared by `afen train` and the acceptance suite.

use afen_core::config::{arcface, batch_size, learning_rate, NUM_EXPRESSIONS};
use afen_core::embedspace::{fit_centroids, CentroidModel};
use afen_core::losses::{multitask_loss, TaskWeights, VaMode};
use afen_core::metrics::{self, Averaging, ConfusionMatrix};
use afen_core::nets::{train, ArcFaceNet, MultiTaskNet, OptimizerKind, TrainConfig, TrainTrace};
use afen_core::synthetic::{
    gaussian_clusters, LabeledBatch, LabeledSet, MultiTaskBatch, MultiTaskData, MultiTaskTruth,
    TaskMask,
};
use afen_core::{Matrix, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one purpose (data, init, ...) of a run.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

pub const DATA_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = 1;
pub const HOLDOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub radius: f64,
    pub std: f64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            per_class_train: 100,
            per_class_test: 100,
            radius: 4.0,
            std: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcFaceRun {
    pub train: TrainConfig,
    /// Hidden widths between the 2D input and the embedding.
    pub hidden: Vec<usize>,
    pub dim: usize,
    pub scale: f64,
    pub margin: f64,
    pub clusters: ClusterSpec,
}

impl Default for ArcFaceRun {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                learning_rate: learning_rate::ARCFACE,
                batch_size: batch_size::ARCFACE,
                ..TrainConfig::default()
            },
            hidden: vec![32],
            dim: 8,
            scale: arcface::DEFAULT_SCALE,
            margin: arcface::DEFAULT_MARGIN,
            clusters: ClusterSpec::default(),
        }
    }
}

/// Embedding-space geometry of held-out samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Mean cosine between each sample and its own class center.
    pub intra_cosine: f64,
    /// Smallest angle between two class centers, radians.
    pub min_center_angle: f64,
    /// Nearest-centroid accuracy.
    pub accuracy: f64,
}

pub struct ArcFaceOutcome {
    pub net: ArcFaceNet,
    pub centroids: CentroidModel,
    pub trace: TrainTrace,
    pub geometry: Geometry,
}

pub fn cluster_data(seed: u64, spec: &ClusterSpec) -> (LabeledSet, LabeledSet) {
    let train = gaussian_clusters(
        NUM_EXPRESSIONS,
        spec.per_class_train,
        spec.radius,
        spec.std,
        &mut stream(seed, DATA_STREAM),
    );
    let test = gaussian_clusters(
        NUM_EXPRESSIONS,
        spec.per_class_test,
        spec.radius,
        spec.std,
        &mut stream(seed, HOLDOUT_STREAM),
    );
    (train, test)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn geometry(model: &CentroidModel, embeddings: &Matrix, labels: &[usize]) -> Result<Geometry> {
    let centers = model.centers();
    let mut intra = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = embeddings.row(r);
        intra += dot(row, centers.row(y)) / dot(row, row).sqrt();
    }
    let mut min_angle = f64::INFINITY;
    for i in 0..centers.rows() {
        for j in i + 1..centers.rows() {
            let c = dot(centers.row(i), centers.row(j)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(c.acos());
        }
    }
    let pred = model.classify_rows(embeddings)?;
    Ok(Geometry {
        intra_cosine: intra / labels.len() as f64,
        min_center_angle: min_angle,
        accuracy: metrics::accuracy(&pred, labels)?,
    })
}

/// Train an embedding net on 2D clusters, fit centroids on the training
/// embeddings and measure held-out geometry.
pub fn run_arcface(run: &ArcFaceRun) -> Result<ArcFaceOutcome> {
    let seed = run.train.seed;
    let (train_set, test_set) = cluster_data(seed, &run.clusters);
    let mut widths = vec![2];
    widths.extend(&run.hidden);
    widths.push(run.dim);
    let mut net = ArcFaceNet::new(
        &widths,
        run.scale,
        run.margin,
        &mut stream(seed, INIT_STREAM),
    )?;
    let trace = train(
        &mut net,
        &train_set,
        &run.train,
        |t, b, batch: &LabeledBatch, _| {
            let x = t.leaf(batch.inputs.clone());
            let e = ArcFaceNet::embed_node(t, b, x)?;
            b.head.loss(t, e, &batch.labels)
        },
    )?;
    let centroids = fit_centroids(&net.embed(&train_set.inputs)?, &train_set.labels)?;
    let geometry = geometry(&centroids, &net.embed(&test_set.inputs)?, &test_set.labels)?;
    Ok(ArcFaceOutcome {
        net,
        centroids,
        trace,
        geometry,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskRun {
    pub train: TrainConfig,
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub au_count: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub mask: TaskMask,
    pub va_mode: VaMode,
}

impl Default for MultiTaskRun {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                optimizer: OptimizerKind::Adam,
                ..TrainConfig::default()
            },
            inputs: 16,
            hidden: vec![256],
            au_count: afen_core::config::DEFAULT_AU_COUNT,
            train_samples: 4096,
            test_samples: 1024,
            mask: TaskMask::default(),
            va_mode: VaMode::Ccc,
        }
    }
}

/// Held-out scores of a multi-task network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskScores {
    pub ccc_valence: f64,
    pub ccc_arousal: f64,
    pub au_macro_f1: f64,
    pub expr_accuracy: f64,
    pub expr_mean_diagonal: f64,
}

pub struct MultiTaskOutcome {
    pub initial: MultiTaskNet,
    pub net: MultiTaskNet,
    pub trace: TrainTrace,
    pub scores: TaskScores,
}

pub fn score(net: &MultiTaskNet, data: &MultiTaskData) -> Result<TaskScores> {
    let p = net.predict(&data.inputs)?;
    let target_aus: Vec<Vec<bool>> = (0..data.aus.rows())
        .map(|r| data.aus.row(r).iter().map(|&v| v == 1.0).collect())
        .collect();
    let expr = p.expr();
    let cm = ConfusionMatrix::from_predictions(NUM_EXPRESSIONS, &expr, &data.expr)?;
    Ok(TaskScores {
        ccc_valence: metrics::ccc_metric(&p.va.col(0), &data.va.col(0))?.value,
        ccc_arousal: metrics::ccc_metric(&p.va.col(1), &data.va.col(1))?.value,
        au_macro_f1: metrics::multilabel_f1(&p.au_active(), &target_aus, Averaging::Macro)?.value,
        expr_accuracy: metrics::accuracy(&expr, &data.expr)?,
        expr_mean_diagonal: metrics::mean_diagonal(&cm, false)?.value,
    })
}

/// Train on labels produced by a random ground-truth map and score on fresh
/// inputs from the same map.
pub fn run_multitask(run: &MultiTaskRun) -> Result<MultiTaskOutcome> {
    let seed = run.train.seed;
    let mut data_rng = stream(seed, DATA_STREAM);
    let truth = MultiTaskTruth::random(run.inputs, run.au_count, &mut data_rng);
    let train_set = truth.sample(run.train_samples, run.mask, &mut data_rng);
    let test_set = truth.sample(
        run.test_samples,
        TaskMask::default(),
        &mut stream(seed, HOLDOUT_STREAM),
    );
    let mut widths = vec![run.inputs];
    widths.extend(&run.hidden);
    let initial = MultiTaskNet::new(&widths, run.au_count, &mut stream(seed, INIT_STREAM));
    let mut net = initial.clone();
    let trace = multitask_train(&mut net, &train_set, &run.train, run.va_mode)?;
    let scores = score(&net, &test_set)?;
    Ok(MultiTaskOutcome {
        initial,
        net,
        trace,
        scores,
    })
}

pub fn multitask_train(
    net: &mut MultiTaskNet,
    data: &MultiTaskData,
    cfg: &TrainConfig,
    va_mode: VaMode,
) -> Result<TrainTrace> {
    train(net, data, cfg, |t, b, batch: &MultiTaskBatch, ctx| {
        let x = t.leaf(batch.inputs.clone());
        let out = MultiTaskNet::forward(t, b, x, Some(ctx))?;
        Ok(multitask_loss(t, &out, &batch.targets, va_mode, &TaskWeights::default())?.total)
    })
}
