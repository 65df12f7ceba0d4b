//! Seeded synthetic datasets for toy-scale experiments.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::NUM_EXPRESSIONS;
use crate::dataset::VideoSummary;
use crate::losses::MultiTaskTargets;
use crate::matrix::Matrix;
use crate::nets::BatchSource;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * normal(rng))
}

/// Inputs with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl BatchSource for LabeledSet {
    type Batch = LabeledBatch;

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn batch(&self, indices: &[usize]) -> LabeledBatch {
        LabeledBatch {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Isotropic 2D Gaussian clusters with means evenly spaced on a circle.
/// Samples are interleaved by class.
pub fn gaussian_clusters<R: Rng + ?Sized>(
    classes: usize,
    per_class: usize,
    radius: f64,
    std: f64,
    rng: &mut R,
) -> LabeledSet {
    let n = classes * per_class;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for c in 0..classes {
            let angle = 2.0 * core::f64::consts::PI * c as f64 / classes as f64;
            data.push(radius * libm::cos(angle) + std * normal(rng));
            data.push(radius * libm::sin(angle) + std * normal(rng));
            labels.push(c);
        }
    }
    LabeledSet {
        inputs: Matrix::from_vec(n, 2, data).expect("sized above"),
        labels,
    }
}

/// Two classes split by a random hyperplane through the origin, each point
/// pushed `gap` away from it.
pub fn separable_two_class<R: Rng + ?Sized>(
    n: usize,
    dim: usize,
    gap: f64,
    rng: &mut R,
) -> LabeledSet {
    let w: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let norm = libm::sqrt(w.iter().map(|v| v * v).sum());
    let w: Vec<f64> = w.iter().map(|v| v / norm).collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let proj: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        // reflect onto the label's side, then add the gap
        let shift = sign * (libm::fabs(proj) + gap) - proj;
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += shift * wi;
        }
        data.extend(x);
        labels.push(label);
    }
    LabeledSet {
        inputs: Matrix::from_vec(n, dim, data).expect("sized above"),
        labels,
    }
}

/// Seven classes on orthogonal axes of R^dim (dim >= 7), each sample a
/// positive multiple of its axis perturbed by a random orthogonal offset at
/// an angle of at most `max_angle` radians.
pub fn angular_blobs<R: Rng + ?Sized>(
    dim: usize,
    per_class: usize,
    max_angle: f64,
    rng: &mut R,
) -> LabeledSet {
    assert!(dim >= NUM_EXPRESSIONS, "angular_blobs needs dim >= 7");
    let n = per_class * NUM_EXPRESSIONS;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for c in 0..NUM_EXPRESSIONS {
            let mut offset: Vec<f64> = (0..dim)
                .map(|j| if j == c { 0.0 } else { normal(rng) })
                .collect();
            let norm = libm::sqrt(offset.iter().map(|v| v * v).sum());
            let angle = max_angle * rng.random::<f64>();
            let length = rng.random_range(0.5..2.0);
            for (j, o) in offset.iter_mut().enumerate() {
                *o = length
                    * (libm::sin(angle) * *o / norm + if j == c { libm::cos(angle) } else { 0.0 });
            }
            data.extend(offset);
            labels.push(c);
        }
    }
    LabeledSet {
        inputs: Matrix::from_vec(n, dim, data).expect("sized above"),
        labels,
    }
}

/// Which task labels a multi-task batch carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskMask {
    pub va: bool,
    pub au: bool,
    pub expr: bool,
}

impl Default for TaskMask {
    fn default() -> Self {
        Self {
            va: true,
            au: true,
            expr: true,
        }
    }
}

/// Ground-truth maps from inputs to labels: valence/arousal = tanh(x A),
/// AU k active iff x . b_k > 0, expression = argmax x C.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskTruth {
    pub va: Matrix,
    pub au: Matrix,
    pub expr: Matrix,
}

impl MultiTaskTruth {
    pub fn random<R: Rng + ?Sized>(inputs: usize, au_count: usize, rng: &mut R) -> Self {
        let std = 1.0 / libm::sqrt(inputs as f64);
        Self {
            va: normal_matrix(inputs, 2, std, rng),
            au: normal_matrix(inputs, au_count, std, rng),
            expr: normal_matrix(inputs, NUM_EXPRESSIONS, std, rng),
        }
    }

    pub fn inputs(&self) -> usize {
        self.va.rows()
    }

    pub fn label(&self, x: &Matrix, mask: TaskMask) -> MultiTaskData {
        let va = x.matmul(&self.va).expect("input width").map(libm::tanh);
        let aus = x
            .matmul(&self.au)
            .expect("input width")
            .map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let expr = x.matmul(&self.expr).expect("input width").argmax_rows();
        MultiTaskData {
            inputs: x.clone(),
            va,
            aus,
            expr,
            mask,
        }
    }

    /// `n` standard-normal inputs and their labels.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, mask: TaskMask, rng: &mut R) -> MultiTaskData {
        let x = normal_matrix(n, self.inputs(), 1.0, rng);
        self.label(&x, mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskData {
    pub inputs: Matrix,
    pub va: Matrix,
    pub aus: Matrix,
    pub expr: Vec<usize>,
    pub mask: TaskMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskBatch {
    pub inputs: Matrix,
    pub targets: MultiTaskTargets,
}

impl BatchSource for MultiTaskData {
    type Batch = MultiTaskBatch;

    fn len(&self) -> usize {
        self.inputs.rows()
    }

    fn batch(&self, indices: &[usize]) -> MultiTaskBatch {
        MultiTaskBatch {
            inputs: self.inputs.select_rows(indices),
            targets: MultiTaskTargets {
                va: self.mask.va.then(|| self.va.select_rows(indices)),
                aus: self.mask.au.then(|| self.aus.select_rows(indices)),
                expr: self
                    .mask
                    .expr
                    .then(|| indices.iter().map(|&i| self.expr[i]).collect()),
            },
        }
    }
}

/// Random video inventory: 10 to `max_subjects` subjects, each with at
/// least one video, at most `max_videos` videos in total, 100 to 3000
/// frames per video.
pub fn random_videos<R: Rng + ?Sized>(
    max_subjects: usize,
    max_videos: usize,
    rng: &mut R,
) -> Vec<VideoSummary> {
    let subjects = rng.random_range(10.min(max_subjects)..=max_subjects);
    let videos = rng.random_range(subjects..=max_videos.max(subjects));
    (0..videos)
        .map(|v| {
            let subject = if v < subjects {
                v
            } else {
                rng.random_range(0..subjects)
            };
            VideoSummary {
                video: format!("video{v:03}"),
                subject: format!("subject{subject:02}"),
                frames: rng.random_range(100..=3000),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_respects_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = separable_two_class(200, 5, 0.5, &mut rng);
        assert_eq!(set.labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(set.inputs.shape(), (200, 5));
    }

    #[test]
    fn blobs_stay_within_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = angular_blobs(8, 20, 0.1, &mut rng);
        for (r, &c) in set.labels.iter().enumerate() {
            let row = set.inputs.row(r);
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
            assert!(libm::acos(row[c] / norm) <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn masked_batches_drop_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = MultiTaskTruth::random(16, 8, &mut rng);
        let data = truth.sample(
            10,
            TaskMask {
                au: false,
                ..TaskMask::default()
            },
            &mut rng,
        );
        let b = data.batch(&[3, 1]);
        assert!(b.targets.aus.is_none());
        assert_eq!(
            b.targets.expr.as_ref().unwrap(),
            &[data.expr[3], data.expr[1]]
        );
        assert!(b.targets.validate().is_ok());
    }

    #[test]
    fn random_videos_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let v = random_videos(50, 200, &mut rng);
            assert!(v.len() <= 200);
            let mut subjects: Vec<&str> = v.iter().map(|x| x.subject.as_str()).collect();
            subjects.sort_unstable();
            subjects.dedup();
            assert!((10..=50).contains(&subjects.len()));
        }
    }
}
