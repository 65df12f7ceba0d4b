//! Nearest-centroid inference in an embedding space.
//!
//! Training embeddings are grouped by label, each group's mean is projected
//! onto the unit sphere, and a query is assigned to the center with the
//! highest cosine similarity (lowest cosine distance).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::NUM_EXPRESSIONS;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    /// One unit-norm center per row.
    centers: Matrix,
    /// Class label of each center.
    labels: Vec<usize>,
    /// Training samples that formed each center.
    counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    /// Cosine similarity to every center, in center order.
    pub similarities: Vec<f64>,
}

impl CentroidModel {
    /// Rebuild from stored parts; rows must be unit norm within 1e-12.
    pub fn from_parts(centers: Matrix, labels: Vec<usize>, counts: Vec<usize>) -> Result<Self> {
        if centers.rows() != NUM_EXPRESSIONS {
            return Err(Error::Length {
                what: "centroid count",
                left: centers.rows(),
                right: NUM_EXPRESSIONS,
            });
        }
        for len in [labels.len(), counts.len()] {
            if len != centers.rows() {
                return Err(Error::Length {
                    what: "centroid metadata",
                    left: len,
                    right: centers.rows(),
                });
            }
        }
        for r in 0..centers.rows() {
            let n = norm(centers.row(r));
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::OutOfRange {
                    what: "centroid norm",
                    value: n,
                    lo: 1.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self {
            centers,
            labels,
            counts,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn classify(&self, embedding: &[f64]) -> Result<Classification> {
        if embedding.len() != self.dim() {
            return Err(Error::Length {
                what: "classify embedding",
                left: embedding.len(),
                right: self.dim(),
            });
        }
        let n = norm(embedding);
        if n == 0.0 {
            return Err(Error::ZeroVector("classify embedding"));
        }
        let similarities: Vec<f64> = (0..self.centers.rows())
            .map(|c| dot(embedding, self.centers.row(c)) / n)
            .collect();
        let mut best = 0;
        for (i, &s) in similarities.iter().enumerate() {
            if s > similarities[best] {
                best = i;
            }
        }
        Ok(Classification {
            class: self.labels[best],
            similarities,
        })
    }

    pub fn classify_rows(&self, embeddings: &Matrix) -> Result<Vec<usize>> {
        (0..embeddings.rows())
            .map(|r| self.classify(embeddings.row(r)).map(|c| c.class))
            .collect()
    }
}

/// One center per expression class: the l2-normalized mean of its samples.
pub fn fit_centroids(embeddings: &Matrix, labels: &[usize]) -> Result<CentroidModel> {
    if embeddings.rows() != labels.len() {
        return Err(Error::Length {
            what: "fit_centroids",
            left: embeddings.rows(),
            right: labels.len(),
        });
    }
    let d = embeddings.cols();
    let mut sums = Matrix::zeros(NUM_EXPRESSIONS, d);
    let mut counts = vec![0usize; NUM_EXPRESSIONS];
    for (r, &label) in labels.iter().enumerate() {
        if label >= NUM_EXPRESSIONS {
            return Err(Error::IndexOutOfRange {
                what: "centroid label",
                index: label,
                bound: NUM_EXPRESSIONS,
            });
        }
        counts[label] += 1;
        for (s, &v) in sums.row_mut(label).iter_mut().zip(embeddings.row(r)) {
            *s += v;
        }
    }
    let missing: Vec<usize> = (0..NUM_EXPRESSIONS).filter(|&c| counts[c] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    for c in 0..NUM_EXPRESSIONS {
        let row = sums.row_mut(c);
        for v in row.iter_mut() {
            *v /= counts[c] as f64;
        }
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroVector("class mean embedding"));
        }
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(CentroidModel {
        centers: sums,
        labels: (0..NUM_EXPRESSIONS).collect(),
        counts,
    })
}

/// Unsupervised alternative: spherical k-means with 7 clusters, seeded
/// farthest-point initialization. Each cluster takes the majority label of
/// its members (lowest label on ties).
pub fn fit_kmeans(
    embeddings: &Matrix,
    labels: &[usize],
    seed: u64,
    iterations: usize,
) -> Result<CentroidModel> {
    let k = NUM_EXPRESSIONS;
    let n = embeddings.rows();
    if n != labels.len() {
        return Err(Error::Length {
            what: "fit_kmeans",
            left: n,
            right: labels.len(),
        });
    }
    if n < k {
        return Err(Error::Length {
            what: "fit_kmeans needs at least k samples",
            left: n,
            right: k,
        });
    }
    let mut unit = embeddings.clone();
    for r in 0..n {
        let nr = norm(unit.row(r));
        if nr == 0.0 {
            return Err(Error::ZeroVector("kmeans embedding"));
        }
        unit.row_mut(r).iter_mut().for_each(|v| *v /= nr);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    while chosen.len() < k {
        // farthest point from its nearest chosen center
        let next = (0..n)
            .map(|i| {
                let best = chosen
                    .iter()
                    .map(|&c| dot(unit.row(i), unit.row(c)))
                    .fold(f64::NEG_INFINITY, f64::max);
                (i, best)
            })
            .fold(
                (0, f64::INFINITY),
                |acc, (i, s)| if s < acc.1 { (i, s) } else { acc },
            )
            .0;
        chosen.push(next);
    }
    let mut centers = unit.select_rows(&chosen);
    let mut assign = vec![0usize; n];
    for _ in 0..iterations.max(1) {
        for (i, a) in assign.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_s = f64::NEG_INFINITY;
            for c in 0..k {
                let s = dot(unit.row(i), centers.row(c));
                if s > best_s {
                    best_s = s;
                    best = c;
                }
            }
            *a = best;
        }
        let mut sums = Matrix::zeros(k, unit.cols());
        for (i, &a) in assign.iter().enumerate() {
            for (s, &v) in sums.row_mut(a).iter_mut().zip(unit.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            let nr = norm(sums.row(c));
            if nr > 0.0 {
                let row: Vec<f64> = sums.row(c).iter().map(|v| v / nr).collect();
                centers.row_mut(c).copy_from_slice(&row);
            }
        }
    }

    let mut votes = vec![vec![0usize; NUM_EXPRESSIONS]; k];
    let mut counts = vec![0usize; k];
    for (&a, &l) in assign.iter().zip(labels) {
        if l >= NUM_EXPRESSIONS {
            return Err(Error::IndexOutOfRange {
                what: "kmeans label",
                index: l,
                bound: NUM_EXPRESSIONS,
            });
        }
        votes[a][l] += 1;
        counts[a] += 1;
    }
    let cluster_labels = votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (i, &c) in v.iter().enumerate() {
                if c > v[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(CentroidModel {
        centers,
        labels: cluster_labels,
        counts,
    })
}
