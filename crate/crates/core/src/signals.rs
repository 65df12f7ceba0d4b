//! Audio and face-crop preprocessing.
//!
//! Spectrograms are magnitudes of a Hann-windowed DFT taken per frame (no
//! zero padding, so the transform length equals the window length) and then
//! min-max mapped onto `[-1, 1]` over the whole spectrogram.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
pub const DEFAULT_WINDOW_MS: f64 = 33.0;
pub const DEFAULT_OVERLAP_MS: f64 = 11.0;

/// Face crops are square with this side length.
pub const CROP_SIZE: usize = 96;

/// Destination landmarks in the 96x96 crop: left eye, right eye, nose tip,
/// left and right mouth corners. This is the common 112x112 ArcFace
/// alignment template scaled by 96/112.
pub const ALIGN_TEMPLATE_96: [[f64; 2]; 5] = [
    [38.2946 * 96.0 / 112.0, 51.6963 * 96.0 / 112.0],
    [73.5318 * 96.0 / 112.0, 51.5014 * 96.0 / 112.0],
    [56.0252 * 96.0 / 112.0, 71.7366 * 96.0 / 112.0],
    [41.5493 * 96.0 / 112.0, 92.3655 * 96.0 / 112.0],
    [70.7299 * 96.0 / 112.0, 92.2041 * 96.0 / 112.0],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    /// Overlap between consecutive windows; the hop is `window - overlap`.
    pub overlap_ms: f64,
    /// Use `ln(magnitude)` instead of linear magnitude before normalizing.
    pub log_magnitude: bool,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            window_ms: DEFAULT_WINDOW_MS,
            overlap_ms: DEFAULT_OVERLAP_MS,
            log_magnitude: false,
        }
    }
}

impl SpectrogramConfig {
    pub fn window_samples(&self) -> usize {
        libm::round(self.window_ms * self.sample_rate as f64 / 1000.0) as usize
    }

    pub fn overlap_samples(&self) -> usize {
        libm::round(self.overlap_ms * self.sample_rate as f64 / 1000.0) as usize
    }

    pub fn hop_samples(&self) -> usize {
        self.window_samples().saturating_sub(self.overlap_samples())
    }

    pub fn bins(&self) -> usize {
        self.window_samples() / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_samples() < 2 {
            return Err(Error::Config(alloc::format!(
                "window of {} samples; need at least 2",
                self.window_samples()
            )));
        }
        if self.window_samples() <= self.overlap_samples() {
            return Err(Error::Config(alloc::format!(
                "overlap of {} samples leaves no hop in a {}-sample window",
                self.overlap_samples(),
                self.window_samples()
            )));
        }
        Ok(())
    }

    /// `floor((n - window) / hop) + 1`, or 0 when `n < window`.
    pub fn frame_count(&self, n: usize) -> usize {
        let w = self.window_samples();
        if n < w {
            0
        } else {
            (n - w) / self.hop_samples() + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `frames x bins`, values in `[-1, 1]`.
    pub data: Matrix,
    /// Set when every magnitude was equal; the output is then all -1.
    pub degenerate: bool,
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Raw magnitude spectrogram, `frames x bins`, before normalization.
pub fn magnitude_frames(samples: &[f64], cfg: &SpectrogramConfig) -> Result<Matrix> {
    cfg.validate()?;
    let n = cfg.window_samples();
    if samples.len() < n {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            window: n,
        });
    }
    let hop = cfg.hop_samples();
    let bins = cfg.bins();
    let frames = cfg.frame_count(samples.len());
    let window = hann(n);
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            (libm::cos(a), libm::sin(a))
        })
        .unzip();

    let mut out = Matrix::zeros(frames, bins);
    let mut buf = vec![0.0; n];
    for f in 0..frames {
        let start = f * hop;
        for (b, (&s, &w)) in buf
            .iter_mut()
            .zip(samples[start..start + n].iter().zip(&window))
        {
            *b = s * w;
        }
        for k in 0..bins {
            let (mut re, mut im) = (0.0, 0.0);
            let mut idx = 0usize;
            for &x in &buf {
                re += x * cos_t[idx];
                im -= x * sin_t[idx];
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            out[(f, k)] = libm::sqrt(re * re + im * im);
        }
    }
    Ok(out)
}

/// Affine map of all entries onto `[-1, 1]`; returns `true` if min == max
/// (every entry is then set to -1).
pub fn normalize_min_max(m: &mut Matrix) -> bool {
    let (lo, hi) = m
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        m.as_mut_slice().fill(-1.0);
        return true;
    }
    let span = hi - lo;
    for v in m.as_mut_slice() {
        *v = (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0);
    }
    false
}

pub fn spectrogram(samples: &[f64], cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    let mut data = magnitude_frames(samples, cfg)?;
    if cfg.log_magnitude {
        data = data.map(|v| libm::log(v.max(1e-12)));
    }
    let degenerate = normalize_min_max(&mut data);
    Ok(Spectrogram { data, degenerate })
}

/// `p -> scale * R p + t` in the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Row-major 2x2 proper rotation.
    pub rotation: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self::new(1.0, 0.0, [0.0, 0.0])
    }

    pub fn new(scale: f64, angle: f64, translation: [f64; 2]) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self {
            scale,
            rotation: [[c, -s], [s, c]],
            translation,
        }
    }

    pub fn angle(&self) -> f64 {
        libm::atan2(self.rotation[1][0], self.rotation[0][0])
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let r = &self.rotation;
        [
            self.scale * (r[0][0] * p[0] + r[0][1] * p[1]) + self.translation[0],
            self.scale * (r[1][0] * p[0] + r[1][1] * p[1]) + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
        let inv_s = 1.0 / self.scale;
        let t = self.translation;
        Self {
            scale: inv_s,
            rotation: rt,
            translation: [
                -inv_s * (rt[0][0] * t[0] + rt[0][1] * t[1]),
                -inv_s * (rt[1][0] * t[0] + rt[1][1] * t[1]),
            ],
        }
    }

    /// `self` after `first`: `p -> self(first(p))`.
    pub fn compose(&self, first: &Self) -> Self {
        let a = &self.rotation;
        let b = &first.rotation;
        let mut rot = [[0.0; 2]; 2];
        for (i, row) in rot.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self {
            scale: self.scale * first.scale,
            rotation: rot,
            translation: self.apply(first.translation),
        }
    }

    /// Sum of squared distances between mapped `src` and `dst`.
    pub fn residual(&self, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(&s, d)| {
                let p = self.apply(s);
                (p[0] - d[0]) * (p[0] - d[0]) + (p[1] - d[1]) * (p[1] - d[1])
            })
            .sum()
    }
}

fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let (x, y) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [x / n, y / n]
}

/// Least-squares similarity taking `src` onto `dst` (closed form of the
/// Umeyama estimate restricted to proper rotations).
pub fn fit_similarity(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::Length {
            what: "fit_similarity",
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 2 {
        return Err(Error::Empty("fit_similarity"));
    }
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    let (mut var, mut dot, mut cross) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let a = [s[0] - mu_s[0], s[1] - mu_s[1]];
        let b = [d[0] - mu_d[0], d[1] - mu_d[1]];
        var += a[0] * a[0] + a[1] * a[1];
        dot += a[0] * b[0] + a[1] * b[1];
        cross += a[0] * b[1] - a[1] * b[0];
    }
    if var < 1e-300 {
        return Err(Error::Degenerate("source points have zero variance"));
    }
    let scale = libm::sqrt(dot * dot + cross * cross) / var;
    if scale == 0.0 {
        return Err(Error::Degenerate("destination points have zero spread"));
    }
    let mut t = SimilarityTransform::new(scale, libm::atan2(cross, dot), [0.0, 0.0]);
    let mapped = t.apply(mu_s);
    t.translation = [mu_d[0] - mapped[0], mu_d[1] - mapped[1]];
    Ok(t)
}

/// Interleaved `height x width x channels` intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::new(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        img
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Bilinear sample at `(x, y)`; zero outside `[0, w-1] x [0, h-1]`.
    pub fn sample(&self, x: f64, y: f64, c: usize) -> f64 {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64)
        {
            return 0.0;
        }
        let x0 = libm::floor(x) as usize;
        let y0 = libm::floor(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(y0, x0, c) * (1.0 - fx) + self.get(y0, x1, c) * fx;
        let bottom = self.get(y1, x0, c) * (1.0 - fx) + self.get(y1, x1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Resample `image` into an `out_h x out_w` grid; `transform` maps output
/// pixel coordinates `(x, y)` into the source image.
pub fn warp_crop(
    image: &Image,
    transform: &SimilarityTransform,
    out_h: usize,
    out_w: usize,
) -> Image {
    let mut out = Image::new(out_h, out_w, image.channels);
    if image.width == 0 || image.height == 0 {
        return out;
    }
    for y in 0..out_h {
        for x in 0..out_w {
            let [sx, sy] = transform.apply([x as f64, y as f64]);
            for c in 0..image.channels {
                out.data[(y * out_w + x) * image.channels + c] = image.sample(sx, sy, c);
            }
        }
    }
    out
}

/// Align a face to the 96x96 template given its five detected landmarks.
pub fn align_face(image: &Image, landmarks: &[[f64; 2]; 5]) -> Result<Image> {
    let to_source = fit_similarity(&ALIGN_TEMPLATE_96, landmarks)?;
    Ok(warp_crop(image, &to_source, CROP_SIZE, CROP_SIZE))
}

/// `v / 127.5 - 1`, mapping 0..=255 onto [-1, 1].
pub fn normalize_pixels(pixels: &[u8]) -> Vec<f64> {
    pixels.iter().map(|&v| v as f64 / 127.5 - 1.0).collect()
}
