//! Annotation records and the procedures applied to them: multi-annotator
//! aggregation, agreement filtering, subject-independent partitioning and
//! distribution statistics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AU_IDS, NUM_EXPRESSIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub video: String,
    pub frame: u32,
    pub subject: String,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    pub aus: Option<Vec<bool>>,
    pub expr: Option<usize>,
}

impl LabeledFrame {
    pub fn va(&self) -> Option<[f64; 2]> {
        Some([self.valence?, self.arousal?])
    }

    pub fn validate(&self) -> Result<()> {
        if self.valence.is_some() != self.arousal.is_some() {
            return Err(Error::Config(format!(
                "video {} frame {}: valence and arousal must be given together",
                self.video, self.frame
            )));
        }
        for (what, v) in [("valence", self.valence), ("arousal", self.arousal)] {
            if let Some(v) = v {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        what,
                        value: v,
                        lo: -1.0,
                        hi: 1.0,
                    });
                }
            }
        }
        if let Some(e) = self.expr {
            if e >= NUM_EXPRESSIONS {
                return Err(Error::IndexOutOfRange {
                    what: "expression class",
                    index: e,
                    bound: NUM_EXPRESSIONS,
                });
            }
        }
        if self.valence.is_none() && self.aus.is_none() && self.expr.is_none() {
            return Err(Error::Config(format!(
                "video {} frame {}: no label present",
                self.video, self.frame
            )));
        }
        Ok(())
    }
}

/// One annotator's labels for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorTrack<L> {
    pub annotator: String,
    pub video: String,
    pub frames: Vec<u32>,
    pub labels: Vec<L>,
}

impl<L> AnnotatorTrack<L> {
    pub fn new(
        annotator: impl Into<String>,
        video: impl Into<String>,
        frames: Vec<u32>,
        labels: Vec<L>,
    ) -> Result<Self> {
        let track = Self {
            annotator: annotator.into(),
            video: video.into(),
            frames,
            labels,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() != self.labels.len() {
            return Err(Error::Length {
                what: "annotator track frames/labels",
                left: self.frames.len(),
                right: self.labels.len(),
            });
        }
        if let Some(w) = self.frames.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "annotator {} video {}: frame {} does not follow {}",
                self.annotator, self.video, w[1], w[0]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Check that every track covers the same video and frame indices as the
/// first one.
fn check_aligned<L>(tracks: &[AnnotatorTrack<L>]) -> Result<()> {
    let first = tracks.first().ok_or(Error::Empty("annotator tracks"))?;
    for (t, track) in tracks.iter().enumerate() {
        track.validate()?;
        if track.video != first.video {
            return Err(Error::Config(format!(
                "track {t} belongs to video {}, expected {}",
                track.video, first.video
            )));
        }
        let n = first.frames.len().max(track.frames.len());
        for i in 0..n {
            let (e, f) = (first.frames.get(i).copied(), track.frames.get(i).copied());
            if e != f {
                return Err(Error::Misaligned {
                    video: track.video.clone(),
                    track: t,
                    expected: e,
                    found: f,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedVa {
    pub video: String,
    pub frames: Vec<u32>,
    pub values: Vec<[f64; 2]>,
}

/// Per-frame mean of the annotators' (valence, arousal), clamped to [-1, 1].
/// Values are summed in sorted order so the result does not depend on the
/// order of the tracks.
pub fn aggregate_va(tracks: &[AnnotatorTrack<[f64; 2]>]) -> Result<AggregatedVa> {
    if tracks.len() < 2 {
        return Err(Error::Length {
            what: "aggregate_va needs at least two tracks",
            left: tracks.len(),
            right: 2,
        });
    }
    check_aligned(tracks)?;
    let n = tracks.len() as f64;
    let mut buf = vec![0.0; tracks.len()];
    let values = (0..tracks[0].len())
        .map(|i| {
            let mut out = [0.0; 2];
            for (d, o) in out.iter_mut().enumerate() {
                for (b, t) in buf.iter_mut().zip(tracks) {
                    *b = t.labels[i][d];
                }
                buf.sort_by(f64::total_cmp);
                // offsets from the minimum keep identical inputs exact
                let base = buf[0];
                let mean = base + buf.iter().map(|v| v - base).sum::<f64>() / n;
                *o = mean.clamp(-1.0, 1.0);
            }
            out
        })
        .collect();
    Ok(AggregatedVa {
        video: tracks[0].video.clone(),
        frames: tracks[0].frames.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Concordance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorCorrelation {
    /// Mean over usable annotator pairs; `None` when every pair was skipped.
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    /// (dimension, track i, track j) pairs skipped because a track was constant.
    pub skipped: Vec<(usize, usize, usize)>,
}

/// Population Pearson correlation; `None` if either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Length {
            what: "pearson",
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Empty("pearson needs two samples"));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0)))
}

/// Mean pairwise correlation between annotators, per dimension.
pub fn inter_annotator_correlation(
    tracks: &[AnnotatorTrack<[f64; 2]>],
    kind: CorrelationKind,
) -> Result<AnnotatorCorrelation> {
    if tracks.len() < 2 {
        return Err(Error::Length {
            what: "inter_annotator_correlation needs at least two tracks",
            left: tracks.len(),
            right: 2,
        });
    }
    check_aligned(tracks)?;
    let columns: Vec<[Vec<f64>; 2]> = tracks
        .iter()
        .map(|t| {
            [
                t.labels.iter().map(|l| l[0]).collect(),
                t.labels.iter().map(|l| l[1]).collect(),
            ]
        })
        .collect();
    let mut skipped = Vec::new();
    let mut means = [None; 2];
    for (d, mean) in means.iter_mut().enumerate() {
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..tracks.len() {
            for j in i + 1..tracks.len() {
                let (x, y) = (&columns[i][d], &columns[j][d]);
                let r = match kind {
                    CorrelationKind::Pearson => pearson(x, y)?,
                    CorrelationKind::Concordance => {
                        let c = crate::losses::ccc(x, y)?;
                        let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
                        (!c.degenerate && !constant(x) && !constant(y)).then_some(c.value)
                    }
                };
                match r {
                    Some(r) => {
                        sum += r;
                        count += 1;
                    }
                    None => skipped.push((d, i, j)),
                }
            }
        }
        *mean = (count > 0).then(|| sum / count as f64);
    }
    Ok(AnnotatorCorrelation {
        valence: means[0],
        arousal: means[1],
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoAgreement {
    pub video: String,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementOutcome<L> {
    /// Input tracks restricted to the frames on which everyone agreed.
    pub tracks: Vec<AnnotatorTrack<L>>,
    pub report: Vec<VideoAgreement>,
}

impl<L: Clone> AgreementOutcome<L> {
    /// (video, frame, label) for every kept frame.
    pub fn consensus(&self) -> Vec<(String, u32, L)> {
        let mut out = Vec::new();
        let mut done: Vec<&str> = Vec::new();
        for t in &self.tracks {
            if done.contains(&t.video.as_str()) {
                continue;
            }
            done.push(&t.video);
            for (f, l) in t.frames.iter().zip(&t.labels) {
                out.push((t.video.clone(), *f, l.clone()));
            }
        }
        out
    }
}

/// Keep only frames where every annotator of a video gave the same label.
/// Tracks may span several videos; tracks of one video must be aligned.
/// Report entries follow the order in which videos first appear.
pub fn agreement_filter<L: PartialEq + Clone>(
    tracks: &[AnnotatorTrack<L>],
) -> Result<AgreementOutcome<L>> {
    if tracks.is_empty() {
        return Err(Error::Empty("annotator tracks"));
    }
    let mut videos: Vec<&str> = Vec::new();
    for t in tracks {
        if !videos.contains(&t.video.as_str()) {
            videos.push(&t.video);
        }
    }
    let mut filtered: Vec<Option<AnnotatorTrack<L>>> = vec![None; tracks.len()];
    let mut report = Vec::with_capacity(videos.len());
    for video in videos {
        let idx: Vec<usize> = (0..tracks.len())
            .filter(|&i| tracks[i].video == video)
            .collect();
        let group: Vec<AnnotatorTrack<L>> = idx.iter().map(|&i| tracks[i].clone()).collect();
        check_aligned(&group)?;
        let keep: Vec<bool> = (0..group[0].len())
            .map(|f| group.iter().all(|t| t.labels[f] == group[0].labels[f]))
            .collect();
        let kept = keep.iter().filter(|&&k| k).count();
        report.push(VideoAgreement {
            video: String::from(video),
            kept,
            dropped: keep.len() - kept,
        });
        for (&i, t) in idx.iter().zip(group) {
            let (frames, labels) = t
                .frames
                .into_iter()
                .zip(t.labels)
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(p, _)| p)
                .unzip();
            filtered[i] = Some(AnnotatorTrack {
                annotator: t.annotator,
                video: t.video,
                frames,
                labels,
            });
        }
    }
    Ok(AgreementOutcome {
        tracks: filtered
            .into_iter()
            .map(|t| t.expect("every track belongs to a video"))
            .collect(),
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSummary {
    pub video: String,
    pub subject: String,
    pub frames: usize,
}

/// Collapse frames into one summary per video, sorted by video id.
pub fn summarize_videos(frames: &[LabeledFrame]) -> Result<Vec<VideoSummary>> {
    let mut map: BTreeMap<&str, VideoSummary> = BTreeMap::new();
    for f in frames {
        let entry = map.entry(&f.video).or_insert_with(|| VideoSummary {
            video: f.video.clone(),
            subject: f.subject.clone(),
            frames: 0,
        });
        if entry.subject != f.subject {
            return Err(Error::Config(format!(
                "video {} has frames from subjects {} and {}",
                f.video, entry.subject, f.subject
            )));
        }
        entry.frames += 1;
    }
    Ok(map.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub videos: BTreeMap<String, Partition>,
    pub subjects: BTreeMap<String, Vec<String>>,
}

impl SplitAssignment {
    pub fn partition_of(&self, video: &str) -> Option<Partition> {
        self.videos.get(video).copied()
    }

    /// Subjects whose videos landed in more than one partition.
    pub fn overlapping_subjects(&self) -> Vec<String> {
        self.subjects
            .iter()
            .filter(|(_, vids)| {
                let mut parts = vids.iter().filter_map(|v| self.videos.get(v));
                match parts.next() {
                    Some(first) => parts.any(|p| p != first),
                    None => false,
                }
            })
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn video_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for p in self.videos.values() {
            c[p.index()] += 1;
        }
        c
    }

    /// Share of frames per partition.
    pub fn frame_ratios(&self, videos: &[VideoSummary]) -> [f64; 3] {
        let mut c = [0usize; 3];
        let mut total = 0;
        for v in videos {
            if let Some(p) = self.videos.get(&v.video) {
                c[p.index()] += v.frames;
                total += v.frames;
            }
        }
        if total == 0 {
            return [0.0; 3];
        }
        c.map(|x| x as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub assignment: SplitAssignment,
    /// Set when one subject owns more frames than the largest target share,
    /// so the ratios cannot be met.
    pub unreachable: Option<String>,
}

/// Assign whole subjects to train/validation/test. Subjects are shuffled
/// with `seed`, stably sorted by descending frame count, then each goes to
/// the partition furthest below its target frame count (lowest partition on
/// ties).
pub fn subject_independent_split(
    videos: &[VideoSummary],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitOutcome> {
    if videos.is_empty() {
        return Err(Error::Empty("videos to split"));
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split ratios {:?} must be non-negative and sum to 1",
            ratios
        )));
    }
    let mut subjects: BTreeMap<String, (Vec<String>, usize)> = BTreeMap::new();
    for v in videos {
        let e = subjects.entry(v.subject.clone()).or_default();
        if e.0.contains(&v.video) {
            return Err(Error::Config(format!("duplicate video id {}", v.video)));
        }
        e.0.push(v.video.clone());
        e.1 += v.frames;
    }
    let total: usize = subjects.values().map(|s| s.1).sum();

    let mut order: Vec<(&String, &(Vec<String>, usize))> = subjects.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|s| core::cmp::Reverse(s.1 .1));

    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let unreachable = order.first().and_then(|(s, (_, n))| {
        (total > 0 && *n as f64 / total as f64 > max_ratio).then(|| {
            format!(
                "subject {s} owns {:.1}% of frames, above the largest target share {:.1}%",
                100.0 * *n as f64 / total as f64,
                100.0 * max_ratio
            )
        })
    });

    let mut load = [0usize; 3];
    let mut assignment = SplitAssignment::default();
    for (subject, (vids, n)) in order {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (p, (&r, &l)) in ratios.iter().zip(&load).enumerate() {
            let deficit = r * total as f64 - l as f64;
            if deficit > best_deficit {
                best_deficit = deficit;
                best = p;
            }
        }
        load[best] += n;
        for v in vids {
            assignment.videos.insert(v.clone(), Partition::ALL[best]);
        }
        assignment.subjects.insert(subject.clone(), vids.clone());
    }
    Ok(SplitOutcome {
        assignment,
        unreachable,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    pub va_bins: usize,
    pub au_ids: Vec<u32>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            va_bins: 20,
            au_ids: AU_IDS.iter().map(|&a| a as u32).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuRow {
    pub au: u32,
    pub count: usize,
    /// Percentage of AU-annotated frames with this AU active.
    pub pct_of_frames: f64,
    /// Percentage of all activations that belong to this AU.
    pub pct_of_activations: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub frames: usize,
    /// `va_hist[v][a]`, bins of equal width over [-1, 1]; value 1 falls in the last bin.
    pub va_hist: Vec<Vec<usize>>,
    pub va_frames: usize,
    pub expr_hist: [usize; NUM_EXPRESSIONS],
    pub expr_frames: usize,
    pub au_frames: usize,
    pub au_rows: Vec<AuRow>,
}

pub fn va_bin(x: f64, bins: usize) -> usize {
    let b = libm::floor((x + 1.0) / 2.0 * bins as f64);
    (b.max(0.0) as usize).min(bins - 1)
}

pub fn dataset_stats(frames: &[LabeledFrame], cfg: &StatsConfig) -> Result<DatasetStats> {
    if frames.is_empty() {
        return Err(Error::Empty("frames"));
    }
    if cfg.va_bins == 0 {
        return Err(Error::Config("va_bins must be positive".into()));
    }
    let k = cfg.au_ids.len();
    let mut va_hist = vec![vec![0usize; cfg.va_bins]; cfg.va_bins];
    let mut expr_hist = [0usize; NUM_EXPRESSIONS];
    let mut counts = vec![0usize; k];
    let (mut va_frames, mut expr_frames, mut au_frames) = (0, 0, 0);
    for f in frames {
        f.validate()?;
        if let Some([v, a]) = f.va() {
            va_hist[va_bin(v, cfg.va_bins)][va_bin(a, cfg.va_bins)] += 1;
            va_frames += 1;
        }
        if let Some(e) = f.expr {
            expr_hist[e] += 1;
            expr_frames += 1;
        }
        if let Some(aus) = &f.aus {
            if aus.len() != k {
                return Err(Error::Length {
                    what: "au vector",
                    left: aus.len(),
                    right: k,
                });
            }
            au_frames += 1;
            for (c, &on) in counts.iter_mut().zip(aus) {
                *c += on as usize;
            }
        }
    }
    Ok(DatasetStats {
        frames: frames.len(),
        va_hist,
        va_frames,
        expr_hist,
        expr_frames,
        au_frames,
        au_rows: au_table(&cfg.au_ids, &counts, au_frames),
    })
}

/// Count and both percentage bases per AU.
pub fn au_table(au_ids: &[u32], counts: &[usize], annotated_frames: usize) -> Vec<AuRow> {
    let activations: usize = counts.iter().sum();
    let pct = |c: usize, base: usize| {
        if base == 0 {
            0.0
        } else {
            100.0 * c as f64 / base as f64
        }
    };
    au_ids
        .iter()
        .zip(counts)
        .map(|(&au, &count)| AuRow {
            au,
            count,
            pct_of_frames: pct(count, annotated_frames),
            pct_of_activations: pct(count, activations),
        })
        .collect()
}

/// Decimal with comma thousands separators, e.g. `86,677`.
pub fn format_thousands(n: usize) -> String {
    let digits = format!("{n}");
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Two-line cells, count over percentage, as in a printed AU table.
pub fn format_au_cell(count: usize, pct: f64) -> [String; 2] {
    [format_thousands(count), format!("{pct:.1}%")]
}
