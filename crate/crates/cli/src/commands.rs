//! One function per subcommand. Each writes its files and returns a short
//! human-readable report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use afen_core::config::NUM_EXPRESSIONS;
use afen_core::dataset::{
    aggregate_va, agreement_filter, dataset_stats, format_au_cell, inter_annotator_correlation,
    subject_independent_split, summarize_videos, AnnotatorTrack, CorrelationKind, StatsConfig,
};
use afen_core::embedspace::fit_centroids;
use afen_core::gradsuite::{self, SuiteConfig};
use afen_core::metrics::{self, Averaging, ConfusionMatrix};
use afen_core::nets::{train, ArcFaceNet, MultiTaskNet};
use afen_core::signals::spectrogram;
use afen_core::synthetic::{LabeledBatch, LabeledSet, MultiTaskData};
use afen_core::Matrix;

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::experiments::{self, stream, ArcFaceRun, MultiTaskRun, INIT_STREAM};
use crate::jsonl::{self, FrameRecord, Located};
use crate::model::TrainedModel;
use crate::wav;

fn num(v: f64) -> String {
    format!("{v}")
}

/// Render rows through the csv writer so ids with commas or quotes survive.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    if !header.is_empty() {
        w.write_record(header).map_err(io)?;
    }
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn cmd_grad_check(seed: u64, points: usize, fault: Option<String>) -> CliResult<String> {
    let cfg = SuiteConfig {
        seed,
        points,
        fault,
        ..SuiteConfig::default()
    };
    let reports = gradsuite::run_suite(&cfg)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>14} {:>6}  status  description",
        "item", "max rel err", "points"
    );
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passes() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{:<16} {:>14.3e} {:>6}  {status:<6}  {}",
            r.name, r.max_rel_error, r.points, r.description
        );
        if !r.passes() {
            failed.push(r.name.to_string());
        }
    }
    let _ = writeln!(out, "tolerance {:e}", gradsuite::TOLERANCE);
    if failed.is_empty() {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::GradCheck(failed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub model: PathBuf,
    pub trace: PathBuf,
    /// Held-out scores, only for generated data.
    pub scores: Option<PathBuf>,
}

fn features(records: &[Located], path: &Path) -> CliResult<Matrix> {
    let width = records
        .first()
        .and_then(|l| l.record.features.as_ref())
        .map_or(0, Vec::len);
    let mut data = Vec::with_capacity(records.len() * width);
    for l in records {
        match &l.record.features {
            Some(f) if f.len() == width && width > 0 => data.extend_from_slice(f),
            Some(f) => {
                return Err(CliError::line(
                    path,
                    l.line,
                    format!("{} features, expected {width}", f.len()),
                ))
            }
            None => return Err(CliError::line(path, l.line, "missing `features`")),
        }
    }
    Ok(Matrix::from_vec(records.len(), width, data)?)
}

fn require<T>(v: Option<T>, path: &Path, line: usize, what: &str) -> CliResult<T> {
    v.ok_or_else(|| {
        CliError::line(
            path,
            line,
            format!("missing `{what}` required by the config"),
        )
    })
}

fn multitask_file_data(cfg: &RunConfig, path: &Path) -> CliResult<MultiTaskData> {
    let records = jsonl::read(path)?;
    if records.is_empty() {
        return Err(CliError::Invalid(format!("{}: no records", path.display())));
    }
    let inputs = features(&records, path)?;
    let mask = cfg.mask();
    let n = records.len();
    let au_count = records
        .iter()
        .find_map(|l| l.record.au.as_ref().map(Vec::len))
        .unwrap_or(cfg.data.synthetic.au_count);
    let mut va = Matrix::zeros(n, 2);
    let mut aus = Matrix::zeros(n, au_count);
    let mut expr = vec![0; n];
    for (i, l) in records.iter().enumerate() {
        let r = &l.record;
        if mask.va {
            va[(i, 0)] = require(r.valence, path, l.line, "valence")?;
            va[(i, 1)] = require(r.arousal, path, l.line, "arousal")?;
        }
        if mask.au {
            let a = require(r.au.as_ref(), path, l.line, "au")?;
            if a.len() != au_count {
                return Err(CliError::line(
                    path,
                    l.line,
                    format!("{} AUs, expected {au_count}", a.len()),
                ));
            }
            for (k, &b) in a.iter().enumerate() {
                aus[(i, k)] = b as f64;
            }
        }
        if mask.expr {
            expr[i] = require(r.expr, path, l.line, "expr")?;
        }
    }
    Ok(MultiTaskData {
        inputs,
        va,
        aus,
        expr,
        mask,
    })
}

fn arcface_file_data(path: &Path) -> CliResult<LabeledSet> {
    let records = jsonl::read(path)?;
    let inputs = features(&records, path)?;
    let labels = records
        .iter()
        .map(|l| require(l.record.expr, path, l.line, "expr"))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(LabeledSet { inputs, labels })
}

/// Train the configured network and write `model.afen`, `trace.csv` and,
/// for generated data, `scores.csv` into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<(TrainArtifacts, String)> {
    let tc = cfg.train_config();
    let hidden = cfg.hidden();
    let syn = &cfg.data.synthetic;
    let (model, losses, scores): (TrainedModel, Vec<f64>, Option<Vec<(&str, f64)>>) =
        match (cfg.model, &cfg.data.train) {
            (ModelKind::Multitask, None) => {
                let run = MultiTaskRun {
                    train: tc,
                    inputs: syn.inputs,
                    hidden,
                    au_count: syn.au_count,
                    train_samples: syn.train_samples,
                    test_samples: syn.test_samples,
                    mask: cfg.mask(),
                    va_mode: cfg.va_mode(),
                };
                let o = experiments::run_multitask(&run)?;
                let s = o.scores;
                let scores = vec![
                    ("ccc_valence", s.ccc_valence),
                    ("ccc_arousal", s.ccc_arousal),
                    ("au_macro_f1", s.au_macro_f1),
                    ("expr_accuracy", s.expr_accuracy),
                    ("expr_mean_diagonal", s.expr_mean_diagonal),
                ];
                (TrainedModel::MultiTask(o.net), o.trace.losses, Some(scores))
            }
            (ModelKind::Multitask, Some(path)) => {
                let data = multitask_file_data(cfg, path)?;
                let mut widths = vec![data.inputs.cols()];
                widths.extend(&hidden);
                let mut net =
                    MultiTaskNet::new(&widths, data.aus.cols(), &mut stream(tc.seed, INIT_STREAM));
                let trace = experiments::multitask_train(&mut net, &data, &tc, cfg.va_mode())?;
                (TrainedModel::MultiTask(net), trace.losses, None)
            }
            (ModelKind::Arcface, None) => {
                let run = ArcFaceRun {
                    train: tc,
                    hidden,
                    dim: cfg.arcface.dim,
                    scale: cfg.arcface.scale,
                    margin: cfg.arcface.margin,
                    clusters: syn.clusters(),
                };
                let o = experiments::run_arcface(&run)?;
                let g = o.geometry;
                let scores = vec![
                    ("intra_class_cosine", g.intra_cosine),
                    ("min_center_angle", g.min_center_angle),
                    ("nearest_centroid_accuracy", g.accuracy),
                ];
                let model = TrainedModel::ArcFace {
                    net: o.net,
                    centroids: o.centroids,
                };
                (model, o.trace.losses, Some(scores))
            }
            (ModelKind::Arcface, Some(path)) => {
                let data = arcface_file_data(path)?;
                let mut widths = vec![data.inputs.cols()];
                widths.extend(&hidden);
                widths.push(cfg.arcface.dim);
                let a = &cfg.arcface;
                let mut net = ArcFaceNet::new(
                    &widths,
                    a.scale,
                    a.margin,
                    &mut stream(tc.seed, INIT_STREAM),
                )?;
                let trace = train(&mut net, &data, &tc, |t, b, batch: &LabeledBatch, _| {
                    let x = t.leaf(batch.inputs.clone());
                    let e = ArcFaceNet::embed_node(t, b, x)?;
                    b.head.loss(t, e, &batch.labels)
                })?;
                let centroids = fit_centroids(&net.embed(&data.inputs)?, &data.labels)?;
                (TrainedModel::ArcFace { net, centroids }, trace.losses, None)
            }
        };

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let artifacts = TrainArtifacts {
        model: dir.join("model.afen"),
        trace: dir.join("trace.csv"),
        scores: scores.as_ref().map(|_| dir.join("scores.csv")),
    };
    model.to_container().write(&artifacts.model)?;
    let rows: Vec<Vec<String>> = losses
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), num(*l)])
        .collect();
    write_csv(&artifacts.trace, &["step", "loss"], &rows)?;

    let mut report = String::new();
    let _ = writeln!(report, "steps {}", losses.len());
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        let _ = writeln!(report, "loss {first:.6} -> {last:.6}");
    }
    if let (Some(scores), Some(path)) = (&scores, &artifacts.scores) {
        let rows: Vec<Vec<String>> = scores
            .iter()
            .map(|(k, v)| vec![k.to_string(), num(*v)])
            .collect();
        write_csv(path, &["metric", "value"], &rows)?;
        for (k, v) in scores {
            let _ = writeln!(report, "{k:<26} {v:.4}");
        }
    }
    let _ = writeln!(report, "wrote {}", artifacts.model.display());
    let _ = writeln!(report, "wrote {}", artifacts.trace.display());
    Ok((artifacts, report))
}

/// Metric name and value; `None` when the inputs do not carry that task.
pub type MetricRow = (&'static str, Option<f64>);

fn all<T>(records: &[FrameRecord], f: impl Fn(&FrameRecord) -> Option<T>) -> Option<Vec<T>> {
    records.iter().map(f).collect()
}

/// Task metrics of aligned prediction and label records.
pub fn evaluate(pred: &[FrameRecord], labels: &[FrameRecord]) -> CliResult<Vec<MetricRow>> {
    if pred.len() != labels.len() {
        return Err(afen_core::Error::Length {
            what: "prediction/label records",
            left: pred.len(),
            right: labels.len(),
        }
        .into());
    }
    if let Some(i) = (0..pred.len()).find(|&i| pred[i].key() != labels[i].key()) {
        return Err(CliError::Invalid(format!(
            "record {}: prediction is for {:?} but the label is for {:?}",
            i + 1,
            pred[i].key(),
            labels[i].key()
        )));
    }
    let ccc = |f: fn(&FrameRecord) -> Option<f64>| -> CliResult<Option<f64>> {
        match (all(pred, f), all(labels, f)) {
            (Some(p), Some(l)) if p.len() >= 2 => Ok(Some(metrics::ccc_metric(&p, &l)?.value)),
            _ => Ok(None),
        }
    };
    let bools = |r: &FrameRecord| {
        r.au.as_ref()
            .map(|a| a.iter().map(|&b| b == 1).collect::<Vec<bool>>())
    };
    let f1 = match (all(pred, bools), all(labels, bools)) {
        (Some(p), Some(l)) if !p.is_empty() => {
            Some(metrics::multilabel_f1(&p, &l, Averaging::Macro)?.value)
        }
        _ => None,
    };
    let (acc, diag) = match (all(pred, |r| r.expr), all(labels, |r| r.expr)) {
        (Some(p), Some(l)) if !p.is_empty() => {
            let cm = ConfusionMatrix::from_predictions(NUM_EXPRESSIONS, &p, &l)?;
            (
                Some(metrics::accuracy(&p, &l)?),
                Some(metrics::mean_diagonal(&cm, false)?.value),
            )
        }
        _ => (None, None),
    };
    Ok(vec![
        ("ccc_valence", ccc(|r| r.valence)?),
        ("ccc_arousal", ccc(|r| r.arousal)?),
        ("au_macro_f1", f1),
        ("expr_accuracy", acc),
        ("expr_mean_diagonal", diag),
    ])
}

/// Predictions of a stored model for every record's `features`.
pub fn predict(
    model: &TrainedModel,
    labels: &[Located],
    path: &Path,
) -> CliResult<Vec<FrameRecord>> {
    let x = features(labels, path)?;
    if x.cols() != model.inputs() {
        return Err(CliError::Invalid(format!(
            "{}: {} features per record but the model takes {}",
            path.display(),
            x.cols(),
            model.inputs()
        )));
    }
    let blank = |l: &Located| FrameRecord {
        annotator_id: None,
        valence: None,
        arousal: None,
        au: None,
        expr: None,
        features: None,
        ..l.record.clone()
    };
    match model {
        TrainedModel::MultiTask(net) => {
            let p = net.predict(&x)?;
            let aus = p.au_active();
            let expr = p.expr();
            Ok(labels
                .iter()
                .enumerate()
                .map(|(i, l)| FrameRecord {
                    valence: Some(p.va[(i, 0)]),
                    arousal: Some(p.va[(i, 1)]),
                    au: Some(aus[i].iter().map(|&b| u8::from(b)).collect()),
                    expr: Some(expr[i]),
                    ..blank(l)
                })
                .collect())
        }
        TrainedModel::ArcFace { net, centroids } => {
            let classes = centroids.classify_rows(&net.embed(&x)?)?;
            Ok(labels
                .iter()
                .zip(classes)
                .map(|(l, c)| FrameRecord {
                    expr: Some(c),
                    ..blank(l)
                })
                .collect())
        }
    }
}

pub fn render_metrics(rows: &[MetricRow]) -> String {
    let get = |k: &str| rows.iter().find(|(n, _)| *n == k).and_then(|(_, v)| *v);
    let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {}-{}",
        "CCC_V-CCC_A",
        show(get("ccc_valence")),
        show(get("ccc_arousal"))
    );
    let _ = writeln!(out, "{:<20} {}", "AU macro-F1", show(get("au_macro_f1")));
    let _ = writeln!(
        out,
        "{:<20} {}",
        "Expr accuracy",
        show(get("expr_accuracy"))
    );
    let _ = writeln!(
        out,
        "{:<20} {}",
        "Expr mean diagonal",
        show(get("expr_mean_diagonal"))
    );
    out
}

pub enum EvalSource<'a> {
    Predictions(&'a Path),
    Model(&'a Path),
}

pub fn cmd_eval(
    labels_path: &Path,
    source: EvalSource,
    output: Option<&Path>,
) -> CliResult<String> {
    let labels = jsonl::read(labels_path)?;
    let pred = match source {
        EvalSource::Predictions(p) => jsonl::read(p)?.into_iter().map(|l| l.record).collect(),
        EvalSource::Model(m) => predict(&TrainedModel::read(m)?, &labels, labels_path)?,
    };
    let labels: Vec<FrameRecord> = labels.into_iter().map(|l| l.record).collect();
    let rows = evaluate(&pred, &labels)?;
    if let Some(out) = output {
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|(k, v)| vec![k.to_string(), v.map(num).unwrap_or_default()])
            .collect();
        write_csv(out, &["metric", "value"], &csv)?;
    }
    Ok(render_metrics(&rows))
}

pub fn cmd_split(input: &Path, ratios: [f64; 3], seed: u64, output: &Path) -> CliResult<String> {
    let frames = jsonl::read_frames(input)?;
    let videos = summarize_videos(&frames)?;
    let outcome = subject_independent_split(&videos, ratios, seed)?;
    let a = &outcome.assignment;
    let rows: Vec<Vec<String>> = videos
        .iter()
        .map(|v| {
            let p = a.partition_of(&v.video).expect("every video is assigned");
            vec![
                v.video.clone(),
                v.subject.clone(),
                p.name().to_string(),
                v.frames.to_string(),
            ]
        })
        .collect();
    write_csv(
        output,
        &["video_id", "subject_id", "partition", "frames"],
        &rows,
    )?;

    let mut out = String::new();
    let counts = a.video_counts();
    let achieved = a.frame_ratios(&videos);
    for p in afen_core::dataset::Partition::ALL {
        let i = p.index();
        let _ = writeln!(
            out,
            "{:<10} {:>5} videos  frame share {:.4} (target {:.4})",
            p.name(),
            counts[i],
            achieved[i],
            ratios[i]
        );
    }
    if let Some(s) = &outcome.unreachable {
        let _ = writeln!(
            out,
            "warning: subject {s} alone exceeds the largest target share"
        );
    }
    Ok(out)
}

/// Tracks of one label type, one per annotator, for one video.
fn tracks<L: Clone>(
    video: &str,
    records: &[&Located],
    path: &Path,
    get: impl Fn(&FrameRecord) -> Option<L>,
) -> CliResult<Vec<AnnotatorTrack<L>>> {
    let mut by_annotator: BTreeMap<&str, Vec<(u32, L, usize)>> = BTreeMap::new();
    for l in records {
        if let Some(v) = get(&l.record) {
            let a = l.record.annotator_id.as_deref().expect("checked by caller");
            by_annotator
                .entry(a)
                .or_default()
                .push((l.record.frame, v, l.line));
        }
    }
    by_annotator
        .into_iter()
        .map(|(a, mut rows)| {
            rows.sort_by_key(|r| r.0);
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CliError::line(
                    path,
                    w[1].2,
                    format!("annotator {a} labels frame {} of {video} twice", w[1].0),
                ));
            }
            let (frames, labels) = rows.into_iter().map(|(f, v, _)| (f, v)).unzip();
            Ok(AnnotatorTrack::new(a, video, frames, labels)?)
        })
        .collect()
}

fn slot<'a>(
    out: &'a mut BTreeMap<u32, FrameRecord>,
    video: &str,
    subject: &str,
    frame: u32,
) -> &'a mut FrameRecord {
    out.entry(frame).or_insert_with(|| FrameRecord {
        video_id: video.to_string(),
        frame,
        subject_id: subject.to_string(),
        annotator_id: None,
        valence: None,
        arousal: None,
        au: None,
        expr: None,
        features: None,
    })
}

/// Merge per-annotator records into one consensus record per frame: mean
/// valence/arousal, and AU / expression labels only where all annotators
/// agree.
pub fn cmd_aggregate(
    input: &Path,
    output: &Path,
    report: Option<&Path>,
    kind: CorrelationKind,
) -> CliResult<String> {
    let records = jsonl::read(input)?;
    let mut videos: Vec<&str> = Vec::new();
    let mut by_video: BTreeMap<&str, Vec<&Located>> = BTreeMap::new();
    for l in &records {
        if l.record.annotator_id.is_none() {
            return Err(CliError::line(input, l.line, "missing `annotator_id`"));
        }
        if !by_video.contains_key(l.record.video_id.as_str()) {
            videos.push(&l.record.video_id);
        }
        by_video.entry(&l.record.video_id).or_default().push(l);
    }

    let mut merged: Vec<FrameRecord> = Vec::new();
    let mut report_rows = Vec::new();
    let mut summary = String::new();
    for video in videos {
        let recs = &by_video[video];
        let subject = &recs[0].record.subject_id;
        if let Some(l) = recs.iter().find(|l| &l.record.subject_id != subject) {
            return Err(CliError::line(
                input,
                l.line,
                format!("video {video} changes subject"),
            ));
        }
        let mut out: BTreeMap<u32, FrameRecord> = BTreeMap::new();
        let va = tracks(video, recs, input, |r| {
            r.valence.zip(r.arousal).map(|(v, a)| [v, a])
        })?;
        let mut corr = [String::new(), String::new()];
        if !va.is_empty() {
            let agg = aggregate_va(&va)?;
            for (f, [v, a]) in agg.frames.iter().zip(&agg.values) {
                let r = slot(&mut out, video, subject, *f);
                r.valence = Some(*v);
                r.arousal = Some(*a);
            }
            let c = inter_annotator_correlation(&va, kind)?;
            corr = [
                c.valence.map(num).unwrap_or_default(),
                c.arousal.map(num).unwrap_or_default(),
            ];
        }
        let au = tracks(video, recs, input, |r| r.au.clone())?;
        let mut au_counts = [String::new(), String::new()];
        if !au.is_empty() {
            let o = agreement_filter(&au)?;
            for (_, f, l) in o.consensus() {
                slot(&mut out, video, subject, f).au = Some(l);
            }
            au_counts = [
                o.report[0].kept.to_string(),
                o.report[0].dropped.to_string(),
            ];
        }
        let ex = tracks(video, recs, input, |r| r.expr)?;
        let mut ex_counts = [String::new(), String::new()];
        if !ex.is_empty() {
            let o = agreement_filter(&ex)?;
            for (_, f, l) in o.consensus() {
                slot(&mut out, video, subject, f).expr = Some(l);
            }
            ex_counts = [
                o.report[0].kept.to_string(),
                o.report[0].dropped.to_string(),
            ];
        }
        let _ = writeln!(
            summary,
            "{video}: {} VA annotators, AU kept/dropped {}/{}, expr kept/dropped {}/{}",
            va.len(),
            au_counts[0],
            au_counts[1],
            ex_counts[0],
            ex_counts[1]
        );
        let [cv, ca] = corr;
        let [ak, ad] = au_counts;
        let [ek, ed] = ex_counts;
        report_rows.push(vec![video.to_string(), cv, ca, ak, ad, ek, ed]);
        // frames where every label was dropped carry nothing
        merged.extend(
            out.into_values()
                .filter(|r| r.valence.is_some() || r.au.is_some() || r.expr.is_some()),
        );
    }
    std::fs::write(output, jsonl::render(&merged)).map_err(|e| CliError::io(output, e))?;
    if let Some(path) = report {
        write_csv(
            path,
            &[
                "video_id",
                "valence_correlation",
                "arousal_correlation",
                "au_kept",
                "au_dropped",
                "expr_kept",
                "expr_dropped",
            ],
            &report_rows,
        )?;
    }
    let _ = writeln!(summary, "wrote {} consensus frames", merged.len());
    Ok(summary)
}

pub fn cmd_stats(input: &Path, out_dir: &Path, cfg: &StatsConfig) -> CliResult<String> {
    let frames = jsonl::read_frames(input)?;
    let s = dataset_stats(&frames, cfg)?;
    create_dir(out_dir)?;

    let bins = cfg.va_bins;
    let edge = |i: usize| num(-1.0 + 2.0 * i as f64 / bins as f64);
    let mut va_rows = Vec::with_capacity(bins * bins);
    for v in 0..bins {
        for a in 0..bins {
            va_rows.push(vec![
                edge(v),
                edge(v + 1),
                edge(a),
                edge(a + 1),
                s.va_hist[v][a].to_string(),
            ]);
        }
    }
    write_csv(
        &out_dir.join("va_histogram.csv"),
        &[
            "valence_lo",
            "valence_hi",
            "arousal_lo",
            "arousal_hi",
            "count",
        ],
        &va_rows,
    )?;
    let expr_rows: Vec<Vec<String>> = s
        .expr_hist
        .iter()
        .enumerate()
        .map(|(c, n)| vec![c.to_string(), n.to_string()])
        .collect();
    write_csv(
        &out_dir.join("expr_histogram.csv"),
        &["expr", "count"],
        &expr_rows,
    )?;
    let au_rows: Vec<Vec<String>> = s
        .au_rows
        .iter()
        .map(|r| {
            vec![
                r.au.to_string(),
                r.count.to_string(),
                num(r.pct_of_frames),
                num(r.pct_of_activations),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("au_table.csv"),
        &["au", "count", "pct_of_frames", "pct_of_activations"],
        &au_rows,
    )?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} frames: {} with VA, {} with AUs, {} with expressions",
        s.frames, s.va_frames, s.au_frames, s.expr_frames
    );
    let _ = writeln!(
        out,
        "{:<6} {:>10} {:>10} {:>12}",
        "AU", "count", "% frames", "% activations"
    );
    for r in &s.au_rows {
        let [count, pf] = format_au_cell(r.count, r.pct_of_frames);
        let [_, pa] = format_au_cell(r.count, r.pct_of_activations);
        let _ = writeln!(
            out,
            "{:<6} {count:>10} {pf:>10} {pa:>12}",
            format!("AU{}", r.au)
        );
    }
    Ok(out)
}

pub fn cmd_spectrogram(input: &Path, output: &Path, cfg: &RunConfig) -> CliResult<String> {
    let audio = wav::read(input)?;
    let sc = cfg.spectrogram.to_core();
    if audio.sample_rate != sc.sample_rate {
        return Err(CliError::Invalid(format!(
            "{}: sample rate {} Hz does not match the configured {} Hz; resample first",
            input.display(),
            audio.sample_rate,
            sc.sample_rate
        )));
    }
    let spec = spectrogram(&audio.samples, &sc)?;
    let rows: Vec<Vec<String>> = (0..spec.data.rows())
        .map(|r| spec.data.row(r).iter().map(|&v| num(v)).collect())
        .collect();
    write_csv(output, &[], &rows)?;
    let mut out = format!(
        "{} frames x {} bins (window {}, hop {})\n",
        spec.data.rows(),
        spec.data.cols(),
        sc.window_samples(),
        sc.hop_samples()
    );
    if spec.degenerate {
        out.push_str("warning: constant input, every value set to -1\n");
    }
    Ok(out)
}
