use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use afen::wav;
use serde_json::{json, Value};

fn afen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_jsonl(path: &Path, rows: &[Value]) {
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, text).unwrap();
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn metric(rows: &[Vec<String>], name: &str) -> Option<f64> {
    let row = rows.iter().find(|r| r[0] == name).unwrap();
    (!row[1].is_empty()).then(|| row[1].parse().unwrap())
}

#[test]
fn grad_check_passes_and_names_every_loss() {
    let o = afen(&["grad-check"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for item in afen_core::gradsuite::ITEMS {
        assert!(out.contains(item.name), "missing {}", item.name);
    }
    for loss in ["cce", "bce", "ccc", "arcface", "mse", "multitask"] {
        assert!(out
            .lines()
            .any(|l| l.starts_with(loss) && l.contains("PASS")));
    }
}

#[test]
fn corrupted_gradient_exits_with_numerical_failure() {
    let o = afen(&["grad-check", "--inject-fault", "ccc", "--points", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ccc"));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("ccc") && l.contains("FAIL")));
}

fn small_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "steps": 30,
        "seed": 5,
        "hidden": [12],
        "data": {"synthetic": {"train_samples": 120, "test_samples": 40}},
        "output_dir": "out"
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn train_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = small_config(d.path(), json!({}));
        let o = afen(&["train", "--config", s(&cfg)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["model.afen", "trace.csv", "scores.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let cfg = small_config(a.path(), json!({}));
    let o = afen(&[
        "train",
        "--config",
        s(&cfg),
        "--seed",
        "6",
        "--output-dir",
        s(&a.path().join("other")),
    ]);
    assert_eq!(code(&o), 0);
    assert_ne!(
        std::fs::read(a.path().join("out/trace.csv")).unwrap(),
        std::fs::read(a.path().join("other/trace.csv")).unwrap()
    );
}

#[test]
fn zero_learning_rate_gives_flat_trace() {
    let d = tempfile::tempdir().unwrap();
    // full batches without dropout, so every step sees the same function
    let cfg = small_config(
        d.path(),
        json!({"learning_rate": 0.0, "dropout": 0.0, "batch_size": 120}),
    );
    assert_eq!(code(&afen(&["train", "--config", s(&cfg)])), 0);
    let rows = csv_rows(&d.path().join("out/trace.csv"));
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r[1] == rows[0][1]));
}

#[test]
fn invalid_config_names_the_key() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, r#"{"arcface": {"scale": -3}}"#).unwrap();
    let o = afen(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("arcface.scale"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"steps": 10, "optimiser": "adam"}"#).unwrap();
    let o = afen(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("optimiser"));
}

#[test]
fn divergence_exits_with_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        json!({"optimizer": "sgd_momentum", "learning_rate": 1e6, "va_loss": "mse", "steps": 200}),
    );
    let o = afen(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
}

fn labeled(n: usize, seed: u64) -> Vec<Value> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let au: Vec<u8> = (0..8).map(|_| rng.random_range(0..2)).collect();
            json!({
                "video_id": "v", "frame": i, "subject_id": "s",
                "valence": rng.random_range(-1.0..1.0),
                "arousal": rng.random_range(-1.0..1.0),
                "au": au,
                "expr": rng.random_range(0..7),
            })
        })
        .collect()
}

fn eval(labels: &Path, pred: &Path, out: &Path) -> Output {
    afen(&[
        "eval",
        "--labels",
        s(labels),
        "--predictions",
        s(pred),
        "--output",
        s(out),
    ])
}

#[test]
fn eval_of_labels_against_themselves_is_perfect() {
    let d = tempfile::tempdir().unwrap();
    let labels = d.path().join("labels.jsonl");
    write_jsonl(&labels, &labeled(40, 1));
    let out = d.path().join("m.csv");
    let o = eval(&labels, &labels, &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1.0000-1.0000"));
    let rows = csv_rows(&out);
    for m in [
        "ccc_valence",
        "ccc_arousal",
        "au_macro_f1",
        "expr_accuracy",
        "expr_mean_diagonal",
    ] {
        assert_eq!(metric(&rows, m), Some(1.0), "{m}");
    }
}

#[test]
fn constant_predictions_have_zero_ccc() {
    let d = tempfile::tempdir().unwrap();
    let labels = labeled(30, 2);
    let pred: Vec<Value> = labels
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r["valence"] = json!(0.3);
            r["arousal"] = json!(-0.2);
            r
        })
        .collect();
    let (lp, pp, out) = (
        d.path().join("l.jsonl"),
        d.path().join("p.jsonl"),
        d.path().join("m.csv"),
    );
    write_jsonl(&lp, &labels);
    write_jsonl(&pp, &pred);
    assert_eq!(code(&eval(&lp, &pp, &out)), 0);
    let rows = csv_rows(&out);
    assert_eq!(metric(&rows, "ccc_valence"), Some(0.0));
    assert_eq!(metric(&rows, "ccc_arousal"), Some(0.0));
}

fn brute_ccc(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = y.iter().map(|a| (a - my).powi(2)).sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    2.0 * cov / (vx + vy + (mx - my).powi(2))
}

#[test]
fn eval_of_random_files_matches_direct_formulas() {
    let d = tempfile::tempdir().unwrap();
    let labels = labeled(60, 3);
    let pred = labeled(60, 4);
    let (lp, pp, out) = (
        d.path().join("l.jsonl"),
        d.path().join("p.jsonl"),
        d.path().join("m.csv"),
    );
    write_jsonl(&lp, &labels);
    write_jsonl(&pp, &pred);
    assert_eq!(code(&eval(&lp, &pp, &out)), 0);
    let rows = csv_rows(&out);

    let col = |v: &[Value], k: &str| v.iter().map(|r| r[k].as_f64().unwrap()).collect::<Vec<_>>();
    let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    close(
        metric(&rows, "ccc_valence").unwrap(),
        brute_ccc(&col(&pred, "valence"), &col(&labels, "valence")),
    );
    close(
        metric(&rows, "ccc_arousal").unwrap(),
        brute_ccc(&col(&pred, "arousal"), &col(&labels, "arousal")),
    );

    let mut f1 = 0.0;
    for k in 0..8 {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (p, t) in pred.iter().zip(&labels) {
            match (p["au"][k].as_u64().unwrap(), t["au"][k].as_u64().unwrap()) {
                (1, 1) => tp += 1.0,
                (1, 0) => fp += 1.0,
                (0, 1) => fn_ += 1.0,
                _ => {}
            }
        }
        f1 += if tp + fp + fn_ == 0.0 {
            1.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        };
    }
    close(metric(&rows, "au_macro_f1").unwrap(), f1 / 8.0);

    let ex = |v: &[Value]| {
        v.iter()
            .map(|r| r["expr"].as_u64().unwrap() as usize)
            .collect::<Vec<_>>()
    };
    let (pe, te) = (ex(&pred), ex(&labels));
    let hits = pe.iter().zip(&te).filter(|(a, b)| a == b).count();
    close(metric(&rows, "expr_accuracy").unwrap(), hits as f64 / 60.0);
    let mut recall = Vec::new();
    for c in 0..7 {
        let total = te.iter().filter(|&&t| t == c).count();
        if total > 0 {
            let right = pe
                .iter()
                .zip(&te)
                .filter(|(&p, &t)| t == c && p == c)
                .count();
            recall.push(right as f64 / total as f64);
        }
    }
    close(
        metric(&rows, "expr_mean_diagonal").unwrap(),
        recall.iter().sum::<f64>() / recall.len() as f64,
    );
}

#[test]
fn eval_rejects_length_mismatch() {
    let d = tempfile::tempdir().unwrap();
    let labels = labeled(10, 5);
    let (lp, pp, out) = (
        d.path().join("l.jsonl"),
        d.path().join("p.jsonl"),
        d.path().join("m.csv"),
    );
    write_jsonl(&lp, &labels);
    write_jsonl(&pp, &labels[..9]);
    let o = eval(&lp, &pp, &out);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("prediction/label"), "{}", stderr(&o));
}

#[test]
fn trained_models_evaluate_from_features() {
    use rand::{Rng, SeedableRng};
    let d = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    // two features; the class is the angular sector of the point
    let rows: Vec<Value> = (0..140)
        .map(|i| {
            let c = i % 7;
            let a = 2.0 * std::f64::consts::PI * c as f64 / 7.0;
            let x = 4.0 * a.cos() + 0.3 * rng.random_range(-1.0..1.0);
            let y = 4.0 * a.sin() + 0.3 * rng.random_range(-1.0..1.0);
            json!({"video_id": "v", "frame": i, "subject_id": "s", "expr": c, "features": [x, y]})
        })
        .collect();
    let data = d.path().join("train.jsonl");
    write_jsonl(&data, &rows);
    let cfg = d.path().join("arc.json");
    std::fs::write(
        &cfg,
        json!({
            "model": "arcface", "steps": 300, "learning_rate": 1e-2, "batch_size": 140,
            "arcface": {"dim": 8, "margin": 0.5},
            "data": {"train": "train.jsonl"}, "output_dir": "out"
        })
        .to_string(),
    )
    .unwrap();
    let o = afen(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = d.path().join("m.csv");
    let model = d.path().join("out/model.afen");
    let o = afen(&[
        "eval",
        "--labels",
        s(&data),
        "--model",
        s(&model),
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = csv_rows(&out);
    assert!(metric(&m, "expr_accuracy").unwrap() > 0.9);
    assert_eq!(metric(&m, "ccc_valence"), None);

    let mut missing = rows[0].clone();
    missing.as_object_mut().unwrap().remove("features");
    write_jsonl(&data, &[missing]);
    let o = afen(&["eval", "--labels", s(&data), "--model", s(&model)]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains(":1: missing `features`"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn multitask_training_from_a_file() {
    let d = tempfile::tempdir().unwrap();
    let rows: Vec<Value> = labeled(50, 7)
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r["features"] = json!([i as f64 / 50.0, 1.0 - i as f64 / 25.0, 0.5]);
            r
        })
        .collect();
    write_jsonl(&d.path().join("t.jsonl"), &rows);
    let cfg = d.path().join("c.json");
    std::fs::write(
        &cfg,
        json!({"steps": 20, "hidden": [8], "tasks": {"au": false}, "data": {"train": "t.jsonl"}, "output_dir": "o"})
            .to_string(),
    )
    .unwrap();
    let o = afen(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.path().join("o/model.afen").exists());
    assert!(!d.path().join("o/scores.csv").exists());
}

#[test]
fn split_of_fixture_keeps_subjects_disjoint() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("split.csv");
    let o = afen(&[
        "split",
        "--input",
        s(&fixture("frames.jsonl")),
        "--output",
        s(&out),
        "--seed",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 11);
    let mut seen: std::collections::BTreeMap<String, String> = Default::default();
    for r in &rows {
        let prev = seen.insert(r[1].clone(), r[2].clone());
        assert!(
            prev.is_none() || prev.as_deref() == Some(r[2].as_str()),
            "subject {} split",
            r[1]
        );
    }
    let again = d.path().join("again.csv");
    afen(&[
        "split",
        "--input",
        s(&fixture("frames.jsonl")),
        "--output",
        s(&again),
        "--seed",
        "3",
    ]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let o = afen(&[
        "split",
        "--input",
        s(&fixture("frames.jsonl")),
        "--output",
        s(&out),
        "--ratios",
        "0.5,0.5,0.5",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn stats_of_fixture_match_golden_files() {
    let d = tempfile::tempdir().unwrap();
    let o = afen(&[
        "stats",
        "--input",
        s(&fixture("frames.jsonl")),
        "--output-dir",
        s(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["va_histogram.csv", "expr_histogram.csv", "au_table.csv"] {
        let got = std::fs::read_to_string(d.path().join(f)).unwrap();
        let want = std::fs::read_to_string(fixture("golden").join(f)).unwrap();
        assert_eq!(got, want, "{f}");
    }
}

#[test]
fn golden_files_agree_with_direct_counts() {
    let text = std::fs::read_to_string(fixture("frames.jsonl")).unwrap();
    let frames: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();

    let mut au = [0usize; 8];
    let mut au_frames = 0;
    let mut expr = [0usize; 7];
    let mut va = vec![0usize; 400];
    for f in &frames {
        if let Some(a) = f["au"].as_array() {
            au_frames += 1;
            for (k, v) in a.iter().enumerate() {
                au[k] += v.as_u64().unwrap() as usize;
            }
        }
        if let Some(e) = f["expr"].as_u64() {
            expr[e as usize] += 1;
        }
        if let (Some(v), Some(a)) = (f["valence"].as_f64(), f["arousal"].as_f64()) {
            let bin = |x: f64| (((x + 1.0) * 10.0).floor() as usize).min(19);
            va[bin(v) * 20 + bin(a)] += 1;
        }
    }
    let total: usize = au.iter().sum();
    let golden = csv_rows(&fixture("golden/au_table.csv"));
    for (k, row) in golden.iter().enumerate() {
        assert_eq!(row[1].parse::<usize>().unwrap(), au[k]);
        let pf: f64 = row[2].parse().unwrap();
        let pa: f64 = row[3].parse().unwrap();
        assert!((pf - 100.0 * au[k] as f64 / au_frames as f64).abs() < 1e-12);
        assert!((pa - 100.0 * au[k] as f64 / total as f64).abs() < 1e-12);
    }
    let golden = csv_rows(&fixture("golden/expr_histogram.csv"));
    for (c, row) in golden.iter().enumerate() {
        assert_eq!(row[1].parse::<usize>().unwrap(), expr[c]);
    }
    let golden = csv_rows(&fixture("golden/va_histogram.csv"));
    assert_eq!(golden.len(), 400);
    for (i, row) in golden.iter().enumerate() {
        assert_eq!(row[4].parse::<usize>().unwrap(), va[i], "bin {i}");
    }
}

#[test]
fn aggregate_keeps_agreed_labels_and_means_va() {
    let d = tempfile::tempdir().unwrap();
    let (out, report) = (d.path().join("c.jsonl"), d.path().join("r.csv"));
    let input = fixture("annotations.jsonl");
    let o = afen(&[
        "aggregate",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let raw: Vec<Value> = std::fs::read_to_string(&input)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let merged: Vec<Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(merged.len(), 16);
    for m in &merged {
        let same: Vec<&Value> = raw
            .iter()
            .filter(|r| r["video_id"] == m["video_id"] && r["frame"] == m["frame"])
            .collect();
        assert_eq!(same.len(), 3);
        let mean = same
            .iter()
            .map(|r| r["valence"].as_f64().unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((m["valence"].as_f64().unwrap() - mean).abs() < 1e-12);
        let agree = |k: &str| same.iter().all(|r| r[k] == same[0][k]);
        assert_eq!(m.get("au").is_some(), agree("au"));
        assert_eq!(m.get("expr").is_some(), agree("expr"));
        if agree("au") {
            assert_eq!(m["au"], same[0]["au"]);
        }
    }
    let rows = csv_rows(&report);
    assert_eq!(rows[0][3..], ["6", "2", "7", "1"]);

    let no_annotator = d.path().join("n.jsonl");
    write_jsonl(
        &no_annotator,
        &[json!({"video_id": "v", "frame": 0, "subject_id": "s", "expr": 1})],
    );
    let o = afen(&[
        "aggregate",
        "--input",
        s(&no_annotator),
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("annotator_id"));
}

#[test]
fn one_second_of_silence_is_all_minus_one() {
    let d = tempfile::tempdir().unwrap();
    let (input, out) = (d.path().join("s.wav"), d.path().join("s.csv"));
    std::fs::write(&input, wav::encode(44_100, &vec![0; 44_100])).unwrap();
    let o = afen(&["spectrogram", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 44);
    for l in lines {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 728);
        assert!(cells.iter().all(|c| *c == "-1"));
    }
}

#[test]
fn tone_peaks_at_its_bin() {
    let d = tempfile::tempdir().unwrap();
    let (input, out) = (d.path().join("t.wav"), d.path().join("t.csv"));
    let samples: Vec<i16> = (0..44_100)
        .map(|i| {
            (16_000.0 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 44_100.0).sin()) as i16
        })
        .collect();
    std::fs::write(&input, wav::encode(44_100, &samples)).unwrap();
    assert_eq!(
        code(&afen(&[
            "spectrogram",
            "--input",
            s(&input),
            "--output",
            s(&out)
        ])),
        0
    );
    // bin width 44100 / 1455 Hz, so 440 Hz lands at round(440 * 1455 / 44100) = 15
    for l in std::fs::read_to_string(&out).unwrap().lines() {
        let v: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        let best = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        assert_eq!(best, 15);
    }
}

#[test]
fn bad_wav_files_are_rejected_with_offsets() {
    let d = tempfile::tempdir().unwrap();
    let (input, out) = (d.path().join("x.wav"), d.path().join("x.csv"));
    let mut stereo = wav::encode(44_100, &vec![0; 2000]);
    stereo[22] = 2;
    std::fs::write(&input, &stereo).unwrap();
    let o = afen(&["spectrogram", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("offset 22") && stderr(&o).contains("channels"),
        "{}",
        stderr(&o)
    );

    std::fs::write(&input, wav::encode(16_000, &vec![0; 2000])).unwrap();
    let o = afen(&["spectrogram", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("16000"), "{}", stderr(&o));

    // a config at the file's own rate accepts it
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"spectrogram": {"sample_rate": 16000}}"#).unwrap();
    let o = afen(&[
        "spectrogram",
        "--config",
        s(&cfg),
        "--input",
        s(&input),
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let o = afen(&["split", "--input", "x.jsonl"]);
    assert_eq!(code(&o), 1);
    let o = afen(&[
        "split", "--input", "x", "--output", "y", "--ratios", "0.5,0.5",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("3 values"));
    assert_eq!(code(&afen(&["--help"])), 0);
}
