use afen_core::dataset::{
    aggregate_va, agreement_filter, dataset_stats, subject_independent_split, AnnotatorTrack,
    LabeledFrame, StatsConfig, VideoSummary,
};
use afen_core::embedspace::fit_centroids;
use afen_core::losses::{self, multitask_loss, HeadOutputs, MultiTaskTargets, TaskWeights, VaMode};
use afen_core::metrics::{accuracy, ConfusionMatrix};
use afen_core::{Matrix, Tape};
use proptest::prelude::*;

fn non_constant(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
        .prop_filter("non-constant", |v| v.iter().any(|&x| x != v[0]))
}

proptest! {
    #[test]
    fn ccc_symmetric_and_bounded((x, y) in (2usize..30).prop_flat_map(|n| (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n)))) {
        let a = losses::ccc(&x, &y).unwrap();
        let b = losses::ccc(&y, &x).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-12);
        prop_assert!(a.value.abs() <= 1.0);
    }

    #[test]
    fn ccc_self_is_one(x in non_constant(2..30)) {
        prop_assert!((losses::ccc(&x, &x).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_never_shares_subjects(
        sizes in prop::collection::vec((0usize..12, 1usize..2000), 1..80),
        seed in any::<u64>(),
    ) {
        let videos: Vec<VideoSummary> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(s, f))| VideoSummary { video: format!("v{i}"), subject: format!("s{s}"), frames: f })
            .collect();
        let out = subject_independent_split(&videos, [0.6, 0.1, 0.3], seed).unwrap();
        prop_assert!(out.assignment.overlapping_subjects().is_empty());
        prop_assert_eq!(out.assignment.videos.len(), videos.len());
        let again = subject_independent_split(&videos, [0.6, 0.1, 0.3], seed).unwrap();
        prop_assert_eq!(again, out);
    }

    #[test]
    fn agreement_filter_is_idempotent_subset(
        labels in prop::collection::vec(prop::collection::vec(0usize..3, 20), 2..5),
    ) {
        let tracks: Vec<AnnotatorTrack<usize>> = labels
            .into_iter()
            .enumerate()
            .map(|(a, l)| AnnotatorTrack::new(format!("a{a}"), "v", (0..20).collect(), l).unwrap())
            .collect();
        let once = agreement_filter(&tracks).unwrap();
        let twice = agreement_filter(&once.tracks).unwrap();
        prop_assert_eq!(&twice.tracks, &once.tracks);
        prop_assert_eq!(twice.report[0].dropped, 0);
        for f in &once.tracks[0].frames {
            prop_assert!(tracks[0].frames.contains(f));
        }
    }

    #[test]
    fn aggregate_ignores_annotator_order(
        values in prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6), 2..6),
        rotate in 0usize..6,
    ) {
        let tracks: Vec<AnnotatorTrack<[f64; 2]>> = values
            .iter()
            .enumerate()
            .map(|(a, v)| AnnotatorTrack::new(format!("a{a}"), "v", (0..6).collect(), v.iter().map(|&(x, y)| [x, y]).collect()).unwrap())
            .collect();
        let mut permuted = tracks.clone();
        let k = rotate % permuted.len();
        permuted.rotate_left(k);
        permuted.reverse();
        prop_assert_eq!(aggregate_va(&tracks).unwrap().values, aggregate_va(&permuted).unwrap().values);
    }

    #[test]
    fn classify_is_scale_invariant(
        q in prop::collection::vec(-1.0f64..1.0, 7).prop_filter("nonzero", |v| v.iter().any(|&x| x != 0.0)),
        factor in 1e-3f64..1e3,
    ) {
        let emb = Matrix::from_fn(7, 7, |r, c| if r == c { 1.0 } else { 0.1 * (r + c) as f64 });
        let model = fit_centroids(&emb, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let a = model.classify(&q).unwrap();
        let scaled: Vec<f64> = q.iter().map(|v| v * factor).collect();
        let b = model.classify(&scaled).unwrap();
        prop_assert_eq!(a.class, b.class);
        for (x, y) in a.similarities.iter().zip(&b.similarities) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_task_multitask_equals_task_loss(
        logits in prop::collection::vec(-3.0f64..3.0, 21),
        targets in prop::collection::vec(0usize..7, 3),
    ) {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_vec(3, 7, logits).unwrap());
        let alone = losses::cce_loss(&mut t, x, &targets).unwrap();
        let out = HeadOutputs { expr_logits: Some(x), ..HeadOutputs::default() };
        let tg = MultiTaskTargets { expr: Some(targets), ..MultiTaskTargets::default() };
        let mt = multitask_loss(&mut t, &out, &tg, VaMode::Ccc, &TaskWeights::default()).unwrap();
        prop_assert_eq!(t.scalar(alone).to_bits(), t.scalar(mt.total).to_bits());
    }

    #[test]
    fn accuracy_is_trace_over_total(
        pairs in prop::collection::vec((0usize..7, 0usize..7), 1..100),
    ) {
        let (p, y): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = ConfusionMatrix::from_predictions(7, &p, &y).unwrap();
        prop_assert_eq!(accuracy(&p, &y).unwrap(), cm.trace() as f64 / cm.total() as f64);
    }

    #[test]
    fn histogram_totals_match_label_counts(
        frames in prop::collection::vec((prop::option::of((-1.0f64..=1.0, -1.0f64..=1.0)), prop::option::of(0usize..7)), 1..60),
    ) {
        let frames: Vec<LabeledFrame> = frames
            .into_iter()
            .enumerate()
            .map(|(i, (va, e))| LabeledFrame {
                video: "v".into(),
                frame: i as u32,
                subject: "s".into(),
                valence: va.map(|p| p.0),
                arousal: va.map(|p| p.1),
                aus: Some(vec![false; 8]),
                expr: e,
            })
            .collect();
        let s = dataset_stats(&frames, &StatsConfig::default()).unwrap();
        prop_assert_eq!(s.va_hist.iter().flatten().sum::<usize>(), frames.iter().filter(|f| f.valence.is_some()).count());
        prop_assert_eq!(s.expr_hist.iter().sum::<usize>(), frames.iter().filter(|f| f.expr.is_some()).count());
    }
}
