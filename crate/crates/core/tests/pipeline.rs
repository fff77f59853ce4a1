mod support;

use std::sync::Arc;

use chrono::TimeDelta;
use eventwin_core::corpus::{chunk_stream, StopWords};
use eventwin_core::detection::{detect, Aggregation, DetectorConfig};
use eventwin_core::embedding::{train_window_embeddings, EmbeddingConfig};
use eventwin_core::pipeline::{run_detect, run_eval, run_sweep, DetectionReport};
use eventwin_core::Error;
use support::*;

#[test]
fn identical_windows_show_no_change() {
    let texts = strings(&["goal rashford var", "var goal", "rashford rashford goal"]);
    let docs = stream_documents(&[texts.clone(), texts], TimeDelta::minutes(2));
    let windows = chunk_stream(docs, TimeDelta::minutes(2), t0()).unwrap();
    let cfg = EmbeddingConfig {
        dimension: 8,
        ..EmbeddingConfig::default()
    };
    let model = train_window_embeddings(&windows[0], &cfg);
    let models = vec![model.clone(), model];
    let detector = DetectorConfig {
        beta: 1,
        ..DetectorConfig::default()
    };
    let results = detect(&windows, &models, &detector, Arc::new(StopWords::english())).unwrap();
    assert_eq!(results.len(), 1);
    let r = &results[0];
    assert_eq!((r.cluster_change, r.vocabulary_change, r.overall_change), (0.0, 0.0, 0.0));
    assert!(!r.is_event);
    assert!(r.event_words.is_empty());
}

#[test]
fn block_switch_is_flagged_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_stream(dir.path(), "s.jsonl", &two_block_stream(1, 200), TimeDelta::minutes(2));
    let cfg = two_block_config(&path);
    let report = run_detect(&cfg).unwrap();
    assert_eq!(report.windows.len(), 4);
    assert_eq!(report.results.len(), 3);
    let flagged: Vec<usize> = report.event_windows().map(|r| r.window_index).collect();
    assert_eq!(flagged, vec![3]);
    for tok in BLOCK_B {
        assert!(report.results[2].event_words.contains(tok));
    }
    let again = run_detect(&cfg).unwrap();
    assert_eq!(report.deterministic_json().unwrap(), again.deterministic_json().unwrap());

    let out = dir.path().join("report.json");
    report.write(&out).unwrap();
    assert_eq!(DetectionReport::read(&out).unwrap().results, report.results);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_stream(dir.path(), "s.jsonl", &two_block_stream(2, 100), TimeDelta::minutes(2));
    let mut cfg = two_block_config(&path);
    let one = run_detect(&cfg).unwrap();
    cfg.workers = 4;
    let four = run_detect(&cfg).unwrap();
    assert_eq!(one.results, four.results);
}

#[test]
fn a_single_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_stream(dir.path(), "s.jsonl", &[strings(&["a b c"])], TimeDelta::minutes(2));
    let err = run_detect(&two_block_config(&path)).unwrap_err();
    assert!(matches!(err, Error::TooFewWindows(1)), "{err}");
}

#[test]
fn missing_input_names_the_path() {
    let cfg = two_block_config(std::path::Path::new("/nonexistent/stream.jsonl"));
    let err = run_detect(&cfg).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/stream.jsonl"), "{err}");
}

#[test]
fn sweep_agrees_with_detect_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_stream(dir.path(), "s.jsonl", &two_block_stream(3, 100), TimeDelta::minutes(2));
    let gt = dir.path().join("gt.json");
    std::fs::write(
        &gt,
        r#"{"2019-10-20T16:21:00Z": [{"label": "switch", "synonym_groups": [["delta"], ["zeta", "epsilon"]]}],
            "2019-10-20T16:19:00Z": [{"label": "nothing", "synonym_groups": [["omega"]]}]}"#,
    )
    .unwrap();
    let mut cfg = two_block_config(&path);
    cfg.ground_truth = Some(gt.clone());

    let report = run_detect(&cfg).unwrap();
    let metrics = run_eval(&report, &gt).unwrap();
    assert_eq!((metrics.recall, metrics.precision), (0.5, 1.0));
    assert_eq!(metrics.keyword_recall, 2.0 / 3.0);

    let rows = run_sweep(&cfg, &[0.5], &[1]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].metrics, metrics);

    // raising alpha never flags more windows
    let alphas = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    let mut rows = run_sweep(&cfg, &alphas, &[1, 5]).unwrap();
    assert_eq!(rows.len(), 14);
    rows.sort_by(|a, b| a.beta.cmp(&b.beta).then(a.alpha.total_cmp(&b.alpha)));
    for w in rows.windows(2).filter(|w| w[0].beta == w[1].beta) {
        assert!(w[1].flagged.iter().all(|k| w[0].flagged.contains(k)));
    }
}

#[test]
fn aggregation_choice_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_stream(dir.path(), "s.jsonl", &two_block_stream(4, 60), TimeDelta::minutes(2));
    let mut cfg = two_block_config(&path);
    cfg.detector.aggregation = Aggregation::Average;
    let report = run_detect(&cfg).unwrap();
    for r in &report.results {
        assert!((r.overall_change - (r.cluster_change + r.vocabulary_change) / 2.0).abs() < 1e-12);
    }
}
