mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::TimeDelta;
use eventwin_core::clustering::{average_linkage, condensed_index, hac_average_linkage, similarity_matrix};
use eventwin_core::corpus::{
    chunk_stream, squash_repeats, tokenize, Document, Preprocess, StopWords, Vocabulary, VocabularyFilter, MAX_REPEAT,
};
use eventwin_core::detection::WindowPairResult;
use eventwin_core::embedding::cosine_distance;
use eventwin_core::evaluation::{compute_metrics, GroundTruth, GtEvent};
use proptest::prelude::*;
use support::*;

fn max_run(s: &str) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = None;
    for c in s.chars() {
        run = if Some(c) == prev { run + 1 } else { 1 };
        prev = Some(c);
        best = best.max(run);
    }
    best
}

fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(
        prop::collection::vec(-1.0f32..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3)),
        n,
    )
}

fn leaf_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn tokens_are_normalised(text in "[a-zA-Z0-9 #@!?.,'\\-]{0,80}") {
        for tok in tokenize(&text) {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.chars().any(char::is_whitespace));
            prop_assert_eq!(tok.to_lowercase(), tok.clone());
            prop_assert!(max_run(&tok) <= MAX_REPEAT);
            prop_assert!(!(tok.starts_with('#') && tok.chars().any(char::is_alphanumeric)));
        }
    }

    // Hashtag bodies are kept whole ("#abc1" -> "abc1") while bare words
    // split at a letter/digit boundary, so hashtags are left out here.
    #[test]
    fn tokenizing_tokens_is_identity(text in "[a-zA-Z0-9 @!?.,'\\-]{0,80}") {
        let once = tokenize(&text);
        let twice = tokenize(&once.join(" "));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn squashing_is_idempotent(text in "\\PC{0,60}") {
        let once = squash_repeats(&text, MAX_REPEAT);
        prop_assert!(max_run(&once) <= MAX_REPEAT);
        prop_assert_eq!(squash_repeats(&once, MAX_REPEAT), once);
    }

    #[test]
    fn chunking_partitions_the_stream(
        mut offsets in prop::collection::vec(0i64..3600, 1..60),
        len_s in 1i64..900,
    ) {
        offsets.sort_unstable();
        let len = TimeDelta::seconds(len_s);
        let docs: Vec<Document> = offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| Document::new(i.to_string(), t0() + TimeDelta::seconds(o), "x"))
            .collect();
        let windows = chunk_stream(docs, len, t0()).unwrap();
        let last = *offsets.last().unwrap();
        prop_assert_eq!(windows.len() as i64, last / len_s + 1);
        let mut seen = Vec::new();
        for (k, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.index, k);
            prop_assert_eq!(w.start, t0() + len * k as i32);
            prop_assert_eq!(w.end - w.start, len);
            for d in &w.documents {
                prop_assert!(w.start <= d.timestamp && d.timestamp < w.end);
                seen.push(d.id.parse::<usize>().unwrap());
            }
        }
        prop_assert_eq!(seen, (0..offsets.len()).collect::<Vec<_>>());
    }

    #[test]
    fn stricter_beta_keeps_a_subset(
        counts in prop::collection::btree_map("[a-z]{1,4}|[!?.]{1,2}", 1u64..50, 0..30),
        b1 in 0u64..40,
        b2 in 0u64..40,
        mode in prop_oneof![
            Just(Preprocess::AllTokens),
            Just(Preprocess::NoPunctuation),
            Just(Preprocess::NoPunctuationNoStopwords),
        ],
    ) {
        let raw = Vocabulary::from_counts(counts.clone());
        let (lo, hi) = (b1.min(b2), b1.max(b2));
        let sw = Arc::new(StopWords::english());
        let loose = VocabularyFilter::new(mode, lo, sw.clone()).apply(&raw);
        let strict = VocabularyFilter::new(mode, hi, sw).apply(&raw);
        prop_assert!(strict.is_subset_of(&loose));
        prop_assert!(loose.is_subset_of(&raw));
        for (tok, f) in strict.iter() {
            prop_assert!(f >= hi);
            prop_assert_eq!(f, counts[tok]);
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(pair in vectors(2, 6)) {
        let (u, v) = (&pair[0], &pair[1]);
        let d = cosine_distance(u, v).unwrap();
        prop_assert_eq!(d, cosine_distance(v, u).unwrap());
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert!(cosine_distance(u, u).unwrap().abs() < 1e-6);
        let uf: Vec<f64> = u.iter().map(|&x| x as f64).collect();
        let vf: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        prop_assert!((d - naive_cosine(&uf, &vf).clamp(0.0, 2.0)).abs() < 1e-5);
    }

    #[test]
    fn dendrogram_invariants(points in (2usize..12).prop_flat_map(|n| vectors(n, 4))) {
        let n = points.len();
        let names = leaf_names(n);
        let rows: Vec<&[f32]> = points.iter().map(|v| v.as_slice()).collect();
        let d = hac_average_linkage(names.clone(), &rows).unwrap();
        prop_assert_eq!(d.leaf_count(), n);
        prop_assert_eq!(d.merges().len(), n - 1);
        prop_assert_eq!(d.merges().last().unwrap().size, n);
        for w in d.merges().windows(2) {
            prop_assert!(w[0].distance <= w[1].distance + 1e-9);
        }
        // shared levels form an ultrametric-like hierarchy
        for a in &names {
            for b in &names {
                for c in &names {
                    let ab = d.shared_levels(a, b).unwrap();
                    let bc = d.shared_levels(b, c).unwrap();
                    let ac = d.shared_levels(a, c).unwrap();
                    prop_assert!(ac >= ab.min(bc));
                }
            }
        }
        // the bulk matrix agrees with pairwise queries
        let m = similarity_matrix(Some(&d), &names);
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in i + 1..n {
                let s = d.dl_similarity(&names[i], &names[j]).unwrap();
                prop_assert_eq!(m.get(i, j), s);
                prop_assert_eq!(m.get(j, i), s);
                prop_assert!((0.0..1.0).contains(&s));
                prop_assert!(s > 0.0);
            }
        }
    }

    #[test]
    fn absent_tokens_have_zero_similarity(points in vectors(3, 3)) {
        let rows: Vec<&[f32]> = points.iter().map(|v| v.as_slice()).collect();
        let d = hac_average_linkage(leaf_names(3), &rows).unwrap();
        let vocab = strings(&["t0", "missing", "t1", "t2"]);
        let m = similarity_matrix(Some(&d), &vocab);
        prop_assert_eq!(m.get(1, 1), 1.0);
        for j in [0, 2, 3] {
            prop_assert_eq!(m.get(1, j), 0.0);
        }
        let empty = similarity_matrix(None, &vocab);
        prop_assert!(empty.upper_triangle().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linkage_matches_brute_force(points in (2usize..9).prop_flat_map(|n| vectors(n, 3))) {
        let n = points.len();
        let p64: Vec<Vec<f64>> = points.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
        let mut dist = vec![0.0; n * (n - 1) / 2];
        for i in 0..n {
            for j in i + 1..n {
                dist[condensed_index(n, i, j)] = naive_cosine(&p64[i], &p64[j]);
            }
        }
        let fast = average_linkage(n, dist);
        prop_assert!(same_merges(&fast, &naive_average_linkage(&p64), 1e-9));
    }

    #[test]
    fn metrics_are_bounded(
        flags in prop::collection::vec((any::<bool>(), prop::collection::btree_set("[a-d]", 0..4)), 1..8),
        gt_spec in prop::collection::btree_map(1usize..9, prop::collection::vec("[a-f]", 1..3), 1..5),
    ) {
        let results: Vec<WindowPairResult> = flags
            .into_iter()
            .enumerate()
            .map(|(k, (is_event, words))| WindowPairResult {
                window_index: k + 1,
                start: t0(),
                end: t0(),
                cluster_change: 0.0,
                vocabulary_change: 0.0,
                overall_change: 0.0,
                is_event,
                event_words: words,
            })
            .collect();
        let windows: BTreeMap<usize, Vec<GtEvent>> = gt_spec
            .into_iter()
            .map(|(k, kw)| (k, vec![GtEvent::new("e", kw.iter().map(|w| [w.as_str()])).unwrap()]))
            .collect();
        let gt = GroundTruth { windows };
        let m = compute_metrics(&results, &gt).unwrap();
        for x in [m.recall, m.precision, m.f1, m.keyword_recall] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(m.relevant_windows <= m.detected_windows.min(m.gt_windows));
        prop_assert!(m.f1 <= m.recall.max(m.precision) + 1e-12);
        prop_assert!(m.f1 + 1e-12 >= m.recall.min(m.precision) || m.recall.min(m.precision) == 0.0);
        let flagged: BTreeSet<usize> = results.iter().filter(|r| r.is_event).map(|r| r.window_index).collect();
        prop_assert_eq!(m.detected_windows, flagged.len());
    }
}
