//! Test-only helpers: independent oracles and synthetic streams.
#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeDelta, Utc};
use eventwin_core::clustering::{Dendrogram, Merge};
use eventwin_core::corpus::{parse_timestamp, Document, TimeWindow};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const BLOCK_A: [&str; 3] = ["alpha", "beta", "gamma"];
pub const BLOCK_B: [&str; 3] = ["delta", "epsilon", "zeta"];

pub fn t0() -> DateTime<Utc> {
    parse_timestamp("2019-10-20T16:15:00Z").unwrap()
}

pub fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Cosine distance computed straight from the definition.
pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    1.0 - dot / (nu * nv)
}

/// Average linkage by brute force: every step recomputes the mean of all
/// cross-cluster point distances for every pair of clusters and merges the
/// closest pair, scanning slot pairs in lexicographic order so the first
/// minimum wins. The merged cluster keeps the smaller slot.
pub fn naive_average_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            let Some(ci) = &clusters[i] else { continue };
            for j in i + 1..n {
                let Some(cj) = &clusters[j] else { continue };
                let mut total = 0.0;
                for &p in ci {
                    for &q in cj {
                        total += naive_cosine(&points[p], &points[q]);
                    }
                }
                let d = total / (ci.len() * cj.len()) as f64;
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, d) = best.unwrap();
        let cj = clusters[j].take().unwrap();
        let ci = clusters[i].as_mut().unwrap();
        ci.extend(cj);
        merges.push(Merge {
            left: ids[i],
            right: ids[j],
            distance: d,
            size: ci.len(),
        });
        ids[i] = n + step;
    }
    merges
}

/// Same topology and sizes, distances within `tol`.
pub fn same_merges(a: &[Merge], b: &[Merge], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.left == y.left && x.right == y.right && x.size == y.size && (x.distance - y.distance).abs() <= tol
        })
}

pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
                break v;
            }
        })
        .collect()
}

/// The sample dendrogram used to illustrate DL similarity: five internal
/// levels on the deepest path, `rashford` and `goal` share four of them and
/// `firmino` splits off at the root.
pub fn figure_dendrogram() -> Dendrogram {
    // leaves
    // 0 firmino, 1 goal, 2 var, 3 rashford, 4 mufc, 5 lfc
    let leaves = strings(&["firmino", "goal", "var", "rashford", "mufc", "lfc"]);
    let m = |left, right, distance| Merge {
        left,
        right,
        distance,
        size: 0,
    };
    let merges = vec![
        m(1, 2, 0.010),  // 6: goal + var          (depth 5)
        m(3, 6, 0.025),  // 7: rashford + 6        (depth 4)
        m(4, 7, 0.060),  // 8: mufc + 7            (depth 3)
        m(5, 8, 0.110),  // 9: lfc + 8             (depth 2)
        m(0, 9, 0.250),  // 10: firmino + 9 = root (depth 1)
    ];
    Dendrogram::from_merges(leaves, merges).unwrap()
}

/// Sentences built from a block of words: random length 3..=8, words drawn
/// with replacement.
pub fn block_sentences(rng: &mut impl Rng, block: &[&str], count: usize) -> Vec<String> {
    (0..count)
        .map(|_| {
            let len = rng.random_range(3..=8);
            (0..len)
                .map(|_| *block.choose(rng).unwrap())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Lays `windows[k]` out evenly inside window `k` of a stream starting at
/// `t0()` with the given window length.
pub fn stream_documents(windows: &[Vec<String>], window_length: TimeDelta) -> Vec<Document> {
    let mut docs = Vec::new();
    for (k, texts) in windows.iter().enumerate() {
        let start = t0() + window_length * k as i32;
        let step = window_length.num_milliseconds() / (texts.len() as i64 + 1);
        for (i, text) in texts.iter().enumerate() {
            let ts = start + TimeDelta::milliseconds(step * i as i64);
            docs.push(Document::new(format!("{k}-{i}"), ts, text.clone()));
        }
    }
    docs
}

pub fn write_jsonl(path: &Path, docs: &[Document]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for d in docs {
        let rec = serde_json::json!({
            "id": d.id,
            "timestamp": d.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            "text": d.raw_text,
        });
        writeln!(f, "{rec}").unwrap();
    }
}

/// Four two-minute windows: three of block A, then one of block B.
pub fn two_block_stream(seed: u64, sentences_per_window: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut windows: Vec<Vec<String>> = (0..3)
        .map(|_| block_sentences(&mut rng, &BLOCK_A, sentences_per_window))
        .collect();
    windows.push(block_sentences(&mut rng, &BLOCK_B, sentences_per_window));
    windows
}

pub fn write_stream(dir: &Path, name: &str, windows: &[Vec<String>], window_length: TimeDelta) -> PathBuf {
    let path = dir.join(name);
    write_jsonl(&path, &stream_documents(windows, window_length));
    path
}

pub fn single_window(texts: &[String]) -> TimeWindow {
    let docs = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(i.to_string(), t0(), t.clone()))
        .collect();
    TimeWindow::new(0, t0(), t0() + TimeDelta::minutes(2), docs)
}

/// Zipf-distributed synthetic posts over `types` word types.
pub fn zipf_posts(rng: &mut impl Rng, types: usize, count: usize) -> Vec<String> {
    let weights: Vec<f64> = (1..=types).map(|r| 1.0 / r as f64).collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&weights).unwrap();
    (0..count)
        .map(|_| {
            let len = rng.random_range(8..=16);
            (0..len)
                .map(|_| format!("w{}", dist.sample(rng)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Run configuration for the four-window two-block stream at `path`.
pub fn two_block_config(path: &Path) -> eventwin_core::pipeline::RunConfig {
    let mut cfg = eventwin_core::pipeline::RunConfig::new(path, TimeDelta::minutes(2));
    cfg.stream_start = Some(t0());
    cfg.detector.alpha = 0.5;
    cfg.detector.beta = 1;
    cfg
}
