//! Average-linkage agglomerative clustering over token vectors and the
//! dendrogram-level (DL) similarity derived from the resulting tree.
//!
//! Node ids follow the usual linkage convention: leaves are `0..n` and the
//! node created by merge `k` is `n + k`.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// One agglomeration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    /// Number of leaves under the new node.
    pub size: usize,
}

/// Binary merge tree over a set of tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
    leaf_index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    // depth of every node; the root has depth 1
    depth: Vec<u32>,
    max_internal_depth: u32,
}

impl Dendrogram {
    /// Assembles and validates a dendrogram from an explicit merge list.
    pub fn from_merges(leaves: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let n = leaves.len();
        if n == 0 {
            return Err(Error::EmptyClustering);
        }
        if merges.len() != n - 1 {
            return Err(Error::InvalidDendrogram(format!(
                "{} leaves need {} merges, got {}",
                n,
                n - 1,
                merges.len()
            )));
        }
        let mut leaf_index = HashMap::with_capacity(n);
        for (i, t) in leaves.iter().enumerate() {
            if leaf_index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidDendrogram(format!("duplicate leaf {t:?}")));
            }
        }

        let total = 2 * n - 1;
        let mut parent = vec![None; total];
        let mut size = vec![1usize; total];
        for (k, m) in merges.iter().enumerate() {
            let node = n + k;
            for child in [m.left, m.right] {
                if child >= node {
                    return Err(Error::InvalidDendrogram(format!(
                        "merge {k} references node {child} before it exists"
                    )));
                }
                if parent[child].is_some() {
                    return Err(Error::InvalidDendrogram(format!("node {child} merged twice")));
                }
                parent[child] = Some(node);
            }
            if m.left == m.right {
                return Err(Error::InvalidDendrogram(format!("merge {k} joins a node with itself")));
            }
            size[node] = size[m.left] + size[m.right];
        }

        let mut depth = vec![0u32; total];
        depth[total - 1] = 1;
        for node in (0..total - 1).rev() {
            let p = parent[node].expect("every non-root node has a parent");
            depth[node] = depth[p] + 1;
        }
        let max_internal_depth = depth[n..].iter().copied().max().unwrap_or(0);

        // keep sizes consistent with the tree even if the caller passed junk
        let merges = merges
            .into_iter()
            .enumerate()
            .map(|(k, m)| Merge { size: size[n + k], ..m })
            .collect();

        Ok(Dendrogram {
            leaves,
            merges,
            leaf_index,
            parent,
            depth,
            max_internal_depth,
        })
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> usize {
        self.depth.len() - 1
    }

    pub fn leaf(&self, token: &str) -> Option<usize> {
        self.leaf_index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.leaf_index.contains_key(token)
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Depth of a node counted in levels from the root (root = 1).
    pub fn depth(&self, node: usize) -> u32 {
        self.depth[node]
    }

    /// Largest number of internal nodes on any root-to-leaf path.
    pub fn max_internal_depth(&self) -> u32 {
        self.max_internal_depth
    }

    /// Denominator of DL similarity: deepest internal path plus the leaf level.
    pub fn level_count(&self) -> u32 {
        self.max_internal_depth + 1
    }

    /// Lowest common ancestor by walking parent pointers.
    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has parent");
            b = self.parent[b].expect("non-root has parent");
        }
        a
    }

    /// Number of dendrogram levels two leaves share from the root.
    pub fn shared_levels(&self, a: &str, b: &str) -> Result<u32> {
        let ia = self.leaf(a).ok_or_else(|| Error::UnknownLeaf { token: a.into() })?;
        let ib = self.leaf(b).ok_or_else(|| Error::UnknownLeaf { token: b.into() })?;
        if ia == ib {
            return Ok(self.level_count());
        }
        Ok(self.depth[self.lca(ia, ib)])
    }

    /// DL similarity of two leaves: shared levels over total levels.
    /// Exactly 1 for a token with itself, below 1 for distinct tokens.
    pub fn dl_similarity(&self, a: &str, b: &str) -> Result<f64> {
        if a == b {
            return if self.contains(a) {
                Ok(1.0)
            } else {
                Err(Error::UnknownLeaf { token: a.into() })
            };
        }
        Ok(self.shared_levels(a, b)? as f64 / self.level_count() as f64)
    }

    /// Writes one `left right distance` line per merge.
    pub fn write_merge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for m in &self.merges {
            writeln!(out, "{} {} {}", m.left, m.right, m.distance)?;
        }
        Ok(())
    }

    /// Writes an indented tree, one node per line, root first.
    pub fn write_tree<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.leaves.len();
        let mut stack = vec![(self.root(), 0usize)];
        while let Some((node, indent)) = stack.pop() {
            let pad = "  ".repeat(indent);
            if node < n {
                writeln!(out, "{pad}{}", self.leaves[node])?;
            } else {
                let m = &self.merges[node - n];
                writeln!(out, "{pad}+ {:.6}", m.distance)?;
                stack.push((m.right, indent + 1));
                stack.push((m.left, indent + 1));
            }
        }
        Ok(())
    }
}

/// Position of pair `(i, j)`, `i < j`, in a condensed upper-triangle vector.
#[inline]
pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Greedy average-linkage clustering over a condensed distance matrix.
///
/// At each step the active cluster pair with the smallest average distance
/// is merged; ties go to the lexicographically smallest `(i, j)` pair of
/// cluster slots, where a merged cluster takes the smaller slot of its two
/// parts. Distances are updated with the average-linkage recurrence
/// `d(k, a∪b) = (|a| d(k,a) + |b| d(k,b)) / (|a| + |b|)`.
pub fn average_linkage(n: usize, mut dist: Vec<f64>) -> Vec<Merge> {
    assert_eq!(dist.len(), n * n.saturating_sub(1) / 2, "condensed matrix size");
    const NONE: usize = usize::MAX;
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut nn = vec![NONE; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let nearest = |i: usize, dist: &[f64], active: &[bool]| -> (usize, f64) {
        let mut best = (NONE, f64::INFINITY);
        for j in i + 1..n {
            if active[j] {
                let d = dist[condensed_index(n, i, j)];
                if best.0 == NONE || d < best.1 {
                    best = (j, d);
                }
            }
        }
        best
    };

    for i in 0..n {
        (nn[i], nn_dist[i]) = nearest(i, &dist, &active);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut a = NONE;
        for i in 0..n {
            if active[i] && nn[i] != NONE && (a == NONE || nn_dist[i] < nn_dist[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let d_ab = nn_dist[a];
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        merges.push(Merge {
            left: node[a],
            right: node[b],
            distance: d_ab,
            size: size[a] + size[b],
        });

        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let ka = if k < a { condensed_index(n, k, a) } else { condensed_index(n, a, k) };
            let kb = if k < b { condensed_index(n, k, b) } else { condensed_index(n, b, k) };
            dist[ka] = (sa * dist[ka] + sb * dist[kb]) / (sa + sb);
        }
        active[b] = false;
        size[a] += size[b];
        node[a] = n + step;
        nn[b] = NONE;

        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            if nn[k] == a || nn[k] == b {
                (nn[k], nn_dist[k]) = nearest(k, &dist, &active);
            } else if k < a {
                let d = dist[condensed_index(n, k, a)];
                if d < nn_dist[k] || (d == nn_dist[k] && a < nn[k]) {
                    nn[k] = a;
                    nn_dist[k] = d;
                }
            }
        }
        (nn[a], nn_dist[a]) = nearest(a, &dist, &active);
    }
    merges
}

/// Pairwise cosine distances between rows, in condensed form. Rows are
/// processed in parallel on the current rayon pool; the result does not
/// depend on the number of threads.
pub fn cosine_distances(tokens: &[String], vectors: &[&[f32]]) -> Result<Vec<f64>> {
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut unit: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (t, v) in tokens.iter().zip(vectors) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                token: t.clone(),
                expected: dim,
                actual: v.len(),
            });
        }
        let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector { token: t.clone() });
        }
        unit.push(v.iter().map(|&x| x as f64 / norm).collect());
    }
    let n = unit.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = &unit[i];
            unit[i + 1..]
                .iter()
                .map(|w| {
                    let dot: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
                    (1.0 - dot).clamp(0.0, 2.0)
                })
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Clusters tokens by their vectors with average linkage under cosine
/// distance.
pub fn hac_average_linkage(tokens: Vec<String>, vectors: &[&[f32]]) -> Result<Dendrogram> {
    if tokens.is_empty() {
        return Err(Error::EmptyClustering);
    }
    assert_eq!(tokens.len(), vectors.len(), "one vector per token");
    let dist = cosine_distances(&tokens, vectors)?;
    let merges = average_linkage(tokens.len(), dist);
    Dendrogram::from_merges(tokens, merges)
}

/// Pairwise DL similarities over an ordered vocabulary. Only the strict
/// upper triangle is stored; the diagonal is implicitly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    vocabulary: Vec<String>,
    cells: Vec<f64>,
}

impl SimilarityMatrix {
    /// All off-diagonal cells 0.
    pub fn zeros(vocabulary: Vec<String>) -> Self {
        let n = vocabulary.len();
        SimilarityMatrix {
            vocabulary,
            cells: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    /// Builds a matrix from its strict upper triangle in row-major order.
    /// Every value must lie in `[0, 1)`.
    pub fn from_upper_triangle(vocabulary: Vec<String>, cells: Vec<f64>) -> Result<Self> {
        let n = vocabulary.len();
        if cells.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidMatrix(format!(
                "{} tokens need {} upper-triangle cells, got {}",
                n,
                n * n.saturating_sub(1) / 2,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return Err(Error::InvalidMatrix(format!("off-diagonal value {bad} outside [0, 1)")));
        }
        Ok(SimilarityMatrix { vocabulary, cells })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.cells[condensed_index(self.size(), i, j)],
            std::cmp::Ordering::Greater => self.cells[condensed_index(self.size(), j, i)],
        }
    }

    /// Strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> &[f64] {
        &self.cells
    }

    /// Dense copy, mostly for debugging and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// DL-similarity matrix of `vocabulary` under `dendrogram`.
///
/// Tokens that are not leaves of the dendrogram (or all tokens, when there
/// is no dendrogram because the window had no embeddings) get similarity 0
/// with every other token and 1 with themselves.
pub fn similarity_matrix(dendrogram: Option<&Dendrogram>, vocabulary: &[String]) -> SimilarityMatrix {
    let mut matrix = SimilarityMatrix::zeros(vocabulary.to_vec());
    let Some(d) = dendrogram else {
        return matrix;
    };
    let n_vocab = vocabulary.len();
    let n = d.leaf_count();
    let position: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let levels = d.level_count() as f64;

    // Every pair split across the two children of a merge has that merge
    // as its lowest common ancestor.
    let mut members: Vec<Vec<usize>> = d
        .leaves()
        .iter()
        .map(|t| position.get(t.as_str()).map(|&p| vec![p]).unwrap_or_default())
        .collect();
    members.resize_with(2 * n - 1, Vec::new);
    for (k, m) in d.merges().iter().enumerate() {
        let node = n + k;
        let value = d.depth(node) as f64 / levels;
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        for &p in &left {
            for &q in &right {
                let (i, j) = if p < q { (p, q) } else { (q, p) };
                matrix.cells[condensed_index(n_vocab, i, j)] = value;
            }
        }
        let (mut big, small) = if left.len() >= right.len() { (left, right) } else { (right, left) };
        big.extend(small);
        members[node] = big;
    }
    matrix
}
