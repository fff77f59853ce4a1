//! Per-window Skip-gram word embeddings trained with negative sampling.
//!
//! Each window gets a fresh model; nothing is carried over between windows.
//! Training is single-threaded within a window, which makes it bitwise
//! reproducible for a fixed seed. Parallelism happens across windows.

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use num_traits::Float;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::corpus::TimeWindow;
use crate::error::{Error, Result};

/// Hyper-parameters of the Skip-gram learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// Vector dimensionality.
    pub dimension: usize,
    /// Words considered on each side of the center word.
    pub context_size: usize,
    /// Tokens rarer than this in the window get no vector.
    pub min_count: u64,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly towards zero.
    pub learning_rate: f64,
    pub negatives: usize,
    /// Noise distribution is unigram frequency raised to this power.
    pub noise_exponent: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dimension: 100,
            context_size: 5,
            min_count: 1,
            epochs: 5,
            learning_rate: 0.025,
            negatives: 5,
            noise_exponent: 0.75,
            seed: 1,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dimension == 0 {
            return bad("embedding dimension must be at least 1");
        }
        if self.context_size == 0 {
            return bad("context size must be at least 1");
        }
        if self.min_count == 0 {
            return bad("min count must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.negatives == 0 {
            return bad("negatives per sample must be at least 1");
        }
        if !self.noise_exponent.is_finite() {
            return bad("noise exponent must be finite");
        }
        Ok(())
    }

    /// Seed used for a particular window, so windows get independent but
    /// reproducible streams regardless of which worker trains them.
    pub fn window_seed(&self, window_index: usize) -> u64 {
        self.seed ^ (window_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

/// Token vectors learned for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub window_index: usize,
    pub config: EmbeddingConfig,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    weights: Vec<f32>,
}

impl EmbeddingModel {
    /// Model with no vectors, used when a window has no eligible tokens.
    pub fn empty(window_index: usize, config: EmbeddingConfig) -> Self {
        EmbeddingModel {
            window_index,
            config,
            tokens: Vec::new(),
            index: HashMap::new(),
            weights: Vec::new(),
        }
    }

    /// Builds a model from explicit rows. Rows must all have `config.dimension`
    /// finite components.
    pub fn from_vectors(
        window_index: usize,
        config: EmbeddingConfig,
        rows: Vec<(String, Vec<f32>)>,
    ) -> Result<Self> {
        let dim = config.dimension;
        let mut model = EmbeddingModel::empty(window_index, config);
        for (token, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    token,
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::ModelFormat(format!("non-finite component for {token:?}")));
            }
            if model.index.contains_key(&token) {
                return Err(Error::ModelFormat(format!("duplicate token {token:?}")));
            }
            model.index.insert(token.clone(), model.tokens.len());
            model.tokens.push(token);
            model.weights.extend_from_slice(&v);
        }
        Ok(model)
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        let d = self.dimension();
        self.index.get(token).map(|&i| &self.weights[i * d..(i + 1) * d])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        let d = self.dimension();
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), &self.weights[i * d..(i + 1) * d]))
    }

    /// Writes the versioned text format:
    ///
    /// ```text
    /// eventwin-vectors 1 <dimension> <count> <seed> <window_index>
    /// <token> <x_1> ... <x_D>
    /// ```
    ///
    /// Floats use the shortest representation that round-trips exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(
            out,
            "{MODEL_MAGIC} {MODEL_VERSION} {} {} {} {}",
            self.dimension(),
            self.len(),
            self.config.seed,
            self.window_index
        )
        .map_err(io)?;
        for (token, v) in self.iter() {
            write!(out, "{token}").map_err(io)?;
            for x in v {
                write!(out, " {x}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads a file written by [`EmbeddingModel::save`]. Hyper-parameters not
    /// stored in the header take their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::ModelFormat("missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != MODEL_MAGIC {
            return Err(Error::ModelFormat(format!("bad header {header:?}")));
        }
        if fields[1] != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", fields[1])));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::ModelFormat(format!("bad header field {s:?}")))
        };
        let config = EmbeddingConfig {
            dimension: num(fields[2])? as usize,
            seed: num(fields[4])?,
            ..EmbeddingConfig::default()
        };
        let count = num(fields[3])? as usize;
        let window_index = num(fields[5])? as usize;

        let mut rows = Vec::with_capacity(count);
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default().to_string();
            let v = parts
                .map(|p| {
                    p.parse::<f32>()
                        .map_err(|_| Error::ModelFormat(format!("bad float {p:?} for {token:?}")))
                })
                .collect::<Result<Vec<f32>>>()?;
            rows.push((token, v));
        }
        if rows.len() != count {
            return Err(Error::ModelFormat(format!(
                "header announces {count} vectors, found {}",
                rows.len()
            )));
        }
        Self::from_vectors(window_index, config, rows)
    }
}

const MODEL_MAGIC: &str = "eventwin-vectors";
const MODEL_VERSION: &str = "1";

/// Anything that turns a window into token vectors.
pub trait EmbeddingTrainer: Send + Sync {
    fn train(&self, window: &TimeWindow) -> EmbeddingModel;
}

/// Cosine distance `1 - cos(u, v)`, clamped into `[0, 2]`.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            token: String::new(),
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 {
        return Err(Error::ZeroNorm("first"));
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm("second"));
    }
    Ok((1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0))
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `ln(sigmoid(x))`, stable for large `|x|`.
fn log_sigmoid<F: Float>(x: F) -> F {
    // ln σ(x) = -softplus(-x)
    let z = -x;
    let softplus = z.max(F::zero()) + (F::one() + (-z.abs()).exp()).ln();
    -softplus
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Negative-sampling loss of one (center, context) pair:
/// `-ln σ(u_o·v) - Σ_k ln σ(-u_k·v)` where `v` is the center input vector,
/// `u_o` the context output vector and `u_k` the sampled noise vectors.
pub fn pair_loss<F: Float>(center: &[F], positive: &[F], negatives: &[&[F]]) -> F {
    let mut loss = -log_sigmoid(dot(center, positive));
    for n in negatives {
        loss = loss - log_sigmoid(-dot(center, n));
    }
    loss
}

/// One stochastic step against a single target (`label` 1 for the observed
/// context word, 0 for a noise word).
///
/// Moves `output` along the negative loss gradient scaled by `lr` and adds
/// the center's negative gradient (scaled by `lr`) into `center_grad`,
/// computed from the output vector as it was before the update.
pub fn target_step<F: Float>(center: &[F], output: &mut [F], center_grad: &mut [F], label: F, lr: F) {
    let g = (label - sigmoid(dot(center, output))) * lr;
    for ((cg, o), &c) in center_grad.iter_mut().zip(output.iter_mut()).zip(center) {
        *cg = *cg + g * *o;
        *o = *o + g * c;
    }
}

/// Weights of a Skip-gram network during training.
#[derive(Debug, Clone)]
pub struct SkipGramState {
    pub dimension: usize,
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    /// Input-to-hidden weights; row `i` is the embedding of `tokens[i]`.
    pub input: Vec<f32>,
    /// Hidden-to-output weights, stored row-per-token.
    pub output: Vec<f32>,
}

impl SkipGramState {
    pub fn input_row(&self, id: usize) -> &[f32] {
        &self.input[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn output_row(&self, id: usize) -> &[f32] {
        &self.output[id * self.dimension..(id + 1) * self.dimension]
    }

    /// Loss of one (center, context, negatives) sample under current weights.
    pub fn sample_loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let widen = |s: &[f32]| s.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let v = widen(self.input_row(center));
        let pos = widen(self.output_row(context));
        let negs: Vec<Vec<f64>> = negatives.iter().map(|&n| widen(self.output_row(n))).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        pair_loss(&v, &pos, &neg_refs)
    }
}

/// Skip-gram with negative sampling.
#[derive(Debug, Clone, Default)]
pub struct SkipGram {
    pub config: EmbeddingConfig,
}

impl SkipGram {
    pub fn new(config: EmbeddingConfig) -> Self {
        SkipGram { config }
    }

    /// Trains and calls `observer` after every epoch with the 1-based epoch
    /// number and the current weights.
    pub fn train_observed<O>(&self, window: &TimeWindow, mut observer: O) -> EmbeddingModel
    where
        O: FnMut(usize, &SkipGramState),
    {
        let cfg = &self.config;
        let dim = cfg.dimension;

        let (tokens, counts): (Vec<String>, Vec<u64>) = window
            .raw_vocabulary
            .iter()
            .filter(|&(_, n)| n >= cfg.min_count)
            .map(|(t, n)| (t.to_string(), n))
            .unzip();
        if tokens.is_empty() {
            return EmbeddingModel::empty(window.index, cfg.clone());
        }
        let ids: HashMap<&str, usize> = tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let sentences: Vec<Vec<usize>> = window
            .sentences()
            .map(|s| s.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect::<Vec<_>>())
            .filter(|s: &Vec<usize>| !s.is_empty())
            .collect();
        let total_words: usize = sentences.iter().map(Vec::len).sum();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.window_seed(window.index));
        let half = 0.5 / dim as f32;
        let mut state = SkipGramState {
            dimension: dim,
            input: (0..tokens.len() * dim).map(|_| rng.random_range(-half..half)).collect(),
            output: vec![0.0; tokens.len() * dim],
            tokens,
            counts,
        };
        let noise_weights: Vec<f64> = state
            .counts
            .iter()
            .map(|&c| (c as f64).powf(cfg.noise_exponent))
            .collect();
        let noise = WeightedAliasIndex::new(noise_weights).expect("positive noise weights");

        let schedule = (cfg.epochs * total_words) as f64 + 1.0;
        let lr0 = cfg.learning_rate;
        let mut processed = 0usize;
        let mut grad = vec![0.0f32; dim];
        let m = cfg.context_size;

        for epoch in 1..=cfg.epochs {
            for sentence in &sentences {
                for (pos, &center) in sentence.iter().enumerate() {
                    let lr = (lr0 * (1.0 - processed as f64 / schedule)).max(lr0 * 1e-4) as f32;
                    processed += 1;
                    let lo = pos.saturating_sub(m);
                    let hi = (pos + m).min(sentence.len() - 1);
                    for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                        if ctx_pos == pos {
                            continue;
                        }
                        grad.iter_mut().for_each(|g| *g = 0.0);
                        let center_vec = &state.input[center * dim..(center + 1) * dim];
                        target_step(
                            center_vec,
                            &mut state.output[context * dim..(context + 1) * dim],
                            &mut grad,
                            1.0,
                            lr,
                        );
                        for _ in 0..cfg.negatives {
                            let neg = noise.sample(&mut rng);
                            if neg == context {
                                continue;
                            }
                            target_step(
                                center_vec,
                                &mut state.output[neg * dim..(neg + 1) * dim],
                                &mut grad,
                                0.0,
                                lr,
                            );
                        }
                        for (w, g) in state.input[center * dim..(center + 1) * dim].iter_mut().zip(&grad) {
                            *w += g;
                        }
                    }
                }
            }
            observer(epoch, &state);
        }

        let index = state.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EmbeddingModel {
            window_index: window.index,
            config: cfg.clone(),
            tokens: state.tokens,
            index,
            weights: state.input,
        }
    }
}

impl EmbeddingTrainer for SkipGram {
    fn train(&self, window: &TimeWindow) -> EmbeddingModel {
        self.train_observed(window, |_, _| {})
    }
}

/// Trains a Skip-gram model on the tokenized (not preprocessed) text of a
/// window. A window with no token reaching `min_count` yields an empty model.
pub fn train_window_embeddings(window: &TimeWindow, config: &EmbeddingConfig) -> EmbeddingModel {
    SkipGram::new(config.clone()).train(window)
}
