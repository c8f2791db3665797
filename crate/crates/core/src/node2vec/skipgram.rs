//! Skip-gram with negative sampling (SGNS) over walk sequences.
//!
//! For a centre node `c`, an observed context `o` and sampled negatives
//! `n_1..n_k` the per-sample loss is
//!
//! ```text
//! L = -ln σ(c·o) - Σ_k ln σ(-c·n_k)
//! ```
//!
//! Centre vectors form the embedding; context vectors are discarded after
//! training. Negatives are drawn from the walk unigram distribution raised to
//! the 3/4 power.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::EmbeddingTable;
use super::{Walk, WalkConfig};
use crate::error::{Error, Result};
use crate::util::{self, dot, sigmoid, softplus};

/// How updates are scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Single thread, fixed iteration order, bitwise reproducible.
    #[default]
    Sequential,
    /// Lock-free updates from many threads; races are tolerated and the
    /// result is not reproducible.
    Parallel,
}

/// Loss traces recorded during training.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    /// Loss on a fixed probe batch, measured before training and then at
    /// evenly spaced checkpoints through the first epoch.
    pub probe_loss: Vec<f64>,
    /// Mean loss of each epoch over every 16th update, taken before the
    /// update is applied.
    pub epoch_loss: Vec<f64>,
}

pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    softplus(-dot(center, context)) + negatives.iter().map(|n| softplus(dot(center, n))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of [`sgns_loss`] with respect to every input vector.
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let g_pos = sigmoid(dot(center, context)) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|o| g_pos * o).collect();
    let g_context = center.iter().map(|c| g_pos * c).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = sigmoid(dot(center, n));
        for (gc, x) in g_center.iter_mut().zip(n.iter()) {
            *gc += g * x;
        }
        g_negs.push(center.iter().map(|c| g * c).collect());
    }
    SgnsGradients {
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// Row access to a parameter matrix.
trait Rows {
    fn load(&self, row: usize, out: &mut [f64]);
    fn store(&mut self, row: usize, values: &[f64]);
}

/// Plain row-major storage for single-threaded training.
struct Dense {
    data: Vec<f64>,
    dim: usize,
}

impl Rows for Dense {
    fn load(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    fn store(&mut self, row: usize, values: &[f64]) {
        self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(values);
    }
}

/// Row-major matrix of `f64` stored as atomics, so that parallel training
/// can race on it without undefined behaviour.
struct AtomicMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl AtomicMatrix {
    fn from_dense(m: Dense) -> Self {
        Self {
            data: m.data.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            dim: m.dim,
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

impl Rows for &AtomicMatrix {
    fn load(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (o, a) in out.iter_mut().zip(&self.data[base..base + self.dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn store(&mut self, row: usize, values: &[f64]) {
        let base = row * self.dim;
        for (a, v) in self.data[base..base + self.dim].iter().zip(values) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

/// Scratch buffers for one worker.
struct Scratch {
    center: Vec<f64>,
    target: Vec<f64>,
    grad: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            target: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }
}

/// Input vectors start uniform in `±0.5/dim`, output vectors at zero.
fn init_params(node_count: usize, dim: usize, rng: &mut util::Rng) -> (Dense, Dense) {
    let scale = 0.5 / dim as f64;
    let input = (0..node_count * dim).map(|_| rng.random_range(-scale..scale)).collect();
    (
        Dense { data: input, dim },
        Dense {
            data: vec![0.0; node_count * dim],
            dim,
        },
    )
}

/// One SGD step on a (centre, context, negatives) sample. Returns the loss
/// before the update when `with_loss` is set, otherwise 0. Negatives equal
/// to the context are skipped.
#[allow(clippy::too_many_arguments)]
fn train_sample<M: Rows>(
    input: &mut M,
    output: &mut M,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    with_loss: bool,
    s: &mut Scratch,
) -> f64 {
    input.load(center, &mut s.center);
    s.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().filter(|&&n| n != context).map(|&n| (n, 0.0)));
    for (target, label) in targets {
        output.load(target, &mut s.target);
        let z = dot(&s.center, &s.target);
        if with_loss {
            loss += if label > 0.0 { softplus(-z) } else { softplus(z) };
        }
        let g = sigmoid(z) - label;
        for ((gc, t), c) in s.grad.iter_mut().zip(s.target.iter_mut()).zip(&s.center) {
            *gc += g * *t;
            *t -= lr * g * c;
        }
        output.store(target, &s.target);
    }
    for (c, g) in s.center.iter_mut().zip(&s.grad) {
        *c -= lr * g;
    }
    input.store(center, &s.center);
    loss
}

fn sample_loss<M: Rows + ?Sized>(input: &M, output: &M, dim: usize, (center, context, negatives): &Sample) -> f64 {
    let mut c = vec![0.0; dim];
    let mut t = vec![0.0; dim];
    input.load(*center, &mut c);
    output.load(*context, &mut t);
    let mut loss = softplus(-dot(&c, &t));
    for &n in negatives.iter().filter(|&&n| n != *context) {
        output.load(n, &mut t);
        loss += softplus(dot(&c, &t));
    }
    loss
}

type Sample = (usize, usize, Vec<usize>);

const LOSS_EVERY: usize = 16;

fn context_range(len: usize, i: usize, window: usize) -> impl Iterator<Item = usize> {
    let lo = i.saturating_sub(window);
    let hi = (i + window + 1).min(len);
    (lo..hi).filter(move |&j| j != i)
}

/// Trains node embeddings on the given walks.
pub fn train_embeddings(walks: &[Walk], cfg: &WalkConfig, node_count: usize) -> Result<EmbeddingTable> {
    train_embeddings_logged(walks, cfg, node_count).map(|(t, _)| t)
}

/// Like [`train_embeddings`], also returning the loss traces.
pub fn train_embeddings_logged(
    walks: &[Walk],
    cfg: &WalkConfig,
    node_count: usize,
) -> Result<(EmbeddingTable, TrainingLog)> {
    cfg.validate()?;
    if walks.is_empty() || walks.iter().all(|w| w.nodes.len() < 2) {
        return Err(Error::Domain("no walks with at least two nodes to train on".into()));
    }
    let dim = cfg.dimensions;
    let mut counts = vec![0u64; node_count];
    for w in walks {
        for &n in &w.nodes {
            let n = n as usize;
            if n >= node_count {
                return Err(Error::Domain(format!("walk visits node {n} outside 0..{node_count}")));
            }
            counts[n] += 1;
        }
    }
    let noise_weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedAliasIndex::new(noise_weights)
        .map_err(|e| Error::Numeric(format!("negative sampling table: {e}")))?;

    let mut rng = util::rng(util::mix_seed(cfg.seed, 0x5347_4e53));
    let (mut input, mut output) = init_params(node_count, dim, &mut rng);
    let k = cfg.negatives_per_positive;

    // fixed probe batch of up to 256 samples
    let mut probe: Vec<Sample> = Vec::new();
    {
        let mut prng = util::rng(util::mix_seed(cfg.seed, 0x5052_4f42));
        let usable: Vec<&Walk> = walks.iter().filter(|w| w.nodes.len() >= 2).collect();
        for _ in 0..256 {
            let w = usable[prng.random_range(0..usable.len())];
            let i = prng.random_range(0..w.nodes.len());
            let ctx: Vec<usize> = context_range(w.nodes.len(), i, cfg.window).collect();
            if ctx.is_empty() {
                continue;
            }
            let j = ctx[prng.random_range(0..ctx.len())];
            let negs = (0..k).map(|_| noise.sample(&mut prng)).collect();
            probe.push((w.nodes[i] as usize, w.nodes[j] as usize, negs));
        }
    }
    let probe_loss = |input: &dyn Rows, output: &dyn Rows| -> f64 {
        probe.iter().map(|p| sample_loss(input, output, dim, p)).sum::<f64>() / probe.len().max(1) as f64
    };

    let tokens_per_epoch: usize = walks.iter().map(|w| w.nodes.len()).sum();
    let total_tokens = (tokens_per_epoch * cfg.epochs).max(1);
    let lr_at = |done: usize| cfg.learning_rate * (1.0 - done as f64 / total_tokens as f64).max(1e-4);

    let mut log = TrainingLog {
        probe_loss: vec![probe_loss(&input, &output)],
        epoch_loss: Vec::with_capacity(cfg.epochs),
    };
    let checkpoints = 10usize;
    let checkpoint_every = (walks.len() / checkpoints).max(1);

    let mut vectors = match cfg.mode {
        TrainMode::Sequential => {
            let mut scratch = Scratch::new(dim);
            let mut negs = Vec::with_capacity(k);
            let mut done = 0usize;
            for epoch in 0..cfg.epochs {
                let (mut loss_sum, mut samples, mut measured) = (0.0, 0usize, 0usize);
                for (wi, walk) in walks.iter().enumerate() {
                    let nodes = &walk.nodes;
                    for i in 0..nodes.len() {
                        let lr = lr_at(done);
                        for j in context_range(nodes.len(), i, cfg.window) {
                            negs.clear();
                            negs.extend((0..k).map(|_| noise.sample(&mut rng)));
                            let with_loss = samples % LOSS_EVERY == 0;
                            let (c, o) = (nodes[i] as usize, nodes[j] as usize);
                            loss_sum += train_sample(&mut input, &mut output, c, o, &negs, lr, with_loss, &mut scratch);
                            measured += usize::from(with_loss);
                            samples += 1;
                        }
                        done += 1;
                    }
                    if epoch == 0 && (wi + 1) % checkpoint_every == 0 {
                        log.probe_loss.push(probe_loss(&input, &output));
                    }
                }
                log.epoch_loss.push(loss_sum / measured.max(1) as f64);
            }
            input.data
        }
        TrainMode::Parallel => {
            let (input, output) = (AtomicMatrix::from_dense(input), AtomicMatrix::from_dense(output));
            let done = AtomicUsize::new(0);
            let chunk = 64;
            for epoch in 0..cfg.epochs {
                let (loss_sum, measured) = walks
                    .par_chunks(chunk)
                    .enumerate()
                    .map(|(ci, batch)| {
                        let mut rng = util::rng(util::mix_seed(cfg.seed, ((epoch as u64) << 32) | ci as u64));
                        let mut scratch = Scratch::new(dim);
                        let mut negs = Vec::with_capacity(k);
                        let (mut inp, mut out) = (&input, &output);
                        let (mut loss, mut n, mut measured) = (0.0, 0usize, 0usize);
                        for walk in batch {
                            let nodes = &walk.nodes;
                            for i in 0..nodes.len() {
                                let lr = lr_at(done.fetch_add(1, Ordering::Relaxed));
                                for j in context_range(nodes.len(), i, cfg.window) {
                                    negs.clear();
                                    negs.extend((0..k).map(|_| noise.sample(&mut rng)));
                                    let with_loss = n % LOSS_EVERY == 0;
                                    let (c, o) = (nodes[i] as usize, nodes[j] as usize);
                                    loss += train_sample(&mut inp, &mut out, c, o, &negs, lr, with_loss, &mut scratch);
                                    measured += usize::from(with_loss);
                                    n += 1;
                                }
                            }
                        }
                        (loss, measured)
                    })
                    .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                log.epoch_loss.push(loss_sum / measured.max(1) as f64);
                if epoch == 0 {
                    log.probe_loss.push(probe_loss(&&input, &&output));
                }
            }
            input.into_vec()
        }
    };
    for l in &log.epoch_loss {
        if !l.is_finite() {
            return Err(Error::Divergence("skip-gram loss became non-finite".into()));
        }
    }

    for (node, &c) in counts.iter().enumerate() {
        if c == 0 {
            vectors[node * dim..(node + 1) * dim].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok((EmbeddingTable::from_flat(vectors, dim, cfg.clone(), "")?, log))
}
