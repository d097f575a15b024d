//! SGD training loop for the skip-gram negative-sampling objective.
//!
//! Two modes share one code path: a deterministic single worker (required
//! for tests and reproducible runs) and multiple workers sharding
//! documents and updating the shared matrices lock-free through relaxed
//! atomics. Concurrent updates may interleave mid-vector — the usual
//! benign races of asynchronous SGD — so multi-worker runs are not
//! reproducible run to run.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::model::{EmbeddingModel, TrainMeta};
use super::{build_negative_table, build_vocab, sigmoid, NegativeSampler};

/// RNG stream for weight initialization; workers use streams 1, 2, ….
const INIT_STREAM: u64 = 0;

/// Bound on rejection-sampling attempts when a negative draw equals the
/// target; prevents livelock on degenerate vocabularies.
const MAX_NEGATIVE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Vector dimensionality.
    pub dim: usize,
    /// Symmetric context radius. Fixed — every position within the window
    /// is used, with no random window shrinking.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Learning rate decays linearly from `lr_initial` to `lr_final` over
    /// the total pair count of the whole run.
    pub lr_initial: f64,
    pub lr_final: f64,
    pub seed: u64,
    /// 1 = deterministic; >1 = lock-free parallel workers.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 200,
            window: 15,
            negatives: 5,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 0.0001,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.dim == 0 {
            violations.push("train.dim must be >= 1".to_string());
        }
        if self.window == 0 {
            violations.push("train.window must be >= 1".to_string());
        }
        if self.negatives == 0 {
            violations.push("train.negatives must be >= 1".to_string());
        }
        if self.epochs == 0 {
            violations.push("train.epochs must be >= 1".to_string());
        }
        if !(self.lr_initial > self.lr_final && self.lr_final > 0.0) {
            violations.push(format!(
                "train learning rates must satisfy lr_initial > lr_final > 0 (got {} and {})",
                self.lr_initial, self.lr_final
            ));
        }
        if self.workers == 0 {
            violations.push("train.workers must be >= 1".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::config(violations))
        }
    }
}

/// f32 cell updated through relaxed atomics so parallel workers can share
/// the matrices without locks.
struct AtomicF32(AtomicU32);

impl AtomicF32 {
    fn new(v: f32) -> Self {
        AtomicF32(AtomicU32::new(v.to_bits()))
    }

    #[inline]
    fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, v: f32) {
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    fn add(&self, d: f32) {
        self.set(self.get() + d);
    }
}

struct SharedMatrix {
    cells: Vec<AtomicF32>,
    dim: usize,
}

impl SharedMatrix {
    fn zeros(rows: usize, dim: usize) -> Self {
        SharedMatrix {
            cells: (0..rows * dim).map(|_| AtomicF32::new(0.0)).collect(),
            dim,
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[AtomicF32] {
        &self.cells[r * self.dim..(r + 1) * self.dim]
    }

    fn into_vec(self) -> Vec<f32> {
        self.cells.into_iter().map(|c| c.get()).collect()
    }
}

/// In-window (target, context) pairs of one document: every offset in
/// ±window, clipped at the document bounds. Documents never leak context
/// across their boundaries.
fn pairs_in_doc(len: usize, window: usize) -> u64 {
    let mut pairs = 0u64;
    for t in 0..len {
        let lo = t.saturating_sub(window);
        let hi = (t + window).min(len.saturating_sub(1));
        pairs += (hi - lo) as u64;
    }
    pairs
}

/// One SGD step on the pair (target, context): apply the SGNS gradients
/// at learning rate `lr`, drawing `negatives` samples (any draw equal to
/// the target is resampled). Accumulates the pair loss.
#[allow(clippy::too_many_arguments)]
fn train_pair(
    w: &SharedMatrix,
    c: &SharedMatrix,
    target: usize,
    context: usize,
    sampler: &NegativeSampler,
    negatives: usize,
    lr: f32,
    rng: &mut ChaCha8Rng,
    grad_buf: &mut [f32],
    loss_acc: &mut f64,
) {
    let dim = w.dim;
    let u_row = w.row(target);
    grad_buf.fill(0.0);

    // Positive sample. Gradients use the pre-update values throughout,
    // matching sgns_grad; the target row is updated last.
    let v_row = c.row(context);
    let mut dot = 0.0f64;
    for d in 0..dim {
        dot += (u_row[d].get() * v_row[d].get()) as f64;
    }
    *loss_acc += softplus(-dot);
    let g = (sigmoid(dot) - 1.0) as f32;
    for d in 0..dim {
        grad_buf[d] += g * v_row[d].get();
    }
    for d in 0..dim {
        v_row[d].add(-lr * g * u_row[d].get());
    }

    for _ in 0..negatives {
        let mut neg = sampler.sample(rng) as usize;
        let mut attempts = 0;
        while neg == target {
            attempts += 1;
            if attempts >= MAX_NEGATIVE_ATTEMPTS {
                break;
            }
            neg = sampler.sample(rng) as usize;
        }
        if neg == target {
            continue; // degenerate vocabulary; skip this negative
        }
        let n_row = c.row(neg);
        let mut dot = 0.0f64;
        for d in 0..dim {
            dot += (u_row[d].get() * n_row[d].get()) as f64;
        }
        *loss_acc += softplus(dot);
        let g = sigmoid(dot) as f32;
        for d in 0..dim {
            grad_buf[d] += g * n_row[d].get();
        }
        for d in 0..dim {
            n_row[d].add(-lr * g * u_row[d].get());
        }
    }

    for d in 0..dim {
        u_row[d].add(-lr * grad_buf[d]);
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Train an embedding model over an injected corpus.
pub fn train(corpus: &[Vec<String>], config: &TrainConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    let vocab = build_vocab(corpus)?;
    let dim = config.dim;

    let encoded: Vec<Vec<u32>> = corpus
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|t| vocab.index(t).expect("vocabulary covers the corpus"))
                .collect()
        })
        .collect();

    let pairs_per_epoch: u64 = encoded
        .iter()
        .map(|d| pairs_in_doc(d.len(), config.window))
        .sum();
    let total_pairs = pairs_per_epoch * config.epochs as u64;
    if total_pairs == 0 {
        return Err(Error::data(
            "corpus generates no training pairs (all documents have a single token)",
        ));
    }

    let sampler = build_negative_table(&vocab, 0.75);

    let w = SharedMatrix::zeros(vocab.len(), dim);
    let c = SharedMatrix::zeros(vocab.len(), dim);
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(INIT_STREAM);
        let scale = 0.5 / dim as f32;
        for cell in &w.cells {
            cell.set((rng.random::<f32>() - 0.5) * 2.0 * scale);
        }
    }

    let workers = config.workers.min(encoded.len()).max(1);
    let chunk = encoded.len().div_ceil(workers);
    let pairs_done = AtomicU64::new(0);
    let lr_initial = config.lr_initial;
    let lr_span = config.lr_final - config.lr_initial;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_loss_sum = 0.0f64;
        let mut epoch_pair_count = 0u64;

        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (worker, shard) in encoded.chunks(chunk).enumerate() {
                let w = &w;
                let c = &c;
                let sampler = &sampler;
                let pairs_done = &pairs_done;
                handles.push(scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(1 + worker as u64 + (epoch * workers) as u64);
                    let mut grad_buf = vec![0.0f32; dim];
                    let mut loss = 0.0f64;
                    let mut count = 0u64;
                    for doc in shard {
                        let n = doc.len();
                        for t in 0..n {
                            let lo = t.saturating_sub(config.window);
                            let hi = (t + config.window).min(n - 1);
                            for ctx in lo..=hi {
                                if ctx == t {
                                    continue;
                                }
                                let done = pairs_done.fetch_add(1, Ordering::Relaxed);
                                let lr = (lr_initial
                                    + lr_span * (done as f64 / total_pairs as f64))
                                    as f32;
                                train_pair(
                                    w,
                                    c,
                                    doc[t] as usize,
                                    doc[ctx] as usize,
                                    sampler,
                                    config.negatives,
                                    lr,
                                    &mut rng,
                                    &mut grad_buf,
                                    &mut loss,
                                );
                                count += 1;
                            }
                        }
                    }
                    (loss, count)
                }));
            }
            for handle in handles {
                let (loss, count) = handle.join().expect("training worker panicked");
                epoch_loss_sum += loss;
                epoch_pair_count += count;
            }
        });

        let mean = epoch_loss_sum / epoch_pair_count.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Internal(format!(
                "non-finite mean loss {mean} in epoch {epoch}; training aborted"
            )));
        }
        epoch_losses.push(mean);
    }

    let final_mean_loss = *epoch_losses.last().expect("epochs >= 1");
    let model = EmbeddingModel::from_parts(
        vocab,
        dim,
        w.into_vec(),
        c.into_vec(),
        TrainMeta {
            config: config.clone(),
            epoch_losses,
            final_mean_loss,
        },
    )?;
    Ok(model)
}
