use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, Ordering};

use log::{debug, info};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::SegmentSource;
use crate::seed;
use crate::trainer::{build_vocab, NgramEmbeddings, Vocab};

const NEGATIVE_TABLE_SIZE: usize = 10_000_000;
const MAX_SENTENCE: usize = 1000;
const MIN_LR_FRACTION: f32 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    /// Maximum context distance, in units.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub min_count: u64,
    /// Frequent-unit subsampling; 0 disables it.
    pub subsample_threshold: f64,
    pub workers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 1,
            initial_lr: 0.025,
            min_count: 5,
            subsample_threshold: 0.0,
            workers: 1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.initial_lr > 0.0) {
            return bad("initial_lr must be positive");
        }
        if self.subsample_threshold < 0.0 {
            return bad("subsample_threshold must be non-negative");
        }
        Ok(())
    }
}

/// Input vectors uniform in `[-0.5/d, 0.5/d]`, each row keyed by its unit index.
pub fn init_vectors(n: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut out = Vec::with_capacity(n * dim);
    let scale = 1.0 / dim as f32;
    for i in 0..n {
        let mut rng = seed::derived_rng(seed, i as u64);
        out.extend((0..dim).map(|_| (rng.random::<f32>() - 0.5) * scale));
    }
    out
}

/// Build the vocabulary from `source` and train on it.
pub fn train_sgns(source: &dyn SegmentSource, config: &TrainConfig) -> Result<NgramEmbeddings> {
    config.validate()?;
    let vocab = build_vocab(source, config.min_count);
    info!(
        "vocabulary: {} units (min_count {}), {} tokens",
        vocab.len(),
        config.min_count,
        vocab.total()
    );
    train_with_vocab(source, vocab, config)
}

pub fn train_with_vocab(
    source: &dyn SegmentSource,
    vocab: Vocab,
    config: &TrainConfig,
) -> Result<NgramEmbeddings> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    let dim = config.dim;
    let input = SharedMatrix::new(init_vectors(vocab.len(), dim, config.seed), dim);
    let output = SharedMatrix::new(vec![0.0; vocab.len() * dim], dim);
    let table = if config.negatives > 0 {
        negative_table(vocab.freqs(), NEGATIVE_TABLE_SIZE)
    } else {
        Vec::new()
    };
    let total_words = vocab.total().max(1);
    let progress = AtomicU64::new(0);
    let workers = config.workers.max(1);

    let shared = Shared {
        source,
        vocab: &vocab,
        config,
        input: &input,
        output: &output,
        table: &table,
        progress: &progress,
        planned: config.epochs as u64 * total_words,
        total_words,
    };

    for epoch in 0..config.epochs {
        if workers == 1 {
            shared.run_worker(epoch, 0, 1);
        } else {
            std::thread::scope(|s| {
                for w in 0..workers {
                    let shared = &shared;
                    s.spawn(move || shared.run_worker(epoch, w, workers));
                }
            });
        }
        let lr = shared.learning_rate();
        for (name, m) in [("input", &input), ("output", &output)] {
            if let Some(row) = m.first_non_finite() {
                return Err(Error::NonFinite {
                    matrix: name,
                    row,
                    epoch,
                    lr,
                });
            }
        }
        debug!("epoch {epoch} done, lr {lr}");
    }

    NgramEmbeddings::new(vocab, dim, input.into_inner())
}

struct Shared<'a> {
    source: &'a dyn SegmentSource,
    vocab: &'a Vocab,
    config: &'a TrainConfig,
    input: &'a SharedMatrix,
    output: &'a SharedMatrix,
    table: &'a [u32],
    progress: &'a AtomicU64,
    planned: u64,
    total_words: u64,
}

impl Shared<'_> {
    fn learning_rate(&self) -> f32 {
        let done = self.progress.load(Ordering::Relaxed) as f64;
        let frac = 1.0 - done / (self.planned as f64 + 1.0);
        self.config.initial_lr * (frac as f32).max(MIN_LR_FRACTION)
    }

    fn run_worker(&self, epoch: usize, worker: usize, workers: usize) {
        let stream_id = ((epoch as u64) << 32) | worker as u64;
        let mut rng = seed::derived_rng(self.config.seed ^ 0x5eed_5eed, stream_id);
        let mut sentence: Vec<u32> = Vec::with_capacity(MAX_SENTENCE);
        let mut grad = vec![0f32; self.config.dim];
        let t = self.config.subsample_threshold * self.total_words as f64;

        for pass in (worker..self.source.num_passes()).step_by(workers) {
            self.source.for_each_in_pass(pass, &mut |seg| {
                let Some(id) = self.vocab.get(seg) else {
                    return;
                };
                if t > 0.0 {
                    let f = self.vocab.freq(id as usize) as f64;
                    let keep = ((f / t).sqrt() + 1.0) * t / f;
                    if keep < rng.random::<f64>() {
                        self.progress.fetch_add(1, Ordering::Relaxed);
                        return;
                    }
                }
                sentence.push(id);
                if sentence.len() == MAX_SENTENCE {
                    self.train_sentence(&sentence, &mut rng, &mut grad);
                    sentence.clear();
                }
            });
            self.train_sentence(&sentence, &mut rng, &mut grad);
            sentence.clear();
        }
    }

    fn train_sentence(&self, sentence: &[u32], rng: &mut ChaCha8Rng, grad: &mut [f32]) {
        if sentence.is_empty() {
            return;
        }
        let lr = self.learning_rate();
        let window = self.config.window;
        for (pos, &center) in sentence.iter().enumerate() {
            let reach = window - rng.random_range(0..window);
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach).min(sentence.len() - 1);
            for (c, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                if c != pos {
                    self.update_pair(center, context, lr, rng, grad);
                }
            }
        }
        self.progress
            .fetch_add(sentence.len() as u64, Ordering::Relaxed);
    }

    /// One positive and `negatives` sampled updates for (center, context).
    #[inline]
    fn update_pair(&self, center: u32, context: u32, lr: f32, rng: &mut ChaCha8Rng, grad: &mut [f32]) {
        // SAFETY: rows are updated without synchronization across workers
        // (lock-free asynchronous SGD); each row slice stays in bounds.
        let center_vec = unsafe { self.input.row_mut(center as usize) };
        grad.fill(0.0);
        for d in 0..=self.config.negatives {
            let (target, label) = if d == 0 {
                (context, 1.0f32)
            } else {
                let t = self.table[rng.random_range(0..self.table.len())];
                if t == context {
                    continue;
                }
                (t, 0.0)
            };
            let target_vec = unsafe { self.output.row_mut(target as usize) };
            let f = dot(center_vec, target_vec);
            let g = (label - sigmoid(f)) * lr;
            for ((gr, tv), cv) in grad.iter_mut().zip(target_vec.iter_mut()).zip(center_vec.iter()) {
                *gr += g * *tv;
                *tv += g * cv;
            }
        }
        for (cv, gr) in center_vec.iter_mut().zip(grad.iter()) {
            *cv += gr;
        }
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Unigram^0.75 table for negative sampling.
fn negative_table(freqs: &[u64], size: usize) -> Vec<u32> {
    let weights: Vec<f64> = freqs.iter().map(|&f| (f.max(1) as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(size);
    let mut idx = 0usize;
    let mut cum = weights[0] / total;
    for i in 0..size {
        table.push(idx as u32);
        if (i + 1) as f64 / size as f64 > cum && idx + 1 < weights.len() {
            idx += 1;
            cum += weights[idx] / total;
        }
    }
    table
}

/// Parameter matrix shared between workers without locking.
struct SharedMatrix {
    data: UnsafeCell<Vec<f32>>,
    dim: usize,
}

// SAFETY: concurrent row updates are intentionally unsynchronized; races only
// lose or blend float updates and never touch memory outside the buffer.
unsafe impl Sync for SharedMatrix {}

impl SharedMatrix {
    fn new(data: Vec<f32>, dim: usize) -> Self {
        SharedMatrix {
            data: UnsafeCell::new(data),
            dim,
        }
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn row_mut(&self, row: usize) -> &mut [f32] {
        let data = &mut *self.data.get();
        &mut data[row * self.dim..(row + 1) * self.dim]
    }

    fn first_non_finite(&self) -> Option<usize> {
        let data = unsafe { &*self.data.get() };
        data.iter().position(|x| !x.is_finite()).map(|p| p / self.dim)
    }

    fn into_inner(self) -> Vec<f32> {
        self.data.into_inner()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::cosine;
    use crate::segmenter::SegmentStream;

    fn small_config() -> TrainConfig {
        TrainConfig {
            dim: 16,
            min_count: 1,
            ..Default::default()
        }
    }

    #[test]
    fn no_updates_keeps_initialization() {
        let stream: SegmentStream = "a b c a b c".parse().unwrap();
        let config = TrainConfig {
            negatives: 0,
            epochs: 0,
            ..small_config()
        };
        let emb = train_sgns(&stream, &config).unwrap();
        assert_eq!(emb.as_slice(), init_vectors(3, 16, config.seed).as_slice());
    }

    #[test]
    fn init_range() {
        let v = init_vectors(50, 10, 3);
        assert!(v.iter().all(|x| x.abs() <= 0.05));
        assert_eq!(init_vectors(50, 10, 3), v);
        // Row i depends only on (seed, i).
        assert_eq!(&init_vectors(2, 10, 3)[..], &v[..20]);
    }

    #[test]
    fn empty_vocab_is_an_error() {
        let stream: SegmentStream = "a b".parse().unwrap();
        let config = TrainConfig {
            min_count: 10,
            ..small_config()
        };
        assert!(matches!(train_sgns(&stream, &config), Err(Error::EmptyVocab)));
    }

    #[test]
    fn rejects_bad_config() {
        let stream: SegmentStream = "a b".parse().unwrap();
        for config in [
            TrainConfig { dim: 0, ..small_config() },
            TrainConfig { window: 0, ..small_config() },
            TrainConfig { initial_lr: 0.0, ..small_config() },
        ] {
            assert!(matches!(train_sgns(&stream, &config), Err(Error::Config(_))));
        }
    }

    #[test]
    fn negative_table_follows_distribution() {
        let table = negative_table(&[16, 1], 10_000);
        let zeros = table.iter().filter(|&&t| t == 0).count() as f64;
        // 16^0.75 = 8 vs 1
        assert!((zeros / 10_000.0 - 8.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn single_worker_is_deterministic() {
        let text = "p q r s p q x y p q r s x y p q ".repeat(40);
        let stream: SegmentStream = text.parse().unwrap();
        let config = TrainConfig {
            epochs: 2,
            subsample_threshold: 1e-2,
            ..small_config()
        };
        let a = train_sgns(&stream, &config).unwrap();
        let b = train_sgns(&stream, &config).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn multiple_workers_produce_finite_vectors() {
        let text = "p q r s t u v w ".repeat(200);
        let mut stream = SegmentStream::default();
        for _ in 0..4 {
            stream.begin_pass();
            for s in text.split_whitespace() {
                stream.push(s);
            }
        }
        let config = TrainConfig {
            workers: 3,
            epochs: 2,
            ..small_config()
        };
        let emb = train_sgns(&stream, &config).unwrap();
        assert!(emb.as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn huge_learning_rate_is_reported() {
        let text = "a b ".repeat(500);
        let stream: SegmentStream = text.parse().unwrap();
        let config = TrainConfig {
            initial_lr: f32::MAX,
            ..small_config()
        };
        assert!(matches!(
            train_sgns(&stream, &config),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn cooccurring_units_end_up_close() {
        // each group g has a pair "Pg Qg" and its own context units; groups
        // never mix
        let mut rng = seed::rng(9);
        let mut text = String::new();
        for _ in 0..1500 {
            let g = rng.random_range(0..10);
            let len = rng.random_range(6..14);
            let at = rng.random_range(0..len);
            for i in 0..len {
                if i == at {
                    text.push_str(&format!("P{g} Q{g} "));
                }
                text.push_str(&format!("t{g}_{} ", rng.random_range(0..8)));
            }
        }
        let stream: SegmentStream = text.parse().unwrap();
        let config = TrainConfig {
            dim: 20,
            ..small_config()
        };
        let emb = train_sgns(&stream, &config).unwrap();
        let paired = (0..10)
            .map(|g| cosine(emb.get(&format!("P{g}")).unwrap(), emb.get(&format!("Q{g}")).unwrap()).unwrap())
            .sum::<f64>()
            / 10.0;
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..emb.len() {
            for j in i + 1..emb.len() {
                sum += cosine(emb.vector(i), emb.vector(j)).unwrap();
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!(paired > mean + 0.2, "{paired} vs {mean}");
    }
}
