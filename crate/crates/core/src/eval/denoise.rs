//! Text denoising: corrupt one character of a context and check whether the
//! clean context is the nearest neighbour of the corrupted one.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Corpus, DEFAULT_MARKER};
use crate::error::{Error, Result};
use crate::eval::metrics::{mean_reciprocal_rank, rank_of};
use crate::represent::{bag_of_chars, cosine_with_norms, norm, position_embeddings, BagCounting, Lookup, ReprKind};
use crate::seed;
use crate::transducer::RuleSet;
use crate::trainer::NgramEmbeddings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub context_len: usize,
    pub n_contexts: usize,
    /// Corrupted offset is uniform in `[noise_lo, noise_hi]`; the positional
    /// representation uses the same range.
    pub noise_lo: usize,
    pub noise_hi: usize,
    pub p_space: f64,
    pub n_queries: usize,
    pub seed: u64,
    pub kmin: usize,
    pub kmax: usize,
    pub marker: char,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            context_len: 40,
            n_contexts: 2_000_000,
            noise_lo: 15,
            noise_hi: 25,
            p_space: 0.5,
            n_queries: 1000,
            seed: 0,
            kmin: 3,
            kmax: 9,
            marker: DEFAULT_MARKER,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_lo <= self.noise_hi && self.noise_hi < self.context_len) {
            return Err(Error::Config(format!(
                "need 0 <= noise_lo <= noise_hi < context_len, got {} {} {}",
                self.noise_lo, self.noise_hi, self.context_len
            )));
        }
        if !(0.0..=1.0).contains(&self.p_space) {
            return Err(Error::Config(format!("p_space {} outside [0, 1]", self.p_space)));
        }
        if self.n_queries > self.n_contexts {
            return Err(Error::Config("more queries than contexts".into()));
        }
        if self.kmin == 0 || self.kmin > self.kmax {
            return Err(Error::Config("need 1 <= kmin <= kmax".into()));
        }
        Ok(())
    }
}

/// Replace exactly one character in `[noise_lo, noise_hi]`: by the marker
/// with probability `p_space`, otherwise by a different alphabet character.
/// A marker that would replace a marker falls through to the random branch.
pub fn make_noise_context(
    clean: &[char],
    config: &DenoiseConfig,
    alphabet: &Alphabet,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<char>, usize)> {
    if clean.len() != config.context_len {
        return Err(Error::Config(format!(
            "context has {} characters, expected {}",
            clean.len(),
            config.context_len
        )));
    }
    let pos = rng.random_range(config.noise_lo..=config.noise_hi);
    let original = clean[pos];
    let use_marker = rng.random::<f64>() < config.p_space;
    let replacement = if use_marker && original != config.marker {
        config.marker
    } else {
        let others: Vec<char> = alphabet.symbols().iter().copied().filter(|&c| c != original).collect();
        if others.is_empty() {
            return Err(Error::Config("alphabet has no replacement character".into()));
        }
        others[rng.random_range(0..others.len())]
    };
    let mut noisy = clean.to_vec();
    noisy[pos] = replacement;
    Ok((noisy, pos))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoisingSet {
    pub offsets: Vec<usize>,
    pub clean: Vec<Vec<char>>,
    pub noisy: Vec<Vec<char>>,
    pub noise_positions: Vec<usize>,
    /// Indices into `noisy`.
    pub queries: Vec<usize>,
}

impl DenoisingSet {
    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    /// Pool item `i`: clean contexts first, then noisy ones.
    pub fn pool_item(&self, i: usize) -> &[char] {
        let n = self.len();
        if i < n {
            &self.clean[i]
        } else {
            &self.noisy[i - n]
        }
    }
}

pub fn build_denoising_set(corpus: &Corpus, config: &DenoiseConfig) -> Result<DenoisingSet> {
    config.validate()?;
    if corpus.len() < config.context_len {
        return Err(Error::CorpusTooShort {
            needed: config.context_len,
            have: corpus.len(),
        });
    }
    let windows = corpus.len() - config.context_len + 1;
    if config.n_contexts > windows {
        return Err(Error::CorpusTooShort {
            needed: config.n_contexts + config.context_len - 1,
            have: corpus.len(),
        });
    }
    let alphabet = corpus.alphabet();
    let mut rng = seed::derived_rng(config.seed, 0);
    let offsets = index::sample(&mut rng, windows, config.n_contexts).into_vec();
    let mut noise_rng = seed::derived_rng(config.seed, 1);
    let mut clean = Vec::with_capacity(offsets.len());
    let mut noisy = Vec::with_capacity(offsets.len());
    let mut noise_positions = Vec::with_capacity(offsets.len());
    for &o in &offsets {
        let c = corpus.chars[o..o + config.context_len].to_vec();
        let (n, p) = make_noise_context(&c, config, &alphabet, &mut noise_rng)?;
        clean.push(c);
        noisy.push(n);
        noise_positions.push(p);
    }
    let queries = index::sample(&mut seed::derived_rng(config.seed, 2), config.n_contexts, config.n_queries).into_vec();
    Ok(DenoisingSet {
        offsets,
        clean,
        noisy,
        noise_positions,
        queries,
    })
}

/// Pool representations flattened for fast scanning.
struct PreparedPool {
    width: usize,
    dim: usize,
    values: Vec<f32>,
    norms: Vec<f64>,
}

impl PreparedPool {
    fn build(
        emb: &NgramEmbeddings,
        set: &DenoisingSet,
        kind: ReprKind,
        config: &DenoiseConfig,
        tau: Option<&RuleSet>,
    ) -> Self {
        let width = match kind {
            ReprKind::Bag => 1,
            ReprKind::Positional => config.noise_hi - config.noise_lo + 1,
        };
        let dim = emb.dim();
        let items = 2 * set.len();
        let per_item: Vec<Vec<f32>> = (0..items)
            .into_par_iter()
            .map_init(
                || Lookup::new(emb, tau),
                |lookup, i| {
                    let chars = set.pool_item(i);
                    match kind {
                        ReprKind::Bag => bag_of_chars(lookup, chars, config.kmin, config.kmax, BagCounting::Occurrence).values,
                        ReprKind::Positional => position_embeddings(lookup, chars, config.noise_lo..=config.noise_hi, config.kmin, config.kmax)
                            .into_iter()
                            .flat_map(|p| p.values)
                            .collect(),
                    }
                },
            )
            .collect();
        let mut values = Vec::with_capacity(items * width * dim);
        for v in per_item {
            values.extend(v);
        }
        let norms = values.chunks_exact(dim).map(norm).collect();
        PreparedPool {
            width,
            dim,
            values,
            norms,
        }
    }

    /// Same arithmetic as `context_similarity`.
    fn similarity(&self, a: usize, b: usize) -> f64 {
        let mut sum = 0.0;
        for w in 0..self.width {
            let (ra, rb) = (a * self.width + w, b * self.width + w);
            sum += cosine_with_norms(
                &self.values[ra * self.dim..(ra + 1) * self.dim],
                &self.values[rb * self.dim..(rb + 1) * self.dim],
                self.norms[ra],
                self.norms[rb],
            );
        }
        sum / self.width as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenoiseReport {
    pub repr: ReprKind,
    pub mrr: f64,
    pub pool_size: usize,
    /// Noisy-context index of each query.
    pub queries: Vec<usize>,
    /// Rank of each query's clean twin.
    pub ranks: Vec<usize>,
}

pub fn eval_denoising(
    emb: &NgramEmbeddings,
    set: &DenoisingSet,
    kind: ReprKind,
    config: &DenoiseConfig,
    tau: Option<&RuleSet>,
) -> Result<DenoiseReport> {
    config.validate()?;
    let pool = PreparedPool::build(emb, set, kind, config, tau);
    let n = set.len();
    let ranks: Vec<usize> = set
        .queries
        .iter()
        .map(|&q| {
            let query = n + q;
            let sims: Vec<f64> = (0..2 * n)
                .into_par_iter()
                .map(|j| if j == query { f64::NEG_INFINITY } else { pool.similarity(query, j) })
                .collect();
            rank_of(&sims, q, Some(query))
        })
        .collect();
    Ok(DenoiseReport {
        repr: kind,
        mrr: mean_reciprocal_rank(&ranks),
        pool_size: 2 * n - 1,
        queries: set.queries.clone(),
        ranks,
    })
}
