//! Deterministic English-like text for tests and benchmarks.
//!
//! Words are built from syllables and drawn from a Zipf distribution; each
//! word also has a few favoured successors, so the text has local
//! structure beyond unigram statistics.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::seed;

const ONSETS: &[&str] = &[
    "", "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "y", "z", "br", "ch", "cl",
    "dr", "fl", "gr", "pl", "qu", "sh", "st", "th", "tr",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ee", "ou", "oo", "y"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "l", "m", "nd", "ng", "st", "ck", "rs"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Approximate output size in bytes.
    pub bytes: usize,
    pub vocab: usize,
    pub zipf_exponent: f64,
    /// Probability that a word is one of the previous word's successors.
    pub p_successor: f64,
    pub successors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            bytes: 1 << 20,
            vocab: 20_000,
            zipf_exponent: 1.05,
            p_successor: 0.5,
            successors: 6,
            seed: 0,
        }
    }
}

fn lexicon(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = FxHashSet::default();
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        // frequent words are short
        let max_syl = 1 + (words.len() as f64).log10().max(0.0) as usize;
        let syllables = rng.random_range(1..=max_syl.min(4));
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(NUCLEI[rng.random_range(0..NUCLEI.len())]);
            w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

pub fn synth_text(config: &SynthConfig) -> String {
    let mut rng = seed::rng(config.seed);
    let words = lexicon(config.vocab.max(1), &mut rng);
    let weights: Vec<f64> = (1..=words.len()).map(|r| (r as f64).powf(-config.zipf_exponent)).collect();
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let successors: Vec<Vec<usize>> = (0..words.len())
        .map(|_| (0..config.successors).map(|_| zipf.sample(&mut rng)).collect())
        .collect();

    let mut out = String::with_capacity(config.bytes + 256);
    let mut prev = zipf.sample(&mut rng);
    while out.len() < config.bytes {
        let len = rng.random_range(4..=22);
        for i in 0..len {
            let w = if !successors[prev].is_empty() && rng.random_bool(config.p_successor) {
                successors[prev][rng.random_range(0..successors[prev].len())]
            } else {
                zipf.sample(&mut rng)
            };
            prev = w;
            if i > 0 {
                out.push(' ');
            }
            if rng.random_bool(0.01) {
                out.push_str(&rng.random_range(1..2000).to_string());
                out.push(' ');
            }
            let word = &words[w];
            if i == 0 || rng.random_bool(0.04) {
                let mut cs = word.chars();
                if let Some(c) = cs.next() {
                    out.extend(c.to_uppercase());
                    out.push_str(cs.as_str());
                }
            } else {
                out.push_str(word);
            }
            if i + 1 < len && rng.random_bool(0.06) {
                out.push(',');
            }
        }
        out.push(if rng.random_bool(0.1) { '?' } else { '.' });
        out.push(if rng.random_bool(0.15) { '\n' } else { ' ' });
    }
    out
}
