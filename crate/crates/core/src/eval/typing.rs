//! Entity typing: one linear scorer per type over bag-of-ngram mention
//! vectors, thresholds tuned on dev, micro F1 on test.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, DEFAULT_MARKER};
use crate::error::{Error, Result};
use crate::eval::metrics::{micro_f1, prf_from_counts, Prf};
use crate::represent::{bag_of_chars, BagCounting, Lookup};
use crate::seed;
use crate::transducer::RuleSet;
use crate::trainer::NgramEmbeddings;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub mention: String,
    pub types: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypingDataset {
    pub mentions: Vec<Mention>,
    pub split: Split,
    /// Sorted type labels.
    pub type_inventory: Vec<String>,
}

impl TypingDataset {
    /// Inventory defaults to the labels seen in `mentions`.
    pub fn new(mentions: Vec<Mention>, split: Split, inventory: Option<Vec<String>>) -> Result<Self> {
        let seen: BTreeSet<&str> = mentions.iter().flat_map(|m| m.types.iter().map(String::as_str)).collect();
        let type_inventory: Vec<String> = match inventory {
            Some(mut inv) => {
                inv.sort();
                inv.dedup();
                inv
            }
            None => seen.iter().map(|s| s.to_string()).collect(),
        };
        for (i, m) in mentions.iter().enumerate() {
            if m.types.is_empty() {
                return Err(Error::parse(i + 1, format!("mention {:?} has no type", m.mention)));
            }
            if let Some(t) = m.types.iter().find(|t| type_inventory.binary_search(t).is_err()) {
                return Err(Error::parse(i + 1, format!("type {t:?} not in inventory")));
            }
        }
        Ok(TypingDataset {
            mentions,
            split,
            type_inventory,
        })
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }
}

/// One JSON object per line: `{"mention": "...", "types": ["...", ...]}`.
pub fn read_typing_dataset(reader: impl BufRead, split: Split, inventory: Option<Vec<String>>) -> Result<TypingDataset> {
    let mut mentions = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: Mention = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        mentions.push(m);
    }
    TypingDataset::new(mentions, split, inventory)
}

pub fn load_typing_dataset(path: impl AsRef<Path>, split: Split, inventory: Option<Vec<String>>) -> Result<TypingDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_typing_dataset(BufReader::new(file), split, inventory)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypingHyper {
    pub kmin: usize,
    pub kmax: usize,
    /// L2 regularization.
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; decays as `eta0 / (1 + lambda * eta0 * t)`.
    pub eta0: f64,
    pub seed: u64,
    pub normalize: bool,
    pub marker: char,
}

impl Default for TypingHyper {
    fn default() -> Self {
        TypingHyper {
            kmin: 3,
            kmax: 9,
            lambda: 1e-4,
            epochs: 20,
            eta0: 0.1,
            seed: 0,
            normalize: true,
            marker: DEFAULT_MARKER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypingModel {
    pub types: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Predict a type iff its score is `>=` the threshold; `+inf` never predicts.
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    pub hyper: TypingHyper,
}

/// Mention feature vector: normalized bag of ngrams, optionally unit length.
pub fn featurize(emb: &NgramEmbeddings, mention: &str, hyper: &TypingHyper, tau: Option<&RuleSet>) -> Vec<f64> {
    let chars = normalize(mention, hyper.marker);
    let span = bag_of_chars(&mut Lookup::new(emb, tau), &chars, hyper.kmin, hyper.kmax, BagCounting::Occurrence);
    if span.contributing == 0 {
        warn!("mention {mention:?} has no embedded ngrams");
    }
    let mut x: Vec<f64> = span.values.iter().map(|&v| v as f64).collect();
    if hyper.normalize {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            x.iter_mut().for_each(|v| *v /= n);
        }
    }
    x
}

fn featurize_all(emb: &NgramEmbeddings, data: &TypingDataset, hyper: &TypingHyper, tau: Option<&RuleSet>) -> Vec<Vec<f64>> {
    data.mentions.par_iter().map(|m| featurize(emb, &m.mention, hyper, tau)).collect()
}

fn gold_matrix(types: &[String], data: &TypingDataset) -> Vec<Vec<bool>> {
    types
        .iter()
        .map(|t| data.mentions.iter().map(|m| m.types.contains(t)).collect())
        .collect()
}

/// One-vs-rest hinge-loss SGD. The visiting order is shared by all types
/// so each scorer depends only on its own labels.
pub fn train_linear(features: &[Vec<f64>], labels: &[Vec<bool>], hyper: &TypingHyper) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dim = features.first().map_or(0, Vec::len);
    let mut rng = seed::rng(hyper.seed);
    let orders: Vec<Vec<usize>> = (0..hyper.epochs)
        .map(|_| {
            let mut o: Vec<usize> = (0..features.len()).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();
    labels
        .par_iter()
        .map(|y| {
            let mut w = vec![0.0; dim];
            let mut b = 0.0;
            let mut t = 0u64;
            for order in &orders {
                for &i in order {
                    let eta = hyper.eta0 / (1.0 + hyper.lambda * hyper.eta0 * t as f64);
                    t += 1;
                    let x = &features[i];
                    let sign = if y[i] { 1.0 } else { -1.0 };
                    let margin = sign * (dot(&w, x) + b);
                    let shrink = 1.0 - eta * hyper.lambda;
                    w.iter_mut().for_each(|v| *v *= shrink);
                    if margin < 1.0 {
                        for (wv, xv) in w.iter_mut().zip(x) {
                            *wv += eta * sign * xv;
                        }
                        b += eta * sign;
                    }
                }
            }
            (w, b)
        })
        .unzip()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_typing(
    emb: &NgramEmbeddings,
    train: &TypingDataset,
    tau: Option<&RuleSet>,
    hyper: &TypingHyper,
) -> Result<TypingModel> {
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let types = train.type_inventory.clone();
    let features = featurize_all(emb, train, hyper, tau);
    let labels = gold_matrix(&types, train);
    let (weights, biases) = train_linear(&features, &labels, hyper);
    Ok(TypingModel {
        thresholds: vec![0.0; types.len()],
        types,
        weights,
        biases,
        hyper: hyper.clone(),
    })
}

impl TypingModel {
    /// Scores indexed `[type][mention]`.
    pub fn scores(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| features.iter().map(|x| dot(w, x) + b).collect())
            .collect()
    }
}

/// Best threshold for one type: maximizes F1 over all cut points of the
/// sorted scores, preferring the higher threshold on ties.
pub fn best_threshold(scores: &[f64], gold: &[bool]) -> f64 {
    let positives = gold.iter().filter(|&&g| g).count() as u64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut best = (prf_from_counts(0, 0, positives).f1, f64::INFINITY);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if gold[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let f1 = prf_from_counts(tp, fp, positives - tp).f1;
        if f1 > best.0 {
            best = (f1, s);
        }
    }
    best.1
}

pub fn tune_thresholds(
    model: &TypingModel,
    emb: &NgramEmbeddings,
    dev: &TypingDataset,
    tau: Option<&RuleSet>,
) -> TypingModel {
    let features = featurize_all(emb, dev, &model.hyper, tau);
    let scores = model.scores(&features);
    let gold = gold_matrix(&model.types, dev);
    let mut tuned = model.clone();
    tuned.thresholds = scores.iter().zip(&gold).map(|(s, g)| best_threshold(s, g)).collect();
    tuned
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeScore {
    pub label: String,
    /// `None` when the type is never predicted.
    pub threshold: Option<f64>,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypingReport {
    pub mentions: usize,
    pub micro: Prf,
    pub per_type: Vec<TypeScore>,
}

/// Gold labels absent from the model count as misses.
pub fn eval_typing(model: &TypingModel, emb: &NgramEmbeddings, test: &TypingDataset, tau: Option<&RuleSet>) -> TypingReport {
    let features = featurize_all(emb, test, &model.hyper, tau);
    let scores = model.scores(&features);
    let gold = gold_matrix(&model.types, test);
    let mut decisions = Vec::with_capacity(model.types.len() * test.len());
    let mut per_type = Vec::with_capacity(model.types.len());
    for (t, label) in model.types.iter().enumerate() {
        let d: Vec<(bool, bool)> = scores[t]
            .iter()
            .zip(&gold[t])
            .map(|(&s, &g)| (s >= model.thresholds[t], g))
            .collect();
        per_type.push(TypeScore {
            label: label.clone(),
            threshold: model.thresholds[t].is_finite().then_some(model.thresholds[t]),
            prf: micro_f1(d.iter().copied()),
        });
        decisions.extend(d);
    }
    for m in &test.mentions {
        for t in &m.types {
            if !model.types.contains(t) {
                decisions.push((false, true));
            }
        }
    }
    TypingReport {
        mentions: test.len(),
        micro: micro_f1(decisions),
        per_type,
    }
}
