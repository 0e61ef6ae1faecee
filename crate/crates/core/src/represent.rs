//! Text representations built from ngram embeddings.
//!
//! * bag of ngrams: the sum of the embeddings of every ngram occurrence in a
//!   span;
//! * position embedding: for one character offset, the sum of every ngram
//!   occurrence that covers the offset. A span becomes a sequence of these,
//!   which keeps order information the bag throws away.
//!
//! Sums always run over `k` ascending, then start offset ascending, so
//! results are reproducible bit for bit.

use std::fmt::{self, Write as _};
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transducer::RuleSet;
use crate::trainer::NgramEmbeddings;

/// Euclidean norm accumulated in `f64`.
#[inline]
pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Cosine with precomputed norms; 0 when either norm is 0.
#[inline]
pub fn cosine_with_norms(u: &[f32], v: &[f32], norm_u: f64, norm_v: f64) -> f64 {
    if norm_u == 0.0 || norm_v == 0.0 {
        return 0.0;
    }
    dot(u, v) / (norm_u * norm_v)
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(cosine_with_norms(u, v, norm(u), norm(v)))
}

/// Sum of ngram embeddings over a span.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanVector {
    pub values: Vec<f32>,
    /// Number of embedded ngram occurrences summed.
    pub contributing: usize,
}

impl SpanVector {
    pub fn zeros(dim: usize) -> Self {
        SpanVector {
            values: vec![0.0; dim],
            contributing: 0,
        }
    }

    fn add(&mut self, v: &[f32]) {
        for (a, b) in self.values.iter_mut().zip(v) {
            *a += b;
        }
        self.contributing += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionEmbedding {
    pub position: usize,
    pub values: Vec<f32>,
    pub contributing: usize,
}

/// Whether repeated ngrams count once per occurrence or once per type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BagCounting {
    #[default]
    Occurrence,
    Type,
}

/// Embedding lookup, optionally through τ.
pub struct Lookup<'a> {
    pub emb: &'a NgramEmbeddings,
    pub tau: Option<&'a RuleSet>,
    buf: String,
}

impl<'a> Lookup<'a> {
    pub fn new(emb: &'a NgramEmbeddings, tau: Option<&'a RuleSet>) -> Self {
        Lookup {
            emb,
            tau,
            buf: String::new(),
        }
    }

    pub fn get(&mut self, ngram: &[char]) -> Option<&'a [f32]> {
        self.buf.clear();
        match self.tau {
            Some(tau) if !tau.is_empty() => self.buf.extend(tau.apply_chars(ngram)),
            _ => self.buf.extend(ngram),
        }
        self.emb.get(&self.buf)
    }
}

pub fn bag_of_ngrams(
    emb: &NgramEmbeddings,
    text: &str,
    kmin: usize,
    kmax: usize,
    tau: Option<&RuleSet>,
) -> SpanVector {
    let chars: Vec<char> = text.chars().collect();
    bag_of_chars(&mut Lookup::new(emb, tau), &chars, kmin, kmax, BagCounting::Occurrence)
}

pub fn bag_of_chars(
    lookup: &mut Lookup<'_>,
    chars: &[char],
    kmin: usize,
    kmax: usize,
    counting: BagCounting,
) -> SpanVector {
    let mut out = SpanVector::zeros(lookup.emb.dim());
    let mut seen = std::collections::HashSet::new();
    for k in kmin.max(1)..=kmax.min(chars.len()) {
        for w in chars.windows(k) {
            if counting == BagCounting::Type && !seen.insert(w) {
                continue;
            }
            if let Some(v) = lookup.get(w) {
                out.add(v);
            }
        }
    }
    out
}

pub fn position_embedding(
    emb: &NgramEmbeddings,
    text: &str,
    i: usize,
    kmin: usize,
    kmax: usize,
    tau: Option<&RuleSet>,
) -> Result<PositionEmbedding> {
    let chars: Vec<char> = text.chars().collect();
    if i >= chars.len() {
        return Err(Error::OutOfRange {
            index: i,
            len: chars.len(),
        });
    }
    let mut all = position_embeddings(&mut Lookup::new(emb, tau), &chars, i..=i, kmin, kmax);
    Ok(all.pop().expect("one position"))
}

/// Position embeddings for every offset in `range` (which must lie inside
/// `chars`). Each ngram is looked up once and added to all covered offsets.
pub fn position_embeddings(
    lookup: &mut Lookup<'_>,
    chars: &[char],
    range: RangeInclusive<usize>,
    kmin: usize,
    kmax: usize,
) -> Vec<PositionEmbedding> {
    let (lo, hi) = (*range.start(), *range.end());
    let dim = lookup.emb.dim();
    let mut out: Vec<PositionEmbedding> = range
        .map(|position| PositionEmbedding {
            position,
            values: vec![0.0; dim],
            contributing: 0,
        })
        .collect();
    let n = chars.len();
    for k in kmin.max(1)..=kmax.min(n) {
        // starts whose window [s, s + k) intersects [lo, hi]
        let first = (lo + 1).saturating_sub(k);
        let last = hi.min(n - k);
        for s in first..=last {
            let Some(v) = lookup.get(&chars[s..s + k]) else {
                continue;
            };
            for p in s.max(lo)..=(s + k - 1).min(hi) {
                let pe = &mut out[p - lo];
                for (a, b) in pe.values.iter_mut().zip(v) {
                    *a += b;
                }
                pe.contributing += 1;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Bag,
    Positional,
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReprKind::Bag => "bag",
            ReprKind::Positional => "positional",
        })
    }
}

impl FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bag" => Ok(ReprKind::Bag),
            "positional" | "position" => Ok(ReprKind::Positional),
            other => Err(Error::Config(format!("unknown representation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ContextRepr {
    Bag(SpanVector),
    Positional(Vec<PositionEmbedding>),
}

#[allow(clippy::too_many_arguments)]
pub fn context_repr(
    emb: &NgramEmbeddings,
    text: &str,
    range: (usize, usize),
    kind: ReprKind,
    kmin: usize,
    kmax: usize,
    tau: Option<&RuleSet>,
) -> Result<ContextRepr> {
    let chars: Vec<char> = text.chars().collect();
    let (lo, hi) = range;
    if lo > hi || hi >= chars.len() {
        return Err(Error::OutOfRange {
            index: hi.max(lo),
            len: chars.len(),
        });
    }
    let mut lookup = Lookup::new(emb, tau);
    Ok(match kind {
        ReprKind::Bag => ContextRepr::Bag(bag_of_chars(&mut lookup, &chars, kmin, kmax, BagCounting::Occurrence)),
        ReprKind::Positional => ContextRepr::Positional(position_embeddings(&mut lookup, &chars, lo..=hi, kmin, kmax)),
    })
}

impl ContextRepr {
    /// "offset v1 ... vd" lines; the bag is written with offset `-`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |label: &dyn std::fmt::Display, v: &[f32]| {
            let _ = write!(out, "{label}");
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        };
        match self {
            ContextRepr::Bag(s) => line(&"-", &s.values),
            ContextRepr::Positional(ps) => {
                for p in ps {
                    line(&p.position, &p.values);
                }
            }
        }
        out
    }
}

/// Bag: cosine of the two sums. Positional: mean of per-offset cosines.
pub fn context_similarity(a: &ContextRepr, b: &ContextRepr) -> Result<f64> {
    match (a, b) {
        (ContextRepr::Bag(x), ContextRepr::Bag(y)) => cosine(&x.values, &y.values),
        (ContextRepr::Positional(xs), ContextRepr::Positional(ys)) => {
            if xs.len() != ys.len() || xs.is_empty() {
                return Err(Error::Incompatible(format!(
                    "positional widths {} and {}",
                    xs.len(),
                    ys.len()
                )));
            }
            let mut sum = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                sum += cosine(&x.values, &y.values)?;
            }
            Ok(sum / xs.len() as f64)
        }
        _ => Err(Error::Incompatible("bag vs positional".into())),
    }
}

/// Candidate restriction for nearest-neighbour search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NgramFilter {
    /// Exact length in characters.
    pub length: Option<usize>,
    /// Every character alphanumeric.
    pub alphanumeric: bool,
    /// Require one of `delimiters` at one of these 1-based positions.
    pub delimiter_positions: Vec<usize>,
    pub delimiters: Vec<char>,
}

impl NgramFilter {
    pub fn accepts(&self, ngram: &str) -> bool {
        let chars: Vec<char> = ngram.chars().collect();
        if self.length.is_some_and(|n| n != chars.len()) {
            return false;
        }
        if self.alphanumeric && !chars.iter().all(|c| c.is_alphanumeric()) {
            return false;
        }
        if !self.delimiter_positions.is_empty() {
            return self.delimiter_positions.iter().any(|&p| {
                p >= 1 && chars.get(p - 1).is_some_and(|c| self.delimiters.contains(c))
            });
        }
        true
    }
}

pub enum Query<'a> {
    Ngram(&'a str),
    Vector(&'a [f32]),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    pub ngram: String,
    pub cosine: f64,
}

/// Exact top-`k` neighbours by cosine (query excluded), best first; ties
/// broken by ngram.
pub fn knn_ngrams(
    emb: &NgramEmbeddings,
    query: Query<'_>,
    k: usize,
    filter: &NgramFilter,
) -> Result<Vec<Neighbor>> {
    let (qv, exclude) = match query {
        Query::Ngram(g) => {
            let idx = emb.vocab.get(g).ok_or_else(|| Error::UnknownNgram(g.to_owned()))?;
            (emb.vector(idx as usize), Some(idx as usize))
        }
        Query::Vector(v) => {
            if v.len() != emb.dim() {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: emb.dim(),
                });
            }
            (v, None)
        }
    };
    let qn = norm(qv);
    let mut scored: Vec<(f64, usize)> = (0..emb.len())
        .into_par_iter()
        .filter(|&i| Some(i) != exclude && filter.accepts(emb.vocab.unit(i)))
        .map(|i| {
            let v = emb.vector(i);
            (cosine_with_norms(qv, v, qn, norm(v)), i)
        })
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.total_cmp(&a.0)
            .then_with(|| emb.vocab.unit(a.1).cmp(emb.vocab.unit(b.1)))
    };
    if k < scored.len() {
        if k == 0 {
            return Ok(Vec::new());
        }
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    Ok(scored
        .into_iter()
        .map(|(cosine, i)| Neighbor {
            ngram: emb.vocab.unit(i).to_owned(),
            cosine,
        })
        .collect())
}

pub fn neighbors_to_csv(query: &str, neighbors: &[Neighbor]) -> String {
    let mut out = String::from("query,rank,ngram,cosine\n");
    for (r, n) in neighbors.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", csv_field(query), r + 1, csv_field(&n.ngram), n.cosine);
    }
    out
}

/// Symmetric cosine matrix with unit diagonal.
pub fn pairwise_cosine_report(emb: &NgramEmbeddings, ngrams: &[&str]) -> Result<Vec<Vec<f64>>> {
    let vecs: Vec<&[f32]> = ngrams
        .iter()
        .map(|g| emb.get(g).ok_or_else(|| Error::UnknownNgram((*g).to_owned())))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = vecs.iter().map(|v| norm(v)).collect();
    let n = vecs.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let c = cosine_with_norms(vecs[i], vecs[j], norms[i], norms[j]);
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

pub fn matrix_to_csv(ngrams: &[&str], m: &[Vec<f64>]) -> String {
    let mut out = String::from("ngram");
    for g in ngrams {
        let _ = write!(out, ",{}", csv_field(g));
    }
    out.push('\n');
    for (g, row) in ngrams.iter().zip(m) {
        out.push_str(&csv_field(g));
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
