//! Learned string transductions over ngrams.
//!
//! Three rule templates rewrite one ngram into another:
//!
//! * `SUBSTITUTE a1 a2`: replace every `a1` by `a2`;
//! * `PREDELETE a1 a2`: delete each `a1` whose predecessor is `a2`;
//! * `POSTDELETE a1 a2`: delete each `a1` whose successor is `a2`.
//!
//! For deletions `a2` may be [`Anchor::Boundary`], the start (pre) or end
//! (post) of the ngram. A rule is scored by the mean cosine between the
//! embeddings of all vocabulary pairs `(g, rule(g))`, and the best `N_o`
//! rules define the transduction τ. Characters connected by substitution
//! rules form equivalence classes that are collapsed onto one canonical
//! member.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::represent::{cosine_with_norms, norm};
use crate::segmenter::{SegmentSource, SegmentStream};
use crate::trainer::NgramEmbeddings;

pub const DEFAULT_MIN_SUPPORT: usize = 10;
pub const DEFAULT_MAX_ITERATIONS: usize = 8;
pub const BOUNDARY_TOKEN: &str = "#BOUNDARY#";

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleKind {
    Substitute,
    Predelete,
    Postdelete,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Substitute => "SUBSTITUTE",
            RuleKind::Predelete => "PREDELETE",
            RuleKind::Postdelete => "POSTDELETE",
        })
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SUBSTITUTE" => Ok(RuleKind::Substitute),
            "PREDELETE" => Ok(RuleKind::Predelete),
            "POSTDELETE" => Ok(RuleKind::Postdelete),
            other => Err(Error::Config(format!("unknown rule kind {other:?}"))),
        }
    }
}

/// Second rule argument: a character or the ngram edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anchor {
    Boundary,
    Char(char),
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Boundary => f.write_str(BOUNDARY_TOKEN),
            Anchor::Char(c) => write!(f, "{c}"),
        }
    }
}

impl Serialize for Anchor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Identifies a rule independently of its score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RuleKey {
    pub kind: RuleKind,
    pub a1: char,
    pub a2: Anchor,
}

impl RuleKey {
    pub fn substitute(a1: char, a2: char) -> Self {
        RuleKey {
            kind: RuleKind::Substitute,
            a1,
            a2: Anchor::Char(a2),
        }
    }

    pub fn predelete(a1: char, a2: Anchor) -> Self {
        RuleKey {
            kind: RuleKind::Predelete,
            a1,
            a2,
        }
    }

    pub fn postdelete(a1: char, a2: Anchor) -> Self {
        RuleKey {
            kind: RuleKind::Postdelete,
            a1,
            a2,
        }
    }

    pub fn is_valid(&self) -> bool {
        match (self.kind, self.a2) {
            (RuleKind::Substitute, Anchor::Char(c)) => c != self.a1,
            (RuleKind::Substitute, Anchor::Boundary) => false,
            _ => true,
        }
    }

    /// Rewrite `g` into `out`; false if the rule does not fire.
    pub fn rewrite_into(&self, g: &[char], out: &mut Vec<char>) -> bool {
        out.clear();
        let mut fired = false;
        for (j, &c) in g.iter().enumerate() {
            if c != self.a1 {
                out.push(c);
                continue;
            }
            match self.kind {
                RuleKind::Substitute => {
                    let Anchor::Char(to) = self.a2 else {
                        return false;
                    };
                    out.push(to);
                    fired = true;
                }
                RuleKind::Predelete | RuleKind::Postdelete => {
                    let neighbour = match self.kind {
                        RuleKind::Predelete => j.checked_sub(1).map(|p| g[p]),
                        _ => g.get(j + 1).copied(),
                    };
                    let hit = match (self.a2, neighbour) {
                        (Anchor::Boundary, None) => true,
                        (Anchor::Char(a), Some(b)) => a == b,
                        _ => false,
                    };
                    if hit {
                        fired = true;
                    } else {
                        out.push(c);
                    }
                }
            }
        }
        fired
    }

    pub fn apply(&self, g: &str) -> Option<String> {
        let chars: Vec<char> = g.chars().collect();
        let mut out = Vec::with_capacity(chars.len());
        self.rewrite_into(&chars, &mut out)
            .then(|| out.into_iter().collect())
    }
}

impl fmt::Display for RuleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.kind, self.a1, self.a2)
    }
}

/// A scored rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rule {
    #[serde(flatten)]
    pub key: RuleKey,
    /// Mean cosine over matched pairs.
    pub score: f64,
    /// Number of matched pairs.
    pub support: usize,
}

/// Apply a single rule template; `None` when it does not fire.
pub fn match_rule(rule: &RuleKey, g: &str) -> Option<String> {
    rule.apply(g)
}

/// Score every template instantiation with at least `min_support` matched
/// vocabulary pairs, best first.
pub fn score_operations(emb: &NgramEmbeddings, min_support: usize) -> Vec<Rule> {
    let units: Vec<Vec<char>> = emb.vocab.units().iter().map(|u| u.chars().collect()).collect();
    let mut alphabet: Vec<char> = units.iter().flatten().copied().collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    let norms: Vec<f64> = (0..emb.len()).map(|i| norm(emb.vector(i))).collect();

    let matches_of = |i: usize| -> Vec<(RuleKey, f64)> {
        let g = &units[i];
        let mut keys: Vec<RuleKey> = Vec::new();
        let mut distinct: Vec<char> = g.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for &a1 in &distinct {
            keys.extend(
                alphabet
                    .iter()
                    .filter(|&&a2| a2 != a1)
                    .map(|&a2| RuleKey::substitute(a1, a2)),
            );
        }
        let anchor = |j: Option<usize>| j.and_then(|j| g.get(j)).map_or(Anchor::Boundary, |&c| Anchor::Char(c));
        let mut deletions: Vec<RuleKey> = Vec::with_capacity(2 * g.len());
        for (j, &c) in g.iter().enumerate() {
            deletions.push(RuleKey::predelete(c, anchor(j.checked_sub(1))));
            deletions.push(RuleKey::postdelete(c, anchor(Some(j + 1))));
        }
        deletions.sort_unstable();
        deletions.dedup();
        keys.extend(deletions);

        let mut image: Vec<char> = Vec::with_capacity(g.len());
        let mut probe = String::with_capacity(4 * g.len());
        let mut found = Vec::new();
        for key in keys {
            if !key.rewrite_into(g, &mut image) {
                continue;
            }
            probe.clear();
            probe.extend(&image);
            if let Some(j) = emb.vocab.get(&probe) {
                let j = j as usize;
                let cos = cosine_with_norms(emb.vector(i), emb.vector(j), norms[i], norms[j]);
                found.push((key, cos));
            }
        }
        found
    };

    // Per-unit matches are computed in parallel, but accumulated strictly in
    // vocabulary order so scores do not depend on the worker count.
    let mut acc: FxHashMap<RuleKey, (f64, usize)> = FxHashMap::default();
    for start in (0..emb.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(emb.len());
        let chunk: Vec<Vec<(RuleKey, f64)>> = (start..end).into_par_iter().map(matches_of).collect();
        for (key, cos) in chunk.into_iter().flatten() {
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += cos;
            e.1 += 1;
        }
    }

    let mut rules: Vec<Rule> = acc
        .into_iter()
        .filter(|(_, (_, n))| *n >= min_support.max(1))
        .map(|(key, (sum, support))| Rule {
            key,
            score: sum / support as f64,
            support,
        })
        .collect();
    sort_rules(&mut rules);
    rules
}

fn sort_rules(rules: &mut [Rule]) {
    rules.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.key.cmp(&b.key)));
}

/// The learned transduction τ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleSet {
    /// Descending score.
    pub rules: Vec<Rule>,
    /// Non-canonical character → canonical member of its class.
    pub canonical: BTreeMap<char, char>,
    pub n_o: usize,
    pub max_iterations: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            rules: Vec::new(),
            canonical: BTreeMap::new(),
            n_o: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Character frequencies weighted by unit frequency (1 per unit when the
/// vocabulary carries no counts).
pub fn char_frequencies(emb: &NgramEmbeddings) -> FxHashMap<char, u64> {
    let mut freq = FxHashMap::default();
    for (i, unit) in emb.vocab.units().iter().enumerate() {
        let w = emb.vocab.freq(i).max(1);
        for c in unit.chars() {
            *freq.entry(c).or_insert(0) += w;
        }
    }
    freq
}

pub fn learn_tau(emb: &NgramEmbeddings, n_o: usize, min_support: usize) -> RuleSet {
    learn_tau_with_frequencies(emb, n_o, min_support, &char_frequencies(emb))
}

/// As [`learn_tau`], choosing canonical class members by `char_freq`
/// (highest frequency, then lowest codepoint).
pub fn learn_tau_with_frequencies(
    emb: &NgramEmbeddings,
    n_o: usize,
    min_support: usize,
    char_freq: &FxHashMap<char, u64>,
) -> RuleSet {
    let mut top = score_operations(emb, min_support);
    top.truncate(n_o);
    canonicalize(top, n_o, char_freq)
}

/// Collapse substitution rules onto canonical class members.
pub fn canonicalize(top: Vec<Rule>, n_o: usize, char_freq: &FxHashMap<char, u64>) -> RuleSet {
    let mut parent: BTreeMap<char, char> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<char, char>, c: char) -> char {
        let p = *parent.entry(c).or_insert(c);
        if p == c {
            return c;
        }
        let root = find(parent, p);
        parent.insert(c, root);
        root
    }
    for r in &top {
        if let (RuleKind::Substitute, Anchor::Char(a2)) = (r.key.kind, r.key.a2) {
            let (x, y) = (find(&mut parent, r.key.a1), find(&mut parent, a2));
            if x != y {
                parent.insert(x, y);
            }
        }
    }
    let members: Vec<char> = parent.keys().copied().collect();
    let mut best: BTreeMap<char, char> = BTreeMap::new();
    for &c in &members {
        let root = find(&mut parent, c);
        let freq = |c: char| char_freq.get(&c).copied().unwrap_or(0);
        let e = best.entry(root).or_insert(c);
        if (freq(c), std::cmp::Reverse(c)) > (freq(*e), std::cmp::Reverse(*e)) {
            *e = c;
        }
    }
    let canonical: BTreeMap<char, char> = members
        .iter()
        .map(|&c| (c, best[&find(&mut parent, c)]))
        .filter(|(c, canon)| c != canon)
        .collect();

    // Each non-canonical member gets one rule, ranked like the best original
    // rule that mentions it.
    let mut rules = Vec::with_capacity(top.len());
    let mut emitted: Vec<char> = Vec::new();
    for r in &top {
        match (r.key.kind, r.key.a2) {
            (RuleKind::Substitute, Anchor::Char(a2)) => {
                for c in [r.key.a1, a2] {
                    if let Some(&canon) = canonical.get(&c) {
                        if !emitted.contains(&c) {
                            emitted.push(c);
                            rules.push(Rule {
                                key: RuleKey::substitute(c, canon),
                                ..*r
                            });
                        }
                    }
                }
            }
            _ => rules.push(*r),
        }
    }
    sort_rules(&mut rules);
    RuleSet {
        rules,
        canonical,
        n_o,
        max_iterations: DEFAULT_MAX_ITERATIONS,
    }
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn canonical_char(&self, c: char) -> char {
        self.canonical.get(&c).copied().unwrap_or(c)
    }

    /// Apply all rules in order, repeating until nothing changes or
    /// `max_iterations` passes have run.
    pub fn apply_chars(&self, g: &[char]) -> Vec<char> {
        let mut cur = g.to_vec();
        let mut next = Vec::with_capacity(g.len());
        for _ in 0..self.max_iterations {
            let mut changed = false;
            for rule in &self.rules {
                if rule.key.rewrite_into(&cur, &mut next) {
                    std::mem::swap(&mut cur, &mut next);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        cur
    }

    pub fn apply(&self, g: &str) -> String {
        if self.rules.is_empty() {
            return g.to_owned();
        }
        let chars: Vec<char> = g.chars().collect();
        self.apply_chars(&chars).into_iter().collect()
    }

    /// Tab-separated rules file; see the crate README for the layout.
    pub fn to_text(&self) -> String {
        let mut out = format!("# n_o={} max_iterations={}\n", self.n_o, self.max_iterations);
        for r in &self.rules {
            let _ = writeln!(out, "{}\t{}\t{}", r.key, r.score, r.support);
        }
        for (from, to) in &self.canonical {
            let _ = writeln!(out, "CANON\t{from}\t{to}");
        }
        out
    }
}

impl FromStr for RuleSet {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut set = RuleSet::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix("# ") {
                for kv in comment.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("n_o", v)) => set.n_o = v.parse().map_err(|_| Error::parse(lineno, "bad n_o"))?,
                        Some(("max_iterations", v)) => {
                            set.max_iterations = v.parse().map_err(|_| Error::parse(lineno, "bad max_iterations"))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let one_char = |s: &str| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::parse(lineno, format!("{s:?} is not one character"))),
                }
            };
            match fields.as_slice() {
                ["CANON", from, to] => {
                    set.canonical.insert(one_char(from)?, one_char(to)?);
                }
                [kind, a1, a2, score, support] => {
                    let kind: RuleKind = kind.parse().map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
                    let a2 = if *a2 == BOUNDARY_TOKEN {
                        Anchor::Boundary
                    } else {
                        Anchor::Char(one_char(a2)?)
                    };
                    let key = RuleKey {
                        kind,
                        a1: one_char(a1)?,
                        a2,
                    };
                    if !key.is_valid() {
                        return Err(Error::parse(lineno, "invalid rule"));
                    }
                    set.rules.push(Rule {
                        key,
                        score: score.parse().map_err(|_| Error::parse(lineno, format!("bad score {score:?}")))?,
                        support: support
                            .parse()
                            .map_err(|_| Error::parse(lineno, format!("bad support {support:?}")))?,
                    });
                }
                _ => return Err(Error::parse(lineno, "expected 5 tab-separated fields or a CANON line")),
            }
        }
        Ok(set)
    }
}

pub fn apply_tau(rules: &RuleSet, g: &str) -> String {
    rules.apply(g)
}

/// Segment source whose segments are rewritten by τ on the fly.
pub struct TransducedSegments<'a, S: ?Sized> {
    pub inner: &'a S,
    pub rules: &'a RuleSet,
}

const CACHE_LIMIT: usize = 1 << 20;

impl<S: SegmentSource + ?Sized> SegmentSource for TransducedSegments<'_, S> {
    fn num_passes(&self) -> usize {
        self.inner.num_passes()
    }

    fn for_each_in_pass(&self, pass: usize, f: &mut dyn FnMut(&str)) {
        let mut cache: FxHashMap<String, String> = FxHashMap::default();
        self.inner.for_each_in_pass(pass, &mut |seg| {
            if let Some(out) = cache.get(seg) {
                f(out);
                return;
            }
            let out = self.rules.apply(seg);
            f(&out);
            if cache.len() >= CACHE_LIMIT {
                cache.clear();
            }
            cache.insert(seg.to_owned(), out);
        });
    }
}

pub fn apply_tau_stream(rules: &RuleSet, stream: &dyn SegmentSource) -> SegmentStream {
    TransducedSegments { inner: stream, rules }.collect()
}

/// Squared-distance closeness of two embeddings (`|u - v|_2 < eps`).
pub fn embeddings_equivalent(u: &[f32], v: &[f32], eps: f64) -> bool {
    let d2: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
        .sum();
    d2.sqrt() < eps
}
