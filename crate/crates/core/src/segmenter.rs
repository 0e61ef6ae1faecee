//! Multiple random segmentation and distinct-ngram counting.
//!
//! A pass walks a pointer through the corpus, drawing each segment length
//! uniformly from `[kmin, kmax]`. The last segment of a pass is whatever is
//! left and may be shorter than `kmin`. `m` passes with independent seeds
//! are concatenated to form the training stream.
//!
//! Passes are produced lazily through [`SegmentSource`], so training never
//! needs all `m * |C|` characters of segments in memory at once.

use std::fmt::Write as _;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Corpus};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Number of independent passes.
    pub m: usize,
    pub kmin: usize,
    pub kmax: usize,
    pub seed: u64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            m: 50,
            kmin: 3,
            kmax: 9,
            seed: 0,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.kmin == 0 || self.kmin > self.kmax {
            return Err(Error::Config(format!(
                "segment lengths need 1 <= kmin <= kmax, got [{}, {}]",
                self.kmin, self.kmax
            )));
        }
        Ok(())
    }

    fn pass_seed(&self, pass: usize) -> u64 {
        seed::derive(self.seed, pass as u64)
    }
}

/// Segment boundaries of a single pass.
pub struct PassRanges<F> {
    pos: usize,
    len: usize,
    draw: F,
}

impl<F: FnMut() -> usize> Iterator for PassRanges<F> {
    type Item = Range<usize>;

    fn next(&mut self) -> Option<Range<usize>> {
        if self.pos >= self.len {
            return None;
        }
        let start = self.pos;
        let end = (start + (self.draw)()).min(self.len);
        self.pos = end;
        Some(start..end)
    }
}

/// Segment a sequence of length `len` with lengths supplied by `draw`.
pub fn ranges_with<F: FnMut() -> usize>(len: usize, draw: F) -> PassRanges<F> {
    PassRanges { pos: 0, len, draw }
}

/// Boundaries of pass `pass` over a sequence of length `len`.
pub fn pass_ranges(
    len: usize,
    config: &SegmentationConfig,
    pass: usize,
) -> PassRanges<impl FnMut() -> usize> {
    let mut rng: ChaCha8Rng = seed::rng(config.pass_seed(pass));
    let (kmin, kmax) = (config.kmin, config.kmax);
    ranges_with(len, move || rng.random_range(kmin..=kmax))
}

/// Anything that can replay a multi-pass segment stream.
pub trait SegmentSource: Sync {
    fn num_passes(&self) -> usize;

    /// Visit the segments of `pass` in order.
    fn for_each_in_pass(&self, pass: usize, f: &mut dyn FnMut(&str));

    fn for_each(&self, f: &mut dyn FnMut(usize, &str)) {
        for pass in 0..self.num_passes() {
            self.for_each_in_pass(pass, &mut |s| f(pass, s));
        }
    }

    fn collect(&self) -> SegmentStream {
        let mut stream = SegmentStream::default();
        for pass in 0..self.num_passes() {
            stream.begin_pass();
            self.for_each_in_pass(pass, &mut |s| stream.push(s));
        }
        stream
    }
}

/// Lazily generated random segmentation of a corpus.
#[derive(Clone, Copy, Debug)]
pub struct RandomSegments<'a> {
    pub corpus: &'a Corpus,
    pub config: SegmentationConfig,
}

impl<'a> RandomSegments<'a> {
    pub fn new(corpus: &'a Corpus, config: SegmentationConfig) -> Result<Self> {
        config.validate()?;
        Ok(RandomSegments { corpus, config })
    }
}

impl SegmentSource for RandomSegments<'_> {
    fn num_passes(&self) -> usize {
        self.config.m
    }

    fn for_each_in_pass(&self, pass: usize, f: &mut dyn FnMut(&str)) {
        let chars = &self.corpus.chars;
        let mut buf = String::with_capacity(4 * self.config.kmax);
        for range in pass_ranges(chars.len(), &self.config, pass) {
            buf.clear();
            buf.extend(&chars[range]);
            f(&buf);
        }
    }
}

/// Materialized segment stream: segments in order, with pass boundaries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SegmentStream {
    pub segments: Vec<String>,
    /// Index into `segments` where each pass starts.
    pass_starts: Vec<usize>,
}

impl SegmentStream {
    pub fn begin_pass(&mut self) {
        self.pass_starts.push(self.segments.len());
    }

    pub fn push(&mut self, segment: &str) {
        if self.pass_starts.is_empty() {
            self.begin_pass();
        }
        self.segments.push(segment.to_owned());
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn pass(&self, pass: usize) -> &[String] {
        let start = self.pass_starts[pass];
        let end = self
            .pass_starts
            .get(pass + 1)
            .copied()
            .unwrap_or(self.segments.len());
        &self.segments[start..end]
    }

    /// Pass that segment `i` belongs to.
    pub fn pass_index(&self, i: usize) -> usize {
        self.pass_starts.partition_point(|&s| s <= i) - 1
    }

    /// One pass per line, segments separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in 0..self.num_passes() {
            let _ = writeln!(out, "{}", self.pass(p).join(" "));
        }
        out
    }
}

impl FromStr for SegmentStream {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut stream = SegmentStream::default();
        for line in text.lines() {
            stream.begin_pass();
            for seg in line.split_whitespace() {
                stream.segments.push(seg.to_owned());
            }
        }
        Ok(stream)
    }
}

impl SegmentSource for SegmentStream {
    fn num_passes(&self) -> usize {
        self.pass_starts.len()
    }

    fn for_each_in_pass(&self, pass: usize, f: &mut dyn FnMut(&str)) {
        for s in self.pass(pass) {
            f(s);
        }
    }
}

pub fn random_segmentation(
    corpus: &Corpus,
    config: &SegmentationConfig,
    pass: usize,
) -> Result<SegmentStream> {
    config.validate()?;
    let mut stream = SegmentStream::default();
    stream.begin_pass();
    RandomSegments {
        corpus,
        config: *config,
    }
    .for_each_in_pass(pass, &mut |s| stream.push(s));
    Ok(stream)
}

pub fn multiple_segmentation(corpus: &Corpus, config: &SegmentationConfig) -> Result<SegmentStream> {
    Ok(RandomSegments::new(corpus, *config)?.collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CountMode {
    /// Ngrams inside marker-delimited tokens only.
    Symbolic,
    /// Every substring of the raw stream, crossing markers.
    Nonsymbolic,
}

impl std::fmt::Display for CountMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CountMode::Symbolic => "SYMBOLIC",
            CountMode::Nonsymbolic => "NONSYMBOLIC",
        })
    }
}

impl FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symbolic" => Ok(CountMode::Symbolic),
            "nonsymbolic" => Ok(CountMode::Nonsymbolic),
            other => Err(Error::Config(format!("unknown count mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NgramCount {
    pub prefix_size: usize,
    pub mode: CountMode,
    pub count: u64,
}

/// Exact number of distinct ngrams with length in `[kmin, kmax]`, evaluated
/// on each prefix in `prefixes` (the whole corpus if empty).
pub fn count_distinct_ngrams(
    corpus: &Corpus,
    kmin: usize,
    kmax: usize,
    mode: CountMode,
    marker: char,
    prefixes: &[usize],
) -> Result<Vec<NgramCount>> {
    if kmin == 0 || kmin > kmax {
        return Err(Error::Config(format!(
            "ngram lengths need 1 <= kmin <= kmax, got [{kmin}, {kmax}]"
        )));
    }
    let full = [corpus.len()];
    let prefixes = if prefixes.is_empty() { &full[..] } else { prefixes };
    let alphabet = corpus.alphabet();
    Ok(prefixes
        .iter()
        .map(|&p| {
            let chars = &corpus.chars[..p.min(corpus.len())];
            NgramCount {
                prefix_size: chars.len(),
                mode,
                count: distinct_in(chars, &alphabet, kmin, kmax, mode, marker),
            }
        })
        .collect())
}

/// CSV with header `prefix_size,mode,count`.
pub fn counts_to_csv(rows: &[NgramCount]) -> String {
    let mut out = String::from("prefix_size,mode,count\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.prefix_size, r.mode, r.count);
    }
    out
}

/// Longest admissible ngram starting at each position (capped at `kmax`).
fn caps(chars: &[char], kmax: usize, mode: CountMode, marker: char) -> Vec<u8> {
    let n = chars.len();
    let mut caps = vec![0u8; n];
    let mut run = 0usize;
    for i in (0..n).rev() {
        let cap = match mode {
            CountMode::Nonsymbolic => n - i,
            CountMode::Symbolic => {
                run = if chars[i] == marker { 0 } else { run + 1 };
                run
            }
        };
        caps[i] = cap.min(kmax) as u8;
    }
    caps
}

// Sort the (truncated) suffixes; in sorted order a prefix of s_i occurs in an
// earlier string iff it is a prefix of s_{i-1}, so each position contributes
// the lengths in [kmin, cap_i] that exceed its lcp with the predecessor.
fn distinct_in(
    chars: &[char],
    alphabet: &Alphabet,
    kmin: usize,
    kmax: usize,
    mode: CountMode,
    marker: char,
) -> u64 {
    assert!(kmax < 256, "kmax must fit a byte");
    let caps = caps(chars, kmax, mode, marker);
    let bits = usize::BITS as usize - alphabet.len().leading_zeros() as usize;
    let contribution = |cap: usize, lcp: usize| cap.saturating_sub(lcp.max(kmin - 1)) as u64;

    if bits * kmax <= 128 {
        let ranks: Vec<u128> = chars
            .iter()
            .map(|&c| alphabet.rank(c).expect("alphabet covers corpus") as u128 + 1)
            .collect();
        let mut keys: Vec<(u128, u8)> = (0..chars.len())
            .filter(|&i| caps[i] as usize >= kmin)
            .map(|i| {
                let cap = caps[i] as usize;
                let mut key = 0u128;
                for (j, r) in ranks[i..i + cap].iter().enumerate() {
                    key |= r << (bits * (kmax - 1 - j));
                }
                (key, caps[i])
            })
            .collect();
        keys.sort_unstable();
        let unused = 128 - bits * kmax;
        let mut total = 0u64;
        for (idx, &(key, cap)) in keys.iter().enumerate() {
            let lcp = if idx == 0 {
                0
            } else {
                let x = key ^ keys[idx - 1].0;
                if x == 0 {
                    kmax
                } else {
                    (x.leading_zeros() as usize - unused) / bits
                }
            };
            total += contribution(cap as usize, lcp);
        }
        total
    } else {
        let mut pos: Vec<usize> = (0..chars.len())
            .filter(|&i| caps[i] as usize >= kmin)
            .collect();
        let window = |i: usize| &chars[i..i + caps[i] as usize];
        pos.sort_unstable_by(|&a, &b| window(a).cmp(window(b)));
        let mut total = 0u64;
        for (idx, &i) in pos.iter().enumerate() {
            let lcp = if idx == 0 {
                0
            } else {
                window(i)
                    .iter()
                    .zip(window(pos[idx - 1]))
                    .take_while(|(a, b)| a == b)
                    .count()
            };
            total += contribution(caps[i] as usize, lcp);
        }
        total
    }
}
