//! Corpus ingestion, alphabets and alphabet permutations.
//!
//! A [`Corpus`] is a whitespace-normalized character stream: every run of
//! whitespace is collapsed to a single marker character (by default `@`), so
//! the stream itself never contains whitespace and downstream tools can use
//! whitespace as an unambiguous segment delimiter.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// Default stand-in for whitespace.
pub const DEFAULT_MARKER: char = '@';

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub chars: Vec<char>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, chars: Vec<char>) -> Self {
        Corpus {
            name: name.into(),
            chars,
        }
    }

    /// Normalize raw text: each whitespace run becomes one `marker`.
    pub fn from_text(name: impl Into<String>, text: &str, marker: char) -> Self {
        Corpus::new(name, normalize(text, marker))
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::from_chars(self.chars.iter().copied())
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }

    /// The first `n` characters as a new corpus.
    pub fn prefix(&self, n: usize) -> Corpus {
        Corpus::new(
            self.name.clone(),
            self.chars[..n.min(self.chars.len())].to_vec(),
        )
    }
}

/// Collapse every whitespace run in `text` to a single `marker`.
pub fn normalize(text: &str, marker: char) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut in_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push(marker);
                in_space = true;
            }
        } else {
            out.push(ch);
            in_space = false;
        }
    }
    out
}

pub fn normalize_string(text: &str, marker: char) -> String {
    normalize(text, marker).into_iter().collect()
}

/// Read a UTF-8 file and normalize its whitespace.
pub fn load_corpus(path: impl AsRef<Path>, marker: char) -> Result<Corpus> {
    let path = path.as_ref();
    if marker.is_whitespace() {
        return Err(Error::Config(format!(
            "whitespace marker {marker:?} is itself whitespace"
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        offset: e.valid_up_to(),
    })?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus::from_text(name, text, marker))
}

/// Ordered set of characters (codepoint order).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut symbols: Vec<char> = chars.into_iter().collect();
        symbols.sort_unstable();
        symbols.dedup();
        Alphabet { symbols }
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.symbols.binary_search(&ch).is_ok()
    }

    pub fn rank(&self, ch: char) -> Option<usize> {
        self.symbols.binary_search(&ch).ok()
    }
}

/// A bijection on an alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    mapping: BTreeMap<char, char>,
    pub seed: u64,
}

impl Permutation {
    pub fn identity(alphabet: &Alphabet) -> Self {
        Permutation {
            mapping: alphabet.symbols().iter().map(|&c| (c, c)).collect(),
            seed: 0,
        }
    }

    /// Build from explicit pairs; fails unless the pairs form a bijection.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (char, char)>) -> Result<Self> {
        let mut mapping = BTreeMap::new();
        for (from, to) in pairs {
            if mapping.insert(from, to).is_some() {
                return Err(Error::Config(format!("{from:?} mapped twice")));
            }
        }
        let mut images: Vec<char> = mapping.values().copied().collect();
        images.sort_unstable();
        let domain: Vec<char> = mapping.keys().copied().collect();
        if images != domain {
            return Err(Error::Config(
                "mapping is not a bijection on its domain".into(),
            ));
        }
        Ok(Permutation { mapping, seed: 0 })
    }

    pub fn get(&self, ch: char) -> Option<char> {
        self.mapping.get(&ch).copied()
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            mapping: self.mapping.iter().map(|(&a, &b)| (b, a)).collect(),
            seed: self.seed,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.mapping.iter().map(|(&a, &b)| (a, b))
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Map a string character-wise. Characters outside the domain are kept.
    pub fn rename(&self, s: &str) -> String {
        s.chars().map(|c| self.get(c).unwrap_or(c)).collect()
    }

    /// "from<TAB>to" lines, one per character.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.pairs() {
            let _ = writeln!(out, "{a}\t{b}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(i + 1, "expected two tab-separated fields"));
            };
            let single = |f: &str| {
                let mut it = f.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::parse(i + 1, format!("{f:?} is not one character"))),
                }
            };
            pairs.push((single(a)?, single(b)?));
        }
        Permutation::from_pairs(pairs)
    }
}

/// Uniformly random bijection on `alphabet` (Fisher-Yates over codepoint order).
pub fn generate_permutation(alphabet: &Alphabet, seed: u64) -> Permutation {
    let mut images = alphabet.symbols().to_vec();
    images.shuffle(&mut seed::rng(seed));
    Permutation {
        mapping: alphabet.symbols().iter().copied().zip(images).collect(),
        seed,
    }
}

pub fn apply_permutation(corpus: &Corpus, pi: &Permutation) -> Result<Corpus> {
    map_chars(corpus, |_, c| pi.get(c))
}

/// How the marker character is treated when permuting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhitespaceMode {
    /// The marker stays the marker; everything else is permuted.
    Original,
    /// The marker is permuted like any character.
    Substitute,
}

impl std::str::FromStr for WhitespaceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(WhitespaceMode::Original),
            "substitute" => Ok(WhitespaceMode::Substitute),
            other => Err(Error::Config(format!("unknown whitespace mode {other:?}"))),
        }
    }
}

pub fn whitespace_mode(
    corpus: &Corpus,
    pi: &Permutation,
    mode: WhitespaceMode,
    marker: char,
) -> Result<Corpus> {
    match mode {
        WhitespaceMode::Substitute => apply_permutation(corpus, pi),
        WhitespaceMode::Original => {
            map_chars(corpus, |_, c| if c == marker { Some(c) } else { pi.get(c) })
        }
    }
}

fn map_chars(corpus: &Corpus, f: impl Fn(usize, char) -> Option<char>) -> Result<Corpus> {
    let chars = corpus
        .chars
        .iter()
        .enumerate()
        .map(|(position, &ch)| f(position, ch).ok_or(Error::OutOfDomain { ch, position }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(corpus.name.clone(), chars))
}
