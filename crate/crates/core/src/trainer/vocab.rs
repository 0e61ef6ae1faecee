use std::cmp::Reverse;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::segmenter::SegmentSource;

/// Unit table with dense indices.
///
/// Indices are assigned by descending frequency, ties broken
/// lexicographically, so renaming units with an alphabet permutation keeps
/// every frequency class in place.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    units: Vec<String>,
    freqs: Vec<u64>,
    index: FxHashMap<String, u32>,
    pub min_count: u64,
}

impl Vocab {
    /// Keep units with frequency `>= min_count`.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>, min_count: u64) -> Vocab {
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, f)| *f >= min_count)
            .collect();
        entries.sort_unstable_by(|a, b| (Reverse(a.1), &a.0).cmp(&(Reverse(b.1), &b.0)));
        let (units, freqs): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let index = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        Vocab {
            units,
            freqs,
            index,
            min_count,
        }
    }

    /// Units in the given order, without frequency information.
    pub fn from_units(units: Vec<String>) -> Result<Vocab> {
        let mut index = FxHashMap::default();
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate unit {u:?} at index {i}")));
            }
        }
        Ok(Vocab {
            freqs: vec![0; units.len()],
            units,
            index,
            min_count: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, unit: &str) -> Option<u32> {
        self.index.get(unit).copied()
    }

    pub fn unit(&self, idx: usize) -> &str {
        &self.units[idx]
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn freq(&self, idx: usize) -> u64 {
        self.freqs[idx]
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    /// Sum of retained unit frequencies.
    pub fn total(&self) -> u64 {
        self.freqs.iter().sum()
    }
}

pub fn build_vocab(source: &dyn SegmentSource, min_count: u64) -> Vocab {
    let mut counts: FxHashMap<String, u64> = FxHashMap::default();
    source.for_each(&mut |_, seg| match counts.get_mut(seg) {
        Some(c) => *c += 1,
        None => {
            counts.insert(seg.to_owned(), 1);
        }
    });
    Vocab::from_counts(counts, min_count)
}
