use std::collections::{BTreeMap, HashMap};

use super::CorpusError;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const USR_ID: usize = 2;
pub const URL_ID: usize = 3;
pub const BOS_ID: usize = 4;

/// Surface strings of the reserved entries, in id order.
pub const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<usr>", "<url>", "<bos>"];

/// Dense subword <-> id table. Ids `0..5` are the reserved entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Union of all streams; pieces seen fewer than `min_freq` times are left
    /// out and will encode as UNK. Order: frequency descending, then lexicographic.
    pub fn build<'a, S, I>(streams: S, min_freq: u64) -> Self
    where
        S: IntoIterator<Item = I>,
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for stream in streams {
            for piece in stream {
                *counts.entry(piece).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|(s, c)| *c >= min_freq.max(1) && !RESERVED.contains(s))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let entries = RESERVED
            .iter()
            .map(|s| (s.to_string(), 0))
            .chain(kept.into_iter().map(|(s, c)| (s.to_string(), c)))
            .collect();
        Self::from_entries(entries).expect("built entries are unique")
    }

    /// Rebuild from `(subword, freq)` pairs in id order; the reserved block must lead.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self, CorpusError> {
        for (i, r) in RESERVED.iter().enumerate() {
            if entries.get(i).map(|e| e.0.as_str()) != Some(*r) {
                return Err(CorpusError::Vocab(format!("reserved id {i} must be `{r}`")));
            }
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (s, _)) in entries.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(CorpusError::Vocab(format!("duplicate subword `{s}`")));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    /// Id of `piece`, UNK when absent.
    pub fn id_or_unk(&self, piece: &str) -> usize {
        self.id(piece).unwrap_or(UNK_ID)
    }

    pub fn piece(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(|e| e.0.as_str())
    }

    pub fn freq(&self, id: usize) -> Option<u64> {
        self.entries.get(id).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }
}
