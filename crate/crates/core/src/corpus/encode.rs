//! Subword encoders: character trigrams, character unigrams, and BPE.

use std::collections::BTreeMap;

use super::normalize::{PAD, TERMINAL};
use super::CorpusError;

/// Append the terminal marker and cut into non-overlapping 3-character
/// chunks, right-padding the last one with `#`.
pub fn trigram_encode(token: &str) -> Result<Vec<String>, CorpusError> {
    if token.is_empty() {
        return Err(CorpusError::EmptyToken);
    }
    if token.contains([TERMINAL, PAD]) {
        return Err(CorpusError::ReservedChar(token.to_string()));
    }
    let mut chars: Vec<char> = token.chars().collect();
    chars.push(TERMINAL);
    while !chars.len().is_multiple_of(3) {
        chars.push(PAD);
    }
    Ok(chars.chunks(3).map(|c| c.iter().collect()).collect())
}

pub fn unigram_encode(token: &str) -> Vec<String> {
    token
        .chars()
        .chain(std::iter::once(TERMINAL))
        .map(String::from)
        .collect()
}

pub type Merge = (String, String);

fn symbols(word: &str) -> Vec<String> {
    word.chars().map(String::from).collect()
}

fn apply_merge(pieces: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < pieces.len() {
        if pieces[i] == left && pieces[i + 1] == right {
            let merged = format!("{}{}", pieces[i], pieces[i + 1]);
            pieces[i] = merged;
            pieces.remove(i + 1);
        }
        i += 1;
    }
}

/// Greedy BPE merge learning over end-marked words (`"low*"`).
///
/// Each round merges the most frequent adjacent symbol pair; ties go to the
/// lexicographically smallest `(left, right)`. Stops early once no pair is left.
pub fn bpe_learn(words: &BTreeMap<String, u64>, n_merges: usize) -> Vec<Merge> {
    let mut corpus: Vec<(Vec<String>, u64)> = words
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (symbols(w), c))
        .collect();
    let mut merges = Vec::new();
    while merges.len() < n_merges {
        let mut counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for (pieces, c) in &corpus {
            for pair in pieces.windows(2) {
                *counts.entry((&pair[0], &pair[1])).or_default() += c;
            }
        }
        // BTreeMap iterates pairs in lexicographic order, so the first maximum wins ties.
        let Some(((l, r), _)) = counts
            .iter()
            .fold(None::<(&(&str, &str), u64)>, |best, (k, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((k, v)),
            })
        else {
            break;
        };
        let merge = (l.to_string(), r.to_string());
        for (pieces, _) in corpus.iter_mut() {
            apply_merge(pieces, &merge.0, &merge.1);
        }
        merges.push(merge);
    }
    merges
}

/// Characters of `token` plus the terminal, with `merges` applied in order.
pub fn bpe_encode(token: &str, merges: &[Merge]) -> Vec<String> {
    let mut pieces = unigram_encode(token);
    for (l, r) in merges {
        if pieces.len() < 2 {
            break;
        }
        apply_merge(&mut pieces, l, r);
    }
    pieces
}

/// Which subword scheme turns a token into pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubwordEncoder {
    Unigram,
    Trigram,
    Bpe(Vec<Merge>),
}

impl SubwordEncoder {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Unigram => "unigram",
            Self::Trigram => "trigram",
            Self::Bpe(_) => "bpe",
        }
    }

    pub fn encode(&self, token: &str) -> Result<Vec<String>, CorpusError> {
        match self {
            Self::Unigram => Ok(unigram_encode(token)),
            Self::Trigram => trigram_encode(token),
            Self::Bpe(m) => Ok(bpe_encode(token, m)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn trigram_examples() {
        assert_eq!(trigram_encode("girl").unwrap(), v(&["gir", "l*#"]));
        assert_eq!(trigram_encode("a").unwrap(), v(&["a*#"]));
        assert_eq!(trigram_encode("hello").unwrap(), v(&["hel", "lo*"]));
        assert_eq!(trigram_encode("ab").unwrap(), v(&["ab*"]));
        assert!(matches!(trigram_encode("a*b"), Err(CorpusError::ReservedChar(_))));
        assert!(matches!(trigram_encode("#x"), Err(CorpusError::ReservedChar(_))));
        assert!(matches!(trigram_encode(""), Err(CorpusError::EmptyToken)));
    }

    #[test]
    fn trigram_counts_characters_not_bytes() {
        assert_eq!(trigram_encode("नमस्ते").unwrap().len(), 3);
        assert_eq!(trigram_encode("é").unwrap(), v(&["é*#"]));
    }

    #[test]
    fn unigram_examples() {
        assert_eq!(unigram_encode("ab"), v(&["a", "b", "*"]));
        assert_eq!(unigram_encode("x"), v(&["x", "*"]));
        assert_eq!(unigram_encode("gir"), v(&["g", "i", "r", "*"]));
    }

    #[test]
    fn bpe_learn_examples() {
        let low = BTreeMap::from([("low*".to_string(), 5)]);
        // all three pairs occur 5 times; ("l","o") is lexicographically smallest
        assert_eq!(bpe_learn(&low, 1), vec![("l".into(), "o".into())]);
        assert!(bpe_learn(&low, 0).is_empty());

        let aaaa = BTreeMap::from([("aaaa*".to_string(), 1)]);
        assert_eq!(bpe_learn(&aaaa, 1), vec![("a".into(), "a".into())]);

        assert!(bpe_learn(&BTreeMap::new(), 10).is_empty());
    }

    #[test]
    fn bpe_stops_when_words_are_single_symbols() {
        let w = BTreeMap::from([("ab*".to_string(), 2)]);
        let merges = bpe_learn(&w, 50);
        assert_eq!(merges.len(), 2);
        assert_eq!(bpe_encode("ab", &merges), v(&["ab*"]));
    }

    #[test]
    fn bpe_encode_examples() {
        assert_eq!(bpe_encode("ab", &[]), v(&["a", "b", "*"]));
        assert_eq!(bpe_encode("ab", &[("a".into(), "b".into())]), v(&["ab", "*"]));
    }

    #[test]
    fn bpe_merges_left_to_right_without_overlap() {
        assert_eq!(bpe_encode("aaa", &[("a".into(), "a".into())]), v(&["aa", "a", "*"]));
    }
}
