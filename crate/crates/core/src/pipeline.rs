//! Raw documents to training-ready corpora: normalize, split, learn the
//! subword encoder and shared vocabulary, project tags, encode, rebalance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::corpus::{
    bpe_learn, encode_sample, rebalance, split, CorpusError, EncodedSample, RawDocument,
    SubwordEncoder, TagSet, TagSets, Vocab, URL_MASK, USER_MASK,
};
use crate::curriculum::{Corpora, TaskData};
use crate::model::{ModelDims, N_SENTIMENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderKind {
    Unigram,
    #[default]
    Trigram,
    Bpe,
}

impl FromStr for EncoderKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unigram" => Ok(Self::Unigram),
            "trigram" => Ok(Self::Trigram),
            "bpe" => Ok(Self::Bpe),
            other => Err(CorpusError::Vocab(format!("unknown encoder `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unigram => "unigram",
            Self::Trigram => "trigram",
            Self::Bpe => "bpe",
        })
    }
}

/// Train/dev/test documents of one corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSource {
    pub train: Vec<RawDocument>,
    pub dev: Vec<RawDocument>,
    pub test: Vec<RawDocument>,
}

impl TaskSource {
    /// Seeded split; sentiment corpora are stratified by class.
    pub fn split(
        docs: &[RawDocument],
        ratios: (f64, f64, f64),
        seed: u64,
        by_sentiment: bool,
    ) -> Result<Self, CorpusError> {
        let class = |d: &RawDocument| d.sentiment.map(|s| s.id());
        let strat: Option<&dyn Fn(&RawDocument) -> Option<usize>> =
            if by_sentiment { Some(&class) } else { None };
        let s = split(docs, ratios, seed, strat)?;
        Ok(Self {
            train: s.train,
            dev: s.dev,
            test: s.test,
        })
    }

    fn all(&self) -> impl Iterator<Item = &RawDocument> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sources {
    pub lang: Option<TaskSource>,
    pub pos: Option<TaskSource>,
    pub sentiment: Option<TaskSource>,
}

impl Sources {
    fn named(&self) -> impl Iterator<Item = (&'static str, &TaskSource)> {
        [("lang", &self.lang), ("pos", &self.pos), ("sentiment", &self.sentiment)]
            .into_iter()
            .filter_map(|(n, s)| s.as_ref().map(|s| (n, s)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub encoder: EncoderKind,
    pub bpe_merges: usize,
    pub min_freq: u64,
    /// Rebalance the sentiment training split.
    pub rebalance: bool,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Trigram,
            bpe_merges: 1000,
            min_freq: 2,
            rebalance: true,
            seed: 0,
        }
    }
}

/// Everything training needs, built from [`Sources`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub vocab: Vocab,
    pub encoder: SubwordEncoder,
    pub tagsets: TagSets,
    /// Keys `lang`, `pos`, `sentiment` and `lm` (sentiment texts) as available.
    pub corpora: Corpora,
    pub test: BTreeMap<String, Vec<EncodedSample>>,
}

impl Prepared {
    pub fn dims(&self) -> ModelDims {
        let len = |t: &Option<TagSet>| t.as_ref().map_or(1, TagSet::len);
        ModelDims::standard(self.vocab.len(), len(&self.tagsets.pos), len(&self.tagsets.lang))
    }
}

fn is_mask(tok: &str) -> bool {
    tok == USER_MASK || tok == URL_MASK
}

fn normalize_all(docs: &[RawDocument]) -> Result<Vec<RawDocument>, CorpusError> {
    let mut out = Vec::with_capacity(docs.len());
    for d in docs {
        let n = d.normalized()?;
        if !n.text.is_empty() {
            out.push(n);
        }
    }
    Ok(out)
}

/// Word counts with the terminal marker, as BPE learning expects.
fn word_counts<'a>(docs: impl IntoIterator<Item = &'a RawDocument>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for d in docs {
        for tok in d.tokens().into_iter().filter(|t| !is_mask(t)) {
            *counts.entry(format!("{tok}{}", crate::corpus::TERMINAL)).or_insert(0) += 1;
        }
    }
    counts
}

pub fn learn_encoder<'a>(
    kind: EncoderKind,
    train_docs: impl IntoIterator<Item = &'a RawDocument>,
    n_merges: usize,
) -> SubwordEncoder {
    match kind {
        EncoderKind::Unigram => SubwordEncoder::Unigram,
        EncoderKind::Trigram => SubwordEncoder::Trigram,
        EncoderKind::Bpe => SubwordEncoder::Bpe(bpe_learn(&word_counts(train_docs), n_merges)),
    }
}

/// Shared vocabulary over the subwords of every given (normalized) document.
pub fn build_vocab<'a>(
    docs: impl IntoIterator<Item = &'a RawDocument>,
    encoder: &SubwordEncoder,
    min_freq: u64,
) -> Result<Vocab, CorpusError> {
    let mut pieces: Vec<String> = Vec::new();
    for d in docs {
        for tok in d.tokens().into_iter().filter(|t| !is_mask(t)) {
            pieces.extend(encoder.encode(&tok)?);
        }
    }
    Ok(Vocab::build([pieces.iter().map(String::as_str)], min_freq))
}

/// Data-driven tag inventories over every labelled token.
pub fn tagsets_for<'a>(docs: impl IntoIterator<Item = &'a RawDocument>) -> Result<TagSets, CorpusError> {
    let (mut lang, mut pos) = (BTreeSet::new(), BTreeSet::new());
    for d in docs {
        for l in d.token_labels.iter().flatten() {
            lang.insert(l.lang.as_str());
            if let Some(p) = &l.pos {
                pos.insert(p.as_str());
            }
        }
    }
    let make = |s: BTreeSet<&str>| (!s.is_empty()).then(|| TagSet::from_observed(s)).transpose();
    Ok(TagSets {
        lang: make(lang)?,
        pos: make(pos)?,
    })
}

pub fn encode_all(
    docs: &[RawDocument],
    vocab: &Vocab,
    encoder: &SubwordEncoder,
    tagsets: &TagSets,
) -> Result<Vec<EncodedSample>, CorpusError> {
    docs.iter().map(|d| encode_sample(d, vocab, encoder, tagsets)).collect()
}

pub fn prepare(sources: &Sources, opts: &PrepareOptions) -> Result<Prepared, CorpusError> {
    let mut normalized: Vec<(&'static str, TaskSource)> = Vec::new();
    for (name, src) in sources.named() {
        normalized.push((
            name,
            TaskSource {
                train: normalize_all(&src.train)?,
                dev: normalize_all(&src.dev)?,
                test: normalize_all(&src.test)?,
            },
        ));
    }
    let train_docs = || normalized.iter().flat_map(|(_, s)| s.train.iter());
    let encoder = learn_encoder(opts.encoder, train_docs(), opts.bpe_merges);
    let vocab = build_vocab(train_docs(), &encoder, opts.min_freq)?;
    let tagsets = tagsets_for(normalized.iter().flat_map(|(_, s)| s.all()))?;

    let mut corpora = Corpora::new();
    let mut test = BTreeMap::new();
    for (name, src) in &normalized {
        let enc = |docs: &[RawDocument]| encode_all(docs, &vocab, &encoder, &tagsets);
        let mut train = enc(&src.train)?;
        let dev = enc(&src.dev)?;
        if *name == "sentiment" {
            corpora.insert(
                "lm".to_string(),
                TaskData {
                    train: train.clone(),
                    dev: dev.clone(),
                },
            );
            if opts.rebalance {
                train = rebalance(&train, N_SENTIMENT, |s| s.sentiment, opts.seed)?;
            }
        }
        test.insert(name.to_string(), enc(&src.test)?);
        corpora.insert(name.to_string(), TaskData { train, dev });
    }
    Ok(Prepared {
        vocab,
        encoder,
        tagsets,
        corpora,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, TaskProfile};

    fn sources() -> Sources {
        let tag = synth_corpus(1, 60, TaskProfile::Tagging);
        let sent = synth_corpus(2, 90, TaskProfile::Sentiment);
        Sources {
            lang: Some(TaskSource::split(&tag, (0.8, 0.1, 0.1), 3, false).unwrap()),
            pos: Some(TaskSource::split(&tag, (0.8, 0.1, 0.1), 4, false).unwrap()),
            sentiment: Some(TaskSource::split(&sent, (0.8, 0.1, 0.1), 5, true).unwrap()),
        }
    }

    #[test]
    fn prepares_all_corpora_with_shared_vocab() {
        let p = prepare(&sources(), &PrepareOptions::default()).unwrap();
        assert_eq!(
            p.corpora.keys().map(String::as_str).collect::<Vec<_>>(),
            vec!["lang", "lm", "pos", "sentiment"]
        );
        let sent = &p.corpora["sentiment"].train;
        let mut counts = [0usize; 3];
        sent.iter().for_each(|s| counts[s.sentiment.unwrap()] += 1);
        assert!(counts[0] == counts[1] && counts[1] == counts[2]);
        assert!(p.corpora["lang"].train.iter().all(|s| s.lang_labels.is_some()));
        assert!(p.corpora["pos"].train.iter().all(|s| s.pos_labels.is_some()));
        let d = p.dims();
        assert_eq!(d.n_lang, 3);
        assert!(d.n_pos >= 6);
        let max_id = p.corpora.values().flat_map(|c| c.train.iter().chain(&c.dev)).flat_map(|s| s.subword_ids.iter()).max();
        assert!(*max_id.unwrap() < p.vocab.len());
    }

    #[test]
    fn deterministic_and_encoder_dependent() {
        let opts = PrepareOptions::default();
        assert_eq!(prepare(&sources(), &opts).unwrap(), prepare(&sources(), &opts).unwrap());
        let uni = prepare(&sources(), &PrepareOptions { encoder: EncoderKind::Unigram, ..opts.clone() }).unwrap();
        let tri = prepare(&sources(), &opts).unwrap();
        assert!(uni.vocab.len() < tri.vocab.len());
        let n_uni: usize = uni.corpora["lm"].train.iter().map(EncodedSample::len).sum();
        let n_tri: usize = tri.corpora["lm"].train.iter().map(EncodedSample::len).sum();
        assert!(n_uni > n_tri);
        let bpe = prepare(&sources(), &PrepareOptions { encoder: EncoderKind::Bpe, bpe_merges: 50, ..opts }).unwrap();
        assert!(matches!(bpe.encoder, SubwordEncoder::Bpe(ref m) if m.len() == 50));
    }

    #[test]
    fn encoder_names_parse() {
        for k in [EncoderKind::Unigram, EncoderKind::Trigram, EncoderKind::Bpe] {
            assert_eq!(k.to_string().parse::<EncoderKind>().unwrap(), k);
        }
        assert!("wordpiece".parse::<EncoderKind>().is_err());
    }
}
