//! Corpus ingestion: normalization, subword encoding, vocabularies, label
//! projection, rebalancing, splitting, file formats, synthetic data.

mod encode;
pub mod io;
mod normalize;
mod resample;
mod sample;
pub mod synth;
mod vocab;

pub use encode::{bpe_encode, bpe_learn, trigram_encode, unigram_encode, Merge, SubwordEncoder};
pub use normalize::{normalize, normalize_token, tokenize, PAD, TERMINAL, URL_MASK, USER_MASK};
pub use resample::{rebalance, split, Split};
pub use sample::{encode_sample, EncodedSample, RawDocument, Sentiment, TagSet, TagSets, TokenLabel};
pub use synth::{synth_corpus, synth_corpus_with, SynthConfig, TaskProfile};
pub use vocab::{Vocab, BOS_ID, PAD_ID, RESERVED, UNK_ID, URL_ID, USR_ID};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("empty token")]
    EmptyToken,
    #[error("token `{0}` contains a reserved character (`*` or `#`)")]
    ReservedChar(String),
    #[error("document encodes to no subwords")]
    EmptyDocument,
    #[error("{labels} token labels for {tokens} tokens")]
    LabelCount { tokens: usize, labels: usize },
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("sample is missing its {0} label")]
    MissingLabel(&'static str),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("tag set is empty")]
    EmptyTagSet,
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    Ratios((f64, f64, f64)),
    #[error("{0} samples cannot fill three partitions")]
    TooFewSamples(usize),
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}
