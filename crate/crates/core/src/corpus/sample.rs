use std::fmt;
use std::str::FromStr;

use super::encode::SubwordEncoder;
use super::normalize::{normalize_token, tokenize, URL_MASK, USER_MASK};
use super::vocab::{Vocab, URL_ID, USR_ID};
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Self::Negative, Self::Neutral, Self::Positive];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::Neutral => "neutral",
            Self::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Self::Negative),
            "neutral" => Ok(Self::Neutral),
            "positive" => Ok(Self::Positive),
            other => Err(CorpusError::UnknownLabel(other.to_string())),
        }
    }
}

/// Language and optional POS tag of one whitespace token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLabel {
    pub lang: String,
    pub pos: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub text: String,
    pub token_labels: Option<Vec<TokenLabel>>,
    pub sentiment: Option<Sentiment>,
}

impl RawDocument {
    pub fn sentence(text: impl Into<String>, sentiment: Option<Sentiment>) -> Self {
        Self {
            text: text.into(),
            token_labels: None,
            sentiment,
        }
    }

    /// Normalize token by token so labels stay aligned; tokens that normalize
    /// to nothing are dropped together with their label.
    pub fn normalized(&self) -> Result<Self, CorpusError> {
        let tokens = tokenize(&self.text);
        match &self.token_labels {
            None => Ok(Self {
                text: tokens
                    .iter()
                    .filter_map(|t| normalize_token(t))
                    .collect::<Vec<_>>()
                    .join(" "),
                token_labels: None,
                sentiment: self.sentiment,
            }),
            Some(labels) => {
                if labels.len() != tokens.len() {
                    return Err(CorpusError::LabelCount {
                        tokens: tokens.len(),
                        labels: labels.len(),
                    });
                }
                let mut kept_tokens = Vec::new();
                let mut kept_labels = Vec::new();
                for (t, l) in tokens.iter().zip(labels) {
                    if let Some(n) = normalize_token(t) {
                        kept_tokens.push(n);
                        kept_labels.push(l.clone());
                    }
                }
                Ok(Self {
                    text: kept_tokens.join(" "),
                    token_labels: Some(kept_labels),
                    sentiment: self.sentiment,
                })
            }
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

/// Ordered, duplicate-free tag inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    names: Vec<String>,
}

impl TagSet {
    pub fn new(names: Vec<String>) -> Result<Self, CorpusError> {
        if names.is_empty() {
            return Err(CorpusError::EmptyTagSet);
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if n.is_empty() || !seen.insert(n) {
                return Err(CorpusError::Vocab(format!("bad or duplicate tag `{n}`")));
            }
        }
        Ok(Self { names })
    }

    /// Sorted set of tags observed in `tags`.
    pub fn from_observed<'a>(tags: impl IntoIterator<Item = &'a str>) -> Result<Self, CorpusError> {
        let set: std::collections::BTreeSet<&str> = tags.into_iter().collect();
        Self::new(set.into_iter().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.names.iter().position(|n| n == tag)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Language and POS inventories used when projecting token labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagSets {
    pub lang: Option<TagSet>,
    pub pos: Option<TagSet>,
}

/// One text as subword ids, with token-level labels projected onto every
/// subword of their token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    pub subword_ids: Vec<usize>,
    pub token_index: Vec<usize>,
    pub lang_labels: Option<Vec<usize>>,
    pub pos_labels: Option<Vec<usize>>,
    pub sentiment: Option<usize>,
}

impl EncodedSample {
    pub fn len(&self) -> usize {
        self.subword_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subword_ids.is_empty()
    }

    /// A label-free sample from raw ids; used for LM prefixes and tests.
    pub fn from_ids(ids: Vec<usize>) -> Self {
        Self {
            token_index: vec![0; ids.len()],
            subword_ids: ids,
            lang_labels: None,
            pos_labels: None,
            sentiment: None,
        }
    }
}

/// Encode a normalized document. Masks map straight to their reserved ids;
/// every other token is split by `encoder` and looked up (UNK when unseen).
pub fn encode_sample(
    doc: &RawDocument,
    vocab: &Vocab,
    encoder: &SubwordEncoder,
    tagsets: &TagSets,
) -> Result<EncodedSample, CorpusError> {
    let tokens = doc.tokens();
    let mut ids = Vec::new();
    let mut token_index = Vec::new();
    for (ti, tok) in tokens.iter().enumerate() {
        match tok.as_str() {
            USER_MASK => ids.push(USR_ID),
            URL_MASK => ids.push(URL_ID),
            _ => ids.extend(encoder.encode(tok)?.iter().map(|p| vocab.id_or_unk(p))),
        }
        token_index.resize(ids.len(), ti);
    }
    if ids.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }

    let project = |tags: &[usize]| token_index.iter().map(|&t| tags[t]).collect::<Vec<_>>();
    let (mut lang_labels, mut pos_labels) = (None, None);
    if let Some(labels) = &doc.token_labels {
        if labels.len() != tokens.len() {
            return Err(CorpusError::LabelCount {
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        if let Some(ts) = &tagsets.lang {
            let per_token = labels
                .iter()
                .map(|l| ts.index(&l.lang).ok_or_else(|| CorpusError::UnknownTag(l.lang.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            lang_labels = Some(project(&per_token));
        }
        if let (Some(ts), true) = (&tagsets.pos, labels.iter().all(|l| l.pos.is_some())) {
            let per_token = labels
                .iter()
                .map(|l| {
                    let tag = l.pos.as_deref().unwrap_or_default();
                    ts.index(tag).ok_or_else(|| CorpusError::UnknownTag(tag.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            pos_labels = Some(project(&per_token));
        }
    }
    Ok(EncodedSample {
        subword_ids: ids,
        token_index,
        lang_labels,
        pos_labels,
        sentiment: doc.sentiment.map(Sentiment::id),
    })
}
