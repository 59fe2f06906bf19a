//! Seeded pseudo code-mixed corpora for data-free training and tests.
//!
//! Sentences are drawn from a handful of POS templates. Every content slot is
//! filled from one of two disjoint lexicons (English-like and romanized
//! Hindi-like), switching language mid-sentence at random, so per-token
//! language ID is learnable. Sentiment is carried by the single adjective
//! slot: a polar adjective for positive/negative, a neutral one otherwise,
//! and is usually echoed by a class-specific closing word that a language
//! model has to anticipate.

use crate::nn::RngState;

use super::sample::{RawDocument, Sentiment, TokenLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lang {
    En,
    Hi,
}

impl Lang {
    fn tag(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Hi => "hi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Pron,
    Verb,
    Det,
    Noun,
    Adv,
    Adj,
}

impl Slot {
    fn tag(self) -> &'static str {
        match self {
            Slot::Pron => "PRON",
            Slot::Verb => "VERB",
            Slot::Det => "DET",
            Slot::Noun => "NOUN",
            Slot::Adv => "ADV",
            Slot::Adj => "ADJ",
        }
    }
}

struct Lexicon {
    pron: &'static [&'static str],
    verb: &'static [&'static str],
    det: &'static [&'static str],
    noun: &'static [&'static str],
    adv: &'static [&'static str],
    adj_neutral: &'static [&'static str],
    adj_positive: &'static [&'static str],
    adj_negative: &'static [&'static str],
}

const EN: Lexicon = Lexicon {
    pron: &["i", "you", "we", "they", "he", "she"],
    verb: &["watched", "saw", "heard", "read", "found", "called", "think", "want"],
    det: &["the", "this", "that", "a", "every"],
    noun: &["movie", "song", "speech", "match", "news", "team", "show", "leader", "actor", "story"],
    adv: &["very", "so", "really", "quite", "too"],
    adj_neutral: &["new", "long", "old", "usual", "big", "first", "same", "late"],
    adj_positive: &["good", "great", "awesome", "superb", "amazing", "best", "nice", "lovely"],
    adj_negative: &["bad", "worst", "boring", "awful", "terrible", "poor", "sad", "fake"],
};

const HI: Lexicon = Lexicon {
    pron: &["main", "tum", "hum", "woh", "aap", "yeh"],
    verb: &["dekha", "suna", "padha", "banaya", "chahiye", "mila", "socha", "bola"],
    det: &["ek", "wahi", "koi", "har", "yahi"],
    noun: &["gaana", "bhashan", "khel", "khabar", "neta", "kahani", "duniya", "sarkar", "log", "desh"],
    adv: &["bahut", "ekdum", "kaafi", "itna", "zyada"],
    adj_neutral: &["naya", "purana", "lamba", "bada", "pehla", "aam", "seedha", "dher"],
    adj_positive: &["accha", "badhiya", "mast", "zabardast", "shandaar", "sundar", "khoob", "pyaara"],
    adj_negative: &["bura", "bekar", "ghatiya", "bakwas", "faltu", "ganda", "bekaar", "kharab"],
};

/// Closing words per class: `(word, language tag)`.
const TAILS: [&[(&str, &str)]; 3] = [
    &[(":(", "rest"), ("ugh", "en"), ("uff", "hi"), ("chhi", "hi"), ("shame", "en")],
    &[(".", "rest"), ("ok", "en"), ("hmm", "en"), ("theek", "hi"), ("bas", "hi")],
    &[(":)", "rest"), ("wow", "en"), ("wah", "hi"), ("shabash", "hi"), ("yay", "en")],
];

const TEMPLATES: &[&[Slot]] = &[
    &[Slot::Pron, Slot::Verb, Slot::Det, Slot::Adj, Slot::Noun],
    &[Slot::Det, Slot::Noun, Slot::Adv, Slot::Adj],
    &[Slot::Noun, Slot::Adv, Slot::Adj],
    &[Slot::Pron, Slot::Verb, Slot::Det, Slot::Noun, Slot::Adv, Slot::Adj],
    &[Slot::Det, Slot::Adj, Slot::Noun, Slot::Verb],
];

/// Which annotations the generated documents carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskProfile {
    /// Per-token language and POS tags, no sentiment.
    Tagging,
    /// Sentence sentiment only.
    Sentiment,
    /// Both.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Class shares for negative / neutral / positive.
    pub class_shares: [f64; 3],
    /// Probability that a token leaves the sentence's matrix language.
    pub switch_prob: f64,
    pub tail_prob: f64,
    pub mention_prob: f64,
    pub url_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_shares: [0.15, 0.50, 0.35],
            switch_prob: 0.35,
            tail_prob: 0.8,
            mention_prob: 0.1,
            url_prob: 0.05,
        }
    }
}

fn pick<'a>(rng: &mut RngState, xs: &'a [&'a str]) -> &'a str {
    xs[rng.below(xs.len())]
}

fn draw_class(rng: &mut RngState, shares: &[f64; 3]) -> Sentiment {
    let total: f64 = shares.iter().sum();
    let mut u = rng.next_f64() * total;
    for (s, &w) in Sentiment::ALL.iter().zip(shares) {
        if u < w {
            return *s;
        }
        u -= w;
    }
    Sentiment::Positive
}

pub fn synth_corpus(seed: u64, n_sentences: usize, profile: TaskProfile) -> Vec<RawDocument> {
    synth_corpus_with(seed, n_sentences, profile, &SynthConfig::default())
}

pub fn synth_corpus_with(
    seed: u64,
    n_sentences: usize,
    profile: TaskProfile,
    cfg: &SynthConfig,
) -> Vec<RawDocument> {
    let mut rng = RngState::new(seed);
    (0..n_sentences)
        .map(|_| {
            let class = draw_class(&mut rng, &cfg.class_shares);
            let matrix = if rng.bernoulli(0.5) { Lang::En } else { Lang::Hi };
            let template = TEMPLATES[rng.below(TEMPLATES.len())];
            let mut words: Vec<(String, String, &str)> = Vec::new();
            if rng.bernoulli(cfg.mention_prob) {
                words.push((format!("@user{}", rng.below(1000)), "rest".into(), "X"));
            }
            for &slot in template {
                let lang = if rng.bernoulli(cfg.switch_prob) {
                    match matrix {
                        Lang::En => Lang::Hi,
                        Lang::Hi => Lang::En,
                    }
                } else {
                    matrix
                };
                let lex = match lang {
                    Lang::En => &EN,
                    Lang::Hi => &HI,
                };
                let pool = match slot {
                    Slot::Pron => lex.pron,
                    Slot::Verb => lex.verb,
                    Slot::Det => lex.det,
                    Slot::Noun => lex.noun,
                    Slot::Adv => lex.adv,
                    Slot::Adj => match class {
                        Sentiment::Negative => lex.adj_negative,
                        Sentiment::Neutral => lex.adj_neutral,
                        Sentiment::Positive => lex.adj_positive,
                    },
                };
                words.push((pick(&mut rng, pool).to_string(), lang.tag().into(), slot.tag()));
            }
            if rng.bernoulli(cfg.tail_prob) {
                let tails = TAILS[class.id()];
                let (w, l) = tails[rng.below(tails.len())];
                let pos = if l == "rest" { "X" } else { "INTJ" };
                words.push((w.to_string(), l.into(), pos));
            }
            if rng.bernoulli(cfg.url_prob) {
                words.push((format!("http://t.co/{}", rng.below(100_000)), "rest".into(), "X"));
            }
            let text = words.iter().map(|w| w.0.as_str()).collect::<Vec<_>>().join(" ");
            let labels = words
                .iter()
                .map(|(_, lang, pos)| TokenLabel {
                    lang: lang.clone(),
                    pos: Some(pos.to_string()),
                })
                .collect();
            match profile {
                TaskProfile::Tagging => RawDocument {
                    text,
                    token_labels: Some(labels),
                    sentiment: None,
                },
                TaskProfile::Sentiment => RawDocument::sentence(text, Some(class)),
                TaskProfile::Full => RawDocument {
                    text,
                    token_labels: Some(labels),
                    sentiment: Some(class),
                },
            }
        })
        .collect()
}
