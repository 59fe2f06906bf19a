//! Curriculum training for code-mixed sentiment analysis.
//!
//! Text is normalized and split into character trigrams (or unigrams / BPE
//! pieces), embedded, and run through two stacked bidirectional LSTMs.
//! Layer 1 feeds per-position language-ID and POS heads; layer 2 feeds a
//! next-subword language-model head and a sentiment head over
//! `[terminal; maxpool; avgpool]`. The [`curriculum`] module trains the same
//! model through an ordered list of tasks with per-layer learning rates and
//! top-down unfreezing.

pub mod nn;
pub mod corpus;
pub mod model;
pub mod curriculum;
pub mod eval;
pub mod gradsuite;
pub mod pipeline;
