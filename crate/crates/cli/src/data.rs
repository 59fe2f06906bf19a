//! Corpus files to [`Sources`], and the vocabulary/encoder artifacts that
//! travel with a checkpoint.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use cmcl_core::corpus::io::{format_vocab, load_merges, load_sentence_corpus, load_token_corpus, load_vocab};
use cmcl_core::corpus::{RawDocument, SubwordEncoder, TagSet, TagSets, Vocab};
use cmcl_core::model::{load_checkpoint, CheckpointMeta, HierModel};
use cmcl_core::pipeline::{Prepared, Sources, TaskSource};

use crate::config::{RunConfig, DATA_TASKS};
use crate::CliError;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const MERGES_FILE: &str = "merges.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Load one corpus file in the format its task uses.
pub fn load_task_file(task: &str, path: &Path) -> Result<Vec<RawDocument>, CliError> {
    if !path.is_file() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    Ok(match task {
        "sentiment" => load_sentence_corpus(path)?,
        _ => load_token_corpus(path)?,
    })
}

/// Every configured `data_<task>` file, split with the configured ratios.
/// Paths are all checked before any file is parsed.
pub fn load_sources(cfg: &RunConfig) -> Result<Sources, CliError> {
    for path in cfg.data.values() {
        if !path.is_file() {
            return Err(CliError::Io(format!("{}: no such file", path.display())));
        }
    }
    let mut sources = Sources::default();
    for (i, task) in DATA_TASKS.iter().enumerate() {
        let Some(path) = cfg.data.get(*task) else { continue };
        let docs = load_task_file(task, path)?;
        let src = TaskSource::split(&docs, cfg.split, cfg.seed.wrapping_add(i as u64), *task == "sentiment")?;
        match *task {
            "lang" => sources.lang = Some(src),
            "pos" => sources.pos = Some(src),
            _ => sources.sentiment = Some(src),
        }
    }
    Ok(sources)
}

/// Hex SHA-256 of the vocabulary file contents.
pub fn vocab_hash(vocab: &Vocab) -> String {
    Sha256::digest(format_vocab(vocab).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Metadata that lets `eval` and `predict` rebuild the input side.
pub fn checkpoint_meta(cfg: &RunConfig, prepared: &Prepared) -> CheckpointMeta {
    let mut meta = CheckpointMeta::new();
    meta.insert("vocab_hash".into(), vocab_hash(&prepared.vocab));
    meta.insert("encoder".into(), prepared.encoder.name().into());
    let plan = if cfg.stages.is_some() { "custom" } else { cfg.preset.as_str() };
    meta.insert("preset".into(), plan.into());
    meta.insert("seed".into(), cfg.seed.to_string());
    let tags = |t: &Option<TagSet>| t.as_ref().map_or(String::new(), |t| t.names().join(" "));
    meta.insert("tagset_lang".into(), tags(&prepared.tagsets.lang));
    meta.insert("tagset_pos".into(), tags(&prepared.tagsets.pos));
    meta
}

/// A trained model with everything needed to encode new text for it.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub model: HierModel,
    pub meta: CheckpointMeta,
    pub vocab: Vocab,
    pub encoder: SubwordEncoder,
    pub tagsets: TagSets,
}

/// Load a checkpoint plus the vocabulary (and merges) beside it, or at
/// `vocab` when given. The vocabulary must hash to the checkpoint's value.
pub fn load_artifacts(checkpoint: &Path, vocab: Option<&Path>) -> Result<Artifacts, CliError> {
    if !checkpoint.is_file() {
        return Err(CliError::Io(format!("{}: no such file", checkpoint.display())));
    }
    let (model, meta) = load_checkpoint(checkpoint)?;
    let dir = checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let vocab_path = vocab.map_or_else(|| dir.join(VOCAB_FILE), Path::to_path_buf);
    let vocab = load_vocab(&vocab_path)?;
    let want = meta
        .get("vocab_hash")
        .ok_or_else(|| CliError::Data("checkpoint has no vocab_hash".into()))?;
    let got = vocab_hash(&vocab);
    if &got != want {
        return Err(CliError::Config(format!(
            "vocab hash mismatch: {} hashes to {got}, checkpoint expects {want}",
            vocab_path.display()
        )));
    }
    let encoder = match meta.get("encoder").map(String::as_str) {
        Some("trigram") => SubwordEncoder::Trigram,
        Some("unigram") => SubwordEncoder::Unigram,
        Some("bpe") => {
            let merges_path = vocab_path.parent().unwrap_or(&dir).join(MERGES_FILE);
            SubwordEncoder::Bpe(load_merges(&merges_path)?)
        }
        other => return Err(CliError::Data(format!("checkpoint encoder {other:?} is not recognised"))),
    };
    let tagset = |key: &str| -> Result<Option<TagSet>, CliError> {
        match meta.get(key).map(|s| s.split_whitespace().map(String::from).collect::<Vec<_>>()) {
            Some(names) if !names.is_empty() => Ok(Some(TagSet::new(names)?)),
            _ => Ok(None),
        }
    };
    let tagsets = TagSets {
        lang: tagset("tagset_lang")?,
        pos: tagset("tagset_pos")?,
    };
    if model.dims.vocab != vocab.len() {
        return Err(CliError::Data(format!(
            "model expects {} vocabulary entries, vocab file has {}",
            model.dims.vocab,
            vocab.len()
        )));
    }
    Ok(Artifacts {
        model,
        meta,
        vocab,
        encoder,
        tagsets,
    })
}
