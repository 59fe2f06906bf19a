//! Browser demo over `cmcl-core`. Each view is a plain function returning a
//! serializable struct; the `wasm_bindgen` exports hand the same data to
//! JavaScript as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cmcl_core::corpus::{synth_corpus, RawDocument, TaskProfile, URL_MASK, USER_MASK};
use cmcl_core::curriculum::{freeze_schedule, lr_ladder, preset, run_curriculum, EpochRecord, PresetOptions};
use cmcl_core::model::{HierModel, ModelDims, ParamGroup};
use cmcl_core::pipeline::{learn_encoder, prepare, EncoderKind, PrepareOptions, Sources, TaskSource};

/// Largest merge count and epoch count the page may ask for.
pub const MAX_MERGES: usize = 2000;
pub const MAX_EPOCHS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenPieces {
    pub token: String,
    pub pieces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenView {
    pub encoder: String,
    pub normalized: String,
    pub tokens: Vec<TokenPieces>,
    pub n_pieces: usize,
}

/// Normalize `text` and split every token with the chosen encoder. BPE merges
/// are learned from a small synthetic corpus.
pub fn tokenize_view(text: &str, encoder: &str, merges: usize) -> Result<TokenView, String> {
    let kind: EncoderKind = encoder.parse().map_err(|e| format!("{e}"))?;
    let enc = match kind {
        EncoderKind::Bpe => {
            let docs: Vec<RawDocument> = synth_corpus(0, 400, TaskProfile::Sentiment)
                .iter()
                .filter_map(|d| d.normalized().ok())
                .collect();
            learn_encoder(kind, &docs, merges.min(MAX_MERGES))
        }
        _ => learn_encoder(kind, std::iter::empty(), 0),
    };
    let doc = RawDocument::sentence(text, None).normalized().map_err(|e| e.to_string())?;
    let mut tokens = Vec::new();
    for tok in doc.tokens() {
        let pieces = if tok == USER_MASK || tok == URL_MASK {
            vec![tok.clone()]
        } else {
            enc.encode(&tok).map_err(|e| e.to_string())?
        };
        tokens.push(TokenPieces { token: tok, pieces });
    }
    Ok(TokenView {
        encoder: enc.name().to_string(),
        n_pieces: tokens.iter().map(|t| t.pieces.len()).sum(),
        normalized: doc.text,
        tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRate {
    pub group: String,
    pub lr: f64,
    pub unfreeze_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleView {
    /// Deepest group first.
    pub groups: Vec<GroupRate>,
    /// Trainable groups in each epoch, 1-based.
    pub epochs: Vec<Vec<String>>,
}

pub fn schedule_view(base_lr: f64, discriminative: bool, gradual: bool, epochs: usize) -> ScheduleView {
    let ladder = lr_ladder(base_lr, discriminative);
    let sched = freeze_schedule(ParamGroup::ALL.len(), gradual);
    ScheduleView {
        groups: ParamGroup::ALL
            .iter()
            .map(|&g| GroupRate {
                group: g.to_string(),
                lr: ladder.rate(g),
                unfreeze_epoch: sched.unfreeze_epoch(g),
            })
            .collect(),
        epochs: (1..=epochs.min(MAX_EPOCHS))
            .map(|e| sched.unfrozen(e).iter().map(|g| g.to_string()).collect())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub stage: usize,
    pub epoch: usize,
    pub task: String,
    pub train_loss: f64,
    pub dev_metric: f64,
}

impl From<&EpochRecord> for CurvePoint {
    fn from(r: &EpochRecord) -> Self {
        Self {
            stage: r.stage,
            epoch: r.epoch,
            task: r.task.to_string(),
            train_loss: r.train_loss,
            dev_metric: r.dev_metric,
        }
    }
}

/// Train a 16-wide model on 160 synthetic sentences with `scratch` or
/// `lm_only` and return every epoch record.
pub fn training_curve(preset_name: &str, seed: u64, epochs: usize) -> Result<Vec<CurvePoint>, String> {
    if !matches!(preset_name, "scratch" | "lm_only") {
        return Err(format!("the demo runs scratch or lm_only, not `{preset_name}`"));
    }
    let docs = synth_corpus(seed, 160, TaskProfile::Sentiment);
    let sources = Sources {
        sentiment: Some(TaskSource::split(&docs, (0.75, 0.25, 0.0), seed, true).map_err(|e| e.to_string())?),
        ..Default::default()
    };
    let p = prepare(&sources, &PrepareOptions { seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let opts = PresetOptions {
        sentiment_epochs: epochs.clamp(1, MAX_EPOCHS),
        pretrain_epochs: 3,
        seed,
        ..Default::default()
    };
    let plan = preset(preset_name, &opts).map_err(|e| e.to_string())?;
    let dims = ModelDims { emb: 16, hidden: 16, ..p.dims() };
    let mut model = HierModel::init(dims, seed);
    let report = run_curriculum(&plan, &mut model, &p.corpora, &mut |_, _| {}).map_err(|e| e.to_string())?;
    Ok(report.records.iter().map(CurvePoint::from).collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn tokenize(text: &str, encoder: &str, merges: usize) -> Result<String, JsError> {
    to_js(tokenize_view(text, encoder, merges))
}

#[wasm_bindgen]
pub fn schedule(base_lr: f64, discriminative: bool, gradual: bool, epochs: usize) -> Result<String, JsError> {
    to_js(Ok(schedule_view(base_lr, discriminative, gradual, epochs)))
}

#[wasm_bindgen]
pub fn train_curve(preset_name: &str, seed: u32, epochs: usize) -> Result<String, JsError> {
    to_js(training_curve(preset_name, u64::from(seed), epochs))
}

