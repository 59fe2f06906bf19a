//! Run configuration: built-in defaults, overridden by a flat `key = value`
//! file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use cmcl_core::curriculum::{preset, CurriculumPlan, PresetOptions, StageSpec, PRESETS};
use cmcl_core::eval::Averaging;
use cmcl_core::model::{Task, DROPOUT, EMBED_DIM, HIDDEN_DIM};
use cmcl_core::pipeline::{EncoderKind, PrepareOptions};

use crate::CliError;

/// Tasks that accept a `data_<task>` path.
pub const DATA_TASKS: [&str; 3] = ["lang", "pos", "sentiment"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub encoder: EncoderKind,
    pub bpe_merges: usize,
    pub min_freq: u64,
    pub emb_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub base_lr: f64,
    pub batch_size: usize,
    /// `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub preset: String,
    /// Explicit stage list; replaces `preset` when set. See [`parse_stages`].
    pub stages: Option<String>,
    pub pretrain_epochs: usize,
    pub sentiment_epochs: usize,
    pub patience: Option<usize>,
    pub lm_prefixes: usize,
    pub joint_tagging: bool,
    pub rebalance: bool,
    pub split: (f64, f64, f64),
    /// Dev accuracy for `epochs_to_threshold` in the summary.
    pub threshold: f64,
    pub averaging: Averaging,
    pub data: BTreeMap<String, PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PresetOptions::default();
        let prep = PrepareOptions::default();
        Self {
            encoder: prep.encoder,
            bpe_merges: prep.bpe_merges,
            min_freq: prep.min_freq,
            emb_dim: EMBED_DIM,
            hidden: HIDDEN_DIM,
            dropout: DROPOUT,
            base_lr: p.base_lr,
            batch_size: p.batch_size,
            clip_norm: p.clip_norm,
            seed: 0,
            preset: "full".into(),
            stages: None,
            pretrain_epochs: p.pretrain_epochs,
            sentiment_epochs: p.sentiment_epochs,
            patience: p.patience,
            lm_prefixes: p.lm_prefixes,
            joint_tagging: p.joint_tagging,
            rebalance: prep.rebalance,
            split: (0.8, 0.1, 0.1),
            threshold: 0.9,
            averaging: Averaging::Macro,
            data: BTreeMap::new(),
            out: PathBuf::from("run"),
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_flat(body: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in body.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>, CliError> {
    match v {
        "none" | "off" => Ok(None),
        _ => num(key, v).map(Some),
    }
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), T::to_string)
}

/// Parse an explicit plan: stages separated by `;`, each `task [epochs]
/// [disc] [unfreeze]`, for example
/// `lang 10; pos 10; lm 10 disc; sentiment 25 disc unfreeze`.
/// Omitted epochs and the pretraining patience come from `opts`.
pub fn parse_stages(text: &str, opts: &PresetOptions) -> Result<CurriculumPlan, CliError> {
    let bad = |m: String| CliError::Config(format!("`stages`: {m}"));
    let mut stages = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let mut words = part.split_whitespace();
        let task: Task = words
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| bad(format!("{e}")))?;
        let corpus = match task {
            Task::Lang => "lang",
            Task::Pos | Task::PosLang => "pos",
            Task::Lm => "lm",
            Task::Sentiment => "sentiment",
        };
        let pretrain = task != Task::Sentiment;
        let epochs = if pretrain { opts.pretrain_epochs } else { opts.sentiment_epochs };
        let mut spec = StageSpec {
            base_lr: opts.base_lr,
            batch_size: opts.batch_size,
            clip_norm: opts.clip_norm,
            lm_prefixes: opts.lm_prefixes,
            patience: if pretrain { opts.patience } else { None },
            ..StageSpec::new(task, corpus, epochs)
        };
        for w in words {
            match w {
                "disc" => spec.discriminative = true,
                "unfreeze" => spec.gradual_unfreeze = true,
                n => spec.epochs = n.parse().map_err(|_| bad(format!("unexpected `{n}` in `{part}`")))?,
            }
        }
        stages.push(spec);
    }
    let plan = CurriculumPlan {
        name: "custom".into(),
        stages,
        seed: opts.seed,
    };
    plan.validate().map_err(|e| bad(e.to_string()))?;
    Ok(plan)
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "encoder" => self.encoder = v.parse().map_err(|e| CliError::Config(format!("{e}")))?,
            "bpe_merges" => self.bpe_merges = num(key, v)?,
            "min_freq" => self.min_freq = num(key, v)?,
            "emb_dim" => self.emb_dim = num(key, v)?,
            "hidden" => self.hidden = num(key, v)?,
            "dropout" => self.dropout = num(key, v)?,
            "base_lr" => self.base_lr = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "clip_norm" => self.clip_norm = opt(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "preset" => self.preset = v.to_string(),
            "stages" => {
                self.stages = match v {
                    "" | "none" => None,
                    _ => Some(v.to_string()),
                }
            }
            "pretrain_epochs" => self.pretrain_epochs = num(key, v)?,
            "sentiment_epochs" => self.sentiment_epochs = num(key, v)?,
            "patience" => self.patience = opt(key, v)?,
            "lm_prefixes" => self.lm_prefixes = num(key, v)?,
            "joint_tagging" => self.joint_tagging = flag(key, v)?,
            "rebalance" => self.rebalance = flag(key, v)?,
            "split" => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|p| num(key, p.trim()))
                    .collect::<Result<_, _>>()?;
                let [a, b, c] = parts[..] else {
                    return Err(CliError::Config("`split`: expected three comma-separated ratios".into()));
                };
                self.split = (a, b, c);
            }
            "threshold" => self.threshold = num(key, v)?,
            "averaging" => self.averaging = v.parse().map_err(|e| CliError::Config(format!("{e}")))?,
            "out" => self.out = PathBuf::from(v),
            _ => match key.strip_prefix("data_") {
                Some(task) if DATA_TASKS.contains(&task) => {
                    self.data.insert(task.to_string(), PathBuf::from(v));
                }
                _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    /// Defaults, then `file` settings, then `flags`, in that order.
    pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (k, v) in file.iter().chain(flags) {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive or none");
        }
        if self.batch_size == 0 || self.emb_dim == 0 || self.hidden == 0 {
            return bad("batch_size, emb_dim and hidden must be positive");
        }
        if self.pretrain_epochs == 0 || self.sentiment_epochs == 0 {
            return bad("epoch counts must be positive");
        }
        if self.min_freq == 0 {
            return bad("min_freq must be at least 1");
        }
        let (a, b, c) = self.split;
        if [a, b, c].iter().any(|r| *r < 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return bad("split ratios must be non-negative and sum to 1");
        }
        if let Some(text) = &self.stages {
            parse_stages(text, &self.preset_options())?;
        } else if !PRESETS.contains(&self.preset.as_str()) {
            return Err(CliError::Config(format!(
                "unknown preset `{}` (expected one of {})",
                self.preset,
                PRESETS.join(", ")
            )));
        }
        Ok(())
    }

    pub fn preset_options(&self) -> PresetOptions {
        PresetOptions {
            base_lr: self.base_lr,
            batch_size: self.batch_size,
            pretrain_epochs: self.pretrain_epochs,
            sentiment_epochs: self.sentiment_epochs,
            patience: self.patience,
            clip_norm: self.clip_norm,
            lm_prefixes: self.lm_prefixes,
            joint_tagging: self.joint_tagging,
            seed: self.seed,
        }
    }

    pub fn plan(&self) -> Result<CurriculumPlan, CliError> {
        match &self.stages {
            Some(text) => parse_stages(text, &self.preset_options()),
            None => preset(&self.preset, &self.preset_options()).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn prepare_options(&self) -> PrepareOptions {
        PrepareOptions {
            encoder: self.encoder,
            bpe_merges: self.bpe_merges,
            min_freq: self.min_freq,
            rebalance: self.rebalance,
            seed: self.seed,
        }
    }

    /// Every setting in `key = value` form; `resolve` of this text reproduces `self`.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("encoder", self.encoder.to_string());
        kv("bpe_merges", self.bpe_merges.to_string());
        kv("min_freq", self.min_freq.to_string());
        kv("emb_dim", self.emb_dim.to_string());
        kv("hidden", self.hidden.to_string());
        kv("dropout", self.dropout.to_string());
        kv("base_lr", self.base_lr.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("clip_norm", show(&self.clip_norm));
        kv("seed", self.seed.to_string());
        kv("preset", self.preset.clone());
        kv("stages", show(&self.stages));
        kv("pretrain_epochs", self.pretrain_epochs.to_string());
        kv("sentiment_epochs", self.sentiment_epochs.to_string());
        kv("patience", show(&self.patience));
        kv("lm_prefixes", self.lm_prefixes.to_string());
        kv("joint_tagging", self.joint_tagging.to_string());
        kv("rebalance", self.rebalance.to_string());
        let (a, b, c) = self.split;
        kv("split", format!("{a},{b},{c}"));
        kv("threshold", self.threshold.to_string());
        kv("averaging", self.averaging.to_string());
        for (task, p) in &self.data {
            kv(&format!("data_{task}"), p.display().to_string());
        }
        kv("out", self.out.display().to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.emb_dim, c.hidden, c.dropout, c.base_lr, c.batch_size), (64, 64, 0.2, 0.04, 4));
        assert_eq!(c.encoder, EncoderKind::Trigram);
        c.validate().unwrap();
    }

    #[test]
    fn flat_parser_skips_comments() {
        let kv = parse_flat("# top\nseed = 3  # trailing\n\n preset=scratch\n").unwrap();
        assert_eq!(kv, vec![("seed".into(), "3".into()), ("preset".into(), "scratch".into())]);
        assert!(parse_flat("seed 3").is_err());
    }

    #[test]
    fn round_trips_through_flat_text() {
        let mut c = RunConfig::default();
        c.set("clip_norm", "none").unwrap();
        c.set("data_pos", "/tmp/pos.tsv").unwrap();
        c.set("split", "0.7, 0.2, 0.1").unwrap();
        let back = RunConfig::resolve(&parse_flat(&c.to_flat()).unwrap(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        for (k, v) in [("base_lr", "0"), ("dropout", "1"), ("preset", "nope"), ("split", "0.5,0.5,0.5")] {
            let r = RunConfig::resolve(&[(k.into(), v.into())], &[]);
            assert!(matches!(r, Err(CliError::Config(_))), "{k}={v}");
        }
        assert!(RunConfig::default().set("data_ner", "x").is_err());
        assert!(RunConfig::default().set("seed", "-1").is_err());
        for plan in ["sentiment; lm", "ner 3", "lm ten", ""] {
            let r = RunConfig::resolve(&[("stages".into(), plan.into())], &[]);
            assert!(plan.is_empty() == r.is_ok(), "{plan}");
        }
    }

    #[test]
    fn explicit_stage_list_matches_the_full_preset() {
        let mut c = RunConfig::default();
        c.set("stages", "lang; pos; lm disc; sentiment disc unfreeze").unwrap();
        let custom = c.plan().unwrap();
        let full = preset("full", &c.preset_options()).unwrap();
        assert_eq!(custom.name, "custom");
        assert_eq!(custom.stages, full.stages);
        c.set("stages", "pos+lang 4; sentiment 7").unwrap();
        let p = c.plan().unwrap();
        assert_eq!((p.stages[0].corpus.as_str(), p.stages[0].epochs, p.stages[1].epochs), ("pos", 4, 7));
        assert!(!p.stages[1].discriminative && p.stages[0].patience.is_some());
    }
}
