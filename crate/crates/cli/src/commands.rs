//! One function per subcommand. Each returns the record it printed so tests
//! can inspect it without scraping stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use cmcl_core::corpus::io::{save_merges, save_vocab, write_sentence_corpus, write_token_corpus};
use cmcl_core::corpus::{encode_sample, synth_corpus, EncodedSample, RawDocument, Sentiment, SubwordEncoder, TaskProfile};
use cmcl_core::curriculum::{epochs_to_threshold, evaluate, run_curriculum, TrainError};
use cmcl_core::eval::{classify_metrics, Averaging};
use cmcl_core::gradsuite::{run_suite, SuiteOptions, SuiteReport};
use cmcl_core::model::{save_checkpoint, HierModel, ModelDims, Task};
use cmcl_core::nn::RngState;
use cmcl_core::pipeline::{prepare, Prepared};

use crate::config::RunConfig;
use crate::data::{checkpoint_meta, load_artifacts, load_sources, load_task_file, Artifacts, CHECKPOINT_FILE, MERGES_FILE, VOCAB_FILE};
use crate::metrics::{ClassifyLine, DivergenceLine, EpochLine, MetricsLog, StageLine, Summary, METRICS_FILE, SUMMARY_FILE};
use crate::{io_err, CliError};

pub const CONFIG_FILE: &str = "config.txt";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn prepared(cfg: &RunConfig) -> Result<Prepared, CliError> {
    Ok(prepare(&load_sources(cfg)?, &cfg.prepare_options())?)
}

fn save_encoder_files(dir: &Path, p: &Prepared) -> Result<(), CliError> {
    save_vocab(&dir.join(VOCAB_FILE), &p.vocab)?;
    if let SubwordEncoder::Bpe(merges) = &p.encoder {
        save_merges(&dir.join(MERGES_FILE), merges)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabReport {
    pub vocab_size: usize,
    pub merges: usize,
    pub vocab_hash: String,
}

/// Shared vocabulary (and BPE merges) over every configured training split.
pub fn build_vocab(cfg: &RunConfig) -> Result<VocabReport, CliError> {
    if cfg.data.is_empty() {
        return Err(CliError::Config("build-vocab needs at least one data_<task> path".into()));
    }
    let p = prepared(cfg)?;
    create_dir(&cfg.out)?;
    save_encoder_files(&cfg.out, &p)?;
    Ok(VocabReport {
        vocab_size: p.vocab.len(),
        merges: match &p.encoder {
            SubwordEncoder::Bpe(m) => m.len(),
            _ => 0,
        },
        vocab_hash: crate::data::vocab_hash(&p.vocab),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthReport {
    pub files: Vec<String>,
    pub sentences: usize,
}

pub const SYNTH_SENTIMENT_FILE: &str = "sentiment.tsv";
pub const SYNTH_TAGGING_FILE: &str = "tagging.tsv";

/// Write seeded synthetic corpora. `profile` is `sentiment`, `tagging` or `all`.
pub fn synth(seed: u64, n: usize, profile: &str, out: &Path) -> Result<SynthReport, CliError> {
    if n == 0 {
        return Err(CliError::Config("synth needs at least one sentence".into()));
    }
    let (sent, tag) = match profile {
        "sentiment" => (true, false),
        "tagging" => (false, true),
        "all" => (true, true),
        other => return Err(CliError::Config(format!("unknown synth profile `{other}`"))),
    };
    create_dir(out)?;
    let mut files = Vec::new();
    if sent {
        let path = out.join(SYNTH_SENTIMENT_FILE);
        write_sentence_corpus(&path, &synth_corpus(seed, n, TaskProfile::Sentiment))?;
        files.push(path.display().to_string());
    }
    if tag {
        let path = out.join(SYNTH_TAGGING_FILE);
        write_token_corpus(&path, &synth_corpus(seed.wrapping_add(1), n, TaskProfile::Tagging))?;
        files.push(path.display().to_string());
    }
    Ok(SynthReport { files, sentences: n })
}

fn sentiment_line(
    model: &HierModel,
    samples: &[EncodedSample],
    split: &str,
    averaging: Averaging,
) -> Result<ClassifyLine, CliError> {
    let mut gold = Vec::with_capacity(samples.len());
    let mut pred = Vec::with_capacity(samples.len());
    for s in samples {
        let Some(label) = s.sentiment else {
            return Err(CliError::Data("sentiment sample without a label".into()));
        };
        gold.push(label);
        pred.push(model.predict_sentiment(&s.subword_ids)?);
    }
    let m = classify_metrics(&gold, &pred, Sentiment::ALL.len(), averaging)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(ClassifyLine {
        split: split.to_string(),
        n: samples.len(),
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        averaging: averaging.to_string(),
        confusion: m.confusion.rows(),
    })
}

/// Run the configured preset; writes the checkpoint, vocabulary, resolved
/// config, per-epoch metrics log and summary into `cfg.out`.
pub fn train(cfg: &RunConfig) -> Result<Summary, CliError> {
    let plan = cfg.plan()?;
    for stage in &plan.stages {
        let needs = if stage.corpus == "lm" { "sentiment" } else { stage.corpus.as_str() };
        if !cfg.data.contains_key(needs) {
            return Err(CliError::Config(format!(
                "preset `{}` needs data_{needs} for its {} stage",
                plan.name, stage.task
            )));
        }
    }
    let p = prepared(cfg)?;
    create_dir(&cfg.out)?;
    save_encoder_files(&cfg.out, &p)?;
    write_file(&cfg.out.join(CONFIG_FILE), &cfg.to_flat())?;

    let dims = ModelDims {
        emb: cfg.emb_dim,
        hidden: cfg.hidden,
        ..p.dims()
    };
    let mut model = HierModel::init(dims, cfg.seed);
    model.dropout = cfg.dropout;

    let log_path = cfg.out.join(METRICS_FILE);
    if log_path.exists() {
        fs::remove_file(&log_path).map_err(|e| io_err(&log_path, e))?;
    }
    let mut log = MetricsLog::append(&log_path)?;
    let mut sink_err = None;
    let result = run_curriculum(&plan, &mut model, &p.corpora, &mut |r, _| {
        if sink_err.is_none() {
            sink_err = log.write(&EpochLine::from(r)).err();
        }
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    let report = match result {
        Ok(r) => r,
        Err(TrainError::Divergence { stage, task, epoch, reason, last_losses }) => {
            let line = DivergenceLine {
                event: "divergence",
                stage,
                epoch,
                task: task.to_string(),
                reason: reason.clone(),
                last_losses: last_losses.clone(),
            };
            log.write(&line)?;
            return Err(TrainError::Divergence { stage, task, epoch, reason, last_losses }.into());
        }
        Err(e) => return Err(e.into()),
    };

    save_checkpoint(&cfg.out.join(CHECKPOINT_FILE), &model, &checkpoint_meta(cfg, &p))?;

    let test = p.test.get("sentiment").filter(|t| !t.is_empty());
    let sentiment = match test {
        Some(t) => Some(sentiment_line(&model, t, "test", cfg.averaging)?),
        None => match p.corpora.get("sentiment") {
            Some(d) if !d.dev.is_empty() => Some(sentiment_line(&model, &d.dev, "dev", cfg.averaging)?),
            _ => None,
        },
    };
    let summary = Summary {
        preset: plan.name.clone(),
        seed: cfg.seed,
        encoder: p.encoder.name().to_string(),
        stages: report.stages.iter().map(StageLine::from).collect(),
        epoch_records: report.records.len(),
        threshold: cfg.threshold,
        epochs_to_threshold: epochs_to_threshold(&report, cfg.threshold),
        final_dev_accuracy: report.final_dev_metric(),
        sentiment,
    };
    let body = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&cfg.out.join(SUMMARY_FILE), &format!("{body}\n"))?;
    Ok(summary)
}

fn encode_docs(a: &Artifacts, docs: &[RawDocument]) -> Result<Vec<EncodedSample>, CliError> {
    let mut out = Vec::with_capacity(docs.len());
    for d in docs {
        let n = d.normalized()?;
        if !n.text.is_empty() {
            out.push(encode_sample(&n, &a.vocab, &a.encoder, &a.tagsets)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Data("nothing to evaluate".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalLine {
    pub event: &'static str,
    pub task: String,
    pub data: String,
    pub checkpoint: String,
    pub n: usize,
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<ClassifyLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub vocab: Option<&'a Path>,
    pub task: &'a str,
    pub data: &'a Path,
    pub averaging: Averaging,
    pub lm_prefixes: usize,
    pub seed: u64,
    /// Directory whose `metrics.jsonl` receives the record; the checkpoint's
    /// directory when `None`.
    pub out: Option<&'a Path>,
}

/// Score a checkpoint on a whole corpus file and append the record to the log.
pub fn eval(args: &EvalArgs) -> Result<EvalLine, CliError> {
    let task: Task = args.task.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let a = load_artifacts(args.checkpoint, args.vocab)?;
    let kind = if matches!(task, Task::Sentiment | Task::Lm) { "sentiment" } else { "tagging" };
    let docs = load_task_file(kind, args.data)?;
    let samples = encode_docs(&a, &docs)?;
    let mut line = EvalLine {
        event: "eval",
        task: task.to_string(),
        data: args.data.display().to_string(),
        checkpoint: args.checkpoint.display().to_string(),
        n: samples.len(),
        accuracy: None,
        sentiment: None,
        perplexity: None,
    };
    match task {
        Task::Sentiment => {
            let s = sentiment_line(&a.model, &samples, "eval", args.averaging)?;
            line.accuracy = Some(s.accuracy);
            line.sentiment = Some(s);
        }
        _ => {
            let mut rng = RngState::with_stream(args.seed, 0xE7A1);
            let score = evaluate(&a.model, task, &samples, args.lm_prefixes, &mut rng)?;
            if task == Task::Lm {
                line.perplexity = Some(score.metric);
            } else {
                line.accuracy = Some(score.metric);
            }
        }
    }
    let dir: PathBuf = match args.out {
        Some(d) => d.to_path_buf(),
        None => args.checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    create_dir(&dir)?;
    MetricsLog::append(&dir.join(METRICS_FILE))?.write(&line)?;
    Ok(line)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probabilities {
    pub negative: f64,
    pub neutral: f64,
    pub positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub text: String,
    pub subwords: Vec<String>,
    pub label: String,
    pub probabilities: Probabilities,
}

/// Sentiment of one raw text.
pub fn predict(checkpoint: &Path, vocab: Option<&Path>, text: &str) -> Result<Prediction, CliError> {
    let a = load_artifacts(checkpoint, vocab)?;
    let doc = RawDocument::sentence(text, None).normalized()?;
    if doc.text.is_empty() {
        return Err(CliError::Data("text is empty after normalization".into()));
    }
    let s = encode_sample(&doc, &a.vocab, &a.encoder, &a.tagsets)?;
    let probs = a.model.forward_sentiment(&s.subword_ids)?.probs;
    let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
    Ok(Prediction {
        text: doc.text.clone(),
        subwords: s
            .subword_ids
            .iter()
            .map(|&id| a.vocab.piece(id).unwrap_or("<unk>").to_string())
            .collect(),
        label: Sentiment::from_id(best).map_or("?", Sentiment::as_str).to_string(),
        probabilities: Probabilities {
            negative: probs[0],
            neutral: probs[1],
            positive: probs[2],
        },
    })
}

/// The full finite-difference sweep. `fault` names an op whose analytic
/// gradients get scaled by 1.01, as a negative control.
pub fn gradcheck(cases: u64, fault: Option<&str>) -> (SuiteReport, std::time::Duration) {
    let opts = SuiteOptions {
        cases,
        fault: fault.map(|op| (op.to_string(), 1.01)),
        ..SuiteOptions::default()
    };
    let t = Instant::now();
    let report = run_suite(&opts);
    (report, t.elapsed())
}

/// Human-readable table of a sweep.
pub fn format_gradcheck(report: &SuiteReport) -> String {
    let mut s = format!("{:<16} {:>6} {:>8} {:>12}  status\n", "op", "cases", "coords", "max_rel_err");
    for r in &report.ops {
        s.push_str(&format!(
            "{:<16} {:>6} {:>8} {:>12.3e}  {}\n",
            r.op,
            r.cases,
            r.coords_checked,
            r.max_rel_err,
            if r.passed(report.tol) { "ok" } else { "FAIL" }
        ));
    }
    s.push_str(&format!(
        "overall max rel err {:.3e} (tolerance {:.0e}): {}\n",
        report.max_rel_err(),
        report.tol,
        if report.passed() { "pass" } else { "FAIL" }
    ));
    s
}
