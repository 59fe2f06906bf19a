//! Append-only JSON-lines metrics log and the end-of-run summary.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use cmcl_core::curriculum::{EpochRecord, StageSummary};

use crate::{io_err, CliError};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLine {
    pub stage: usize,
    pub epoch: usize,
    pub task: String,
    pub train_loss: f64,
    pub dev_metric: f64,
    pub lr_ladder: [f64; 4],
    pub unfrozen_groups: Vec<String>,
    pub wall_ms: u64,
}

impl From<&EpochRecord> for EpochLine {
    fn from(r: &EpochRecord) -> Self {
        Self {
            stage: r.stage,
            epoch: r.epoch,
            task: r.task.to_string(),
            train_loss: r.train_loss,
            dev_metric: r.dev_metric,
            lr_ladder: r.lr_ladder,
            unfrozen_groups: r.unfrozen_groups.iter().map(|g| g.to_string()).collect(),
            wall_ms: r.wall_ms,
        }
    }
}

/// One JSON object per line, flushed after every record.
pub struct MetricsLog {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl MetricsLog {
    pub fn append(path: &Path) -> Result<Self, CliError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(record).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageLine {
    pub task: String,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub kept_epoch: usize,
}

impl From<&StageSummary> for StageLine {
    fn from(s: &StageSummary) -> Self {
        Self {
            task: s.task.to_string(),
            epochs_run: s.epochs_run,
            stopped_early: s.stopped_early,
            kept_epoch: s.kept_epoch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyLine {
    /// Which split the numbers come from.
    pub split: String,
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: String,
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub preset: String,
    pub seed: u64,
    pub encoder: String,
    pub stages: Vec<StageLine>,
    pub epoch_records: usize,
    pub threshold: f64,
    pub epochs_to_threshold: Option<usize>,
    pub final_dev_accuracy: Option<f64>,
    pub sentiment: Option<ClassifyLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceLine {
    pub event: &'static str,
    pub stage: usize,
    pub epoch: usize,
    pub task: String,
    pub reason: String,
    pub last_losses: Vec<f64>,
}
