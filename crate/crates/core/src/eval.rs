//! Classification, tagging and language-model metrics.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {gold} gold vs {pred} predicted")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("class id {id} outside 0..{k}")]
    ClassOutOfRange { id: usize, k: usize },
    #[error("unknown averaging `{0}`")]
    UnknownAveraging(String),
}

/// How per-class precision/recall are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Unweighted mean over classes.
    #[default]
    Macro,
    /// Mean weighted by gold support.
    Weighted,
}

impl FromStr for Averaging {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Self::Macro),
            "weighted" => Ok(Self::Weighted),
            other => Err(EvalError::UnknownAveraging(other.to_string())),
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Macro => "macro",
            Self::Weighted => "weighted",
        })
    }
}

/// `k x k` counts; rows are gold classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.k + pred]
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold * self.k + pred] += 1;
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        self.counts[gold * self.k..(gold + 1) * self.k].iter().sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.k).map(|g| self.get(g, pred)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the averaged precision and recall.
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classify_metrics(
    gold: &[usize],
    pred: &[usize],
    k: usize,
    averaging: Averaging,
) -> Result<ClassifyMetrics, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&g, &p) in gold.iter().zip(pred) {
        if let Some(&id) = [g, p].iter().find(|&&c| c >= k) {
            return Err(EvalError::ClassOutOfRange { id, k });
        }
        cm.add(g, p);
    }
    let total = cm.total();
    let (mut precision, mut recall) = (0.0, 0.0);
    for c in 0..k {
        let tp = cm.get(c, c);
        let w = match averaging {
            Averaging::Macro => 1.0 / k as f64,
            Averaging::Weighted => ratio(cm.row_sum(c), total),
        };
        precision += w * ratio(tp, cm.col_sum(c));
        recall += w * ratio(tp, cm.row_sum(c));
    }
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassifyMetrics {
        accuracy: ratio(cm.trace(), total),
        precision,
        recall,
        f1,
        confusion: cm,
    })
}

/// Micro accuracy over every position of every sequence.
pub fn tagging_accuracy(gold: &[Vec<usize>], pred: &[Vec<usize>]) -> Result<f64, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let (mut hit, mut total) = (0u64, 0u64);
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(EvalError::LengthMismatch {
                gold: g.len(),
                pred: p.len(),
            });
        }
        hit += g.iter().zip(p).filter(|(a, b)| a == b).count() as u64;
        total += g.len() as u64;
    }
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(ratio(hit, total))
}

/// `exp` of the mean per-example cross-entropy.
pub fn perplexity(losses: &[f64]) -> Result<f64, EvalError> {
    if losses.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok((losses.iter().sum::<f64>() / losses.len() as f64).exp())
}
