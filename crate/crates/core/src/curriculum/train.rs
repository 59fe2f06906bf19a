use std::collections::BTreeMap;

use super::{freeze_schedule, lr_ladder, CurriculumPlan, LrLadder, StageSpec, TrainError};
use crate::corpus::EncodedSample;
use crate::eval::perplexity;
use crate::model::{
    has_labels, make_lm_examples, param_names, GroupSet, HierModel, LossOptions, ModelError,
    ParamGroup, Task,
};
use crate::nn::{sgd_step, NnError, RngState, SgdGroup, StepStats};

/// Train and dev samples for one corpus id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskData {
    pub train: Vec<EncodedSample>,
    pub dev: Vec<EncodedSample>,
}

pub type Corpora = BTreeMap<String, TaskData>;

/// Metrics of one epoch. `dev_metric` is accuracy for sentiment and tagging
/// stages and perplexity for LM stages.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based stage index.
    pub stage: usize,
    /// 1-based epoch within the stage.
    pub epoch: usize,
    pub task: Task,
    pub train_loss: f64,
    pub dev_metric: f64,
    pub dev_loss: f64,
    pub lr_ladder: [f64; 4],
    pub unfrozen_groups: GroupSet,
    pub steps: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub task: Task,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose weights the stage ended with.
    pub kept_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub stages: Vec<StageSummary>,
}

impl TrainReport {
    pub fn final_stage_records(&self) -> impl Iterator<Item = &EpochRecord> {
        let last = self.stages.len();
        self.records.iter().filter(move |r| r.stage == last)
    }

    pub fn final_dev_metric(&self) -> Option<f64> {
        self.final_stage_records().last().map(|r| r.dev_metric)
    }
}

/// First epoch of the final stage whose dev metric reaches `threshold`.
pub fn epochs_to_threshold(report: &TrainReport, threshold: f64) -> Option<usize> {
    report
        .final_stage_records()
        .find(|r| r.dev_metric >= threshold)
        .map(|r| r.epoch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevScore {
    pub metric: f64,
    pub loss: f64,
}

fn xent(p: f64) -> f64 {
    -p.max(f64::MIN_POSITIVE).ln()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

/// Dropout-off evaluation of `task` on `samples`. LM positions are drawn from
/// `rng`, so a cloned generator gives the same examples every call.
pub fn evaluate(
    model: &HierModel,
    task: Task,
    samples: &[EncodedSample],
    lm_prefixes: usize,
    rng: &mut RngState,
) -> Result<DevScore, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::Empty);
    }
    let (mut hits, mut count, mut loss) = (0usize, 0usize, 0.0);
    for s in samples {
        if !has_labels(s, task) {
            return Err(ModelError::MissingLabels(task));
        }
        match task {
            Task::Sentiment => {
                let label = s.sentiment.unwrap_or_default();
                let probs = model.forward_sentiment(&s.subword_ids)?.probs;
                hits += usize::from(argmax(&probs) == label);
                loss += xent(probs[label]);
                count += 1;
            }
            Task::Lm => {
                for ex in make_lm_examples(&s.subword_ids, lm_prefixes.max(1), rng) {
                    let probs = model.forward_lm(&ex.prefix)?;
                    loss += xent(probs[ex.target]);
                    count += 1;
                }
            }
            Task::Pos | Task::Lang | Task::PosLang => {
                let out = model.forward_tagging(&s.subword_ids)?;
                let heads = [
                    (matches!(task, Task::Pos | Task::PosLang), &out.pos_probs, &s.pos_labels),
                    (matches!(task, Task::Lang | Task::PosLang), &out.lang_probs, &s.lang_labels),
                ];
                for (used, probs, labels) in heads {
                    let (true, Some(labels)) = (used, labels) else { continue };
                    for (t, &label) in labels.iter().enumerate() {
                        hits += usize::from(argmax(probs.row(t)) == label);
                        loss += xent(probs.row(t)[label]);
                        count += 1;
                    }
                }
            }
        }
    }
    let mean = loss / count as f64;
    let metric = match task {
        Task::Lm => perplexity(&[mean]).unwrap_or(f64::INFINITY),
        _ => hits as f64 / count as f64,
    };
    let loss = if task == Task::PosLang { 2.0 * mean } else { mean };
    Ok(DevScore { metric, loss })
}

/// One SGD step with per-group rates; frozen groups are left untouched.
pub fn optimizer_step(
    model: &mut HierModel,
    ladder: &LrLadder,
    unfrozen: GroupSet,
    clip_norm: Option<f64>,
) -> Result<StepStats, NnError> {
    let mut groups: Vec<SgdGroup<'_>> = ParamGroup::ALL
        .iter()
        .map(|&g| SgdGroup {
            lr: ladder.rate(g),
            frozen: !unfrozen.contains(g),
            params: Vec::new(),
        })
        .collect();
    for ((name, g), t) in param_names().zip(model.tensors_mut()) {
        groups[g.index()].params.push((name.to_string(), t));
    }
    sgd_step(&mut groups, clip_norm)
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl FnMut() -> u64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_millis() as u64
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl FnMut() -> u64 {
    || 0
}

fn check_labels(name: &str, data: &TaskData, task: Task) -> Result<(), TrainError> {
    for (split, samples) in [("train", &data.train), ("dev", &data.dev)] {
        if samples.is_empty() {
            return Err(TrainError::EmptyCorpus {
                corpus: name.to_string(),
                split,
            });
        }
        if !samples.iter().all(|s| has_labels(s, task)) {
            return Err(TrainError::LabelMismatch {
                corpus: name.to_string(),
                task,
            });
        }
    }
    Ok(())
}

/// Train one stage in place. `stage_index` is 1-based and only labels the records.
pub fn run_stage(
    model: &mut HierModel,
    stage_index: usize,
    stage: &StageSpec,
    data: &TaskData,
    rng: &mut RngState,
    sink: &mut dyn FnMut(&EpochRecord, &HierModel),
) -> Result<(Vec<EpochRecord>, StageSummary), TrainError> {
    stage.validate()?;
    check_labels(&stage.corpus, data, stage.task)?;
    let ladder = lr_ladder(stage.base_lr, stage.discriminative);
    let schedule = freeze_schedule(ParamGroup::ALL.len(), stage.gradual_unfreeze);
    let mut shuffle_rng = rng.split(1);
    let mut loss_rng = rng.split(2);
    let dev_rng = rng.split(3);
    let diverged = |epoch: usize, reason: String, last: &[f64]| TrainError::Divergence {
        stage: stage_index,
        task: stage.task,
        epoch,
        reason,
        last_losses: last.to_vec(),
    };

    let mut records = Vec::with_capacity(stage.epochs);
    let mut best: Option<(f64, usize, HierModel)> = None;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut recent: Vec<f64> = Vec::new();
    for epoch in 1..=stage.epochs {
        let mut elapsed = clock();
        let unfrozen = schedule.unfrozen(epoch);
        let unfrozen = stage.trainable.iter().filter(|g| unfrozen.contains(*g)).collect::<GroupSet>();
        let opts = LossOptions {
            training: true,
            unfrozen,
            lm_prefixes: stage.lm_prefixes,
        };
        shuffle_rng.shuffle(&mut order);
        let (mut total, mut steps) = (0.0, 0);
        for chunk in order.chunks(stage.batch_size) {
            let batch: Vec<EncodedSample> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let loss = model.task_loss(stage.task, &batch, &opts, &mut loss_rng)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, format!("loss became {loss}"), &recent));
            }
            optimizer_step(model, &ladder, unfrozen, stage.clip_norm)
                .map_err(|e| diverged(epoch, e.to_string(), &recent))?;
            if recent.len() == 5 {
                recent.remove(0);
            }
            recent.push(loss);
            total += loss * batch.len() as f64;
            steps += 1;
        }
        let dev = evaluate(model, stage.task, &data.dev, stage.lm_prefixes, &mut dev_rng.clone())?;
        let record = EpochRecord {
            stage: stage_index,
            epoch,
            task: stage.task,
            train_loss: total / data.train.len() as f64,
            dev_metric: dev.metric,
            dev_loss: dev.loss,
            lr_ladder: ladder.rates(),
            unfrozen_groups: unfrozen,
            steps,
            wall_ms: elapsed(),
        };
        sink(&record, model);
        records.push(record);

        if let Some(patience) = stage.patience {
            match &best {
                Some((loss, _, _)) if dev.loss >= *loss => {}
                _ => best = Some((dev.loss, epoch, model.clone())),
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if epoch - best_epoch >= patience && epoch < stage.epochs {
                stopped_early = true;
                break;
            }
        }
    }
    let epochs_run = records.len();
    let mut kept_epoch = epochs_run;
    if let Some((_, epoch, weights)) = best {
        if epoch != epochs_run {
            *model = weights;
            kept_epoch = epoch;
        }
    }
    let summary = StageSummary {
        task: stage.task,
        epochs_run,
        stopped_early,
        kept_epoch,
    };
    Ok((records, summary))
}

/// Run every stage of `plan` in order on the same model.
pub fn run_curriculum(
    plan: &CurriculumPlan,
    model: &mut HierModel,
    corpora: &Corpora,
    sink: &mut dyn FnMut(&EpochRecord, &HierModel),
) -> Result<TrainReport, TrainError> {
    plan.validate()?;
    for s in &plan.stages {
        let data = corpora
            .get(&s.corpus)
            .ok_or_else(|| TrainError::MissingCorpus(s.corpus.clone()))?;
        check_labels(&s.corpus, data, s.task)?;
    }
    let root = RngState::with_stream(plan.seed, 0x5EED);
    let mut report = TrainReport::default();
    for (i, stage) in plan.stages.iter().enumerate() {
        let mut rng = root.split(i as u64);
        let (records, summary) = run_stage(model, i + 1, stage, &corpora[&stage.corpus], &mut rng, sink)?;
        report.records.extend(records);
        report.stages.push(summary);
    }
    Ok(report)
}
