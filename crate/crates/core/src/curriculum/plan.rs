use super::TrainError;
use crate::model::{GroupSet, Task};

/// One training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub task: Task,
    /// Key into the corpora map.
    pub corpus: String,
    pub epochs: usize,
    pub base_lr: f64,
    pub discriminative: bool,
    pub gradual_unfreeze: bool,
    pub batch_size: usize,
    /// Stop after this many epochs without dev-loss improvement, restoring the best weights.
    pub patience: Option<usize>,
    pub clip_norm: Option<f64>,
    pub lm_prefixes: usize,
    /// Groups allowed to train at all; intersected with the freeze schedule.
    pub trainable: GroupSet,
}

impl StageSpec {
    pub fn new(task: Task, corpus: impl Into<String>, epochs: usize) -> Self {
        Self {
            task,
            corpus: corpus.into(),
            epochs,
            base_lr: 0.04,
            discriminative: false,
            gradual_unfreeze: false,
            batch_size: 4,
            patience: None,
            clip_norm: Some(5.0),
            lm_prefixes: 4,
            trainable: GroupSet::all(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidPlan(m));
        if self.epochs == 0 {
            return bad(format!("{} stage needs at least one epoch", self.task));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("{} stage learning rate must be positive", self.task));
        }
        if self.batch_size == 0 {
            return bad(format!("{} stage batch size must be positive", self.task));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad(format!("{} stage clip norm must be positive", self.task));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumPlan {
    pub name: String,
    pub stages: Vec<StageSpec>,
    pub seed: u64,
}

impl CurriculumPlan {
    /// Non-empty, every stage valid, at most one sentiment stage and only last.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.stages.is_empty() {
            return Err(TrainError::InvalidPlan("plan has no stages".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.validate()?;
            if s.task == Task::Sentiment && i + 1 != self.stages.len() {
                return Err(TrainError::InvalidPlan("the sentiment stage must be last".into()));
            }
        }
        Ok(())
    }

    pub fn tasks(&self) -> Vec<Task> {
        self.stages.iter().map(|s| s.task).collect()
    }
}

pub const PRESETS: [&str; 6] = [
    "scratch",
    "pos_langid",
    "full",
    "lm_only",
    "full_no_unfreeze",
    "full_no_disc",
];

/// Knobs shared by every preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetOptions {
    pub base_lr: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub sentiment_epochs: usize,
    pub patience: Option<usize>,
    pub clip_norm: Option<f64>,
    pub lm_prefixes: usize,
    /// Train POS and language ID as one two-head stage instead of two stages.
    pub joint_tagging: bool,
    pub seed: u64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            base_lr: 0.04,
            batch_size: 4,
            pretrain_epochs: 10,
            sentiment_epochs: 25,
            patience: Some(3),
            clip_norm: Some(5.0),
            lm_prefixes: 4,
            joint_tagging: false,
            seed: 0,
        }
    }
}

/// Build one of the named plans in [`PRESETS`].
pub fn preset(name: &str, opts: &PresetOptions) -> Result<CurriculumPlan, TrainError> {
    let stage = |task: Task, corpus: &str, epochs: usize| StageSpec {
        base_lr: opts.base_lr,
        batch_size: opts.batch_size,
        clip_norm: opts.clip_norm,
        lm_prefixes: opts.lm_prefixes,
        ..StageSpec::new(task, corpus, epochs)
    };
    let pretrain = |task: Task, corpus: &str, discriminative: bool| StageSpec {
        patience: opts.patience,
        discriminative,
        ..stage(task, corpus, opts.pretrain_epochs)
    };
    let sentiment = |transfer: bool| StageSpec {
        discriminative: transfer,
        gradual_unfreeze: transfer,
        ..stage(Task::Sentiment, "sentiment", opts.sentiment_epochs)
    };
    let tagging = || {
        if opts.joint_tagging {
            vec![pretrain(Task::PosLang, "pos", false)]
        } else {
            vec![pretrain(Task::Lang, "lang", false), pretrain(Task::Pos, "pos", false)]
        }
    };
    let full = || {
        let mut s = tagging();
        s.push(pretrain(Task::Lm, "lm", true));
        s.push(sentiment(true));
        s
    };

    let stages = match name {
        "scratch" => vec![sentiment(false)],
        "pos_langid" => {
            let mut s = tagging();
            s.push(sentiment(true));
            s
        }
        "full" => full(),
        "lm_only" => vec![pretrain(Task::Lm, "lm", false), sentiment(true)],
        "full_no_unfreeze" => {
            let mut s = full();
            s.last_mut().expect("non-empty").gradual_unfreeze = false;
            s
        }
        "full_no_disc" => {
            let mut s = full();
            s.last_mut().expect("non-empty").discriminative = false;
            s
        }
        other => return Err(TrainError::UnknownPreset(other.to_string())),
    };
    let plan = CurriculumPlan {
        name: name.to_string(),
        stages,
        seed: opts.seed,
    };
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> CurriculumPlan {
        preset(name, &PresetOptions::default()).unwrap()
    }

    #[test]
    fn scratch_is_one_flat_sentiment_stage() {
        let plan = p("scratch");
        assert_eq!(plan.stages.len(), 1);
        let s = &plan.stages[0];
        assert_eq!((s.task, s.epochs), (Task::Sentiment, 25));
        assert!(!s.discriminative && !s.gradual_unfreeze);
        assert_eq!((s.base_lr, s.batch_size), (0.04, 4));
    }

    #[test]
    fn preset_task_orders() {
        use Task::*;
        assert_eq!(p("full").tasks(), vec![Lang, Pos, Lm, Sentiment]);
        assert_eq!(p("pos_langid").tasks(), vec![Lang, Pos, Sentiment]);
        assert_eq!(p("lm_only").tasks(), vec![Lm, Sentiment]);
        assert_eq!(p("full_no_unfreeze").tasks(), p("full").tasks());
        let joint = preset("full", &PresetOptions { joint_tagging: true, ..Default::default() }).unwrap();
        assert_eq!(joint.tasks(), vec![PosLang, Lm, Sentiment]);
    }

    #[test]
    fn transfer_flags() {
        let full = p("full");
        assert!(!full.stages[0].discriminative);
        assert!(full.stages[2].discriminative);
        assert!(full.stages[3].discriminative && full.stages[3].gradual_unfreeze);
        assert!(!p("lm_only").stages[0].discriminative);
        let s = p("full_no_disc").stages[3].clone();
        assert!(!s.discriminative && s.gradual_unfreeze);
        let s = p("full_no_unfreeze").stages[3].clone();
        assert!(s.discriminative && !s.gradual_unfreeze);
        assert_eq!(full.stages[0].patience, Some(3));
        assert_eq!(full.stages[3].patience, None);
    }

    #[test]
    fn all_presets_build_and_unknown_fails() {
        for name in PRESETS {
            assert_eq!(p(name).stages.last().unwrap().task, Task::Sentiment);
        }
        assert!(matches!(
            preset("nope", &PresetOptions::default()),
            Err(TrainError::UnknownPreset(_))
        ));
    }

    #[test]
    fn plan_validation() {
        let mut plan = p("full");
        plan.stages.swap(2, 3);
        assert!(plan.validate().is_err());
        let mut plan = p("scratch");
        plan.stages[0].epochs = 0;
        assert!(plan.validate().is_err());
        plan.stages.clear();
        assert!(plan.validate().is_err());
        let mut plan = p("scratch");
        plan.stages[0].base_lr = 0.0;
        assert!(plan.validate().is_err());
    }
}
