//! The hierarchical tagger/classifier:
//!
//! ```text
//! ids ─ embedding ─ BiLSTM-1 ─┬─ POS head        (per position, clean H1)
//!                             ├─ language head   (per position, clean H1)
//!                             └─ dropout ─ BiLSTM-2 ─┬─ LM head        (terminal H2)
//!                                                    └─ sentiment head ([terminal; max; avg] of H2)
//! ```

mod checkpoint;
mod groups;
mod heads;

use std::fmt;
use std::str::FromStr;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use groups::{GroupSet, ParamGroup};
pub use heads::{make_lm_examples, LmExample, SentimentOutput, SentimentRep, TaggingOutput};

use crate::corpus::EncodedSample;
use crate::nn::{
    bilstm_backward, bilstm_forward, dropout_mask, embed_backward, embed_lookup, BiLstmOutput,
    DropoutMask, LstmCellParams, NnError, ParamSet, RngState, Tensor,
};

pub const EMBED_DIM: usize = 64;
pub const HIDDEN_DIM: usize = 64;
pub const DROPOUT: f64 = 0.2;
pub const N_SENTIMENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub n_pos: usize,
    pub n_lang: usize,
}

impl ModelDims {
    /// 64-wide embeddings and 64-wide LSTM cells.
    pub fn standard(vocab: usize, n_pos: usize, n_lang: usize) -> Self {
        Self {
            vocab,
            emb: EMBED_DIM,
            hidden: HIDDEN_DIM,
            n_pos,
            n_lang,
        }
    }

    /// Width of `H_i` for either layer (both directions).
    pub fn state_width(&self) -> usize {
        2 * self.hidden
    }

    /// Width of the sentiment representation `[terminal; max; avg]`.
    pub fn sentiment_width(&self) -> usize {
        3 * self.state_width()
    }
}

/// Training objective of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Lang,
    Pos,
    /// Both tagging heads on one forward pass, losses summed.
    PosLang,
    Lm,
    Sentiment,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Lang => "lang",
            Task::Pos => "pos",
            Task::PosLang => "pos+lang",
            Task::Lm => "lm",
            Task::Sentiment => "sentiment",
        }
    }

    /// Whether the task needs the second BiLSTM layer.
    pub fn uses_layer2(self) -> bool {
        matches!(self, Task::Lm | Task::Sentiment)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lang" => Ok(Task::Lang),
            "pos" => Ok(Task::Pos),
            "pos+lang" | "poslang" => Ok(Task::PosLang),
            "lm" => Ok(Task::Lm),
            "sentiment" => Ok(Task::Sentiment),
            other => Err(ModelError::UnknownTask(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("subword id {id} outside the model vocabulary of {vocab}")]
    VocabMismatch { id: usize, vocab: usize },
    #[error("sample lacks the labels needed for task `{0}`")]
    MissingLabels(Task),
    #[error("empty input")]
    Empty,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// All learnable parameters of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct HierModel {
    pub dims: ModelDims,
    pub dropout: f64,
    pub embedding: Tensor,
    pub lstm1_fwd: LstmCellParams,
    pub lstm1_bwd: LstmCellParams,
    pub lstm2_fwd: LstmCellParams,
    pub lstm2_bwd: LstmCellParams,
    pub pos_w: Tensor,
    pub pos_b: Tensor,
    pub lang_w: Tensor,
    pub lang_b: Tensor,
    pub lm_w: Tensor,
    pub lm_b: Tensor,
    pub sent_w: Tensor,
    pub sent_b: Tensor,
}

/// Tensor names in canonical order, with their group.
pub const PARAM_NAMES: [(&str, ParamGroup); 21] = [
    ("embedding", ParamGroup::Embedding),
    ("lstm1_fwd.w_x", ParamGroup::Lstm1),
    ("lstm1_fwd.w_h", ParamGroup::Lstm1),
    ("lstm1_fwd.b", ParamGroup::Lstm1),
    ("lstm1_bwd.w_x", ParamGroup::Lstm1),
    ("lstm1_bwd.w_h", ParamGroup::Lstm1),
    ("lstm1_bwd.b", ParamGroup::Lstm1),
    ("lstm2_fwd.w_x", ParamGroup::Lstm2),
    ("lstm2_fwd.w_h", ParamGroup::Lstm2),
    ("lstm2_fwd.b", ParamGroup::Lstm2),
    ("lstm2_bwd.w_x", ParamGroup::Lstm2),
    ("lstm2_bwd.w_h", ParamGroup::Lstm2),
    ("lstm2_bwd.b", ParamGroup::Lstm2),
    ("head_pos.w", ParamGroup::Heads),
    ("head_pos.b", ParamGroup::Heads),
    ("head_lang.w", ParamGroup::Heads),
    ("head_lang.b", ParamGroup::Heads),
    ("head_lm.w", ParamGroup::Heads),
    ("head_lm.b", ParamGroup::Heads),
    ("head_sentiment.w", ParamGroup::Heads),
    ("head_sentiment.b", ParamGroup::Heads),
];

pub fn param_names() -> impl Iterator<Item = (&'static str, ParamGroup)> {
    PARAM_NAMES.into_iter()
}

fn glorot(rows: usize, cols: usize, rng: &mut RngState) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let vals = (0..rows * cols).map(|_| rng.uniform(-limit, limit)).collect();
    Tensor::from_vec(&[rows, cols], vals).expect("shape matches")
}

impl HierModel {
    /// Deterministic initialization from `seed`.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = RngState::with_stream(seed, 0x1417);
        let (e, h, w) = (dims.emb, dims.hidden, dims.state_width());
        Self {
            dims,
            dropout: DROPOUT,
            embedding: glorot(dims.vocab, e, &mut rng),
            lstm1_fwd: LstmCellParams::init(e, h, &mut rng),
            lstm1_bwd: LstmCellParams::init(e, h, &mut rng),
            lstm2_fwd: LstmCellParams::init(w, h, &mut rng),
            lstm2_bwd: LstmCellParams::init(w, h, &mut rng),
            pos_w: glorot(dims.n_pos, w, &mut rng),
            pos_b: Tensor::zeros(&[dims.n_pos]),
            lang_w: glorot(dims.n_lang, w, &mut rng),
            lang_b: Tensor::zeros(&[dims.n_lang]),
            lm_w: glorot(dims.vocab, w, &mut rng),
            lm_b: Tensor::zeros(&[dims.vocab]),
            sent_w: glorot(N_SENTIMENT, dims.sentiment_width(), &mut rng),
            sent_b: Tensor::zeros(&[N_SENTIMENT]),
        }
    }

    /// All-zero parameters of the right shapes (checkpoint loading target).
    pub fn zeros(dims: ModelDims) -> Self {
        let (e, h, w) = (dims.emb, dims.hidden, dims.state_width());
        Self {
            dims,
            dropout: DROPOUT,
            embedding: Tensor::zeros(&[dims.vocab, e]),
            lstm1_fwd: LstmCellParams::zeros(e, h),
            lstm1_bwd: LstmCellParams::zeros(e, h),
            lstm2_fwd: LstmCellParams::zeros(w, h),
            lstm2_bwd: LstmCellParams::zeros(w, h),
            pos_w: Tensor::zeros(&[dims.n_pos, w]),
            pos_b: Tensor::zeros(&[dims.n_pos]),
            lang_w: Tensor::zeros(&[dims.n_lang, w]),
            lang_b: Tensor::zeros(&[dims.n_lang]),
            lm_w: Tensor::zeros(&[dims.vocab, w]),
            lm_b: Tensor::zeros(&[dims.vocab]),
            sent_w: Tensor::zeros(&[N_SENTIMENT, dims.sentiment_width()]),
            sent_b: Tensor::zeros(&[N_SENTIMENT]),
        }
    }

    /// Tensors in canonical order (matching [`param_names`]).
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.embedding];
        for cell in [&self.lstm1_fwd, &self.lstm1_bwd, &self.lstm2_fwd, &self.lstm2_bwd] {
            v.extend(cell.tensors());
        }
        v.extend([
            &self.pos_w, &self.pos_b, &self.lang_w, &self.lang_b, &self.lm_w, &self.lm_b,
            &self.sent_w, &self.sent_b,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.embedding];
        for cell in [
            &mut self.lstm1_fwd,
            &mut self.lstm1_bwd,
            &mut self.lstm2_fwd,
            &mut self.lstm2_bwd,
        ] {
            v.extend(cell.tensors_mut());
        }
        v.extend([
            &mut self.pos_w,
            &mut self.pos_b,
            &mut self.lang_w,
            &mut self.lang_b,
            &mut self.lm_w,
            &mut self.lm_b,
            &mut self.sent_w,
            &mut self.sent_b,
        ]);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Tensor names of each group, deepest group first. With `task`, the heads
    /// group is narrowed to that task's head(s).
    pub fn param_groups(&self, task: Option<Task>) -> [(ParamGroup, Vec<&'static str>); 4] {
        ParamGroup::ALL.map(|g| {
            let names = param_names()
                .filter(|(name, pg)| *pg == g && (g != ParamGroup::Heads || head_belongs(name, task)))
                .map(|(name, _)| name)
                .collect();
            (g, names)
        })
    }

    pub fn zero_grads(&mut self) {
        self.tensors_mut().into_iter().for_each(Tensor::zero_grad);
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::Empty);
        }
        match ids.iter().find(|&&id| id >= self.dims.vocab) {
            Some(&id) => Err(ModelError::VocabMismatch {
                id,
                vocab: self.dims.vocab,
            }),
            None => Ok(()),
        }
    }

    /// Run the encoder stack. Layer 2 (and its input dropout) only when `deep`.
    pub fn trace(
        &self,
        ids: &[usize],
        deep: bool,
        training: bool,
        rng: &mut RngState,
    ) -> Result<BiLstmTrace, ModelError> {
        self.check_ids(ids)?;
        let emb = embed_lookup(&self.embedding, ids)?;
        let layer1 = bilstm_forward(&emb, &self.lstm1_fwd, &self.lstm1_bwd)?;
        let (layer2, mask) = if deep {
            let mask = dropout_mask(layer1.states.len(), self.dropout, rng, training)?;
            let mut input = layer1.states.clone();
            mask.apply(input.values_mut());
            let out = bilstm_forward(&input, &self.lstm2_fwd, &self.lstm2_bwd)?;
            (Some(out), mask)
        } else {
            (None, DropoutMask::identity())
        };
        Ok(BiLstmTrace {
            ids: ids.to_vec(),
            layer1,
            mask,
            layer2,
        })
    }

    /// Backpropagate grads arriving at the layer outputs down the stack,
    /// touching only unfrozen groups and stopping once nothing below needs grads.
    pub fn backward_trace(
        &mut self,
        trace: &BiLstmTrace,
        d_h1: Option<&[f64]>,
        d_h2: Option<(&[f64], &[f64])>,
        unfrozen: GroupSet,
    ) {
        let below_l2 = unfrozen.contains(ParamGroup::Lstm1) || unfrozen.contains(ParamGroup::Embedding);
        let n = trace.len();
        let w = self.dims.state_width();
        let mut d_states1: Option<Vec<f64>> = d_h1.map(<[f64]>::to_vec);

        if let (Some((d_states, d_term)), Some(l2)) = (d_h2, &trace.layer2) {
            if unfrozen.contains(ParamGroup::Lstm2) || below_l2 {
                let dx = bilstm_backward(
                    &mut self.lstm2_fwd,
                    &mut self.lstm2_bwd,
                    l2,
                    d_states,
                    d_term,
                    unfrozen.contains(ParamGroup::Lstm2),
                    below_l2,
                );
                if let Some(mut dx) = dx {
                    trace.mask.backward(&mut dx);
                    match &mut d_states1 {
                        Some(acc) => acc.iter_mut().zip(&dx).for_each(|(a, b)| *a += b),
                        None => d_states1 = Some(dx),
                    }
                }
            }
        }

        let Some(d1) = d_states1 else { return };
        let emb_unfrozen = unfrozen.contains(ParamGroup::Embedding);
        if !(unfrozen.contains(ParamGroup::Lstm1) || emb_unfrozen) {
            return;
        }
        let zeros = vec![0.0; w];
        debug_assert_eq!(d1.len(), n * w);
        let dx = bilstm_backward(
            &mut self.lstm1_fwd,
            &mut self.lstm1_bwd,
            &trace.layer1,
            &d1,
            &zeros,
            unfrozen.contains(ParamGroup::Lstm1),
            emb_unfrozen,
        );
        if let Some(dx) = dx {
            embed_backward(&mut self.embedding, &trace.ids, &dx);
        }
    }
}

fn head_belongs(name: &str, task: Option<Task>) -> bool {
    let Some(task) = task else { return true };
    let head = name.trim_start_matches("head_").split('.').next().unwrap_or("");
    match task {
        Task::Lang => head == "lang",
        Task::Pos => head == "pos",
        Task::PosLang => head == "pos" || head == "lang",
        Task::Lm => head == "lm",
        Task::Sentiment => head == "sentiment",
    }
}

/// Encoder activations of one sample: `H^(1)`, `H^(2)` and their terminal
/// vectors, plus what backward needs.
#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    ids: Vec<usize>,
    layer1: BiLstmOutput,
    mask: DropoutMask,
    layer2: Option<BiLstmOutput>,
}

impl BiLstmTrace {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `n x 2h` layer-1 states.
    pub fn h1(&self) -> &Tensor {
        &self.layer1.states
    }

    pub fn h1_terminal(&self) -> &[f64] {
        &self.layer1.terminal
    }

    pub fn h2(&self) -> Option<&Tensor> {
        self.layer2.as_ref().map(|l| &l.states)
    }

    pub fn h2_terminal(&self) -> Option<&[f64]> {
        self.layer2.as_ref().map(|l| l.terminal.as_slice())
    }
}

impl ParamSet for HierModel {
    fn param_count(&self) -> usize {
        PARAM_NAMES.len()
    }

    fn param(&self, i: usize) -> &Tensor {
        self.tensors()[i]
    }

    fn param_mut(&mut self, i: usize) -> &mut Tensor {
        self.tensors_mut().swap_remove(i)
    }

    fn param_name(&self, i: usize) -> String {
        param_names().nth(i).map(|p| p.0.to_string()).unwrap_or_default()
    }
}

/// Options shared by every loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    pub training: bool,
    pub unfrozen: GroupSet,
    /// Prefix positions sampled per sentence for the LM task.
    pub lm_prefixes: usize,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            training: true,
            unfrozen: GroupSet::all(),
            lm_prefixes: 4,
        }
    }
}

/// Check that a sample carries what `task` needs.
pub fn has_labels(sample: &EncodedSample, task: Task) -> bool {
    match task {
        Task::Lang => sample.lang_labels.is_some(),
        Task::Pos => sample.pos_labels.is_some(),
        Task::PosLang => sample.lang_labels.is_some() && sample.pos_labels.is_some(),
        Task::Lm => !sample.is_empty(),
        Task::Sentiment => sample.sentiment.is_some(),
    }
}
