//! Task heads, their losses and backward passes.

use super::{has_labels, BiLstmTrace, GroupSet, HierModel, LossOptions, ModelError, ParamGroup, Task};
use crate::corpus::{EncodedSample, BOS_ID};
use crate::nn::{
    affine, affine_backward, avgpool_backward, avgpool_time, maxpool_backward, maxpool_time,
    softmax, softmax_xent, softmax_xent_backward, RngState, Tensor,
};

/// Per-position distributions of both tagging heads.
#[derive(Debug, Clone)]
pub struct TaggingOutput {
    pub pos_probs: Tensor,
    pub lang_probs: Tensor,
}

/// `[terminal; max-pool; avg-pool]` of the second layer.
#[derive(Debug, Clone)]
pub struct SentimentRep {
    pub h_s: Vec<f64>,
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SentimentOutput {
    pub probs: Vec<f64>,
    pub rep: SentimentRep,
}

/// One next-subword prediction: `prefix` starts with BOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmExample {
    pub prefix: Vec<usize>,
    pub target: usize,
}

/// Sample up to `k` distinct target positions of `ids` (all of them when the
/// sentence is shorter), each predicted from BOS plus the subwords before it.
pub fn make_lm_examples(ids: &[usize], k: usize, rng: &mut RngState) -> Vec<LmExample> {
    let mut positions = if ids.len() <= k {
        (0..ids.len()).collect()
    } else {
        rng.sample_indices(ids.len(), k)
    };
    positions.sort_unstable();
    positions
        .into_iter()
        .map(|p| {
            let mut prefix = Vec::with_capacity(p + 1);
            prefix.push(BOS_ID);
            prefix.extend_from_slice(&ids[..p]);
            LmExample {
                prefix,
                target: ids[p],
            }
        })
        .collect()
}

fn with_bos(prefix: &[usize]) -> Vec<usize> {
    if prefix.first() == Some(&BOS_ID) {
        prefix.to_vec()
    } else {
        std::iter::once(BOS_ID).chain(prefix.iter().copied()).collect()
    }
}

fn sentiment_rep(trace: &BiLstmTrace) -> Result<SentimentRep, ModelError> {
    let h2 = trace.h2().ok_or(ModelError::Empty)?;
    let (mx, argmax) = maxpool_time(h2)?;
    let av = avgpool_time(h2)?;
    let mut h_s = Vec::with_capacity(3 * h2.cols());
    h_s.extend_from_slice(trace.h2_terminal().ok_or(ModelError::Empty)?);
    h_s.extend_from_slice(&mx);
    h_s.extend_from_slice(&av);
    Ok(SentimentRep { h_s, argmax })
}

fn below_heads(unfrozen: GroupSet) -> bool {
    [ParamGroup::Embedding, ParamGroup::Lstm1, ParamGroup::Lstm2]
        .into_iter()
        .any(|g| unfrozen.contains(g))
}

impl HierModel {
    /// Tag distributions for every subword from the clean first layer.
    pub fn forward_tagging(&self, ids: &[usize]) -> Result<TaggingOutput, ModelError> {
        let mut rng = RngState::new(0);
        let trace = self.trace(ids, false, false, &mut rng)?;
        let n = trace.len();
        let mut pos = Vec::with_capacity(n * self.dims.n_pos);
        let mut lang = Vec::with_capacity(n * self.dims.n_lang);
        for t in 0..n {
            let h = trace.h1().row(t);
            pos.extend(softmax(&affine(&self.pos_w, &self.pos_b, h)?));
            lang.extend(softmax(&affine(&self.lang_w, &self.lang_b, h)?));
        }
        Ok(TaggingOutput {
            pos_probs: Tensor::from_vec(&[n, self.dims.n_pos], pos)?,
            lang_probs: Tensor::from_vec(&[n, self.dims.n_lang], lang)?,
        })
    }

    /// Next-subword distribution after `prefix` (BOS is prepended if absent).
    pub fn forward_lm(&self, prefix: &[usize]) -> Result<Vec<f64>, ModelError> {
        let mut rng = RngState::new(0);
        let trace = self.trace(&with_bos(prefix), true, false, &mut rng)?;
        let h = trace.h2_terminal().ok_or(ModelError::Empty)?;
        Ok(softmax(&affine(&self.lm_w, &self.lm_b, h)?))
    }

    pub fn forward_sentiment(&self, ids: &[usize]) -> Result<SentimentOutput, ModelError> {
        let mut rng = RngState::new(0);
        let trace = self.trace(ids, true, false, &mut rng)?;
        let rep = sentiment_rep(&trace)?;
        let probs = softmax(&affine(&self.sent_w, &self.sent_b, &rep.h_s)?);
        Ok(SentimentOutput { probs, rep })
    }

    pub fn predict_sentiment(&self, ids: &[usize]) -> Result<usize, ModelError> {
        Ok(argmax(&self.forward_sentiment(ids)?.probs))
    }

    /// Argmax POS and language tag per subword.
    pub fn predict_tags(&self, ids: &[usize]) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
        let out = self.forward_tagging(ids)?;
        let n = out.pos_probs.rows();
        let pos = (0..n).map(|t| argmax(out.pos_probs.row(t))).collect();
        let lang = (0..n).map(|t| argmax(out.lang_probs.row(t))).collect();
        Ok((pos, lang))
    }

    /// Mean loss of `task` over `batch`. Gradients of the mean are accumulated
    /// into the groups in `opts.unfrozen` (and only the heads `task` uses);
    /// with no unfrozen group this is a pure evaluation.
    pub fn task_loss(
        &mut self,
        task: Task,
        batch: &[EncodedSample],
        opts: &LossOptions,
        rng: &mut RngState,
    ) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Empty);
        }
        if let Some(_bad) = batch.iter().find(|s| !has_labels(s, task)) {
            return Err(ModelError::MissingLabels(task));
        }
        match task {
            Task::Sentiment => self.sentiment_loss(batch, opts, rng),
            Task::Lm => self.lm_loss(batch, opts, rng),
            Task::Pos | Task::Lang | Task::PosLang => self.tagging_loss(task, batch, opts, rng),
        }
    }

    fn tagging_loss(
        &mut self,
        task: Task,
        batch: &[EncodedSample],
        opts: &LossOptions,
        rng: &mut RngState,
    ) -> Result<f64, ModelError> {
        let total: usize = batch.iter().map(EncodedSample::len).sum();
        let scale = 1.0 / total as f64;
        let heads = opts.unfrozen.contains(ParamGroup::Heads);
        let deeper = below_heads(opts.unfrozen);
        let use_pos = matches!(task, Task::Pos | Task::PosLang);
        let use_lang = matches!(task, Task::Lang | Task::PosLang);
        let w = self.dims.state_width();
        let mut loss = 0.0;
        for s in batch {
            let trace = self.trace(&s.subword_ids, false, opts.training, rng)?;
            let mut d_h1 = if deeper { vec![0.0; s.len() * w] } else { Vec::new() };
            for t in 0..s.len() {
                let h = trace.h1().row(t);
                let mut dh = deeper.then(|| &mut d_h1[t * w..(t + 1) * w]);
                if use_pos {
                    let label = s.pos_labels.as_ref().map_or(0, |l| l[t]);
                    let logits = affine(&self.pos_w, &self.pos_b, h)?;
                    let (p, l) = softmax_xent(&logits, label)?;
                    loss += l * scale;
                    if heads || deeper {
                        let d = softmax_xent_backward(&p, label, scale);
                        affine_backward(&mut self.pos_w, &mut self.pos_b, h, &d, heads, dh.as_deref_mut());
                    }
                }
                if use_lang {
                    let label = s.lang_labels.as_ref().map_or(0, |l| l[t]);
                    let logits = affine(&self.lang_w, &self.lang_b, h)?;
                    let (p, l) = softmax_xent(&logits, label)?;
                    loss += l * scale;
                    if heads || deeper {
                        let d = softmax_xent_backward(&p, label, scale);
                        affine_backward(&mut self.lang_w, &mut self.lang_b, h, &d, heads, dh);
                    }
                }
            }
            if deeper {
                self.backward_trace(&trace, Some(&d_h1), None, opts.unfrozen);
            }
        }
        Ok(loss)
    }

    fn lm_loss(
        &mut self,
        batch: &[EncodedSample],
        opts: &LossOptions,
        rng: &mut RngState,
    ) -> Result<f64, ModelError> {
        let examples: Vec<LmExample> = batch
            .iter()
            .flat_map(|s| make_lm_examples(&s.subword_ids, opts.lm_prefixes.max(1), rng))
            .collect();
        self.lm_examples_loss(&examples, opts, rng)
    }

    /// Mean next-subword loss over explicit examples.
    pub fn lm_examples_loss(
        &mut self,
        examples: &[LmExample],
        opts: &LossOptions,
        rng: &mut RngState,
    ) -> Result<f64, ModelError> {
        if examples.is_empty() {
            return Err(ModelError::Empty);
        }
        let scale = 1.0 / examples.len() as f64;
        let heads = opts.unfrozen.contains(ParamGroup::Heads);
        let deeper = below_heads(opts.unfrozen);
        let mut loss = 0.0;
        for ex in examples {
            if ex.target >= self.dims.vocab {
                return Err(ModelError::VocabMismatch {
                    id: ex.target,
                    vocab: self.dims.vocab,
                });
            }
            let trace = self.trace(&with_bos(&ex.prefix), true, opts.training, rng)?;
            let h = trace.h2_terminal().ok_or(ModelError::Empty)?;
            let logits = affine(&self.lm_w, &self.lm_b, h)?;
            let (p, l) = softmax_xent(&logits, ex.target)?;
            loss += l * scale;
            if heads || deeper {
                let d = softmax_xent_backward(&p, ex.target, scale);
                let mut d_term = vec![0.0; h.len()];
                affine_backward(&mut self.lm_w, &mut self.lm_b, h, &d, heads, deeper.then_some(&mut d_term[..]));
                if deeper {
                    let d_states = vec![0.0; trace.len() * self.dims.state_width()];
                    self.backward_trace(&trace, None, Some((&d_states, &d_term)), opts.unfrozen);
                }
            }
        }
        Ok(loss)
    }

    fn sentiment_loss(
        &mut self,
        batch: &[EncodedSample],
        opts: &LossOptions,
        rng: &mut RngState,
    ) -> Result<f64, ModelError> {
        let scale = 1.0 / batch.len() as f64;
        let heads = opts.unfrozen.contains(ParamGroup::Heads);
        let deeper = below_heads(opts.unfrozen);
        let w = self.dims.state_width();
        let mut loss = 0.0;
        for s in batch {
            let label = s.sentiment.unwrap_or_default();
            let trace = self.trace(&s.subword_ids, true, opts.training, rng)?;
            let rep = sentiment_rep(&trace)?;
            let logits = affine(&self.sent_w, &self.sent_b, &rep.h_s)?;
            let (p, l) = softmax_xent(&logits, label)?;
            loss += l * scale;
            if !(heads || deeper) {
                continue;
            }
            let d = softmax_xent_backward(&p, label, scale);
            let mut d_hs = vec![0.0; 3 * w];
            affine_backward(&mut self.sent_w, &mut self.sent_b, &rep.h_s, &d, heads, deeper.then_some(&mut d_hs[..]));
            if deeper {
                let mut d_states = Tensor::zeros(&[trace.len(), w]);
                maxpool_backward(&rep.argmax, &d_hs[w..2 * w], &mut d_states);
                avgpool_backward(&d_hs[2 * w..], &mut d_states);
                self.backward_trace(&trace, None, Some((d_states.values(), &d_hs[..w])), opts.unfrozen);
            }
        }
        Ok(loss)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
