use cmcl_core::corpus::{BOS_ID, RESERVED};
use cmcl_core::model::*;
use cmcl_core::gradsuite::micro_corpus;
use cmcl_core::nn::*;

const R: usize = RESERVED.len();

fn dims(rng: &mut RngState) -> ModelDims {
    ModelDims {
        vocab: R + 2 + rng.below(5),
        emb: 1 + rng.below(3),
        hidden: 1 + rng.below(3),
        n_pos: 2 + rng.below(3),
        n_lang: 2 + rng.below(2),
    }
}

#[test]
fn partial_unfreezing_matches_full_gradients_on_unfrozen_groups() {
    let mut rng = RngState::new(77);
    let d = dims(&mut rng);
    let batch = micro_corpus(&d, &mut rng);
    for task in [Task::Sentiment, Task::Lm, Task::PosLang] {
        let mut full = HierModel::init(d, 1);
        full.task_loss(task, &batch, &LossOptions::default(), &mut RngState::new(3)).unwrap();
        for k in 0..=4 {
            let unfrozen = GroupSet::top(k);
            let mut part = HierModel::init(d, 1);
            let opts = LossOptions { unfrozen, ..LossOptions::default() };
            let loss = part.task_loss(task, &batch, &opts, &mut RngState::new(3)).unwrap();
            assert!(loss.is_finite());
            for (i, (name, group)) in param_names().enumerate() {
                let (a, b) = (part.param(i).grad(), full.param(i).grad());
                if unfrozen.contains(group) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{task} k={k} {name}");
                    }
                } else {
                    assert!(a.iter().all(|&g| g == 0.0), "{task} k={k}: frozen {name} got a gradient");
                }
            }
        }
    }
}

#[test]
fn batch_loss_is_mean_of_single_losses() {
    let mut rng = RngState::new(5);
    let d = dims(&mut rng);
    let batch = micro_corpus(&d, &mut rng);
    let mut m = HierModel::init(d, 2);
    let eval = LossOptions { training: false, unfrozen: GroupSet::none(), lm_prefixes: 4 };
    let mut r = RngState::new(0);
    let pair = m.task_loss(Task::Sentiment, &batch[..2], &eval, &mut r).unwrap();
    let a = m.task_loss(Task::Sentiment, &batch[..1], &eval, &mut r).unwrap();
    let b = m.task_loss(Task::Sentiment, &batch[1..2], &eval, &mut r).unwrap();
    assert!((pair - (a + b) / 2.0).abs() < 1e-12);
}

#[test]
fn zero_sentiment_head_gives_ln3_and_saturated_head_gives_tiny_loss() {
    let mut rng = RngState::new(6);
    let d = dims(&mut rng);
    let mut batch = micro_corpus(&d, &mut rng);
    batch.iter_mut().for_each(|s| s.sentiment = Some(2));
    let mut m = HierModel::init(d, 2);
    m.sent_w.values_mut().iter_mut().for_each(|v| *v = 0.0);
    let eval = LossOptions { training: false, unfrozen: GroupSet::none(), lm_prefixes: 4 };
    let loss = m.task_loss(Task::Sentiment, &batch, &eval, &mut RngState::new(0)).unwrap();
    assert!((loss - 3f64.ln()).abs() < 1e-12);

    m.sent_b.values_mut().copy_from_slice(&[0.0, 0.0, 20.0]);
    let loss = m.task_loss(Task::Sentiment, &batch, &eval, &mut RngState::new(0)).unwrap();
    assert!(loss < 1e-4, "{loss}");
}

#[test]
fn dropout_off_forward_is_deterministic() {
    let mut rng = RngState::new(8);
    let d = dims(&mut rng);
    let batch = micro_corpus(&d, &mut rng);
    let m = HierModel::init(d, 4);
    let ids = &batch[0].subword_ids;
    assert_eq!(m.forward_sentiment(ids).unwrap().probs, m.forward_sentiment(ids).unwrap().probs);
    assert_eq!(m.forward_lm(ids).unwrap(), m.forward_lm(ids).unwrap());
    let (a, b) = (m.forward_tagging(ids).unwrap(), m.forward_tagging(ids).unwrap());
    assert_eq!(a.pos_probs, b.pos_probs);
}

#[test]
fn standard_dims_shape_audit() {
    let m = HierModel::init(ModelDims::standard(200, 12, 3), 0);
    let ids = [R, R + 1, R + 2];
    let out = m.forward_sentiment(&ids).unwrap();
    assert_eq!(out.rep.h_s.len(), 384);
    for j in 0..128 {
        assert!(out.rep.h_s[128 + j] >= out.rep.h_s[256 + j]);
    }
    let t = m.forward_tagging(&ids[..1]).unwrap();
    assert_eq!(t.pos_probs.shape(), &[1, 12]);
    assert_eq!(t.lang_probs.shape(), &[1, 3]);
}

#[test]
fn lm_is_near_uniform_at_init() {
    let m = HierModel::init(ModelDims::standard(1000, 12, 3), 11);
    let mut rng = RngState::new(12);
    for _ in 0..10 {
        let n = 1 + rng.below(15);
        let prefix: Vec<usize> = (0..n).map(|_| R + rng.below(1000 - R)).collect();
        let p = m.forward_lm(&prefix).unwrap();
        let (lo, hi) = p.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(hi / lo < 10.0, "ratio {}", hi / lo);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn overfit_lm_reproduces_sentence_by_greedy_decoding() {
    let d = ModelDims { vocab: 20, emb: 16, hidden: 16, n_pos: 2, n_lang: 2 };
    let sentence = vec![9, 14, 6, 19, 11, 9, 7];
    let mut m = HierModel::init(d, 3);
    let examples = make_lm_examples(&sentence, sentence.len(), &mut RngState::new(0));
    let opts = LossOptions { training: false, ..LossOptions::default() };
    let mut rng = RngState::new(1);
    for _ in 0..400 {
        m.lm_examples_loss(&examples, &opts, &mut rng).unwrap();
        let mut tensors = m.tensors_mut();
        let params = param_names().zip(tensors.iter_mut()).map(|((n, _), t)| (n.to_string(), &mut **t)).collect();
        sgd_step(&mut [SgdGroup { lr: 0.5, frozen: false, params }], Some(5.0)).unwrap();
    }
    let mut decoded = vec![BOS_ID];
    for _ in 0..sentence.len() {
        let p = m.forward_lm(&decoded).unwrap();
        let next = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        decoded.push(next);
    }
    assert_eq!(&decoded[1..], sentence.as_slice());
}
