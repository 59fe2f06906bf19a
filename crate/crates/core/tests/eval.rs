use cmcl_core::eval::*;
use proptest::prelude::*;

/// Per-class counts straight from the pairs, no confusion matrix.
fn oracle_macro(gold: &[usize], pred: &[usize], k: usize) -> (f64, f64, f64, f64) {
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let pairs: Vec<(usize, usize)> = gold.iter().copied().zip(pred.iter().copied()).collect();
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(g, p)| g == c && p == c).count();
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count();
        let actual = pairs.iter().filter(|&&(g, _)| g == c).count();
        ps.push(div(tp, predicted));
        rs.push(div(tp, actual));
    }
    let p = ps.iter().sum::<f64>() / k as f64;
    let r = rs.iter().sum::<f64>() / k as f64;
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let acc = div(pairs.iter().filter(|(g, p)| g == p).count(), pairs.len());
    (acc, p, r, f)
}

fn labelled(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((0..k, 0..k), 1..120).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #[test]
    fn metrics_match_independent_count_oracle((gold, pred) in labelled(4)) {
        let m = classify_metrics(&gold, &pred, 4, Averaging::Macro).unwrap();
        let (acc, p, r, f) = oracle_macro(&gold, &pred, 4);
        prop_assert!((m.accuracy - acc).abs() < 1e-12);
        prop_assert!((m.precision - p).abs() < 1e-12);
        prop_assert!((m.recall - r).abs() < 1e-12);
        prop_assert!((m.f1 - f).abs() < 1e-12);
    }

    #[test]
    fn metrics_lie_in_unit_interval_and_rows_sum_to_support(
        (gold, pred) in labelled(3),
        weighted in any::<bool>(),
    ) {
        let avg = if weighted { Averaging::Weighted } else { Averaging::Macro };
        let m = classify_metrics(&gold, &pred, 3, avg).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for c in 0..3 {
            prop_assert_eq!(m.confusion.row_sum(c), gold.iter().filter(|&&g| g == c).count() as u64);
            prop_assert_eq!(m.confusion.col_sum(c), pred.iter().filter(|&&p| p == c).count() as u64);
        }
        prop_assert_eq!(m.confusion.total(), gold.len() as u64);
    }

    #[test]
    fn metrics_ignore_pair_order((gold, pred) in labelled(3), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..gold.len()).collect();
        let mut rng = cmcl_core::nn::RngState::new(seed);
        rng.shuffle(&mut idx);
        let g2: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
        let p2: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
        for avg in [Averaging::Macro, Averaging::Weighted] {
            prop_assert_eq!(
                classify_metrics(&gold, &pred, 3, avg).unwrap(),
                classify_metrics(&g2, &p2, 3, avg).unwrap()
            );
        }
    }

    #[test]
    fn perplexity_is_at_least_one(losses in prop::collection::vec(0.0f64..20.0, 1..50)) {
        prop_assert!(perplexity(&losses).unwrap() >= 1.0);
    }

    #[test]
    fn tagging_accuracy_matches_position_count(
        seqs in prop::collection::vec(prop::collection::vec((0usize..5, 0usize..5), 1..12), 1..10)
    ) {
        let gold: Vec<Vec<usize>> = seqs.iter().map(|s| s.iter().map(|x| x.0).collect()).collect();
        let pred: Vec<Vec<usize>> = seqs.iter().map(|s| s.iter().map(|x| x.1).collect()).collect();
        let hits = seqs.iter().flatten().filter(|(a, b)| a == b).count();
        let total = seqs.iter().map(Vec::len).sum::<usize>();
        prop_assert_eq!(tagging_accuracy(&gold, &pred).unwrap(), hits as f64 / total as f64);
    }
}

#[test]
fn worked_two_class_example() {
    let m = classify_metrics(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, Averaging::Macro).unwrap();
    assert_eq!(m.accuracy, 0.75);
    assert!((m.precision - 5.0 / 6.0).abs() < 1e-12);
    assert!((m.recall - 0.75).abs() < 1e-12);
    let f1 = 2.0 * (5.0 / 6.0 * 0.75) / (5.0 / 6.0 + 0.75);
    assert!((m.f1 - f1).abs() < 1e-12);
    assert!((m.f1 - 0.789).abs() < 5e-4);
}

#[test]
fn degenerate_inputs() {
    assert_eq!(classify_metrics(&[], &[], 3, Averaging::Macro), Err(EvalError::Empty));
    assert!(matches!(
        classify_metrics(&[0, 1], &[0], 3, Averaging::Macro),
        Err(EvalError::LengthMismatch { .. })
    ));
    let m = classify_metrics(&[0, 0], &[2, 2], 3, Averaging::Macro).unwrap();
    assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.0, 0.0, 0.0, 0.0));
    assert!(tagging_accuracy(&[], &[]).is_err());
    assert_eq!(perplexity(&[0.0, 0.0]).unwrap(), 1.0);
    assert!((perplexity(&[2f64.ln(), 8f64.ln()]).unwrap() - 4.0).abs() < 1e-12);
}
