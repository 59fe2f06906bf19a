//! Class rebalancing and seeded train/dev/test splitting.

use crate::nn::RngState;

use super::CorpusError;

/// Resample every class to `floor(mean class count)`: classes above the mean
/// are subsampled without replacement, classes below keep all their members
/// and draw the shortfall with replacement. The result is shuffled.
pub fn rebalance<T: Clone>(
    samples: &[T],
    n_classes: usize,
    class_of: impl Fn(&T) -> Option<usize>,
    seed: u64,
) -> Result<Vec<T>, CorpusError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, s) in samples.iter().enumerate() {
        match class_of(s) {
            Some(c) if c < n_classes => by_class[c].push(i),
            Some(c) => return Err(CorpusError::UnknownLabel(format!("class {c}"))),
            None => return Err(CorpusError::MissingLabel("sentiment")),
        }
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(CorpusError::EmptyClass(c));
    }
    let target = samples.len() / n_classes;
    let mut rng = RngState::new(seed);
    let mut out = Vec::with_capacity(target * n_classes);
    for members in &by_class {
        let chosen: Vec<usize> = if members.len() >= target {
            rng.sample_indices(members.len(), target)
                .into_iter()
                .map(|k| members[k])
                .collect()
        } else {
            let extra = (0..target - members.len()).map(|_| members[rng.below(members.len())]);
            members.iter().copied().chain(extra.collect::<Vec<_>>()).collect()
        };
        out.extend(chosen.into_iter().map(|i| samples[i].clone()));
    }
    rng.shuffle(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

fn part_sizes(n: usize, ratios: (f64, f64, f64), force_nonempty: bool) -> (usize, usize) {
    let mut dev = (n as f64 * ratios.1).round() as usize;
    let mut test = (n as f64 * ratios.2).round() as usize;
    if force_nonempty {
        dev = dev.max(usize::from(ratios.1 > 0.0));
        test = test.max(usize::from(ratios.2 > 0.0));
    }
    dev = dev.min(n);
    test = test.min(n - dev);
    (dev, test)
}

/// Seeded three-way split. With `stratify`, each class (as given by
/// `class_of`; `None` is its own stratum) is split separately so per-class
/// proportions are kept within one sample.
pub fn split<T: Clone>(
    samples: &[T],
    ratios: (f64, f64, f64),
    seed: u64,
    stratify: Option<&dyn Fn(&T) -> Option<usize>>,
) -> Result<Split<T>, CorpusError> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 || ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(CorpusError::Ratios(ratios));
    }
    if samples.len() < 3 {
        return Err(CorpusError::TooFewSamples(samples.len()));
    }
    let mut rng = RngState::new(seed);
    let strata: Vec<Vec<usize>> = match stratify {
        None => vec![(0..samples.len()).collect()],
        Some(f) => {
            let mut keyed: std::collections::BTreeMap<Option<usize>, Vec<usize>> = Default::default();
            for (i, s) in samples.iter().enumerate() {
                keyed.entry(f(s)).or_default().push(i);
            }
            keyed.into_values().collect()
        }
    };
    let single = strata.len() == 1;
    let mut parts = (Vec::new(), Vec::new(), Vec::new());
    for mut idx in strata {
        rng.shuffle(&mut idx);
        let (n_dev, n_test) = part_sizes(idx.len(), ratios, single);
        let n_train = idx.len() - n_dev - n_test;
        parts.0.extend_from_slice(&idx[..n_train]);
        parts.1.extend_from_slice(&idx[n_train..n_train + n_dev]);
        parts.2.extend_from_slice(&idx[n_train + n_dev..]);
    }
    let pick = |rng: &mut RngState, mut idx: Vec<usize>| {
        rng.shuffle(&mut idx);
        idx.into_iter().map(|i| samples[i].clone()).collect()
    };
    Ok(Split {
        train: pick(&mut rng, parts.0),
        dev: pick(&mut rng, parts.1),
        test: pick(&mut rng, parts.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(xs: &[usize], k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        xs.iter().for_each(|&x| c[x] += 1);
        c
    }

    fn labeled(per_class: &[usize]) -> Vec<usize> {
        per_class
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect()
    }

    #[test]
    fn rebalance_to_floor_mean() {
        let xs = labeled(&[582, 1940, 1357]);
        assert_eq!(xs.len(), 3879);
        let out = rebalance(&xs, 3, |&c| Some(c), 1).unwrap();
        assert_eq!(counts(&out, 3), vec![1293, 1293, 1293]);

        let out = rebalance(&labeled(&[2, 4]), 2, |&c| Some(c), 1).unwrap();
        assert_eq!(counts(&out, 2), vec![3, 3]);

        let out = rebalance(&labeled(&[10, 10, 10]), 3, |&c| Some(c), 1).unwrap();
        assert_eq!(counts(&out, 3), vec![10, 10, 10]);
    }

    #[test]
    fn rebalance_is_seeded_and_rejects_empty_class() {
        let xs: Vec<(usize, usize)> = labeled(&[3, 9, 5]).into_iter().enumerate().collect();
        let a = rebalance(&xs, 3, |s| Some(s.1), 42).unwrap();
        let b = rebalance(&xs, 3, |s| Some(s.1), 42).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            rebalance(&labeled(&[3, 0, 2]), 3, |&c| Some(c), 0),
            Err(CorpusError::EmptyClass(1))
        ));
    }

    #[test]
    fn oversampling_keeps_every_original() {
        let xs: Vec<(usize, usize)> = labeled(&[2, 10]).into_iter().enumerate().collect();
        let out = rebalance(&xs, 2, |s| Some(s.1), 3).unwrap();
        assert!(out.contains(&(0, 0)) && out.contains(&(1, 0)));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let xs: Vec<usize> = (0..10).collect();
        let s = split(&xs, (0.8, 0.1, 0.1), 5, None).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split(&xs, (0.8, 0.1, 0.1), 5, None).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, xs);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split(&[1, 2], (0.8, 0.1, 0.1), 0, None), Err(CorpusError::TooFewSamples(2))));
        assert!(matches!(split(&[1, 2, 3], (0.8, 0.1, 0.2), 0, None), Err(CorpusError::Ratios(_))));
    }

    #[test]
    fn stratified_keeps_class_shares() {
        let xs = labeled(&[10, 10, 10]);
        let f = |c: &usize| Some(*c);
        let s = split(&xs, (0.8, 0.1, 0.1), 9, Some(&f)).unwrap();
        for c in counts(&s.train, 3) {
            assert!((c as i64 - 8).abs() <= 1);
        }
        assert_eq!(s.train.len() + s.dev.len() + s.test.len(), 30);
    }
}
