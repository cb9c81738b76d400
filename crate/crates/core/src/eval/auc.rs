use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic, with tied scores
/// counting one half. Only the ordering of scores matters.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::validation(
            "labels",
            format!("{} labels for {} scores", labels.len(), scores.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("scores", "NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both positive and negative examples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the midrank, so every quantity stays an exact integer
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&o| labels[o]).count() as u128;
        rank_sum2 += midrank2 * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// One-vs-rest AUC per class, in class-index order.
pub fn ovr_aucs(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if probs.len() != labels.len() {
        return Err(Error::validation(
            "labels",
            format!("{} labels for {} probability rows", labels.len(), probs.len()),
        ));
    }
    if let Some(i) = probs.iter().position(|r| r.len() != n_classes) {
        return Err(Error::validation(format!("probs[{i}]"), format!("expected {n_classes} columns")));
    }
    (0..n_classes)
        .map(|c| {
            let scores: Vec<f64> = probs.iter().map(|r| r[c]).collect();
            let is_c: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            binary_auc(&scores, &is_c)
                .map_err(|e| Error::UndefinedMetric(format!("class {c}: {e}")))
        })
        .collect()
}

/// Unweighted mean of the one-vs-rest AUCs.
pub fn macro_ovr_auc(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<f64> {
    let per = ovr_aucs(probs, labels, n_classes)?;
    Ok(per.iter().sum::<f64>() / n_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn examples() {
        assert_eq!(binary_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(binary_auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert_eq!(
            binary_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(),
            0.75
        );
        assert!(matches!(
            binary_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn macro_examples() {
        let labels = [0, 1, 2, 3, 0, 1, 2, 3];
        let onehot: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..4).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
            .collect();
        assert_eq!(macro_ovr_auc(&onehot, &labels, 4).unwrap(), 1.0);
        let uniform = vec![vec![0.25; 4]; 8];
        assert_eq!(macro_ovr_auc(&uniform, &labels, 4).unwrap(), 0.5);
        assert!(macro_ovr_auc(&uniform, &[0, 0, 0, 1, 1, 1, 2, 2], 4).is_err());
    }

    proptest! {
        #[test]
        fn matches_pair_count_oracle(
            data in proptest::collection::vec((0u8..6, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            match binary_auc(&scores, &labels) {
                Ok(a) => prop_assert!((a - pair_count(&scores, &labels)).abs() < 1e-12),
                Err(_) => prop_assert!(labels.iter().all(|&l| l) || labels.iter().all(|&l| !l)),
            }
        }

        #[test]
        fn monotone_transform_invariance(
            data in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let base = binary_auc(&scores, &labels).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(base, binary_auc(&t, &labels).unwrap());
        }

        #[test]
        fn complement_reverses_each_class(
            rows in proptest::collection::vec((proptest::collection::vec(0.0f64..1.0, 4), 0usize..4), 8..40)
        ) {
            let labels: Vec<usize> = rows.iter().map(|(_, l)| *l).collect();
            prop_assume!((0..4).all(|c| labels.contains(&c)));
            let probs: Vec<Vec<f64>> = rows.iter().map(|(p, _)| p.clone()).collect();
            let comp: Vec<Vec<f64>> = probs.iter().map(|r| r.iter().map(|p| 1.0 - p).collect()).collect();
            let a = ovr_aucs(&probs, &labels, 4).unwrap();
            let b = ovr_aucs(&comp, &labels, 4).unwrap();
            for c in 0..4 {
                let scores: Vec<f64> = probs.iter().map(|r| r[c]).collect();
                let mut sorted = scores.clone();
                sorted.sort_by(f64::total_cmp);
                prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
                prop_assert!((a[c] + b[c] - 1.0).abs() < 1e-12);
            }
        }
    }
}
