use crate::error::MetricError;

fn same_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        return Err(MetricError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn mse(pred: &[f64], gold: &[f64]) -> Result<f64, MetricError> {
    same_len(pred.len(), gold.len())?;
    let sum: f64 = pred.iter().zip(gold).map(|(p, g)| (p - g).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

pub fn pearson_r(pred: &[f64], gold: &[f64]) -> Result<f64, MetricError> {
    same_len(pred.len(), gold.len())?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gold.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vg) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        let (dp, dg) = (p - mp, g - mg);
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if vp == 0.0 || vg == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((cov / (vp.sqrt() * vg.sqrt())).clamp(-1.0, 1.0))
}

fn both_classes(gold: &[bool]) -> Result<(), MetricError> {
    if gold.iter().all(|g| *g) || gold.iter().all(|g| !*g) {
        return Err(MetricError::DegenerateLabels);
    }
    Ok(())
}

/// F1 of the positive class.
pub fn f1_binary(pred: &[bool], gold: &[bool]) -> Result<f64, MetricError> {
    same_len(pred.len(), gold.len())?;
    both_classes(gold)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied
/// scores receive their average rank.
pub fn auc_roc(scores: &[f64], gold: &[bool]) -> Result<f64, MetricError> {
    same_len(scores.len(), gold.len())?;
    both_classes(gold)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }

    let n_pos = gold.iter().filter(|g| **g).count() as f64;
    let n_neg = gold.len() as f64 - n_pos;
    let rank_sum: f64 = ranks.iter().zip(gold).filter(|(_, g)| **g).map(|(r, _)| r).sum();
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// Labels each value positive when it lies strictly above the median.
pub fn median_binarize(values: &[f64]) -> Vec<bool> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] };
    values.iter().map(|v| *v > median).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn perfect_regression() {
        let g = [1.0, 2.5, 3.0, 7.0];
        assert_eq!(mse(&g, &g).unwrap(), 0.0);
        assert!((pearson_r(&g, &g).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mse(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn regression_errors() {
        assert_eq!(mse(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch(1, 2)));
        assert_eq!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::ZeroVariance));
        assert_eq!(mse(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn classification_examples() {
        let gold = [false, false, true, true];
        assert_eq!(f1_binary(&gold, &gold).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &gold).unwrap(), 1.0);
        // pairs (pos, neg): (0.35,0.1) win, (0.35,0.4) loss, (0.8,0.1) win, (0.8,0.4) win
        assert_eq!(auc_roc(&[0.1, 0.4, 0.35, 0.8], &gold).unwrap(), 0.75);
        assert_eq!(auc_roc(&[0.5; 4], &gold).unwrap(), 0.5);
        assert_eq!(f1_binary(&[true, false], &[true, true]), Err(MetricError::DegenerateLabels));
        assert_eq!(auc_roc(&[0.1, 0.2], &[false, false]), Err(MetricError::DegenerateLabels));
        // tp=1 fp=1 fn=1
        assert!((f1_binary(&[true, true, false, false], &[true, false, true, false]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(f1_binary(&[false, false], &[true, false]).unwrap(), 0.0);
    }

    #[test]
    fn median_split() {
        assert_eq!(median_binarize(&[1.0, 2.0, 3.0, 4.0]), [false, false, true, true]);
        assert_eq!(median_binarize(&[1.0, 2.0, 3.0]), [false, false, true]);
        assert_eq!(median_binarize(&[2.0, 2.0]), [false, false]);
    }

    fn pairwise_wins(scores: &[f64], gold: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, gi) in gold.iter().enumerate() {
            for (j, gj) in gold.iter().enumerate() {
                if *gi && !*gj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            items in prop::collection::vec((0u8..8, any::<bool>()), 2..50)
        ) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| f64::from(*s) / 4.0).collect();
            let gold: Vec<bool> = items.iter().map(|(_, g)| *g).collect();
            prop_assume!(gold.iter().any(|g| *g) && gold.iter().any(|g| !*g));
            prop_assert_eq!(auc_roc(&scores, &gold).unwrap(), pairwise_wins(&scores, &gold));
        }
    }
}
