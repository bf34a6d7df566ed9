//! Classification metrics with false rumors as the positive class.

use serde::{Deserialize, Serialize};

use crate::cascade::Veracity;
use crate::error::{Error, Result};
use crate::mixture::classify_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

/// All rates in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub balanced_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

fn counts(scores: &[(f64, Veracity)]) -> (usize, usize) {
    let pos = scores.iter().filter(|(_, l)| *l == Veracity::False).count();
    (pos, scores.len() - pos)
}

/// Area under the ROC curve in percent, from midranks (ties count half).
pub fn auc(scores: &[(f64, Veracity)]) -> Result<f64> {
    let (n_pos, n_neg) = counts(scores);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Insufficient("AUC is undefined with a single class".into()));
    }
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let pos_in_tie = order[i..=j]
            .iter()
            .filter(|&&k| scores[k].1 == Veracity::False)
            .count();
        rank_sum += mid * pos_in_tie as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(100.0 * u / (n_pos as f64 * n_neg as f64))
}

/// AUC by counting every positive/negative pair; quadratic.
pub fn auc_pairwise(scores: &[(f64, Veracity)]) -> Result<f64> {
    let (n_pos, n_neg) = counts(scores);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Insufficient("AUC is undefined with a single class".into()));
    }
    let mut u = 0.0;
    for (sp, _) in scores.iter().filter(|(_, l)| *l == Veracity::False) {
        for (sn, _) in scores.iter().filter(|(_, l)| *l == Veracity::True) {
            if sp > sn {
                u += 1.0;
            } else if sp == sn {
                u += 0.5;
            }
        }
    }
    Ok(100.0 * u / (n_pos as f64 * n_neg as f64))
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn compute_metrics(scores: &[(f64, Veracity)], threshold: f64) -> Result<MetricsReport> {
    let auc = auc(scores)?;
    let mut c = Confusion {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for &(p, label) in scores {
        match (classify_score(p, threshold)?, label) {
            (Veracity::False, Veracity::False) => c.true_positive += 1,
            (Veracity::False, Veracity::True) => c.false_positive += 1,
            (Veracity::True, Veracity::True) => c.true_negative += 1,
            (Veracity::True, Veracity::False) => c.false_negative += 1,
        }
    }
    let sensitivity = pct(c.true_positive, c.true_positive + c.false_negative);
    let specificity = pct(c.true_negative, c.true_negative + c.false_positive);
    let precision = pct(c.true_positive, c.true_positive + c.false_positive);
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(MetricsReport {
        auc,
        balanced_accuracy: (sensitivity + specificity) / 2.0,
        sensitivity,
        specificity,
        precision,
        f1,
        threshold,
        confusion: c,
    })
}

/// `(false positive rate, true positive rate)` points, in percent, for
/// every distinct score used as threshold (alarm iff `p >= threshold`).
pub fn roc_curve(scores: &[(f64, Veracity)]) -> Vec<(f64, f64)> {
    let (n_pos, n_neg) = counts(scores);
    let mut thresholds: Vec<f64> = scores.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scores.iter().filter(|(s, l)| *s >= t && *l == Veracity::False).count();
        let fp = scores.iter().filter(|(s, l)| *s >= t && *l == Veracity::True).count();
        pts.push((pct(fp, n_neg), pct(tp, n_pos)));
    }
    pts
}

impl MetricsReport {
    /// Aligned two-column text table, percentages to 2 decimals.
    pub fn to_table(&self) -> String {
        let rows = [
            ("AUC", self.auc),
            ("Balanced accuracy", self.balanced_accuracy),
            ("Sensitivity", self.sensitivity),
            ("Specificity", self.specificity),
            ("Precision", self.precision),
            ("F1", self.f1),
        ];
        let mut s = String::new();
        for (name, v) in rows {
            s.push_str(&format!("{name:<18} {v:>7.2}\n"));
        }
        let c = &self.confusion;
        s.push_str(&format!(
            "{:<18} TP {} FP {} TN {} FN {}\n",
            "Confusion", c.true_positive, c.false_positive, c.true_negative, c.false_negative
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Veracity::{False as F, True as T};

    #[test]
    fn toy_example() {
        let s = [(0.9, F), (0.8, T), (0.6, F), (0.2, T)];
        let m = compute_metrics(&s, 0.5).unwrap();
        assert_eq!(m.auc, 75.0);
        assert_eq!(m.sensitivity, 100.0);
        assert_eq!(m.specificity, 50.0);
        assert!((m.precision - 66.666_666_666_666_67).abs() < 1e-9);
        assert_eq!(format!("{:.2}", m.precision), "66.67");
    }

    #[test]
    fn separated_and_tied_extremes() {
        assert_eq!(auc(&[(0.9, F), (0.8, F), (0.1, T)]).unwrap(), 100.0);
        assert_eq!(auc(&[(0.5, F), (0.5, T), (0.5, T), (0.5, F)]).unwrap(), 50.0);
        assert!(auc(&[(0.5, F)]).is_err());
    }

    #[test]
    fn roc_reaches_corners() {
        let s = [(0.9, F), (0.8, T), (0.6, F), (0.2, T)];
        let roc = roc_curve(&s);
        assert_eq!(roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.last(), Some(&(100.0, 100.0)));
        // trapezoid area equals the rank AUC
        let area: f64 = roc.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area / 100.0 - 75.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pair_count(raw in prop::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let s: Vec<(f64, Veracity)> = raw.iter().map(|(v, f)| (*v as f64 / 20.0, if *f { F } else { T })).collect();
            match (auc(&s), auc_pairwise(&s)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn derived_rates_are_consistent(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..100), th in 0.05f64..0.95) {
            let s: Vec<(f64, Veracity)> = raw.iter().map(|(v, f)| (*v, if *f { F } else { T })).collect();
            if let Ok(m) = compute_metrics(&s, th) {
                let c = m.confusion;
                prop_assert_eq!(c.true_positive + c.false_positive + c.true_negative + c.false_negative, s.len());
                prop_assert!((m.balanced_accuracy - (m.sensitivity + m.specificity) / 2.0).abs() < 1e-10);
                let sens = pct(c.true_positive, c.true_positive + c.false_negative);
                let prec = pct(c.true_positive, c.true_positive + c.false_positive);
                let f1 = if sens + prec > 0.0 { 2.0 * sens * prec / (sens + prec) } else { 0.0 };
                prop_assert!((m.f1 - f1).abs() < 1e-10);
            }
        }
    }
}
