//! L2-regularized logistic regression on standardized features, with the
//! penalty chosen by k-fold cross-validation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cascade::Veracity;
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::inference::{minimize, OptimizerConfig};
use crate::rng;

pub const DEFAULT_PENALTY_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Fitted scorer; `predict` returns the probability of a false rumor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Indices of the input columns that were kept (non-constant).
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub penalty: f64,
}

impl LogisticModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let eta = self.intercept
            + self
                .kept
                .iter()
                .zip(&self.weights)
                .zip(self.mean.iter().zip(&self.scale))
                .map(|((&j, w), (m, s))| w * (row[j] - m) / s)
                .sum::<f64>();
        1.0 / (1.0 + (-eta).exp())
    }
}

fn target(label: Veracity) -> f64 {
    if label == Veracity::False {
        1.0
    } else {
        0.0
    }
}

fn check(rows: &[Vec<f64>], labels: &[Veracity]) -> Result<usize> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Config("feature rows and labels must be nonempty and aligned".into()));
    }
    if !labels.contains(&Veracity::False) || !labels.contains(&Veracity::True) {
        return Err(Error::Insufficient("logistic regression needs both classes".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("feature rows must be finite and of equal length".into()));
    }
    Ok(d)
}

/// Fits with a fixed penalty `lambda` on the non-intercept weights.
pub fn fit_logistic(rows: &[Vec<f64>], labels: &[Veracity], lambda: f64) -> Result<LogisticModel> {
    let d = check(rows, labels)?;
    let n = rows.len() as f64;
    let mut kept = Vec::new();
    let (mut mean, mut scale) = (Vec::new(), Vec::new());
    for j in 0..d {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
        if sd > 1e-12 {
            kept.push(j);
            mean.push(m);
            scale.push(sd);
        } else {
            log::warn!("dropping constant feature column {j}");
        }
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| kept.iter().enumerate().map(|(k, &j)| (r[j] - mean[k]) / scale[k]).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|l| target(*l)).collect();
    let objective = |w: &[f64], g: &mut [f64]| {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut nll = 0.0;
        for (xi, &yi) in x.iter().zip(&y) {
            let eta = w[0] + xi.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
            // log(1 + e^eta) - y eta, stably
            nll += eta.max(0.0) + (-eta.abs()).exp().ln_1p() - yi * eta;
            let r = 1.0 / (1.0 + (-eta).exp()) - yi;
            g[0] += r;
            for (gk, xk) in g[1..].iter_mut().zip(xi) {
                *gk += r * xk;
            }
        }
        for k in 1..w.len() {
            nll += 0.5 * lambda * w[k] * w[k];
            g[k] += lambda * w[k];
        }
        Ok(nll)
    };
    let config = OptimizerConfig {
        grad_tol: 1e-6,
        ..OptimizerConfig::default()
    };
    let m = minimize(objective, &vec![0.0; kept.len() + 1], &config)?;
    Ok(LogisticModel {
        kept,
        mean,
        scale,
        intercept: m.point[0],
        weights: m.point[1..].to_vec(),
        penalty: lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Pooled out-of-fold AUC (percent) per penalty in grid order.
    pub auc_by_penalty: Vec<(f64, f64)>,
    pub chosen: f64,
    pub cv_auc: f64,
}

/// Chooses the penalty with the best pooled out-of-fold AUC (ties go to
/// the larger penalty) and refits on all rows.
pub fn fit_logistic_cv(
    rows: &[Vec<f64>],
    labels: &[Veracity],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(LogisticModel, CvResult)> {
    check(rows, labels)?;
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Config("penalty grid must be nonempty and non-negative".into()));
    }
    let folds = folds.clamp(2, rows.len());
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng::stream(seed, 0));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; rows.len()];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };
    let mut auc_by_penalty = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut oof = vec![0.0; rows.len()];
        for k in 0..folds {
            let (train_x, train_y): (Vec<Vec<f64>>, Vec<Veracity>) = (0..rows.len())
                .filter(|&i| fold_of[i] != k)
                .map(|i| (rows[i].clone(), labels[i]))
                .unzip();
            let model = match fit_logistic(&train_x, &train_y, lambda) {
                Ok(m) => m,
                Err(Error::Insufficient(_)) => continue,
                Err(e) => return Err(e),
            };
            for i in (0..rows.len()).filter(|&i| fold_of[i] == k) {
                oof[i] = model.predict(&rows[i]);
            }
        }
        let scored: Vec<(f64, Veracity)> = oof.into_iter().zip(labels.iter().copied()).collect();
        auc_by_penalty.push((lambda, auc(&scored)?));
    }
    let (chosen, cv_auc) = auc_by_penalty
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 > best.0) {
                cur
            } else {
                best
            }
        })
        .expect("nonempty grid");
    let model = fit_logistic(rows, labels, chosen)?;
    Ok((
        model,
        CvResult {
            auc_by_penalty,
            chosen,
            cv_auc,
        },
    ))
}
