//! Early-detection sweeps: AUC of scores computed on truncated cascades.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{truncate, Cascade, Truncation, Veracity};
use crate::error::Result;
use crate::eval::metrics::auc;
use crate::inference::SamplerConfig;
use crate::mixture::{MixtureModel, MixtureSpec, TrainMode};

/// Observation windows in hours.
pub const DEFAULT_TIME_GRID: [f64; 7] = [0.5, 1.0, 2.0, 6.0, 12.0, 24.0, 168.0];
/// Observed retweet counts.
pub const DEFAULT_COUNT_GRID: [usize; 7] = [5, 10, 25, 50, 100, 250, 500];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub truncation: Truncation,
    pub n_cascades: usize,
    /// Absent when the cell is empty or holds one class only.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub full_auc: Option<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, by: Truncation) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.truncation == by)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<14} {:>8} {:>8}\n", "truncation", "n", "AUC");
        let full = self.full_auc.map_or("-".into(), |a| format!("{a:.2}"));
        s.push_str(&format!("{:<14} {:>8} {:>8}\n", "full", "", full));
        for c in &self.cells {
            let name = match c.truncation {
                Truncation::Time(t) => format!("{t} h"),
                Truncation::Count(n) => format!("{n} retweets"),
            };
            let a = c.auc.map_or("-".into(), |a| format!("{a:.2}"));
            s.push_str(&format!("{name:<14} {:>8} {a:>8}\n", c.n_cascades));
        }
        s
    }
}

/// Labeled cascades admitted to a cell: all for time windows, those with at
/// least `n` retweets for count cells.
fn members(test: &[Cascade], by: Truncation) -> Vec<&Cascade> {
    test.iter()
        .filter(|c| c.label().is_some())
        .filter(|c| match by {
            Truncation::Time(_) => true,
            Truncation::Count(n) => c.retweets() >= n,
        })
        .collect()
}

fn cell_auc(scored: &[(f64, Veracity)]) -> Option<f64> {
    auc(scored).ok()
}

fn grid(times: &[f64], counts: &[usize]) -> Vec<Truncation> {
    times
        .iter()
        .map(|&t| Truncation::Time(t))
        .chain(counts.iter().map(|&n| Truncation::Count(n)))
        .collect()
}

/// Scores every truncation of the labeled `test` cascades with one model.
pub fn sweep_early_detection(
    model: &MixtureModel,
    test: &[Cascade],
    times: &[f64],
    counts: &[usize],
) -> Result<SweepTable> {
    let truncations = grid(times, counts);
    for t in &truncations {
        t.validate()?;
    }
    let score_all = |cs: &[&Cascade], by: Option<Truncation>| -> Result<Vec<(f64, Veracity)>> {
        cs.iter()
            .map(|c| {
                let s = match by {
                    Some(b) => model.score_partial(c, b)?,
                    None => model.score(c)?,
                };
                Ok((s.p_false, c.label().expect("filtered")))
            })
            .collect()
    };
    let labeled: Vec<&Cascade> = test.iter().filter(|c| c.label().is_some()).collect();
    let full_auc = cell_auc(&score_all(&labeled, None)?);
    let cells = truncations
        .par_iter()
        .map(|&by| {
            let cs = members(test, by);
            let scored = score_all(&cs, Some(by))?;
            Ok(SweepCell {
                truncation: by,
                n_cascades: cs.len(),
                auc: cell_auc(&scored),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { full_auc, cells })
}

/// Like [`sweep_early_detection`], but retrains the mixture for every cell
/// on training cascades truncated the same way.
pub fn sweep_with_refit(
    train: &[Cascade],
    test: &[Cascade],
    spec: &MixtureSpec,
    mode: TrainMode,
    config: &SamplerConfig,
    times: &[f64],
    counts: &[usize],
) -> Result<SweepTable> {
    let full = MixtureModel::train(train, spec, mode, config)?;
    let base = sweep_early_detection(&full, test, &[], &[])?;
    let cells = grid(times, counts)
        .into_par_iter()
        .map(|by| {
            by.validate()?;
            let cut: Vec<Cascade> = train.iter().map(|c| truncate(c, by)).collect::<Result<_>>()?;
            let cs = members(test, by);
            let model = match MixtureModel::train(&cut, spec, mode, config) {
                Ok(m) => m,
                Err(crate::Error::Insufficient(_)) => {
                    return Ok(SweepCell {
                        truncation: by,
                        n_cascades: cs.len(),
                        auc: None,
                    })
                }
                Err(e) => return Err(e),
            };
            let scored = cs
                .iter()
                .map(|c| Ok((model.score_partial(c, by)?.p_false, c.label().expect("filtered"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepCell {
                truncation: by,
                n_cascades: cs.len(),
                auc: cell_auc(&scored),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        full_auc: base.full_auc,
        cells,
    })
}
