//! Cascade simulation by the branching construction, and structural
//! statistics of cascade trees.
//!
//! Every event spawns a Poisson number of children with mean
//! `m_i * Phi(T - t_i)`, where `Phi` is the CDF of its kernel; child lags are
//! drawn from the kernel truncated to the remaining window. This is exactly
//! the mass the compensator assigns to the observation window, so simulated
//! data and the likelihood agree.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand_distr::{Bernoulli, Dirichlet, Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, EventInput, StructuralCovariates, Veracity};
use crate::error::{Error, Result};
use crate::model::HawkesProcess;
use crate::rng::{self, StreamRng};

/// Independent synthetic covariates: Dirichlet emotion shares, a Bernoulli
/// topic indicator and log-normal user attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCovariates {
    /// Concentrations for (positive, negative, surprise).
    pub emotion_concentration: [f64; 3],
    pub political_prob: f64,
    /// Log-scale mean of (followers, followees, account age, engagement).
    pub user_log_mean: [f64; 4],
    pub user_log_sd: [f64; 4],
}

impl Default for SyntheticCovariates {
    fn default() -> Self {
        Self {
            emotion_concentration: [2.0, 2.0, 1.0],
            political_prob: 0.3,
            user_log_mean: [6.0, 5.5, 7.0, 2.0],
            user_log_sd: [1.5, 1.0, 0.7, 1.0],
        }
    }
}

/// Source of cascade (`z`) and user (`x`) covariates for simulated events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateGenerator {
    Synthetic(SyntheticCovariates),
    /// Bootstrap from observed rows.
    Empirical {
        cascade_rows: Vec<Vec<f64>>,
        user_rows: Vec<Vec<f64>>,
    },
}

impl Default for CovariateGenerator {
    fn default() -> Self {
        CovariateGenerator::Synthetic(SyntheticCovariates::default())
    }
}

impl CovariateGenerator {
    /// Empirical generator pooling rows from `cascades`.
    pub fn empirical(cascades: &[Cascade]) -> Result<Self> {
        if cascades.is_empty() {
            return Err(Error::Insufficient("no cascades to bootstrap covariates from".into()));
        }
        Ok(CovariateGenerator::Empirical {
            cascade_rows: cascades.iter().map(|c| c.covariates().to_vec()).collect(),
            user_rows: cascades
                .iter()
                .flat_map(|c| c.events().iter().map(|e| e.user.clone()))
                .collect(),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            CovariateGenerator::Synthetic(s) => {
                let ok = s.emotion_concentration.iter().all(|a| *a > 0.0)
                    && (0.0..=1.0).contains(&s.political_prob)
                    && s.user_log_sd.iter().all(|v| *v >= 0.0)
                    && s.user_log_mean.iter().all(|v| v.is_finite());
                if !ok {
                    return Err(Error::Config("invalid synthetic covariate settings".into()));
                }
            }
            CovariateGenerator::Empirical {
                cascade_rows,
                user_rows,
            } => {
                if cascade_rows.is_empty() || user_rows.is_empty() {
                    return Err(Error::Config("empirical covariate pools are empty".into()));
                }
            }
        }
        Ok(())
    }

    fn cascade_row(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            CovariateGenerator::Synthetic(s) => {
                let e = Dirichlet::new(s.emotion_concentration).expect("validated").sample(rng);
                let topic = Bernoulli::new(s.political_prob).expect("validated").sample(rng);
                vec![e[0], e[1], e[2], f64::from(u8::from(topic))]
            }
            CovariateGenerator::Empirical { cascade_rows, .. } => {
                cascade_rows.choose(rng).expect("validated").clone()
            }
        }
    }

    fn user_row(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            CovariateGenerator::Synthetic(s) => s
                .user_log_mean
                .iter()
                .zip(&s.user_log_sd)
                .map(|(&m, &sd)| LogNormal::new(m, sd).expect("validated").sample(rng))
                .collect(),
            CovariateGenerator::Empirical { user_rows, .. } => user_rows.choose(rng).expect("validated").clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Observation window in hours.
    pub horizon: f64,
    pub covariates: CovariateGenerator,
    /// Simulation stops once this many events exist.
    pub max_events: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 168.0,
            covariates: CovariateGenerator::default(),
            max_events: 10_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.max_events == 0 {
            return Err(Error::Config("max_events must be at least 1".into()));
        }
        self.covariates.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub cascade: Cascade,
    /// True when the event cap stopped the simulation.
    pub truncated: bool,
}

/// Simulates one cascade from `process`.
pub fn simulate(process: &HawkesProcess, config: &SimConfig, rng: &mut StreamRng) -> Result<Simulated> {
    config.validate()?;
    process.params.kernels.root.validate()?;
    process.params.kernels.non_root.validate()?;
    let horizon = config.horizon;
    let z = config.covariates.cascade_row(rng);
    let mut events = vec![EventInput {
        time: 0.0,
        parent: None,
        user: config.covariates.user_row(rng),
    }];
    let mut structural = vec![StructuralCovariates::default()];
    let mut queue = VecDeque::from([0usize]);
    let mut truncated = false;

    'outer: while let Some(i) = queue.pop_front() {
        let t = events[i].time;
        let mark = process.mark_from_raw(&z, &events[i].user, &structural[i]);
        let kernel = process.params.kernels.for_event(i);
        let mean = mark * kernel.integral_unchecked(horizon - t);
        let n_children = if mean > 0.0 && mean.is_finite() {
            Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize
        } else if mean == 0.0 {
            0
        } else {
            return Err(Error::Domain(format!("offspring mean {mean} is not finite")));
        };
        for _ in 0..n_children {
            if events.len() >= config.max_events {
                truncated = true;
                break 'outer;
            }
            let child_t = t + kernel.sample_truncated(rng, horizon - t);
            events.push(EventInput {
                time: child_t,
                parent: Some(i),
                user: config.covariates.user_row(rng),
            });
            structural.push(StructuralCovariates {
                depth: structural[i].depth + 1,
                response_time: child_t - t,
                elapsed_time: child_t,
            });
            queue.push_back(events.len() - 1);
        }
    }
    let cascade = Cascade::new("sim", Some(process.params.component), Some(horizon), z, events)?;
    Ok(Simulated { cascade, truncated })
}

/// Simulates `n` cascades with ids `sim-<i>`, cascade `i` drawn from its own
/// stream of `seed`.
pub fn simulate_many(process: &HawkesProcess, config: &SimConfig, n: usize, seed: u64) -> Result<Vec<Simulated>> {
    (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut s = simulate(process, config, &mut r)?;
            s.cascade = s.cascade.with_id(format!("sim-{i}"));
            Ok(s)
        })
        .collect()
}

/// Labeled cascades simulated from two processes, `n` per class.
pub fn simulate_labeled(
    false_process: &HawkesProcess,
    true_process: &HawkesProcess,
    config: &SimConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<Cascade>> {
    let mut out = Vec::with_capacity(2 * n);
    for (k, (p, label)) in [(false_process, Veracity::False), (true_process, Veracity::True)]
        .into_iter()
        .enumerate()
    {
        let sims = simulate_many(p, config, n, rng::derive_seed(seed, k as u64))?;
        out.extend(sims.into_iter().enumerate().map(|(i, s)| {
            s.cascade
                .with_label(Some(label))
                .with_id(format!("{}-{i}", if label == Veracity::False { "f" } else { "t" }))
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralStats {
    pub size: usize,
    pub max_depth: u32,
    /// Mean depth over all events, root included.
    pub mean_depth: f64,
    /// Mean tree distance over unordered pairs of events.
    pub virality: f64,
    /// `size / max_depth`, or `size` for a root-only cascade.
    pub size_to_depth: f64,
}

pub fn structural_stats(cascade: &Cascade) -> StructuralStats {
    let events = cascade.events();
    let n = events.len();
    let max_depth = events.iter().map(|e| e.structural.depth).max().unwrap_or(0);
    let mean_depth = events.iter().map(|e| e.structural.depth as f64).sum::<f64>() / n as f64;
    // parents precede children, so a reverse sweep accumulates subtree sizes
    let mut sub = vec![1usize; n];
    for i in (1..n).rev() {
        if let Some(p) = events[i].parent {
            sub[p] += sub[i];
        }
    }
    let virality = if n > 1 {
        let wiener: f64 = (1..n).map(|i| (sub[i] * (n - sub[i])) as f64).sum();
        wiener / (n * (n - 1) / 2) as f64
    } else {
        0.0
    };
    let size_to_depth = if max_depth == 0 {
        n as f64
    } else {
        n as f64 / max_depth as f64
    };
    StructuralStats {
        size: n,
        max_depth,
        mean_depth,
        virality,
        size_to_depth,
    }
}
