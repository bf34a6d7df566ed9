//! Fitting one mixture component: MAP optimization, NUTS sampling and
//! convergence diagnostics.
//!
//! Both entry points work on a [`Posterior`] and return parameter vectors in
//! the unconstrained coordinates of its [`ParamLayout`].

mod diagnostics;
mod io;
mod nuts;
mod optimize;

pub use diagnostics::{ess, split_rhat, ParamDiagnostics};
pub use optimize::{minimize, Minimum, OptimizerConfig};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::Veracity;
use crate::error::{Error, Result};
use crate::model::{ComponentParams, LogDensity, ParamLayout, Posterior};
use crate::rng;

/// Sampler settings. Every chain runs `warmup + samples_per_chain`
/// iterations and keeps the last `samples_per_chain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples_per_chain: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    /// Chains start at the MAP point plus uniform jitter of this half-width.
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            warmup: 1000,
            samples_per_chain: 3000,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.samples_per_chain == 0 {
            return Err(Error::Config("chains and samples_per_chain must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::Config("max_tree_depth must be positive".into()));
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return Err(Error::Config("init_radius must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Mcmc,
    Map,
}

/// Draws (or a single MAP point) for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFit {
    pub component: Veracity,
    pub mode: FitMode,
    pub layout: ParamLayout,
    pub chains: usize,
    pub warmup: usize,
    pub samples_per_chain: usize,
    pub seed: u64,
    pub map_point: Vec<f64>,
    pub diagnostics: Vec<ParamDiagnostics>,
    pub divergences: usize,
    pub step_sizes: Vec<f64>,
    /// Mean acceptance statistic of each chain after warmup.
    pub accept_rates: Vec<f64>,
    /// Zero parent/child lags replaced by the clamp, at the MAP point.
    pub clamped_lags: usize,
    pub warnings: Vec<String>,
    /// Row-major `num_draws x dim`, chain by chain. Stored separately on disk.
    #[serde(skip)]
    pub draws: Vec<f64>,
}

impl PosteriorFit {
    /// A degenerate fit holding only a MAP point.
    pub fn from_map(component: Veracity, layout: ParamLayout, point: Vec<f64>) -> Self {
        Self {
            component,
            mode: FitMode::Map,
            layout,
            chains: 1,
            warmup: 0,
            samples_per_chain: 1,
            seed: 0,
            draws: point.clone(),
            map_point: point,
            diagnostics: Vec::new(),
            divergences: 0,
            step_sizes: Vec::new(),
            accept_rates: Vec::new(),
            clamped_lags: 0,
            warnings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn num_draws(&self) -> usize {
        self.chains * self.samples_per_chain
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[i * d..(i + 1) * d]
    }

    pub fn draws(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim())
    }

    /// Values of parameter `j` across all draws.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws().map(|d| d[j]).collect()
    }

    /// Empirical `q`-quantile of parameter `j` (linear interpolation).
    pub fn quantile(&self, j: usize, q: f64) -> f64 {
        let mut v = self.column(j);
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }

    pub fn map_params(&self) -> ComponentParams {
        self.layout.unpack(&self.map_point, self.component)
    }

    /// Largest R-hat across parameters (`None` if none was computed).
    pub fn max_rhat(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.rhat).reduce(f64::max)
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        io::save(self, dir)
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        io::load(dir)
    }
}

/// Result of [`fit_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFit {
    pub point: Vec<f64>,
    /// Log posterior at `point`.
    pub log_posterior: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Starting point: betas and kernel raws at 0, alpha at the log of the
/// mean number of retweets per event.
pub fn default_init(posterior: &Posterior) -> Vec<f64> {
    let events: usize = posterior.cascades().iter().map(|c| c.len()).sum();
    let retweets = events - posterior.cascades().len();
    let ratio = (retweets as f64 / events as f64).max(1e-3);
    let mut theta = vec![0.0; posterior.layout().dim()];
    theta[0] = ratio.ln();
    theta
}

/// Maximizes the log posterior from `init` (or [`default_init`]).
pub fn fit_map(posterior: &Posterior, init: Option<&[f64]>, config: &OptimizerConfig) -> Result<MapFit> {
    let start = match init {
        Some(x) if x.len() != posterior.dim() => {
            return Err(Error::Config(format!(
                "initial point has length {}, expected {}",
                x.len(),
                posterior.dim()
            )))
        }
        Some(x) => x.to_vec(),
        None => default_init(posterior),
    };
    let objective = |x: &[f64], g: &mut [f64]| {
        let v = posterior.log_density_and_grad(x, g)?;
        g.iter_mut().for_each(|gi| *gi = -*gi);
        Ok(-v)
    };
    let m = minimize(objective, &start, config)?;
    let mut warnings = Vec::new();
    if !m.converged {
        let msg = format!(
            "MAP search stopped after {} iterations with gradient norm {:.3e}",
            m.iterations, m.grad_norm
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(MapFit {
        point: m.point,
        log_posterior: -m.value,
        grad_norm: m.grad_norm,
        iterations: m.iterations,
        converged: m.converged,
        warnings,
    })
}

/// MAP-only fit wrapped as a [`PosteriorFit`].
pub fn fit_map_only(posterior: &Posterior, component: Veracity, config: &OptimizerConfig) -> Result<PosteriorFit> {
    let map = fit_map(posterior, None, config)?;
    let mut fit = PosteriorFit::from_map(component, posterior.layout().clone(), map.point);
    fit.clamped_lags = posterior.clamped_lags(&fit.map_point);
    fit.warnings = map.warnings;
    Ok(fit)
}

/// Runs NUTS chains on `posterior`, started around its MAP point.
pub fn fit_mcmc(posterior: &Posterior, component: Veracity, config: &SamplerConfig) -> Result<PosteriorFit> {
    config.validate()?;
    let map = fit_map(posterior, None, &OptimizerConfig::default())?;
    let mut warnings = map.warnings.clone();
    let settings = nuts::NutsSettings {
        warmup: config.warmup,
        samples: config.samples_per_chain,
        target_accept: config.target_accept,
        max_tree_depth: config.max_tree_depth,
    };
    let outputs: Vec<nuts::ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(config.seed, c as u64);
            let init = jittered_init(posterior, &map.point, config.init_radius, &mut rng)?;
            nuts::run_chain(posterior, &init, settings, &mut rng)
        })
        .collect::<Result<_>>()?;

    let total = config.chains * config.samples_per_chain;
    let divergences: usize = outputs.iter().map(|o| o.divergences).sum();
    if divergences == total {
        return Err(Error::Sampler("every post-warmup transition diverged".into()));
    }
    if divergences as f64 > 0.01 * total as f64 {
        warnings.push(format!("{divergences} of {total} transitions diverged"));
    }
    let depth_hits: usize = outputs.iter().map(|o| o.max_depth_hits).sum();
    if depth_hits > 0 {
        warnings.push(format!("{depth_hits} transitions hit the maximum tree depth"));
    }

    let layout = posterior.layout().clone();
    let dim = layout.dim();
    let names = layout.names();
    let mut diagnostics = Vec::with_capacity(dim);
    if config.chains >= 2 && config.samples_per_chain >= 10 {
        for (j, name) in names.into_iter().enumerate() {
            let cols: Vec<Vec<f64>> = outputs
                .iter()
                .map(|o| o.draws.chunks_exact(dim).map(|d| d[j]).collect())
                .collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            diagnostics.push(ParamDiagnostics {
                name,
                rhat: split_rhat(&refs)?,
                ess: ess(&refs)?,
            });
        }
    } else {
        warnings.push("diagnostics need at least 2 chains of 10 draws; none computed".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(PosteriorFit {
        component,
        mode: FitMode::Mcmc,
        clamped_lags: posterior.clamped_lags(&map.point),
        layout,
        chains: config.chains,
        warmup: config.warmup,
        samples_per_chain: config.samples_per_chain,
        seed: config.seed,
        map_point: map.point,
        diagnostics,
        divergences,
        step_sizes: outputs.iter().map(|o| o.step_size).collect(),
        accept_rates: outputs.iter().map(|o| o.mean_accept).collect(),
        warnings,
        draws: outputs.into_iter().flat_map(|o| o.draws).collect(),
    })
}

fn jittered_init(posterior: &Posterior, center: &[f64], radius: f64, rng: &mut rng::StreamRng) -> Result<Vec<f64>> {
    let mut g = vec![0.0; center.len()];
    for _ in 0..100 {
        let x: Vec<f64> = center
            .iter()
            .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if posterior.log_density_and_grad(&x, &mut g).is_ok() {
            return Ok(x);
        }
    }
    Err(Error::Sampler("no finite starting point found around the MAP point".into()))
}
