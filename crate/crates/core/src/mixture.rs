//! Two-component mixture: one Hawkes fit per veracity class, and scoring of
//! new cascades by the posterior probability of the false-rumor component.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{truncate, Cascade, Truncation, Veracity};
use crate::covariates::{CovariateSchema, Standardizer};
use crate::error::{Error, Result};
use crate::inference::{self, OptimizerConfig, PosteriorFit, SamplerConfig};
use crate::kernels::KernelFamily;
use crate::model::{branching_eval, ComponentParams, ParamLayout, Posterior, PreparedCascade, PriorSpec};

/// Model structure shared by both components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSpec {
    pub schema: CovariateSchema,
    pub root: KernelFamily,
    pub non_root: KernelFamily,
    pub prior: PriorSpec,
    /// Prior probability of the false-rumor class.
    pub prior_false: f64,
    /// Standardize covariates with statistics of the training set.
    pub standardize: bool,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            schema: CovariateSchema::default(),
            root: KernelFamily::PowerLaw,
            non_root: KernelFamily::Weibull,
            prior: PriorSpec::default(),
            prior_false: 0.5,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Mcmc,
    Map,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub fit_false: PosteriorFit,
    pub fit_true: PosteriorFit,
    pub schema: CovariateSchema,
    pub standardizer: Standardizer,
    pub prior_false: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeracityScore {
    pub id: String,
    pub p_false: f64,
    #[serde(rename = "log_ev_false")]
    pub log_evidence_false: f64,
    #[serde(rename = "log_ev_true")]
    pub log_evidence_true: f64,
    pub n_events_used: usize,
    pub horizon_used: f64,
}

impl VeracityScore {
    pub fn p_true(&self) -> f64 {
        1.0 - self.p_false
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(false | evidences)` for the given prior.
pub fn posterior_false(log_evidence_false: f64, log_evidence_true: f64, prior_false: f64) -> f64 {
    let logit_prior = (prior_false / (1.0 - prior_false)).ln();
    sigmoid(log_evidence_false - log_evidence_true + logit_prior)
}

fn check_prior(prior_false: f64) -> Result<()> {
    if prior_false > 0.0 && prior_false < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("prior_false must lie in (0, 1), got {prior_false}")))
    }
}

/// Log of the posterior-averaged likelihood of a prepared cascade:
/// `logsumexp_d log L(draw_d) - log D`.
pub fn log_evidence_prepared(fit: &PosteriorFit, pc: &PreparedCascade) -> Result<f64> {
    if pc.dim != fit.layout.n_beta() {
        return Err(Error::Config(format!(
            "cascade `{}` has {} covariate columns, fit expects {}",
            pc.id,
            pc.dim,
            fit.layout.n_beta()
        )));
    }
    let lls: Vec<f64> = fit
        .draws()
        .map(|d| branching_eval(&fit.layout, d, pc, None).value)
        .collect();
    if lls.is_empty() {
        return Err(Error::Config("fit holds no draws".into()));
    }
    let m = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    let s: f64 = lls.iter().map(|v| (v - m).exp()).sum();
    Ok(m + s.ln() - (lls.len() as f64).ln())
}

impl MixtureModel {
    /// Fits one component per class. Cascades without a label are ignored.
    pub fn train(cascades: &[Cascade], spec: &MixtureSpec, mode: TrainMode, config: &SamplerConfig) -> Result<Self> {
        check_prior(spec.prior_false)?;
        let of = |v: Veracity| cascades.iter().filter(|c| c.label() == Some(v)).cloned().collect::<Vec<_>>();
        let (falses, trues) = (of(Veracity::False), of(Veracity::True));
        for (set, name) in [(&falses, "false"), (&trues, "true")] {
            if set.is_empty() {
                return Err(Error::Insufficient(format!("no {name}-labeled cascades to train on")));
            }
        }
        let labeled: Vec<Cascade> = falses.iter().chain(&trues).cloned().collect();
        let standardizer = if spec.standardize {
            Standardizer::fit(&spec.schema, &labeled)
        } else {
            Standardizer::identity(spec.schema.dim())
        };
        let layout = ParamLayout::new(&spec.schema, spec.root, spec.non_root);
        let fit_one = |set: &[Cascade], component: Veracity, seed: u64| -> Result<PosteriorFit> {
            let prepared = set
                .iter()
                .map(|c| PreparedCascade::new(c, &spec.schema, &standardizer))
                .collect();
            let posterior = Posterior::new(layout.clone(), prepared, spec.prior)?;
            match mode {
                TrainMode::Mcmc => inference::fit_mcmc(&posterior, component, &SamplerConfig { seed, ..*config }),
                TrainMode::Map => inference::fit_map_only(&posterior, component, &OptimizerConfig::default()),
            }
        };
        let fit_false = fit_one(&falses, Veracity::False, crate::rng::derive_seed(config.seed, 0))?;
        let fit_true = fit_one(&trues, Veracity::True, crate::rng::derive_seed(config.seed, 1))?;
        Ok(Self {
            fit_false,
            fit_true,
            schema: spec.schema.clone(),
            standardizer,
            prior_false: spec.prior_false,
        })
    }

    pub fn prepare(&self, cascade: &Cascade) -> PreparedCascade {
        PreparedCascade::new(cascade, &self.schema, &self.standardizer)
    }

    pub fn log_evidence(&self, fit: &PosteriorFit, cascade: &Cascade) -> Result<f64> {
        log_evidence_prepared(fit, &self.prepare(cascade))
    }

    pub fn score(&self, cascade: &Cascade) -> Result<VeracityScore> {
        check_prior(self.prior_false)?;
        let pc = self.prepare(cascade);
        let ev_false = log_evidence_prepared(&self.fit_false, &pc)?;
        let ev_true = log_evidence_prepared(&self.fit_true, &pc)?;
        Ok(VeracityScore {
            id: cascade.id().to_string(),
            p_false: posterior_false(ev_false, ev_true, self.prior_false),
            log_evidence_false: ev_false,
            log_evidence_true: ev_true,
            n_events_used: cascade.len(),
            horizon_used: cascade.horizon(),
        })
    }

    /// Scores the cascade as observed up to a time or retweet count.
    pub fn score_partial(&self, cascade: &Cascade, by: Truncation) -> Result<VeracityScore> {
        self.score(&truncate(cascade, by)?)
    }

    /// Raises an alarm (returns `Veracity::False`) iff `p_false >= threshold`.
    pub fn classify(&self, cascade: &Cascade, threshold: f64) -> Result<Veracity> {
        Ok(classify_score(self.score(cascade)?.p_false, threshold)?)
    }

    /// MAP parameters of both components: `(false, true)`.
    pub fn map_params(&self) -> (ComponentParams, ComponentParams) {
        (self.fit_false.map_params(), self.fit_true.map_params())
    }

    /// Writes `params.json` and one subdirectory per component.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let (f, t) = self.map_params();
        let summary = MixtureFile {
            schema: self.schema.clone(),
            standardizer: self.standardizer.clone(),
            prior_false: self.prior_false,
            layout: self.fit_false.layout.clone(),
            map_false: f,
            map_true: t,
        };
        std::fs::write(dir.join("params.json"), serde_json::to_vec_pretty(&summary)?)?;
        self.fit_false.save(&dir.join("false"))?;
        self.fit_true.save(&dir.join("true"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let summary: MixtureFile = serde_json::from_slice(&std::fs::read(dir.join("params.json"))?)?;
        let fit_false = PosteriorFit::load(&dir.join("false"))?;
        let fit_true = PosteriorFit::load(&dir.join("true"))?;
        if fit_false.layout != fit_true.layout || fit_false.layout.columns != summary.schema.column_names() {
            return Err(Error::Config("component fits disagree with the saved schema".into()));
        }
        Ok(Self {
            fit_false,
            fit_true,
            schema: summary.schema,
            standardizer: summary.standardizer,
            prior_false: summary.prior_false,
        })
    }
}

/// Thresholding rule shared with the evaluation code.
pub fn classify_score(p_false: f64, threshold: f64) -> Result<Veracity> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    Ok(if p_false >= threshold {
        Veracity::False
    } else {
        Veracity::True
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct MixtureFile {
    schema: CovariateSchema,
    standardizer: Standardizer,
    prior_false: f64,
    layout: ParamLayout,
    map_false: ComponentParams,
    map_true: ComponentParams,
}

pub fn write_scores<W: Write>(mut w: W, scores: &[VeracityScore]) -> Result<()> {
    for s in scores {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_scores<R: BufRead>(r: R) -> Result<Vec<VeracityScore>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
