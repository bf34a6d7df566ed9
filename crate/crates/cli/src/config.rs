//! TOML run configuration. Every command-line flag has a field here;
//! flags given on the command line take precedence.

use std::path::Path;

use mmhawkes::inference::SamplerConfig;
use mmhawkes::mixture::{MixtureSpec, TrainMode};
use mmhawkes::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: TrainMode,
    pub sampler: SamplerConfig,
    pub model: MixtureSpec,
    /// Decision threshold on `p_false`.
    pub threshold: f64,
    /// Significance level of the goodness-of-fit tests.
    pub level: f64,
    /// Drop cascades with fewer events before fitting.
    pub min_size: usize,
    /// Balanced subsample size per class for fitting; all cascades if unset.
    pub per_class: Option<usize>,
    pub horizon: f64,
    pub max_events: usize,
    pub times: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: TrainMode::Mcmc,
            sampler: SamplerConfig::default(),
            model: MixtureSpec::default(),
            threshold: 0.5,
            level: 0.05,
            min_size: 1,
            per_class: None,
            horizon: 168.0,
            max_events: 10_000,
            times: mmhawkes::eval::DEFAULT_TIME_GRID.to_vec(),
            counts: mmhawkes::eval::DEFAULT_COUNT_GRID.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str(
            "seed = 7\nthreshold = 0.4\n[sampler]\nchains = 4\n[model]\nprior_false = 0.3\n[model.schema]\ncascade = []\nuser = [{ name = \"followers\", log = true }]\nstructural = []\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sampler.chains, 4);
        assert_eq!(c.sampler.warmup, 1000);
        assert_eq!(c.model.prior_false, 0.3);
        assert_eq!(c.model.schema.column_names(), vec!["x.followers"]);
        assert_eq!(c.level, 0.05);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }

    #[test]
    fn defaults_serialize_and_parse_back() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
    }
}
