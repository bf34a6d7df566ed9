//! Residual diagnostics for fitted intensities: time rescaling, super
//! thinning, per-cascade test batteries and posterior predictive checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::Cascade;
use crate::error::{Error, Result};
use crate::model::{ConditionalIntensity, HawkesProcess};
use crate::rng::{self, StreamRng};
use crate::simulate::{simulate, structural_stats, CovariateGenerator, SimConfig, StructuralStats};
use crate::stats::{self, PairedTest, TestValue};

/// Number of grid cells used to bracket the intensity over `[0, T]`.
const GRID_CELLS: usize = 1000;
/// Refuse to superpose more than this many expected points.
const MAX_EXPECTED_POINTS: f64 = 5e6;

/// A left-continuous intensity on `[0, horizon]` with observed events.
pub trait IntensityFn {
    fn horizon(&self) -> f64;
    /// Observed event times that the intensity is meant to explain.
    fn event_times(&self) -> Vec<f64>;
    /// `lambda(t)`, using only events strictly before `t`.
    fn value(&self, t: f64) -> f64;
    /// `int_0^t lambda(s) ds`.
    fn compensator(&self, t: f64) -> f64;
}

impl IntensityFn for ConditionalIntensity {
    fn horizon(&self) -> f64 {
        ConditionalIntensity::horizon(self)
    }

    /// Retweet times; the root is given, not generated by the intensity.
    fn event_times(&self) -> Vec<f64> {
        self.times()[1..].to_vec()
    }

    fn value(&self, t: f64) -> f64 {
        ConditionalIntensity::value(self, t)
    }

    fn compensator(&self, t: f64) -> f64 {
        ConditionalIntensity::compensator(self, t)
    }
}

/// Compensator values at every event time of `intensity`.
pub fn rescale_times<I: IntensityFn + ?Sized>(intensity: &I) -> Vec<f64> {
    intensity
        .event_times()
        .iter()
        .map(|&t| intensity.compensator(t))
        .collect()
}

/// How the constant rate `k` of the super-thinned process is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThinningRate {
    /// Midpoint of the smallest and largest intensity on the grid.
    Midrange,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperThinned {
    pub rate: f64,
    /// Sorted times of the joint process.
    pub times: Vec<f64>,
    pub retained: usize,
    pub added: usize,
}

/// Minimum and maximum of the intensity over a regular grid (excluding 0)
/// and the left limits at event times.
pub fn intensity_range<I: IntensityFn + ?Sized>(intensity: &I) -> (f64, f64) {
    let t_end = intensity.horizon();
    let grid = (1..=GRID_CELLS).map(|j| j as f64 * t_end / GRID_CELLS as f64);
    grid.chain(intensity.event_times().into_iter().filter(|t| *t > 0.0))
        .map(|t| intensity.value(t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Super thinning: observed events are kept with probability
/// `min(k / lambda, 1)` and points from a Poisson process with rate
/// `max(k - lambda, 0)` are added, so a correct intensity yields a
/// homogeneous Poisson process of rate `k`.
pub fn super_thin<I: IntensityFn + ?Sized>(
    intensity: &I,
    rate: ThinningRate,
    rng: &mut StreamRng,
) -> Result<SuperThinned> {
    let t_end = intensity.horizon();
    let k = match rate {
        ThinningRate::Fixed(k) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("thinning rate must be positive, got {k}")));
            }
            k
        }
        ThinningRate::Midrange => {
            let (lo, hi) = intensity_range(intensity);
            if !hi.is_finite() || hi <= 0.0 {
                return Err(Error::Insufficient("insufficient intensity support".into()));
            }
            0.5 * (lo + hi)
        }
    };
    if k * t_end > MAX_EXPECTED_POINTS {
        return Err(Error::Domain(format!(
            "thinning rate {k} over horizon {t_end} would add too many points"
        )));
    }
    let mut times = Vec::new();
    let mut retained = 0;
    for t in intensity.event_times() {
        let lambda = intensity.value(t);
        let keep = if lambda <= k { 1.0 } else { k / lambda };
        if rng.random::<f64>() < keep {
            times.push(t);
            retained += 1;
        }
    }
    let mut added = 0;
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / k;
        if t > t_end {
            break;
        }
        let fill = (k - intensity.value(t)).max(0.0);
        if rng.random::<f64>() * k < fill {
            times.push(t);
            added += 1;
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(SuperThinned {
        rate: k,
        times,
        retained,
        added,
    })
}

/// Test battery for one super-thinned cascade; `None` marks a test that
/// could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeGof {
    pub id: String,
    pub rate: Option<f64>,
    pub n_points: usize,
    pub uniformity: Option<PairedTest>,
    pub interarrival: Option<PairedTest>,
    pub ljung_box: Option<TestValue>,
}

impl CascadeGof {
    /// `(name, p-value)` for every computed test.
    pub fn p_values(&self) -> Vec<(&'static str, f64)> {
        let mut v = Vec::new();
        if let Some(u) = &self.uniformity {
            v.push(("uniformity_ks", u.ks.p_value));
            v.push(("uniformity_cvm", u.cvm.p_value));
        }
        if let Some(e) = &self.interarrival {
            v.push(("interarrival_ks", e.ks.p_value));
            v.push(("interarrival_cvm", e.cvm.p_value));
        }
        if let Some(l) = &self.ljung_box {
            v.push(("ljung_box", l.p_value));
        }
        v
    }
}

pub const TEST_NAMES: [&str; 5] = [
    "uniformity_ks",
    "uniformity_cvm",
    "interarrival_ks",
    "interarrival_cvm",
    "ljung_box",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: String,
    /// Cascades on which the test could be computed.
    pub computed: usize,
    /// Fraction of computed tests with p-value above 0.01.
    pub pass_01: f64,
    /// Fraction of computed tests with p-value above 0.05.
    pub pass_05: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub cascades: Vec<CascadeGof>,
    pub summary: Vec<TestSummary>,
}

impl GofReport {
    pub fn from_cascades(cascades: Vec<CascadeGof>) -> Self {
        let summary = TEST_NAMES
            .iter()
            .map(|name| {
                let ps: Vec<f64> = cascades
                    .iter()
                    .flat_map(|c| c.p_values())
                    .filter(|(n, _)| n == name)
                    .map(|(_, p)| p)
                    .collect();
                let frac = |level: f64| {
                    if ps.is_empty() {
                        0.0
                    } else {
                        ps.iter().filter(|p| **p > level).count() as f64 / ps.len() as f64
                    }
                };
                TestSummary {
                    test: name.to_string(),
                    computed: ps.len(),
                    pass_01: frac(0.01),
                    pass_05: frac(0.05),
                }
            })
            .collect();
        Self { cascades, summary }
    }

    pub fn test(&self, name: &str) -> Option<&TestSummary> {
        self.summary.iter().find(|s| s.test == name)
    }

    /// Fraction of computed tests rejecting at `level`.
    pub fn rejection_rate(&self, name: &str, level: f64) -> Option<f64> {
        let ps: Vec<f64> = self
            .cascades
            .iter()
            .flat_map(|c| c.p_values())
            .filter(|(n, _)| *n == name)
            .map(|(_, p)| p)
            .collect();
        (!ps.is_empty()).then(|| ps.iter().filter(|p| **p <= level).count() as f64 / ps.len() as f64)
    }
}

fn ok<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Insufficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Super-thins one intensity and runs every test on the joint process.
pub fn cascade_gof<I: IntensityFn + ?Sized>(
    id: &str,
    intensity: &I,
    rate: ThinningRate,
    rng: &mut StreamRng,
) -> Result<CascadeGof> {
    let Some(st) = ok(super_thin(intensity, rate, rng))? else {
        return Ok(CascadeGof {
            id: id.to_string(),
            rate: None,
            n_points: 0,
            uniformity: None,
            interarrival: None,
            ljung_box: None,
        });
    };
    Ok(CascadeGof {
        id: id.to_string(),
        rate: Some(st.rate),
        n_points: st.times.len(),
        uniformity: ok(stats::test_conditional_uniformity(&st.times))?,
        interarrival: ok(stats::test_exponential_interarrivals(&st.times, st.rate))?,
        ljung_box: ok(stats::test_independence(&st.times))?,
    })
}

/// Goodness-of-fit report of `process` over `cascades`; cascade `i` uses
/// stream `i` of `seed`.
pub fn gof_report(process: &HawkesProcess, cascades: &[Cascade], rate: ThinningRate, seed: u64) -> Result<GofReport> {
    let per = cascades
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let intensity = process.conditional_intensity(c);
            cascade_gof(c.id(), &intensity, rate, &mut rng::stream(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GofReport::from_cascades(per))
}

pub const PPC_STATISTICS: [&str; 4] = ["size", "max_depth", "virality", "size_to_depth"];

/// Observed and simulated values of one structural statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcStatistic {
    pub statistic: String,
    pub observed_mean: f64,
    pub simulated_mean: f64,
    pub ks: TestValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub n_observed: usize,
    pub n_simulated: usize,
    pub truncated: usize,
    pub statistics: Vec<PpcStatistic>,
}

impl PpcReport {
    pub fn statistic(&self, name: &str) -> Option<&PpcStatistic> {
        self.statistics.iter().find(|s| s.statistic == name)
    }
}

fn stat_values(stats: &[StructuralStats], name: &str) -> Vec<f64> {
    stats
        .iter()
        .map(|s| match name {
            "size" => s.size as f64,
            "max_depth" => s.max_depth as f64,
            "virality" => s.virality,
            _ => s.size_to_depth,
        })
        .collect()
}

/// Compares structural statistics of `observed` cascades with `n_sim`
/// cascades simulated from `processes` (cycled, one per posterior draw).
/// Each simulation bootstraps the horizon and covariates of a random
/// observed cascade.
pub fn posterior_predictive_check(
    processes: &[HawkesProcess],
    observed: &[Cascade],
    n_sim: usize,
    max_events: usize,
    seed: u64,
) -> Result<PpcReport> {
    if n_sim < 100 {
        return Err(Error::Config(format!(
            "posterior predictive check needs at least 100 simulated cascades, got {n_sim}"
        )));
    }
    if processes.is_empty() || observed.is_empty() {
        return Err(Error::Insufficient("no processes or no observed cascades".into()));
    }
    let covariates = CovariateGenerator::empirical(observed)?;
    let mut simulated = Vec::with_capacity(n_sim);
    let mut truncated = 0;
    for i in 0..n_sim {
        let mut r = rng::stream(seed, i as u64);
        let template = &observed[r.random_range(0..observed.len())];
        let config = SimConfig {
            horizon: template.horizon().max(f64::MIN_POSITIVE),
            covariates: covariates.clone(),
            max_events,
        };
        let s = simulate(&processes[i % processes.len()], &config, &mut r)?;
        truncated += usize::from(s.truncated);
        simulated.push(structural_stats(&s.cascade));
    }
    let obs: Vec<StructuralStats> = observed.iter().map(structural_stats).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let statistics = PPC_STATISTICS
        .iter()
        .map(|name| {
            let (o, s) = (stat_values(&obs, name), stat_values(&simulated, name));
            Ok(PpcStatistic {
                statistic: name.to_string(),
                observed_mean: mean(&o),
                simulated_mean: mean(&s),
                ks: stats::ks_two_sample(&o, &s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PpcReport {
        n_observed: observed.len(),
        n_simulated: n_sim,
        truncated,
        statistics,
    })
}
