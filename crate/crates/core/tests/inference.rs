mod common;

use mmhawkes::cascade::{Cascade, Veracity};
use mmhawkes::inference::{fit_map, fit_mcmc, OptimizerConfig, PosteriorFit, SamplerConfig};
use mmhawkes::model::{LogDensity, Posterior, PreparedCascade, PriorSpec};
use mmhawkes::simulate::simulate_many;
use mmhawkes::Standardizer;

fn simulated(n: usize, seed: u64) -> Vec<Cascade> {
    simulate_many(&common::recovery_process(), &common::recovery_sim(), n, seed)
        .unwrap()
        .into_iter()
        .map(|s| s.cascade)
        .collect()
}

fn raw_posterior(cascades: &[Cascade]) -> Posterior {
    let process = common::recovery_process();
    let prepared = cascades.iter().map(|c| process.prepare(c)).collect();
    Posterior::new(process.layout(), prepared, PriorSpec::default()).unwrap()
}

fn standardized_posterior(cascades: &[Cascade]) -> (Posterior, Standardizer) {
    let process = common::recovery_process();
    let standardizer = Standardizer::fit(&process.schema, cascades);
    let prepared = cascades
        .iter()
        .map(|c| PreparedCascade::new(c, &process.schema, &standardizer))
        .collect();
    (
        Posterior::new(process.layout(), prepared, PriorSpec::default()).unwrap(),
        standardizer,
    )
}

#[test]
fn map_recovers_alpha_from_500_cascades() {
    let cascades = simulated(500, 11);
    let posterior = raw_posterior(&cascades);
    let map = fit_map(&posterior, None, &OptimizerConfig::default()).unwrap();
    assert!(map.converged);
    assert!(map.grad_norm <= 1e-5);
    let alpha = map.point[0];
    assert!((alpha - 1.64).abs() <= 0.15, "alpha {alpha}");
}

#[test]
fn restart_at_the_optimum_stays_put() {
    let posterior = raw_posterior(&simulated(500, 12));
    let first = fit_map(&posterior, None, &OptimizerConfig::default()).unwrap();
    let again = fit_map(&posterior, Some(&first.point), &OptimizerConfig::default()).unwrap();
    assert!(again.iterations <= 5, "{} iterations", again.iterations);
    for (a, b) in first.point.iter().zip(&again.point) {
        assert!((a - b).abs() <= 0.05);
    }
}

#[test]
fn search_ascends_from_its_start() {
    let posterior = raw_posterior(&simulated(100, 13));
    let start = vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut g = vec![0.0; start.len()];
    let initial = posterior.log_density_and_grad(&start, &mut g).unwrap();
    let map = fit_map(&posterior, Some(&start), &OptimizerConfig::default()).unwrap();
    assert!(map.log_posterior >= initial);
}

#[test]
fn single_cascade_gives_a_finite_point() {
    let cascades = simulated(40, 14);
    let largest = cascades.iter().max_by_key(|c| c.len()).unwrap().clone();
    let posterior = raw_posterior(&[largest]);
    let map = fit_map(&posterior, None, &OptimizerConfig::default()).unwrap();
    assert!(map.point.iter().all(|v| v.is_finite()));
    assert!(map.log_posterior.is_finite());
}

#[test]
fn zero_iteration_sampler_config_is_rejected() {
    let (posterior, _) = standardized_posterior(&simulated(20, 15));
    let config = SamplerConfig {
        samples_per_chain: 0,
        ..SamplerConfig::default()
    };
    assert!(matches!(
        fit_mcmc(&posterior, Veracity::False, &config),
        Err(mmhawkes::Error::Config(_))
    ));
}

fn small_fit(seed: u64) -> PosteriorFit {
    let (posterior, _) = standardized_posterior(&simulated(150, 16));
    let config = SamplerConfig {
        warmup: 200,
        samples_per_chain: 200,
        seed,
        ..SamplerConfig::default()
    };
    fit_mcmc(&posterior, Veracity::False, &config).unwrap()
}

#[test]
fn mcmc_is_reproducible_and_round_trips_through_disk() {
    let fit = small_fit(3);
    assert_eq!(fit.num_draws(), 400);
    assert_eq!(fit.diagnostics.len(), fit.dim());
    assert_eq!(small_fit(3).draws, fit.draws);

    let dir = tempfile::tempdir().unwrap();
    fit.save(dir.path()).unwrap();
    let back = PosteriorFit::load(dir.path()).unwrap();
    assert_eq!(back, fit);
    let bits = |f: &PosteriorFit| f.draws.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&fit));
    assert_eq!(
        back.map_point.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        fit.map_point.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn posterior_sits_around_the_map_point() {
    let fit = small_fit(4);
    for j in 0..fit.dim() {
        let (lo, hi) = (fit.quantile(j, 0.005), fit.quantile(j, 0.995));
        assert!((lo..=hi).contains(&fit.map_point[j]), "parameter {j}");
    }
    assert!(fit.max_rhat().unwrap() < 1.1);
}
