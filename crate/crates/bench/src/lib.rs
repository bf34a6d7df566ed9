//! Fixtures shared by the benchmarks.

use mmhawkes::covariates::CovariateSchema;
use mmhawkes::model::{Posterior, PreparedCascade};
use mmhawkes::simulate::{simulate_many, SimConfig};
use mmhawkes::{ComponentParams, HawkesProcess, Kernel, KernelPair, MarkCoefficients, PriorSpec, Veracity};

/// A subcritical process with a power-law root and Weibull re-shares.
pub fn process() -> HawkesProcess {
    let schema = CovariateSchema::from_names(&[], &["followers"], &["depth"]).expect("valid schema");
    let params = ComponentParams {
        marks: MarkCoefficients {
            alpha: 1.64,
            beta_c: vec![],
            beta_u: vec![0.2],
            beta_s: vec![-2.84],
        },
        kernels: KernelPair {
            root: Kernel::PowerLaw { shape: 1.2, offset: 0.5 },
            non_root: Kernel::Weibull { scale: 1.5, shape: 0.6 },
        },
        component: Veracity::False,
    };
    HawkesProcess::unstandardized(params, schema)
}

/// Log posterior over `n` simulated cascades, plus the true parameter vector.
pub fn posterior(n: usize, seed: u64) -> (Posterior, Vec<f64>) {
    let p = process();
    let sims = simulate_many(&p, &SimConfig { horizon: 48.0, ..SimConfig::default() }, n, seed)
        .expect("simulation succeeds");
    let prepared: Vec<PreparedCascade> = sims.iter().map(|s| p.prepare(&s.cascade)).collect();
    let layout = p.layout();
    let theta = layout.pack(&p.params);
    (Posterior::new(layout, prepared, PriorSpec::default()).expect("nonempty"), theta)
}
