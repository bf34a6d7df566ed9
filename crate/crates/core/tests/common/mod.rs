//! Fixtures shared by the integration tests: reference processes and an
//! independent implementation of the branching log-likelihood.
#![allow(dead_code)]

use mmhawkes::cascade::{Cascade, EventInput};
use mmhawkes::covariates::CovariateSchema;
use mmhawkes::kernels::KernelFamily;
use mmhawkes::rng::StreamRng;
use mmhawkes::simulate::{CovariateGenerator, SimConfig, SyntheticCovariates};
use mmhawkes::{ComponentParams, HawkesProcess, Kernel, KernelPair, MarkCoefficients, Veracity};
use rand::Rng;

pub fn families() -> [KernelFamily; 3] {
    [KernelFamily::Exponential, KernelFamily::PowerLaw, KernelFamily::Weibull]
}

pub fn random_kernel(r: &mut StreamRng) -> Kernel {
    let family = families()[r.random_range(0..3)];
    let raw: Vec<f64> = (0..family.arity()).map(|_| r.random_range(-1.5..1.5)).collect();
    Kernel::from_raw(family, &raw)
}

/// Random tree of 1 to 20 events on `[0, 10]` with a followers column.
pub fn random_cascade(r: &mut StreamRng, id: usize) -> Cascade {
    let n = r.random_range(1..=20);
    let mut times: Vec<f64> = (1..n).map(|_| r.random_range(0.0..10.0)).collect();
    times.sort_by(f64::total_cmp);
    times.insert(0, 0.0);
    let events = times
        .iter()
        .enumerate()
        .map(|(i, &t)| EventInput {
            time: t,
            parent: (i > 0).then(|| r.random_range(0..i)),
            user: vec![(3.0 * r.random::<f64>()).exp() * 100.0, 1.0, 1.0, 1.0],
        })
        .collect();
    let horizon = times[n - 1] + r.random_range(0.0..5.0);
    Cascade::new(format!("c{id}"), None, Some(horizon), vec![0.0; 4], events).expect("valid random cascade")
}

/// Random parameters for [`followers_depth`] with random kernel families.
pub fn random_params(r: &mut StreamRng) -> ComponentParams {
    ComponentParams {
        marks: MarkCoefficients {
            alpha: r.random_range(-1.0..1.0),
            beta_c: vec![],
            beta_u: vec![r.random_range(-0.5..0.5)],
            beta_s: vec![r.random_range(-2.0..1.0)],
        },
        kernels: KernelPair {
            root: random_kernel(r),
            non_root: random_kernel(r),
        },
        component: Veracity::False,
    }
}

pub fn followers_depth() -> CovariateSchema {
    CovariateSchema::from_names(&[], &["followers"], &["depth"]).unwrap()
}

pub fn kernels() -> KernelPair {
    KernelPair {
        root: Kernel::PowerLaw { shape: 1.2, offset: 0.5 },
        non_root: Kernel::Weibull { scale: 1.5, shape: 0.6 },
    }
}

/// Synthetic covariates with the given log-normal parameters for one user
/// column (index into followers, followees, account age, engagement).
pub fn covariates(column: usize, log_mean: f64, log_sd: f64) -> CovariateGenerator {
    let mut s = SyntheticCovariates::default();
    s.user_log_mean[column] = log_mean;
    s.user_log_sd[column] = log_sd;
    CovariateGenerator::Synthetic(s)
}

/// Process used for parameter recovery: followers and depth covariates.
pub fn recovery_process() -> HawkesProcess {
    let schema = followers_depth();
    HawkesProcess::unstandardized(
        ComponentParams {
            marks: MarkCoefficients {
                alpha: 1.64,
                beta_c: vec![],
                beta_u: vec![0.2047],
                beta_s: vec![-2.8421],
            },
            kernels: kernels(),
            component: Veracity::False,
        },
        schema,
    )
}

pub fn recovery_sim() -> SimConfig {
    SimConfig {
        horizon: 48.0,
        covariates: covariates(0, 0.0, 1.0),
        max_events: 20_000,
    }
}

fn separation_process(alpha: f64, beta_eng: f64, beta_depth: f64, component: Veracity) -> HawkesProcess {
    let schema = CovariateSchema::from_names(&[], &["engagement"], &["depth"]).unwrap();
    HawkesProcess::unstandardized(
        ComponentParams {
            marks: MarkCoefficients {
                alpha,
                beta_c: vec![],
                beta_u: vec![beta_eng],
                beta_s: vec![beta_depth],
            },
            kernels: kernels(),
            component,
        },
        schema,
    )
}

/// `(false, true)` processes whose coefficients differ like the two fitted
/// components of the reference study.
pub fn separation_processes() -> (HawkesProcess, HawkesProcess) {
    (
        separation_process(1.6447, -0.0785, -2.8421, Veracity::False),
        separation_process(2.3440, 0.3738, -3.2102, Veracity::True),
    )
}

pub fn separation_sim() -> SimConfig {
    SimConfig {
        horizon: 48.0,
        covariates: covariates(3, 0.0, 0.5),
        max_events: 20_000,
    }
}

fn density(k: &Kernel, s: f64) -> f64 {
    match *k {
        Kernel::Exponential { rate } => rate * (-rate * s).exp(),
        Kernel::PowerLaw { shape, offset } => shape * offset.powf(shape) / (s + offset).powf(shape + 1.0),
        Kernel::Weibull { scale, shape } => shape / scale * (s / scale).powf(shape - 1.0) * (-(s / scale).powf(shape)).exp(),
    }
}

fn cdf(k: &Kernel, s: f64) -> f64 {
    match *k {
        Kernel::Exponential { rate } => 1.0 - (-rate * s).exp(),
        Kernel::PowerLaw { shape, offset } => 1.0 - (offset / (s + offset)).powf(shape),
        Kernel::Weibull { scale, shape } => 1.0 - (-(s / scale).powf(shape)).exp(),
    }
}

/// Mark of event `i` under the followers/depth schema without
/// standardization: `exp(alpha + b_f ln(1 + followers) + b_d ln(1 + depth))`.
pub fn followers_depth_mark(params: &ComponentParams, cascade: &Cascade, i: usize) -> f64 {
    let e = &cascade.events()[i];
    let m = &params.marks;
    (m.alpha + m.beta_u[0] * (1.0 + e.user[0]).ln() + m.beta_s[0] * (1.0 + e.structural.depth as f64).ln()).exp()
}

/// Branching log-likelihood written directly from the model definition.
/// Lags below `1e-6` are clamped for kernels unbounded at zero.
pub fn naive_branching(
    params: &ComponentParams,
    cascade: &Cascade,
    mark: impl Fn(&ComponentParams, &Cascade, usize) -> f64,
) -> f64 {
    let ev = cascade.events();
    let marks: Vec<f64> = (0..ev.len()).map(|i| mark(params, cascade, i)).collect();
    let kernel = |i: usize| if i == 0 { &params.kernels.root } else { &params.kernels.non_root };
    let mut ll = 0.0;
    for e in ev.iter().skip(1) {
        let parent = e.parent.unwrap();
        let mut lag = e.time - ev[parent].time;
        if matches!(kernel(parent), Kernel::Weibull { shape, .. } if *shape < 1.0) {
            lag = lag.max(1e-6);
        }
        ll += (marks[parent] * density(kernel(parent), lag)).ln();
    }
    for (i, e) in ev.iter().enumerate() {
        ll -= marks[i] * cdf(kernel(i), cascade.horizon() - e.time);
    }
    ll
}
