mod common;

use mmhawkes::cascade::{Cascade, EventInput};
use mmhawkes::model::{log_likelihood_branching, LogDensity, Posterior, PriorSpec};
use mmhawkes::rng::{derive_seed, stream};
use mmhawkes::simulate::simulate_many;
use mmhawkes::HawkesProcess;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn branching_matches_naive_on_simulated_cascades() {
    let process = common::recovery_process();
    let sims = simulate_many(&process, &common::recovery_sim(), 50, 5).unwrap();
    for s in &sims {
        let fast = process.log_likelihood(&s.cascade);
        let naive = common::naive_branching(&process.params, &s.cascade, common::followers_depth_mark);
        assert!((fast - naive).abs() <= 1e-10 * naive.abs(), "{} vs {naive}", fast);
    }
}

#[test]
fn standardized_coordinates_give_the_same_likelihood() {
    let process = common::recovery_process();
    let cascades: Vec<Cascade> = simulate_many(&process, &common::recovery_sim(), 30, 6)
        .unwrap()
        .into_iter()
        .map(|s| s.cascade)
        .collect();
    let standardizer = mmhawkes::Standardizer::fit(&process.schema, &cascades);
    let mut params = process.params.clone();
    let (alpha, beta) = standardizer.from_raw_coefficients(params.marks.alpha, &params.marks.betas());
    params.marks.alpha = alpha;
    params.marks.beta_u = vec![beta[0]];
    params.marks.beta_s = vec![beta[1]];
    let layout = process.layout();
    for c in &cascades {
        let pc = mmhawkes::PreparedCascade::new(c, &process.schema, &standardizer);
        let a = log_likelihood_branching(&params, &layout, &pc);
        let b = process.log_likelihood(c);
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn posterior_gradient_matches_central_differences() {
    let process = common::recovery_process();
    let prepared = simulate_many(&process, &common::recovery_sim(), 20, 7)
        .unwrap()
        .iter()
        .map(|s| process.prepare(&s.cascade))
        .collect();
    let layout = process.layout();
    let truth = layout.pack(&process.params);
    let posterior = Posterior::new(layout, prepared, PriorSpec::default()).unwrap();
    let mut r = stream(8, 0);
    let mut scratch = vec![0.0; truth.len()];
    for _ in 0..5 {
        let theta: Vec<f64> = truth.iter().map(|t| t + r.random_range(-0.3..0.3)).collect();
        let (_, grad) = posterior.log_posterior_and_gradient(&theta).unwrap();
        for j in 0..theta.len() {
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[j] += 1e-5;
            down[j] -= 1e-5;
            let fd = (posterior.log_density_and_grad(&up, &mut scratch).unwrap()
                - posterior.log_density_and_grad(&down, &mut scratch).unwrap())
                / 2e-5;
            assert!((grad[j] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "coordinate {j}: {} vs {fd}", grad[j]);
        }
    }
}

fn with_horizon(c: &Cascade, horizon: f64) -> Cascade {
    let events = c
        .events()
        .iter()
        .map(|e| EventInput {
            time: e.time,
            parent: e.parent,
            user: e.user.clone(),
        })
        .collect();
    Cascade::new(c.id(), c.label(), Some(horizon), c.covariates().to_vec(), events).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn longer_horizon_never_raises_likelihood(seed in any::<u64>(), extra in 0.0..50.0f64) {
        let mut r = stream(seed, 0);
        let c = common::random_cascade(&mut r, 0);
        let process = HawkesProcess::unstandardized(common::random_params(&mut r), common::followers_depth());
        let base = process.log_likelihood(&c);
        let longer = process.log_likelihood(&with_horizon(&c, c.horizon() + extra));
        prop_assert!(longer <= base + 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn input_order_does_not_matter(seed in any::<u64>()) {
        let mut r = stream(seed, 1);
        let c = common::random_cascade(&mut r, 0);
        let process = HawkesProcess::unstandardized(common::random_params(&mut r), common::followers_depth());
        let n = c.len();
        let mut perm: Vec<usize> = (1..n).collect();
        perm.shuffle(&mut r);
        perm.insert(0, 0);
        let mut position = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            position[old] = new;
        }
        let events = perm
            .iter()
            .map(|&old| {
                let e = &c.events()[old];
                EventInput { time: e.time, parent: e.parent.map(|p| position[p]), user: e.user.clone() }
            })
            .collect();
        let shuffled = Cascade::new(c.id(), None, Some(c.horizon()), c.covariates().to_vec(), events).unwrap();
        let a = process.log_likelihood(&c);
        let b = process.log_likelihood(&shuffled);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn random_cascades_match_naive() {
    for i in 0..100 {
        let mut r = stream(derive_seed(9, i), 0);
        let c = common::random_cascade(&mut r, i as usize);
        let params = common::random_params(&mut r);
        let process = HawkesProcess::unstandardized(params.clone(), common::followers_depth());
        let naive = common::naive_branching(&params, &c, common::followers_depth_mark);
        let fast = process.log_likelihood(&c);
        assert!((fast - naive).abs() <= 1e-10 * naive.abs(), "{fast} vs {naive}");
    }
}
