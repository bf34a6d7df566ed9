//! No-U-Turn sampler with multinomial trajectory sampling, a diagonal mass
//! matrix and dual-averaging step size adaptation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::LogDensity;
use crate::rng::StreamRng;

/// Energy error beyond which a trajectory is declared divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct NutsSettings {
    pub warmup: usize,
    pub samples: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ChainOutput {
    /// Post-warmup draws, row-major `samples x dim`.
    pub draws: Vec<f64>,
    pub divergences: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub max_depth_hits: usize,
}

#[derive(Debug, Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Tree {
    minus: State,
    plus: State,
    proposal: State,
    log_weight: f64,
    turning: bool,
    divergent: bool,
    accept_sum: f64,
    n_steps: usize,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

struct Sampler<'a, D: LogDensity> {
    target: &'a D,
    inv_metric: Vec<f64>,
}

impl<D: LogDensity> Sampler<'_, D> {
    fn evaluate(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        match self.target.log_density_and_grad(q, grad) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, s: &State) -> f64 {
        let h = -s.logp + self.kinetic(&s.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn leapfrog(&self, s: &State, eps: f64) -> State {
        let mut p: Vec<f64> = s.p.iter().zip(&s.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
        let q: Vec<f64> = s
            .q
            .iter()
            .zip(&p)
            .zip(&self.inv_metric)
            .map(|((q, p), m)| q + eps * m * p)
            .collect();
        let mut grad = vec![0.0; q.len()];
        let logp = self.evaluate(&q, &mut grad);
        if logp.is_finite() {
            p.iter_mut().zip(&grad).for_each(|(p, g)| *p += 0.5 * eps * g);
        }
        State { q, p, grad, logp }
    }

    fn turning(&self, minus: &State, plus: &State) -> bool {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..minus.q.len() {
            let dq = plus.q[i] - minus.q[i];
            a += dq * self.inv_metric[i] * minus.p[i];
            b += dq * self.inv_metric[i] * plus.p[i];
        }
        a < 0.0 || b < 0.0
    }

    fn build_tree(&self, rng: &mut StreamRng, from: &State, dir: f64, depth: usize, eps: f64, h0: f64) -> Tree {
        if depth == 0 {
            let s = self.leapfrog(from, dir * eps);
            let h = self.hamiltonian(&s);
            let err = h - h0;
            return Tree {
                minus: s.clone(),
                plus: s.clone(),
                proposal: s,
                log_weight: -err,
                turning: false,
                divergent: !(err <= MAX_ENERGY_ERROR),
                accept_sum: (-err).exp().min(1.0),
                n_steps: 1,
            };
        }
        let first = self.build_tree(rng, from, dir, depth - 1, eps, h0);
        if first.divergent || first.turning {
            return first;
        }
        let edge = if dir > 0.0 { &first.plus } else { &first.minus };
        let second = self.build_tree(rng, edge, dir, depth - 1, eps, h0);
        let (minus, plus) = if dir > 0.0 {
            (first.minus, second.plus)
        } else {
            (second.minus, first.plus)
        };
        let accept_sum = first.accept_sum + second.accept_sum;
        let n_steps = first.n_steps + second.n_steps;
        if second.divergent || second.turning {
            return Tree {
                minus,
                plus,
                proposal: first.proposal,
                log_weight: first.log_weight,
                turning: second.turning,
                divergent: second.divergent,
                accept_sum,
                n_steps,
            };
        }
        let log_weight = log_add(first.log_weight, second.log_weight);
        let take_second = rng.random::<f64>() < (second.log_weight - log_weight).exp();
        let proposal = if take_second { second.proposal } else { first.proposal };
        let turning = self.turning(&minus, &plus);
        Tree {
            minus,
            plus,
            proposal,
            log_weight,
            turning,
            divergent: false,
            accept_sum,
            n_steps,
        }
    }

    fn momentum(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.inv_metric
            .iter()
            .map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt())
            .collect()
    }

    /// One transition; returns the new state, mean acceptance statistic,
    /// divergence flag and whether the depth cap was hit.
    fn transition(
        &self,
        rng: &mut StreamRng,
        current: &State,
        eps: f64,
        max_depth: usize,
    ) -> (State, f64, bool, bool) {
        let mut start = current.clone();
        start.p = self.momentum(rng);
        let h0 = self.hamiltonian(&start);
        let mut minus = start.clone();
        let mut plus = start.clone();
        let mut proposal = start;
        let mut log_weight = 0.0;
        let mut accept_sum = 0.0;
        let mut n_steps = 0;
        let mut divergent = false;
        let mut depth = 0;
        while depth < max_depth {
            let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let from = if dir > 0.0 { &plus } else { &minus };
            let sub = self.build_tree(rng, from, dir, depth, eps, h0);
            depth += 1;
            accept_sum += sub.accept_sum;
            n_steps += sub.n_steps;
            if dir > 0.0 {
                plus = sub.plus;
            } else {
                minus = sub.minus;
            }
            if sub.divergent {
                divergent = true;
                break;
            }
            if sub.turning {
                break;
            }
            if rng.random::<f64>() < (sub.log_weight - log_weight).exp() {
                proposal = sub.proposal;
            }
            log_weight = log_add(log_weight, sub.log_weight);
            if self.turning(&minus, &plus) {
                break;
            }
        }
        let hit_cap = depth == max_depth && !divergent;
        (proposal, accept_sum / n_steps.max(1) as f64, divergent, hit_cap)
    }

    /// Doubles or halves `eps` until one leapfrog step crosses acceptance 0.8.
    fn initial_step_size(&self, rng: &mut StreamRng, current: &State, mut eps: f64) -> f64 {
        let mut s = current.clone();
        s.p = self.momentum(rng);
        let h0 = self.hamiltonian(&s);
        let log_ratio = |eps: f64| h0 - self.hamiltonian(&self.leapfrog(&s, eps));
        let up = log_ratio(eps) > 0.8f64.ln();
        for _ in 0..100 {
            let next = if up { eps * 2.0 } else { eps * 0.5 };
            let r = log_ratio(next);
            let crossed = if up { !(r > 0.8f64.ln()) } else { r > 0.8f64.ln() };
            eps = next;
            if crossed {
                break;
            }
        }
        eps.clamp(1e-10, 1e3)
    }
}

struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps_bar: f64,
    counter: f64,
}

impl DualAveraging {
    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            target,
            h_bar: 0.0,
            log_eps_bar: 0.0,
            counter: 0.0,
        }
    }

    fn update(&mut self, accept: f64) -> f64 {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept);
        let log_eps = self.mu - self.counter.sqrt() / GAMMA * self.h_bar;
        let w = self.counter.powf(-KAPPA);
        self.log_eps_bar = w * log_eps + (1.0 - w) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Slow adaptation windows `[start, end)` inside warmup: a 15% initial
/// buffer, doubling windows, and a 10% terminal buffer.
fn metric_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < 20 {
        return Vec::new();
    }
    let (mut init, mut term, mut base) = (75, 50, 25);
    if init + term + base > warmup {
        init = warmup * 15 / 100;
        term = warmup / 10;
        base = warmup - init - term;
    }
    let end_slow = warmup - term;
    let mut windows = Vec::new();
    let (mut start, mut size) = (init, base);
    while start < end_slow {
        let mut end = start + size;
        if end + 2 * size > end_slow {
            end = end_slow;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

/// Runs one chain from `init`.
pub(crate) fn run_chain<D: LogDensity>(
    target: &D,
    init: &[f64],
    settings: NutsSettings,
    rng: &mut StreamRng,
) -> Result<ChainOutput> {
    let dim = target.dim();
    let mut sampler = Sampler {
        target,
        inv_metric: vec![1.0; dim],
    };
    let mut grad = vec![0.0; dim];
    let logp = sampler.evaluate(init, &mut grad);
    if !logp.is_finite() {
        return Err(Error::Sampler(format!("log density is not finite at the initial point {init:?}")));
    }
    let mut state = State {
        q: init.to_vec(),
        p: vec![0.0; dim],
        grad,
        logp,
    };

    let mut eps = sampler.initial_step_size(rng, &state, 1.0);
    let mut adapt = DualAveraging::new(eps, settings.target_accept);
    let windows = metric_windows(settings.warmup);
    let mut window_draws: Vec<Vec<f64>> = Vec::new();

    for it in 0..settings.warmup {
        let (next, accept, _, _) = sampler.transition(rng, &state, eps, settings.max_tree_depth);
        state = next;
        eps = adapt.update(accept);
        if let Some(&(_, end)) = windows.iter().find(|(s, e)| it >= *s && it < *e) {
            window_draws.push(state.q.clone());
            if it + 1 == end {
                let n = window_draws.len() as f64;
                for j in 0..dim {
                    let m = window_draws.iter().map(|d| d[j]).sum::<f64>() / n;
                    let v = window_draws.iter().map(|d| (d[j] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    sampler.inv_metric[j] = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
                }
                window_draws.clear();
                eps = sampler.initial_step_size(rng, &state, eps);
                adapt = DualAveraging::new(eps, settings.target_accept);
            }
        }
    }
    if settings.warmup > 0 {
        eps = adapt.final_step();
    }

    let mut draws = Vec::with_capacity(settings.samples * dim);
    let mut divergences = 0;
    let mut accept_total = 0.0;
    let mut max_depth_hits = 0;
    for _ in 0..settings.samples {
        let (next, accept, divergent, hit_cap) = sampler.transition(rng, &state, eps, settings.max_tree_depth);
        state = next;
        divergences += usize::from(divergent);
        max_depth_hits += usize::from(hit_cap);
        accept_total += accept;
        draws.extend_from_slice(&state.q);
    }
    Ok(ChainOutput {
        draws,
        divergences,
        step_size: eps,
        mean_accept: accept_total / settings.samples.max(1) as f64,
        max_depth_hits,
    })
}
