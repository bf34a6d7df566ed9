//! Unconstrained minimization: L-BFGS with backtracking, followed by a few
//! Newton steps on a finite-difference Hessian of the analytic gradient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    /// L-BFGS memory.
    pub history: usize,
    pub max_newton_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            grad_tol: 1e-5,
            history: 10,
            max_newton_steps: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Objective<F> {
    f: F,
}

impl<F: FnMut(&[f64], &mut [f64]) -> Result<f64>> Objective<F> {
    /// Value and gradient, with errors and non-finite results mapped to `None`.
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut g = vec![0.0; x.len()];
        match (self.f)(x, &mut g) {
            Ok(v) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Some((v, g)),
            _ => None,
        }
    }
}

/// Backtracking Armijo search along `dir` from `x`.
fn line_search<F: FnMut(&[f64], &mut [f64]) -> Result<f64>>(
    obj: &mut Objective<F>,
    x: &[f64],
    f0: f64,
    slope: f64,
    dir: &[f64],
    mut step: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        if let Some((f, g)) = obj.eval(&trial) {
            if f <= f0 + 1e-4 * step * slope {
                return Some((trial, f, g));
            }
        }
        step *= 0.5;
    }
    None
}

/// Minimizes `f`, which writes its gradient into the second argument.
pub fn minimize<F>(f: F, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let mut obj = Objective { f };
    let (mut fx, mut g) = obj.eval(x0).ok_or_else(|| Error::Optimizer {
        message: "objective is not finite at the initial point".into(),
        point: x0.to_vec(),
    })?;
    let mut x = x0.to_vec();
    let mut iterations = 0;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    while iterations < config.max_iters && norm(&g) > config.grad_tol {
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dotv(y, s);
            let a = rho * dotv(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((a, rho));
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dotv(s, y) / dotv(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.iter().rev()) {
            let b = rho * dotv(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dotv(&g, &dir);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dotv(&g, &g);
        }
        let step = if s_hist.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
        let Some((xn, fn_, gn)) = line_search(&mut obj, &x, fx, slope, &dir, step) else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dotv(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > config.history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        let progress = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if progress.abs() <= 1e-14 * fx.abs().max(1.0) {
            break;
        }
    }

    // Newton polish
    let mut newton = 0;
    while newton < config.max_newton_steps && norm(&g) > config.grad_tol {
        let Some(h) = fd_hessian(&mut obj, &x) else { break };
        let Some(dir) = newton_direction(h, &g) else { break };
        let slope = dotv(&g, &dir);
        let full: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + d).collect();
        // Near the optimum the decrease is below rounding in f; accept a full
        // step that shrinks the gradient instead.
        let flat = obj.eval(&full).filter(|(f, gn)| {
            *f <= fx + 64.0 * f64::EPSILON * fx.abs().max(1.0) && norm(gn) < norm(&g)
        });
        let Some((xn, fn_, gn)) = flat
            .map(|(f, gn)| (full, f, gn))
            .or_else(|| line_search(&mut obj, &x, fx, slope, &dir, 1.0))
        else {
            break;
        };
        newton += 1;
        x = xn;
        fx = fn_;
        g = gn;
    }
    iterations += newton;
    let grad_norm = norm(&g);
    Ok(Minimum {
        point: x,
        value: fx,
        grad_norm,
        iterations,
        converged: grad_norm <= config.grad_tol,
    })
}

fn fd_hessian<F: FnMut(&[f64], &mut [f64]) -> Result<f64>>(obj: &mut Objective<F>, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[j] += step;
        dn[j] -= step;
        let (_, gu) = obj.eval(&up)?;
        let (_, gd) = obj.eval(&dn)?;
        for i in 0..n {
            h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    Some((&h + h.transpose()) * 0.5)
}

/// Solves `(H + mu I) d = -g` with the smallest `mu >= 0` (from a geometric
/// ladder) for which the shifted Hessian is positive definite.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let rhs = -DVector::from_column_slice(g);
    let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-8);
    let mut mu = 0.0;
    for _ in 0..30 {
        let shifted = &h + DMatrix::identity(n, n) * mu;
        if let Some(chol) = shifted.cholesky() {
            return Some(chol.solve(&rhs).iter().copied().collect());
        }
        mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
    }
    None
}
