//! Split R-hat and multi-chain effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    /// `None` when undefined (all draws identical).
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn check(chains: &[&[f64]]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::Config(format!(
            "diagnostics need at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config("chains have different lengths".into()));
    }
    if n < 10 {
        return Err(Error::Config(format!("diagnostics need at least 10 draws per chain, got {n}")));
    }
    Ok(n)
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(c[..h].to_vec());
        out.push(c[c.len() - h..].to_vec());
    }
    out
}

/// `(B, W)` between- and within-chain variance.
fn between_within(chains: &[Vec<f64>]) -> (f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * variance(&means);
    let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    (b, w)
}

/// Potential scale reduction on split chains.
pub fn split_rhat(chains: &[&[f64]]) -> Result<Option<f64>> {
    check(chains)?;
    let halves = split(chains);
    let n = halves[0].len() as f64;
    let (b, w) = between_within(&halves);
    if w <= 0.0 {
        return Ok(if b <= 0.0 { Some(1.0) } else { None });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok(Some((var_plus / w).sqrt()))
}

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    (0..n)
        .map(|lag| (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64)
        .collect()
}

/// Effective sample size over split chains, using Geyer's initial positive
/// sequence with the monotone correction.
pub fn ess(chains: &[&[f64]]) -> Result<Option<f64>> {
    check(chains)?;
    let halves = split(chains);
    let m = halves.len() as f64;
    let n = halves[0].len();
    let nf = n as f64;
    let acov: Vec<Vec<f64>> = halves.iter().map(|c| autocovariance(c)).collect();
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let w = mean(&acov.iter().map(|a| a[0] * nf / (nf - 1.0)).collect::<Vec<_>>());
    let var_plus = w * (nf - 1.0) / nf + variance(&means);
    if var_plus <= 0.0 {
        return Ok(None);
    }
    let rho = |t: usize| {
        let avg = acov.iter().map(|a| a[t]).sum::<f64>() / m;
        1.0 - (w - avg) / var_plus
    };
    let mut pairs = Vec::new();
    let mut t = 0;
    while t + 1 < n {
        let p = rho(t) + rho(t + 1);
        if p <= 0.0 {
            break;
        }
        pairs.push(p);
        t += 2;
    }
    for i in 1..pairs.len() {
        if pairs[i] > pairs[i - 1] {
            pairs[i] = pairs[i - 1];
        }
    }
    let tau = (-1.0 + 2.0 * pairs.iter().sum::<f64>()).max(1.0 / (m * nf).log10().max(1.0));
    Ok(Some(m * nf / tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chain(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                z + shift
            })
            .collect()
    }

    #[test]
    fn identical_chains_do_not_exceed_one() {
        let c = normal_chain(1, 200, 0.0);
        let r = split_rhat(&[&c, &c]).unwrap().unwrap();
        assert!(r <= 1.0 + 1e-9, "{r}");
    }

    #[test]
    fn independent_normal_chains_converge() {
        let mut rs: Vec<f64> = (0..100)
            .map(|k| {
                let a = normal_chain(2 * k, 1000, 0.0);
                let b = normal_chain(2 * k + 1, 1000, 0.0);
                split_rhat(&[&a, &b]).unwrap().unwrap()
            })
            .collect();
        rs.sort_by(f64::total_cmp);
        assert!(rs[50] <= 1.05, "{}", rs[50]);
    }

    #[test]
    fn separated_chains_are_flagged() {
        let a = normal_chain(3, 500, 0.0);
        let b = normal_chain(4, 500, 10.0);
        assert!(split_rhat(&[&a, &b]).unwrap().unwrap() > 1.1);
    }

    #[test]
    fn single_chain_and_short_chains_are_errors() {
        let a = normal_chain(5, 100, 0.0);
        assert!(split_rhat(&[&a]).is_err());
        assert!(ess(&[&a[..5], &a[5..10]]).is_err());
    }

    #[test]
    fn ess_of_iid_draws_is_near_total() {
        let a = normal_chain(6, 2000, 0.0);
        let b = normal_chain(7, 2000, 0.0);
        let e = ess(&[&a, &b]).unwrap().unwrap();
        assert!(e > 3000.0 && e < 5000.0, "{e}");
    }

    #[test]
    fn ess_of_correlated_draws_is_small() {
        let ar = |seed| {
            let z = normal_chain(seed, 2000, 0.0);
            let mut x = vec![0.0; z.len()];
            for i in 1..z.len() {
                x[i] = 0.95 * x[i - 1] + z[i];
            }
            x
        };
        let (a, b) = (ar(8), ar(9));
        let e = ess(&[&a, &b]).unwrap().unwrap();
        // theoretical ess = 4000 * 0.05 / 1.95 ~ 103
        assert!(e > 40.0 && e < 250.0, "{e}");
    }
}
