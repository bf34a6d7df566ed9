//! Goodness-of-fit tests used on residual point processes: one- and
//! two-sample Kolmogorov-Smirnov, Cramér-von Mises and Ljung-Box.
//!
//! KS p-values are exact (Marsaglia-Tsang-Wang) below 35 observations and
//! asymptotic with Stephens' finite-sample correction above. CvM p-values
//! apply Stephens' modified statistic to the asymptotic distribution.
//! Tests that cannot be computed return [`Error::Insufficient`].

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Minimum number of events for the uniformity and interarrival tests.
pub const MIN_EVENTS: usize = 5;
/// Minimum number of events for the Ljung-Box test.
pub const MIN_EVENTS_LJUNG_BOX: usize = 20;

const EXACT_KS_BELOW: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestValue {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS and CvM results against the same reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub ks: TestValue,
    pub cvm: TestValue,
}

/// Kolmogorov distribution survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // small-argument form converges faster
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (1..=50)
            .step_by(2)
            .map(|k| (-(k * k) as f64 * c).exp())
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// `P(D_n < d)` for the one-sample KS statistic (Marsaglia, Tsang & Wang).
pub fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let q = matrix_power(&hm, m, n);
    let mut s = q[(k - 1) * m + (k - 1)];
    for i in 1..=n {
        s *= i as f64 / nf;
    }
    s.clamp(0.0, 1.0)
}

fn matrix_power(a: &[f64], m: usize, mut e: usize) -> Vec<f64> {
    let mul = |x: &[f64], y: &[f64]| {
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for l in 0..m {
                let xv = x[i * m + l];
                if xv != 0.0 {
                    for j in 0..m {
                        out[i * m + j] += xv * y[l * m + j];
                    }
                }
            }
        }
        out
    };
    let mut result = vec![0.0; m * m];
    for i in 0..m {
        result[i * m + i] = 1.0;
    }
    let mut base = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test of `sample` against the continuous CDF `cdf`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestValue> {
    if sample.is_empty() {
        return Err(Error::Insufficient("KS test on an empty sample".into()));
    }
    let x = sorted(sample);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let p = if x.len() < EXACT_KS_BELOW {
        1.0 - ks_exact_cdf(x.len(), d)
    } else {
        let sn = n.sqrt();
        kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
    };
    Ok(TestValue {
        statistic: d,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// Two-sample KS test (asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestValue> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Insufficient("two-sample KS test needs two nonempty samples".into()));
    }
    let (x, y) = (sorted(a), sorted(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    Ok(TestValue {
        statistic: d,
        p_value: kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d),
    })
}

/// Modified Bessel function of the second kind, order 1/4, by integrating
/// `exp(-x cosh t) cosh(t / 4)` over `t >= 0`.
fn bessel_k_quarter(x: f64) -> f64 {
    // integrand is below exp(-x cosh t) < 1e-300 once x cosh t > 690
    let upper = (690.0 / x).max(1.0).acosh() + 1.0;
    let n = 2000;
    let h = upper / n as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (t / 4.0).cosh();
    let inner: f64 = (1..n).map(|i| f(i as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(upper)) + inner)
}

/// Limiting CDF of the Cramér-von Mises statistic, `P(W^2 <= x)`.
pub fn cvm_asymptotic_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x > 5.0 {
        return 1.0;
    }
    let mut total = 0.0;
    // Gamma(j + 1/2) / (Gamma(1/2) j!) computed recursively
    let mut coef = 1.0;
    for j in 0..200 {
        if j > 0 {
            coef *= (j as f64 - 0.5) / j as f64;
        }
        let a = (4 * j + 1) as f64;
        let arg = a * a / (16.0 * x);
        if arg > 700.0 {
            break;
        }
        total += coef * a.sqrt() * (-arg).exp() * bessel_k_quarter(arg);
    }
    (total / (std::f64::consts::PI * x.sqrt())).clamp(0.0, 1.0)
}

/// One-sample Cramér-von Mises test against `cdf`.
pub fn cvm_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestValue> {
    if sample.is_empty() {
        return Err(Error::Insufficient("CvM test on an empty sample".into()));
    }
    let x = sorted(sample);
    let n = x.len() as f64;
    let w2 = 1.0 / (12.0 * n)
        + x.iter()
            .enumerate()
            .map(|(i, &v)| (cdf(v) - (2 * i + 1) as f64 / (2.0 * n)).powi(2))
            .sum::<f64>();
    let modified = (w2 - 0.4 / n + 0.6 / (n * n)) * (1.0 + 1.0 / n);
    Ok(TestValue {
        statistic: w2,
        p_value: 1.0 - cvm_asymptotic_cdf(modified),
    })
}

fn paired(sample: &[f64], cdf: impl Fn(f64) -> f64 + Copy) -> Result<PairedTest> {
    Ok(PairedTest {
        ks: ks_test(sample, cdf)?,
        cvm: cvm_test(sample, cdf)?,
    })
}

/// Tests whether `t_1/t_M, ..., t_{M-1}/t_M` are uniform on `[0, 1]`,
/// where `t_M` is the last of the sorted `times`.
pub fn test_conditional_uniformity(times: &[f64]) -> Result<PairedTest> {
    if times.len() < MIN_EVENTS {
        return Err(Error::Insufficient(format!(
            "uniformity test needs {MIN_EVENTS} events, got {}",
            times.len()
        )));
    }
    let t = sorted(times);
    let last = t[t.len() - 1];
    if !(last > 0.0) {
        return Err(Error::Insufficient("all events at time 0".into()));
    }
    let ratios: Vec<f64> = t[..t.len() - 1].iter().map(|v| v / last).collect();
    paired(&ratios, |u| u.clamp(0.0, 1.0))
}

/// Interarrival gaps of sorted `times`, starting from 0.
pub fn interarrivals(times: &[f64]) -> Vec<f64> {
    let t = sorted(times);
    let mut prev = 0.0;
    t.iter()
        .map(|&v| {
            let s = v - prev;
            prev = v;
            s
        })
        .collect()
}

/// Tests whether interarrival gaps (from 0) are exponential with `rate`.
pub fn test_exponential_interarrivals(times: &[f64], rate: f64) -> Result<PairedTest> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!("rate must be positive, got {rate}")));
    }
    if times.len() < MIN_EVENTS {
        return Err(Error::Insufficient(format!(
            "interarrival test needs {MIN_EVENTS} events, got {}",
            times.len()
        )));
    }
    paired(&interarrivals(times), move |s| -(-rate * s.max(0.0)).exp_m1())
}

/// Ljung-Box test on the sample autocorrelations of `series` with `lags` lags.
pub fn ljung_box(series: &[f64], lags: usize) -> Result<TestValue> {
    let n = series.len();
    if lags == 0 || n <= lags {
        return Err(Error::Insufficient(format!("{n} observations for {lags} lags")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if c0 <= 1e-300 * n as f64 || !c0.is_finite() {
        return Err(Error::Insufficient("zero variance series".into()));
    }
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * (1..=lags)
            .map(|k| {
                let ck: f64 = (0..n - k).map(|i| (series[i] - mean) * (series[i + k] - mean)).sum();
                (ck / c0).powi(2) / (nf - k as f64)
            })
            .sum::<f64>();
    let chi = ChiSquared::new(lags as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(TestValue {
        statistic: q,
        p_value: chi.sf(q).clamp(0.0, 1.0),
    })
}

/// Ljung-Box test on the interarrival gaps of `times`, with
/// `min(10, n / 5)` lags where `n` is the number of gaps.
pub fn test_independence(times: &[f64]) -> Result<TestValue> {
    if times.len() < MIN_EVENTS_LJUNG_BOX {
        return Err(Error::Insufficient(format!(
            "independence test needs {MIN_EVENTS_LJUNG_BOX} events, got {}",
            times.len()
        )));
    }
    let gaps = interarrivals(times);
    let lags = (gaps.len() / 5).min(10);
    ljung_box(&gaps, lags)
}
