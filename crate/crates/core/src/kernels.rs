//! Baseline memory kernels.
//!
//! Each kernel is a normalized, nonincreasing probability density on
//! `[0, inf)` with a closed-form CDF, so a mark equals the expected number of
//! direct offspring of an event. Kernels are estimated on an unconstrained
//! "raw" scale: positive parameters through `exp`, the Weibull shape through
//! the inverse logit (which keeps it inside `(0, 1)`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    PowerLaw,
    Weibull,
}

impl KernelFamily {
    /// Number of raw parameters.
    pub fn arity(self) -> usize {
        match self {
            KernelFamily::Exponential => 1,
            KernelFamily::PowerLaw | KernelFamily::Weibull => 2,
        }
    }

    pub fn raw_names(self) -> &'static [&'static str] {
        match self {
            KernelFamily::Exponential => &["log_rate"],
            KernelFamily::PowerLaw => &["log_shape", "log_offset"],
            KernelFamily::Weibull => &["log_scale", "logit_shape"],
        }
    }

    /// Whether raw slot `i` is the pre-logit Weibull shape (as opposed to the
    /// log of a positive scale-type parameter).
    pub fn is_logit_slot(self, i: usize) -> bool {
        self == KernelFamily::Weibull && i == 1
    }
}

/// A baseline kernel with its parameters.
///
/// Densities:
/// - `Exponential`: `rate * exp(-rate s)`
/// - `PowerLaw` (Lomax): `shape * offset^shape / (s + offset)^(shape + 1)`
/// - `Weibull`: `(shape/scale) (s/scale)^(shape-1) exp(-(s/scale)^shape)`, `shape <= 1`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Kernel {
    Exponential { rate: f64 },
    PowerLaw { shape: f64, offset: f64 },
    Weibull { scale: f64, shape: f64 },
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_lag(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel lag must be nonnegative, got {s}")))
    }
}

impl Kernel {
    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Exponential { .. } => KernelFamily::Exponential,
            Kernel::PowerLaw { .. } => KernelFamily::PowerLaw,
            Kernel::Weibull { .. } => KernelFamily::Weibull,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let ok = match *self {
            Kernel::Exponential { rate } => pos(rate),
            Kernel::PowerLaw { shape, offset } => pos(shape) && pos(offset),
            Kernel::Weibull { scale, shape } => pos(scale) && pos(shape) && shape <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("inadmissible kernel parameters {self:?}")))
        }
    }

    /// Kernel from its unconstrained parameters. Total on finite reals.
    pub fn from_raw(family: KernelFamily, raw: &[f64]) -> Kernel {
        debug_assert_eq!(raw.len(), family.arity());
        match family {
            KernelFamily::Exponential => Kernel::Exponential { rate: raw[0].exp() },
            KernelFamily::PowerLaw => Kernel::PowerLaw {
                shape: raw[0].exp(),
                offset: raw[1].exp(),
            },
            KernelFamily::Weibull => Kernel::Weibull {
                scale: raw[0].exp(),
                shape: logistic(raw[1]),
            },
        }
    }

    /// Inverse of [`Kernel::from_raw`]. A Weibull shape of exactly 1 maps to
    /// `+inf`.
    pub fn to_raw(&self) -> Vec<f64> {
        match *self {
            Kernel::Exponential { rate } => vec![rate.ln()],
            Kernel::PowerLaw { shape, offset } => vec![shape.ln(), offset.ln()],
            Kernel::Weibull { scale, shape } => vec![scale.ln(), (shape / (1.0 - shape)).ln()],
        }
    }

    /// True when the density is unbounded at lag 0.
    pub fn diverges_at_zero(&self) -> bool {
        matches!(*self, Kernel::Weibull { shape, .. } if shape < 1.0)
    }

    /// The same family with its time axis compressed by `factor` (a kernel
    /// "rate" multiplied by `factor`).
    pub fn time_scaled(&self, factor: f64) -> Kernel {
        match *self {
            Kernel::Exponential { rate } => Kernel::Exponential { rate: rate * factor },
            Kernel::PowerLaw { shape, offset } => Kernel::PowerLaw {
                shape,
                offset: offset / factor,
            },
            Kernel::Weibull { scale, shape } => Kernel::Weibull {
                scale: scale / factor,
                shape,
            },
        }
    }

    /// `phi0(s)`; errors on negative lags.
    pub fn density(&self, s: f64) -> Result<f64> {
        check_lag(s)?;
        Ok(self.density_unchecked(s))
    }

    /// `Phi0(s)`, the CDF; errors on negative lags.
    pub fn integral(&self, s: f64) -> Result<f64> {
        check_lag(s)?;
        Ok(self.integral_unchecked(s))
    }

    pub(crate) fn density_unchecked(&self, s: f64) -> f64 {
        match *self {
            Kernel::Exponential { rate } => rate * (-rate * s).exp(),
            Kernel::PowerLaw { shape, offset } => (shape / offset) * (-(shape + 1.0) * (s / offset).ln_1p()).exp(),
            Kernel::Weibull { scale, shape } => {
                let x = s / scale;
                (shape / scale) * x.powf(shape - 1.0) * (-x.powf(shape)).exp()
            }
        }
    }

    pub(crate) fn log_density_unchecked(&self, s: f64) -> f64 {
        match *self {
            Kernel::Exponential { rate } => rate.ln() - rate * s,
            Kernel::PowerLaw { shape, offset } => shape.ln() - offset.ln() - (shape + 1.0) * (s / offset).ln_1p(),
            Kernel::Weibull { scale, shape } => {
                let lx = (s / scale).ln();
                shape.ln() - scale.ln() + (shape - 1.0) * lx - (shape * lx).exp()
            }
        }
    }

    pub(crate) fn integral_unchecked(&self, s: f64) -> f64 {
        match *self {
            Kernel::Exponential { rate } => -(-rate * s).exp_m1(),
            Kernel::PowerLaw { shape, offset } => -(-shape * (s / offset).ln_1p()).exp_m1(),
            Kernel::Weibull { scale, shape } => -(-(s / scale).powf(shape)).exp_m1(),
        }
    }

    /// `log phi0(s)` and its gradient with respect to the raw parameters,
    /// accumulated (`+=`) into `grad` scaled by `weight`.
    pub(crate) fn log_density_with_grad(&self, s: f64, weight: f64, grad: &mut [f64]) -> f64 {
        match *self {
            Kernel::Exponential { rate } => {
                grad[0] += weight * (1.0 - rate * s);
                rate.ln() - rate * s
            }
            Kernel::PowerLaw { shape, offset } => {
                let l = (s / offset).ln_1p();
                grad[0] += weight * (1.0 - shape * l);
                grad[1] += weight * (-1.0 + (shape + 1.0) * s / (s + offset));
                shape.ln() - offset.ln() - (shape + 1.0) * l
            }
            Kernel::Weibull { scale, shape } => {
                let lx = (s / scale).ln();
                let xk = (shape * lx).exp();
                grad[0] += weight * shape * (xk - 1.0);
                grad[1] += weight * shape * (1.0 - shape) * (1.0 / shape + lx * (1.0 - xk));
                shape.ln() - scale.ln() + (shape - 1.0) * lx - xk
            }
        }
    }

    /// `Phi0(s)` with its raw-parameter gradient accumulated into `grad`
    /// scaled by `weight`.
    pub(crate) fn integral_with_grad(&self, s: f64, weight: f64, grad: &mut [f64]) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { rate } => {
                let e = (-rate * s).exp();
                grad[0] += weight * rate * s * e;
                -(-rate * s).exp_m1()
            }
            Kernel::PowerLaw { shape, offset } => {
                let l = (s / offset).ln_1p();
                let u = (-shape * l).exp();
                grad[0] += weight * u * shape * l;
                grad[1] += weight * (-u * shape * s / (s + offset));
                -(-shape * l).exp_m1()
            }
            Kernel::Weibull { scale, shape } => {
                let lx = (s / scale).ln();
                let xk = (shape * lx).exp();
                let e = (-xk).exp();
                grad[0] += weight * (-e * shape * xk);
                grad[1] += weight * e * xk * lx * shape * (1.0 - shape);
                -(-xk).exp_m1()
            }
        }
    }

    /// Inverse CDF for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let tail = -(-u).ln_1p(); // -ln(1 - u)
        match *self {
            Kernel::Exponential { rate } => tail / rate,
            Kernel::PowerLaw { shape, offset } => offset * (tail / shape).exp_m1(),
            Kernel::Weibull { scale, shape } => scale * tail.powf(1.0 / shape),
        }
    }

    /// Draws a lag from the density restricted to `[0, upper]`.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, rng: &mut R, upper: f64) -> f64 {
        let mass = self.integral_unchecked(upper);
        let u: f64 = rng.random::<f64>() * mass;
        self.quantile(u).clamp(0.0, upper)
    }
}

/// Distinct kernels for the source post and for re-shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub root: Kernel,
    pub non_root: Kernel,
}

impl KernelPair {
    pub fn new(root: Kernel, non_root: Kernel) -> Result<Self> {
        root.validate()?;
        non_root.validate()?;
        Ok(Self { root, non_root })
    }

    /// Kernel that governs the offspring of event `i`.
    #[inline]
    pub fn for_event(&self, i: usize) -> &Kernel {
        if i == 0 {
            &self.root
        } else {
            &self.non_root
        }
    }
}
