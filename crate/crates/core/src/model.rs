//! One marked Hawkes component: marks, intensity, likelihoods, priors and
//! the log posterior used for fitting.
//!
//! The intensity has no background term; the root is given and every other
//! event is triggered by an earlier one:
//!
//! ```text
//! lambda(t) = sum_{j: t_j < t} m_j * phi0^{kind(j)}(t - t_j),   log m_j = alpha + beta . r_j
//! ```
//!
//! where `kind(j)` is the root kernel for `j = 0` and the non-root kernel
//! otherwise, and `r_j` is the standardized design row of event `j`.
//! Fitting uses the branching form of the likelihood, which attributes every
//! event to its observed parent and costs `O(n)`.

use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, StructuralCovariates, Veracity};
use crate::covariates::{CovariateSchema, Standardizer};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelFamily, KernelPair};

/// Lag used in place of a zero parent/child gap for kernels whose density
/// is unbounded at the origin (hours).
pub const ZERO_LAG_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkCoefficients {
    pub alpha: f64,
    pub beta_c: Vec<f64>,
    pub beta_u: Vec<f64>,
    pub beta_s: Vec<f64>,
}

impl MarkCoefficients {
    pub fn zeros(schema: &CovariateSchema) -> Self {
        Self {
            alpha: 0.0,
            beta_c: vec![0.0; schema.n_cascade()],
            beta_u: vec![0.0; schema.n_user()],
            beta_s: vec![0.0; schema.n_structural()],
        }
    }

    /// All slopes in design-row order (`z`, `x`, `y`).
    pub fn betas(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.beta_c.len() + self.beta_u.len() + self.beta_s.len());
        b.extend_from_slice(&self.beta_c);
        b.extend_from_slice(&self.beta_u);
        b.extend_from_slice(&self.beta_s);
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub marks: MarkCoefficients,
    pub kernels: KernelPair,
    /// Which mixture component these parameters describe.
    pub component: Veracity,
}

impl ComponentParams {
    /// `exp(alpha + beta . row)` for a standardized row.
    pub fn mark(&self, row: &[f64]) -> Result<f64> {
        let betas = self.marks.betas();
        if row.len() != betas.len() {
            return Err(Error::Domain(format!(
                "design row has {} columns, model expects {}",
                row.len(),
                betas.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite covariate".into()));
        }
        Ok((self.marks.alpha + dot(&betas, row)).exp())
    }
}

/// Coordinates of the unconstrained parameter vector:
/// `[alpha, beta_c.., beta_u.., beta_s.., root raws.., non-root raws..]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub columns: Vec<String>,
    pub n_cascade: usize,
    pub n_user: usize,
    pub n_structural: usize,
    pub root: KernelFamily,
    pub non_root: KernelFamily,
}

impl ParamLayout {
    pub fn new(schema: &CovariateSchema, root: KernelFamily, non_root: KernelFamily) -> Self {
        Self {
            columns: schema.column_names(),
            n_cascade: schema.n_cascade(),
            n_user: schema.n_user(),
            n_structural: schema.n_structural(),
            root,
            non_root,
        }
    }

    pub fn n_beta(&self) -> usize {
        self.n_cascade + self.n_user + self.n_structural
    }

    pub fn dim(&self) -> usize {
        1 + self.n_beta() + self.root.arity() + self.non_root.arity()
    }

    pub(crate) fn root_offset(&self) -> usize {
        1 + self.n_beta()
    }

    pub(crate) fn non_root_offset(&self) -> usize {
        self.root_offset() + self.root.arity()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["alpha".to_string()];
        names.extend(self.columns.iter().map(|c| format!("beta.{c}")));
        names.extend(self.root.raw_names().iter().map(|n| format!("root.{n}")));
        names.extend(self.non_root.raw_names().iter().map(|n| format!("non_root.{n}")));
        names
    }

    pub fn pack(&self, p: &ComponentParams) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(p.marks.alpha);
        v.extend(p.marks.betas());
        v.extend(p.kernels.root.to_raw());
        v.extend(p.kernels.non_root.to_raw());
        debug_assert_eq!(v.len(), self.dim());
        v
    }

    pub fn unpack(&self, theta: &[f64], component: Veracity) -> ComponentParams {
        let (c, u) = (self.n_cascade, self.n_user);
        let b = &theta[1..self.root_offset()];
        ComponentParams {
            marks: MarkCoefficients {
                alpha: theta[0],
                beta_c: b[..c].to_vec(),
                beta_u: b[c..c + u].to_vec(),
                beta_s: b[c + u..].to_vec(),
            },
            kernels: self.kernels(theta),
            component,
        }
    }

    pub(crate) fn kernels(&self, theta: &[f64]) -> KernelPair {
        let r = self.root_offset();
        let nr = self.non_root_offset();
        KernelPair {
            root: Kernel::from_raw(self.root, &theta[r..nr]),
            non_root: Kernel::from_raw(self.non_root, &theta[nr..nr + self.non_root.arity()]),
        }
    }
}

/// A cascade reduced to what the likelihood needs: times, parents, horizon
/// and the standardized design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCascade {
    pub id: String,
    pub times: Vec<f64>,
    /// Parent of each event; entry 0 (the root) is unused.
    pub parents: Vec<usize>,
    pub horizon: f64,
    /// Row-major `len x dim`.
    pub rows: Vec<f64>,
    pub dim: usize,
    pub children: Vec<u32>,
}

impl PreparedCascade {
    pub fn new(cascade: &Cascade, schema: &CovariateSchema, standardizer: &Standardizer) -> Self {
        let mut rows = schema.design(cascade);
        standardizer.apply(&mut rows);
        let n = cascade.len();
        let mut parents = vec![0usize; n];
        let mut children = vec![0u32; n];
        for (i, e) in cascade.events().iter().enumerate().skip(1) {
            let p = e.parent.expect("non-root events have parents");
            parents[i] = p;
            children[p] += 1;
        }
        Self {
            id: cascade.id().to_string(),
            times: cascade.times(),
            parents,
            horizon: cascade.horizon(),
            rows,
            dim: schema.dim(),
            children,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// `log m_i` for every event.
    pub fn log_marks(&self, alpha: f64, beta: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| alpha + dot(beta, self.row(i))).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of one likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEval {
    pub value: f64,
    /// Parent/child gaps replaced by [`ZERO_LAG_CLAMP`].
    pub clamped_lags: usize,
}

#[inline]
fn clamp_lag(kernel: &Kernel, lag: f64, clamped: &mut usize) -> f64 {
    if matches!(kernel, Kernel::Weibull { .. }) && lag < ZERO_LAG_CLAMP {
        *clamped += 1;
        ZERO_LAG_CLAMP
    } else {
        lag
    }
}

/// Branching log-likelihood and, optionally, its gradient (accumulated into
/// `grad`, laid out as in [`ParamLayout`]).
pub(crate) fn branching_eval(
    layout: &ParamLayout,
    theta: &[f64],
    pc: &PreparedCascade,
    mut grad: Option<&mut [f64]>,
) -> LikelihoodEval {
    let alpha = theta[0];
    let nb = layout.n_beta();
    let beta = &theta[1..1 + nb];
    let kernels = layout.kernels(theta);
    let (ro, nro) = (layout.root_offset(), layout.non_root_offset());
    let n = pc.len();
    let mut value = 0.0;
    let mut clamped = 0usize;

    let mut etas = Vec::with_capacity(n);
    for i in 0..n {
        let row = pc.row(i);
        let eta = alpha + dot(beta, row);
        let m = eta.exp();
        etas.push(eta);
        let kernel = kernels.for_event(i);
        let rest = pc.horizon - pc.times[i];
        let c = pc.children[i] as f64;
        match grad.as_deref_mut() {
            Some(g) => {
                let slot = if i == 0 { ro } else { nro };
                let comp = kernel.integral_with_grad(rest, -m, &mut g[slot..]);
                value += c * eta - m * comp;
                let coef = c - m * comp;
                g[0] += coef;
                for (gb, r) in g[1..1 + nb].iter_mut().zip(row) {
                    *gb += coef * r;
                }
            }
            None => value += c * eta - m * kernel.integral_unchecked(rest),
        }
    }
    for i in 1..n {
        let p = pc.parents[i];
        let kernel = kernels.for_event(p);
        let lag = clamp_lag(kernel, pc.times[i] - pc.times[p], &mut clamped);
        value += match grad.as_deref_mut() {
            Some(g) => {
                let slot = if p == 0 { ro } else { nro };
                kernel.log_density_with_grad(lag, 1.0, &mut g[slot..])
            }
            None => kernel.log_density_unchecked(lag),
        };
    }
    LikelihoodEval {
        value,
        clamped_lags: clamped,
    }
}

/// Branching-form log-likelihood of one cascade.
pub fn log_likelihood_branching(params: &ComponentParams, layout: &ParamLayout, pc: &PreparedCascade) -> f64 {
    branching_eval(layout, &layout.pack(params), pc, None).value
}

/// Full (all-predecessor) log-likelihood, `O(n^2)`. Kept as an independent
/// check on the branching form; the two agree only for cascades where every
/// event's sole predecessor is its parent.
pub fn log_likelihood_full(params: &ComponentParams, pc: &PreparedCascade) -> f64 {
    let marks = marks_of(params, pc);
    let k = &params.kernels;
    let mut clamped = 0;
    let mut value = 0.0;
    for i in 1..pc.len() {
        let lam: f64 = (0..i)
            .map(|j| {
                let kernel = k.for_event(j);
                let lag = clamp_lag(kernel, pc.times[i] - pc.times[j], &mut clamped);
                marks[j] * kernel.density_unchecked(lag)
            })
            .sum();
        value += lam.ln();
    }
    value - compensator_total(params, pc, &marks)
}

fn compensator_total(params: &ComponentParams, pc: &PreparedCascade, marks: &[f64]) -> f64 {
    marks
        .iter()
        .enumerate()
        .map(|(i, m)| m * params.kernels.for_event(i).integral_unchecked(pc.horizon - pc.times[i]))
        .sum()
}

pub(crate) fn marks_of(params: &ComponentParams, pc: &PreparedCascade) -> Vec<f64> {
    let beta = params.marks.betas();
    pc.log_marks(params.marks.alpha, &beta).into_iter().map(f64::exp).collect()
}

/// `lambda(t)` for `0 <= t <= horizon`.
pub fn intensity(params: &ComponentParams, pc: &PreparedCascade, t: f64) -> Result<f64> {
    if !(0.0..=pc.horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", pc.horizon)));
    }
    let marks = marks_of(params, pc);
    Ok(ConditionalIntensity::new(pc.times.clone(), marks, params.kernels, pc.horizon).value(t))
}

/// Fixed priors of the model, on the unconstrained scale.
///
/// Slopes get `N(0, beta_sd)`, the intercept `N(0, alpha_sd)`, the log of
/// every positive kernel parameter a Cauchy(0, `kernel_cauchy_scale`), and
/// the pre-logit Weibull shape `N(0, weibull_shape_raw_sd)`. The densities
/// are placed directly on the raw coordinates, so no change-of-variables
/// term appears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub alpha_sd: f64,
    pub beta_sd: f64,
    pub kernel_cauchy_scale: f64,
    pub weibull_shape_raw_sd: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            alpha_sd: 5.0,
            beta_sd: 1.0,
            kernel_cauchy_scale: 1.0,
            weibull_shape_raw_sd: 1.0,
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn normal_lpdf(x: f64, sd: f64, grad: &mut f64) -> f64 {
    *grad += -x / (sd * sd);
    -0.5 * LN_2PI - sd.ln() - 0.5 * (x / sd).powi(2)
}

fn cauchy_lpdf(x: f64, scale: f64, grad: &mut f64) -> f64 {
    let z = x / scale;
    *grad += -2.0 * z / (scale * (1.0 + z * z));
    -std::f64::consts::PI.ln() - scale.ln() - (z * z).ln_1p()
}

impl PriorSpec {
    /// Log prior density at `theta`, gradient accumulated into `grad`.
    pub fn log_density(&self, layout: &ParamLayout, theta: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = normal_lpdf(theta[0], self.alpha_sd, &mut grad[0]);
        for j in 1..layout.root_offset() {
            lp += normal_lpdf(theta[j], self.beta_sd, &mut grad[j]);
        }
        for (offset, family) in [
            (layout.root_offset(), layout.root),
            (layout.non_root_offset(), layout.non_root),
        ] {
            for s in 0..family.arity() {
                let j = offset + s;
                lp += if family.is_logit_slot(s) {
                    normal_lpdf(theta[j], self.weibull_shape_raw_sd, &mut grad[j])
                } else {
                    cauchy_lpdf(theta[j], self.kernel_cauchy_scale, &mut grad[j])
                };
            }
        }
        lp
    }
}

/// Log prior of a parameter set.
pub fn log_prior(params: &ComponentParams, layout: &ParamLayout, prior: &PriorSpec) -> f64 {
    let theta = layout.pack(params);
    let mut g = vec![0.0; theta.len()];
    prior.log_density(layout, &theta, &mut g)
}

/// Target density for samplers and optimizers.
pub trait LogDensity {
    fn dim(&self) -> usize;
    /// Log density at `x`; `grad` is overwritten with its gradient.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Log posterior of one component over its training cascades.
#[derive(Debug, Clone)]
pub struct Posterior {
    layout: ParamLayout,
    cascades: Vec<PreparedCascade>,
    prior: PriorSpec,
}

impl Posterior {
    pub fn new(layout: ParamLayout, cascades: Vec<PreparedCascade>, prior: PriorSpec) -> Result<Self> {
        if cascades.is_empty() {
            return Err(Error::Insufficient("empty training set".into()));
        }
        if let Some(c) = cascades.iter().find(|c| c.dim != layout.n_beta()) {
            return Err(Error::Config(format!("cascade `{}` does not match the parameter layout", c.id)));
        }
        Ok(Self {
            layout,
            cascades,
            prior,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn cascades(&self) -> &[PreparedCascade] {
        &self.cascades
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    /// Sum of branching log-likelihoods (no prior).
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.cascades
            .iter()
            .map(|c| branching_eval(&self.layout, theta, c, None).value)
            .sum()
    }

    /// Number of clamped zero lags at `theta`.
    pub fn clamped_lags(&self, theta: &[f64]) -> usize {
        self.cascades
            .iter()
            .map(|c| branching_eval(&self.layout, theta, c, None).clamped_lags)
            .sum()
    }

    /// Log posterior (up to a constant) and its gradient with respect to the
    /// unconstrained parameters. Cascades are summed in input order.
    pub fn log_posterior_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; theta.len()];
        let v = self.log_density_and_grad(theta, &mut grad)?;
        Ok((v, grad))
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        if theta.len() != self.layout.dim() {
            return Err(Error::Domain(format!(
                "parameter vector has length {}, expected {}",
                theta.len(),
                self.layout.dim()
            )));
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for c in &self.cascades {
            let v = branching_eval(&self.layout, theta, c, Some(grad)).value;
            if !v.is_finite() {
                return Err(Error::NonFinite { id: c.id.clone() });
            }
            total += v;
        }
        total += self.prior.log_density(&self.layout, theta, grad);
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                id: "<prior or gradient>".into(),
            });
        }
        Ok(total)
    }
}

/// `lambda(t)` and its integral for one cascade under fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalIntensity {
    times: Vec<f64>,
    marks: Vec<f64>,
    kernels: KernelPair,
    horizon: f64,
}

impl ConditionalIntensity {
    pub fn new(times: Vec<f64>, marks: Vec<f64>, kernels: KernelPair, horizon: f64) -> Self {
        Self {
            times,
            marks,
            kernels,
            horizon,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Left-continuous intensity: sums over events strictly before `t`.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        (0..k)
            .map(|j| self.marks[j] * self.kernels.for_event(j).density_unchecked(t - self.times[j]))
            .sum()
    }

    /// `int_0^t lambda(s) ds`.
    pub fn compensator(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        (0..k)
            .map(|j| self.marks[j] * self.kernels.for_event(j).integral_unchecked(t - self.times[j]))
            .sum()
    }
}

/// A component bundled with the covariate pipeline needed to compute marks
/// from raw cascades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesProcess {
    pub params: ComponentParams,
    pub schema: CovariateSchema,
    pub standardizer: Standardizer,
}

impl HawkesProcess {
    /// Process with identity standardization.
    pub fn unstandardized(params: ComponentParams, schema: CovariateSchema) -> Self {
        let standardizer = Standardizer::identity(schema.dim());
        Self {
            params,
            schema,
            standardizer,
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(
            &self.schema,
            self.params.kernels.root.family(),
            self.params.kernels.non_root.family(),
        )
    }

    pub fn prepare(&self, cascade: &Cascade) -> PreparedCascade {
        PreparedCascade::new(cascade, &self.schema, &self.standardizer)
    }

    pub fn marks(&self, cascade: &Cascade) -> Vec<f64> {
        marks_of(&self.params, &self.prepare(cascade))
    }

    /// Mark of a (possibly not yet materialized) event from raw covariates.
    pub fn mark_from_raw(&self, z: &[f64], x: &[f64], y: &StructuralCovariates) -> f64 {
        let mut row = vec![0.0; self.schema.dim()];
        self.schema.fill_row(z, x, y, &mut row);
        self.standardizer.apply(&mut row);
        (self.params.marks.alpha + dot(&self.params.marks.betas(), &row)).exp()
    }

    pub fn conditional_intensity(&self, cascade: &Cascade) -> ConditionalIntensity {
        ConditionalIntensity::new(cascade.times(), self.marks(cascade), self.params.kernels, cascade.horizon())
    }

    pub fn log_likelihood(&self, cascade: &Cascade) -> f64 {
        log_likelihood_branching(&self.params, &self.layout(), &self.prepare(cascade))
    }
}
