//! Covariate schema, design rows and standardization for the mark model.
//!
//! Every event contributes one design row: the cascade covariates `z`
//! (shared by all events), its user covariates `x` and its structural
//! covariates `y`. Which of the available covariates enter the model, and
//! whether they are log-transformed, is controlled by [`CovariateSchema`].
//! Log transforms are `log(1 + v)` so that zero counts stay finite.

use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, StructuralCovariates};
use crate::error::{Error, Result};

/// Cascade-level covariates, in record order.
pub const CASCADE_COVARIATES: [&str; 4] = ["pos_emotion", "neg_emotion", "surprise", "topic_political"];
/// Per-event user covariates, in record order.
pub const USER_COVARIATES: [&str; 4] = ["followers", "followees", "account_age_days", "engagement"];
/// Derived structural covariates.
pub const STRUCTURAL_COVARIATES: [&str; 3] = ["depth", "response_time", "elapsed_time"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub log: bool,
}

impl CovariateSpec {
    pub fn new(name: &str, log: bool) -> Self {
        Self {
            name: name.to_string(),
            log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SchemaRepr {
    cascade: Vec<CovariateSpec>,
    user: Vec<CovariateSpec>,
    structural: Vec<CovariateSpec>,
}

/// Selection of covariates feeding the mark model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct CovariateSchema {
    cascade: Vec<CovariateSpec>,
    user: Vec<CovariateSpec>,
    structural: Vec<CovariateSpec>,
    cascade_idx: Vec<usize>,
    user_idx: Vec<usize>,
    structural_idx: Vec<usize>,
}

impl TryFrom<SchemaRepr> for CovariateSchema {
    type Error = Error;

    fn try_from(r: SchemaRepr) -> Result<Self> {
        CovariateSchema::new(r.cascade, r.user, r.structural)
    }
}

impl From<CovariateSchema> for SchemaRepr {
    fn from(s: CovariateSchema) -> Self {
        SchemaRepr {
            cascade: s.cascade,
            user: s.user,
            structural: s.structural,
        }
    }
}

impl Default for CovariateSchema {
    /// All available covariates; `x` and `y` as logs, `z` untransformed.
    fn default() -> Self {
        let block = |names: &[&str], log| names.iter().map(|n| CovariateSpec::new(n, log)).collect();
        CovariateSchema::new(
            block(&CASCADE_COVARIATES, false),
            block(&USER_COVARIATES, true),
            block(&STRUCTURAL_COVARIATES, true),
        )
        .expect("default schema is valid")
    }
}

fn resolve(block: &[CovariateSpec], catalog: &[&str], what: &str) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(block.len());
    for spec in block {
        let i = catalog
            .iter()
            .position(|c| *c == spec.name)
            .ok_or_else(|| Error::Config(format!("unknown {what} covariate `{}`", spec.name)))?;
        if idx.contains(&i) {
            return Err(Error::Config(format!("duplicate covariate `{}`", spec.name)));
        }
        idx.push(i);
    }
    Ok(idx)
}

impl CovariateSchema {
    pub fn new(
        cascade: Vec<CovariateSpec>,
        user: Vec<CovariateSpec>,
        structural: Vec<CovariateSpec>,
    ) -> Result<Self> {
        let cascade_idx = resolve(&cascade, &CASCADE_COVARIATES, "cascade")?;
        let user_idx = resolve(&user, &USER_COVARIATES, "user")?;
        let structural_idx = resolve(&structural, &STRUCTURAL_COVARIATES, "structural")?;
        Ok(Self {
            cascade,
            user,
            structural,
            cascade_idx,
            user_idx,
            structural_idx,
        })
    }

    /// Schema without any covariates: marks reduce to `exp(alpha)`.
    pub fn empty() -> Self {
        Self::new(vec![], vec![], vec![]).expect("empty schema is valid")
    }

    /// Builds a schema from plain names using the default log flags
    /// (`z` untransformed, `x` and `y` as logs).
    pub fn from_names(cascade: &[&str], user: &[&str], structural: &[&str]) -> Result<Self> {
        let block = |names: &[&str], log| names.iter().map(|n| CovariateSpec::new(n, log)).collect();
        Self::new(block(cascade, false), block(user, true), block(structural, true))
    }

    pub fn n_cascade(&self) -> usize {
        self.cascade.len()
    }

    pub fn n_user(&self) -> usize {
        self.user.len()
    }

    pub fn n_structural(&self) -> usize {
        self.structural.len()
    }

    /// Number of covariate columns (intercept excluded).
    pub fn dim(&self) -> usize {
        self.cascade.len() + self.user.len() + self.structural.len()
    }

    pub fn cascade_specs(&self) -> &[CovariateSpec] {
        &self.cascade
    }

    pub fn user_specs(&self) -> &[CovariateSpec] {
        &self.user
    }

    pub fn structural_specs(&self) -> &[CovariateSpec] {
        &self.structural
    }

    /// Column names, prefixed by block.
    pub fn column_names(&self) -> Vec<String> {
        let c = self.cascade.iter().map(|s| format!("z.{}", s.name));
        let u = self.user.iter().map(|s| format!("x.{}", s.name));
        let s = self.structural.iter().map(|s| format!("y.{}", s.name));
        c.chain(u).chain(s).collect()
    }

    /// Writes one unstandardized design row into `out` (length `dim()`).
    pub fn fill_row(&self, z: &[f64], x: &[f64], y: &StructuralCovariates, out: &mut [f64]) {
        let tf = |v: f64, log: bool| if log { v.ln_1p() } else { v };
        let ys = y.as_array();
        let mut k = 0;
        for (spec, &i) in self.cascade.iter().zip(&self.cascade_idx) {
            out[k] = tf(z[i], spec.log);
            k += 1;
        }
        for (spec, &i) in self.user.iter().zip(&self.user_idx) {
            out[k] = tf(x[i], spec.log);
            k += 1;
        }
        for (spec, &i) in self.structural.iter().zip(&self.structural_idx) {
            out[k] = tf(ys[i], spec.log);
            k += 1;
        }
    }

    /// Unstandardized design matrix of a cascade, row-major `n_events x dim`.
    pub fn design(&self, cascade: &Cascade) -> Vec<f64> {
        let d = self.dim();
        if d == 0 {
            return Vec::new();
        }
        let mut rows = vec![0.0; cascade.len() * d];
        for (ev, out) in cascade.events().iter().zip(rows.chunks_exact_mut(d)) {
            self.fill_row(cascade.covariates(), &ev.user, &ev.structural, out);
        }
        rows
    }
}

/// Affine column transform `(v - mean) / scale` applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Column means and standard deviations over every event of `cascades`.
    /// Constant columns keep scale 1.
    pub fn fit(schema: &CovariateSchema, cascades: &[Cascade]) -> Self {
        let d = schema.dim();
        if d == 0 {
            return Self::identity(0);
        }
        let mut n = 0usize;
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        for c in cascades {
            let rows = schema.design(c);
            for row in rows.chunks_exact(d) {
                n += 1;
                for j in 0..d {
                    let delta = row[j] - mean[j];
                    mean[j] += delta / n as f64;
                    m2[j] += delta * (row[j] - mean[j]);
                }
            }
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = if n > 1 { (s / (n - 1) as f64).sqrt() } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, rows: &mut [f64]) {
        let d = self.dim();
        if d == 0 {
            return;
        }
        for row in rows.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
    }

    /// Maps coefficients on the standardized scale to the raw covariate scale.
    pub fn to_raw_coefficients(&self, alpha: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let raw: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let shift: f64 = raw.iter().zip(&self.mean).map(|(b, m)| b * m).sum();
        (alpha - shift, raw)
    }

    /// Inverse of [`Standardizer::to_raw_coefficients`].
    pub fn from_raw_coefficients(&self, alpha: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let shift: f64 = beta.iter().zip(&self.mean).map(|(b, m)| b * m).sum();
        let std = beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect();
        (alpha + shift, std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_dims() {
        let s = CovariateSchema::default();
        assert_eq!((s.n_cascade(), s.n_user(), s.n_structural()), (4, 4, 3));
        assert_eq!(s.column_names()[4], "x.followers");
    }

    #[test]
    fn rejects_unknown_and_duplicate_names() {
        assert!(CovariateSchema::from_names(&[], &["karma"], &[]).is_err());
        assert!(CovariateSchema::from_names(&[], &["followers", "followers"], &[]).is_err());
    }

    #[test]
    fn log1p_on_zero_counts_is_finite() {
        let s = CovariateSchema::from_names(&[], &["followers"], &["depth"]).unwrap();
        let mut out = [f64::NAN; 2];
        let y = StructuralCovariates::default();
        s.fill_row(&[0.0; 4], &[0.0, 1.0, 2.0, 3.0], &y, &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn coefficient_maps_are_inverse_and_preserve_eta() {
        let st = Standardizer {
            mean: vec![1.5, -2.0],
            scale: vec![0.5, 3.0],
        };
        let (a, b) = (0.7, vec![0.2, -1.1]);
        let (ar, br) = st.to_raw_coefficients(a, &b);
        let raw_row = [2.0, 4.0];
        let mut std_row = raw_row;
        st.apply(&mut std_row);
        let eta_std = a + b[0] * std_row[0] + b[1] * std_row[1];
        let eta_raw = ar + br[0] * raw_row[0] + br[1] * raw_row[1];
        assert!((eta_std - eta_raw).abs() < 1e-12);
        let (a2, b2) = st.from_raw_coefficients(ar, &br);
        assert!((a2 - a).abs() < 1e-12 && (b2[0] - b[0]).abs() < 1e-12 && (b2[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn schema_serde_round_trip_revalidates() {
        let s = CovariateSchema::from_names(&["surprise"], &["engagement"], &["depth"]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        let back: CovariateSchema = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
        let bad = js.replace("engagement", "karma");
        assert!(serde_json::from_str::<CovariateSchema>(&bad).is_err());
    }
}
