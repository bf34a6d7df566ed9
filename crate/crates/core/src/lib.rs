//! Mixture of marked Hawkes processes for rumor cascades.
//!
//! Two self-exciting point processes are fitted, one to cascades of true
//! rumors and one to cascades of false rumors. A new cascade is scored by the
//! posterior probability that it was generated by the false-rumor component.
//!
//! Modules, bottom-up:
//! - [`cascade`], [`covariates`]: data model, IO, filtering, truncation
//! - [`kernels`]: normalized memory kernels
//! - [`model`]: marks, intensity, likelihoods, priors, log posterior
//! - [`inference`]: MAP fitting, NUTS sampling, convergence diagnostics
//! - [`mixture`]: training both components and veracity scoring
//! - [`simulate`], [`gof`], [`stats`]: simulation, residual diagnostics,
//!   posterior predictive checks
//! - [`eval`]: metrics, feature baseline and early-detection sweeps

pub mod cascade;
pub mod covariates;
pub mod error;
pub mod eval;
pub mod gof;
pub mod inference;
pub mod kernels;
pub mod mixture;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use cascade::{Cascade, Event, EventInput, Truncation, Veracity};
pub use covariates::{CovariateSchema, Standardizer};
pub use error::{Error, Result};
pub use inference::{PosteriorFit, SamplerConfig};
pub use kernels::{Kernel, KernelFamily, KernelPair};
pub use mixture::{MixtureModel, VeracityScore};
pub use model::{ComponentParams, HawkesProcess, MarkCoefficients, ParamLayout, PreparedCascade, PriorSpec};
