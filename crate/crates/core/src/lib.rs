//! Probabilistic long-horizon forecasting of partially observable time series
//! with conditional score-based diffusion.
//!
//! A fixed-size conditional denoiser can only generate `K` new time steps per
//! call, conditioned on `K + 1` known ones. This crate plans and executes
//! *inference schemes*: ordered sequences of such calls whose index sets cover
//! an arbitrarily long future. The centerpiece is the multiscale scheme, which
//! places its window indices at power-law spacings so that a single call can
//! reach a horizon exponential in `K` while staying fine-grained near the
//! present.
//!
//! Module map:
//! - [`templates`] — multiscale index templates and horizon inversion
//! - [`scheme`] — scheme planners (multiscale, autoregressive, hierarchy-2),
//!   validation, extension, JSON serialization and diagrams
//! - [`synthetic`] — seeded sinusoid-plus-noise datasets and 2D test fields
//! - [`diffusion`] — forward noising, denoising losses, score extraction and
//!   masked reverse-SDE samplers
//! - [`denoiser`] — a small preconditioned MLP denoiser with hand-derived
//!   gradients and an Adam training loop
//! - [`rollout`] — scheme execution against observed data, producing
//!   trajectory ensembles
//! - [`metrics`] — 1D Wasserstein distance, isotropic power spectra and
//!   magnetogram-style summary statistics
//! - [`experiment`] — end-to-end synthetic benchmark comparing schemes
//! - [`io`] — binary dataset/checkpoint/ensemble formats and CSV reports

pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod rollout;
pub mod scheme;
pub mod synthetic;
pub mod templates;

pub use error::{Error, Result};
