//! Approximate-deconvolution MHD on the periodic 3-torus, pseudo-spectral
//! in space with an integrating-factor RK4 in time.

pub mod checks;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod filter_ops;
pub mod initial;
pub mod mhd_model;
pub mod snapshot;
pub mod spectral_field;
pub mod time_integrator;
pub mod transform;

pub use error::{Error, Result};
pub use filter_ops::{DeconvParams, FilterParams};
pub use mhd_model::{MhdModel, MhdState, ModelCase, PhysicalParams};
pub use spectral_field::{GridSpec, SpectralScalarField, SpectralVectorField};
pub use time_integrator::{run, IntegratorConfig, RunOutcome, Stepper};
pub use transform::{PhysicalVectorField, SpectralTransform};
