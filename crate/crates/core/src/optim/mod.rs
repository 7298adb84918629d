//! Optimizers over layer lists, plus the reductions that tie them to
//! steepest descent.

mod adam;
mod descent;
mod line_search;
mod prodigy;
mod shampoo;

pub use adam::{AdamHyper, AdamState};
pub use descent::{
    sign_descent_step, spectral_descent_step, ModularSteepest, OrthoBackend, SignDescent,
    SpectralDescent,
};
pub use line_search::{EscapeDiagnostics, LineSearchPolicy, LineSearchState, COSINE_FLOOR};
pub use prodigy::{ProdigyHyper, ProdigyState, StepTiming};
pub use shampoo::{Accumulation, ShampooState};

use crate::error::{Error, Result};
use crate::layers::LayerList;

pub trait Optimizer {
    /// Returns the new weights; `w` is left untouched.
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList>;

    /// Step size used by the most recent `step`.
    fn applied_step_size(&self) -> f64;
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite and > 0, got {x}")))
    }
}

pub(crate) fn check_finite_nonneg(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite and >= 0, got {x}")))
    }
}

pub(crate) fn check_beta(name: &str, x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must lie in [0, 1), got {x}")))
    }
}
