//! Steepest descent under non-Euclidean norms.
//!
//! Dense linear algebra kernels, norm/dual/oracle evaluation, closed-form
//! steepest-descent solvers, the optimizers they reduce to, and small
//! square-loss models to run them on.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod layers;
pub mod linalg;
pub mod models;
pub mod norms;
pub mod optim;
pub mod random;
pub mod steepest;

pub use error::{Error, Result};
pub use layers::LayerList;
pub use linalg::{InverseRootBackend, Matrix, Normalization, PolynomialSpec, SvdFactors};
pub use models::{Dataset, LinearModel, TwoLayerNet};
pub use norms::{Exponent, ModularEntry, ModularNormSpec, NormSpec};
pub use optim::Optimizer;
pub use random::SeedTree;
pub use steepest::SteepestSolution;
