//! Dense matrix kernels.

mod eig;
mod matrix;
mod newton_schulz;
mod power;
mod roots;
mod svd;

pub use eig::{compose_spectral, sym_eig};
pub use matrix::{matmul, Matrix};
pub use newton_schulz::{
    newton_schulz_iterates, orthogonalize_newton_schulz, Normalization, PolynomialSpec,
};
pub use power::spectral_norm;
pub use roots::{spd_inverse_root, spd_inverse_root_newton, InverseRootBackend};
pub use svd::{orthogonalize_via_svd, reduced_svd, SvdFactors, RANK_TOLERANCE};
