//! Odd-polynomial matrix iterations that drive every singular value to one.
//!
//! One step maps `X ↦ a·X + b·(XXᵀ)X + c·(XXᵀ)²X + …`, which applies the
//! scalar polynomial `g(x) = a·x + b·x³ + c·x⁵ + …` to each singular value
//! while keeping the singular vectors. Starting from a normalized input whose
//! singular values lie in `(0, √3)`, the default cubic `(3/2, −1/2)`
//! converges to the polar factor `U Vᵀ`.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::power::spectral_norm;
use crate::error::{Error, Result};

const GRID_POINTS: usize = 10_000;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `X₀ = G / ‖G‖₂`
    Spectral,
    /// `X₀ = G / ‖G‖_F`
    Frobenius,
}

/// Coefficients, iteration count and input normalization of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolynomialSpec", into = "RawPolynomialSpec")]
pub struct PolynomialSpec {
    coefficients: Vec<f64>,
    iterations: usize,
    normalization: Normalization,
}

#[derive(Serialize, Deserialize)]
struct RawPolynomialSpec {
    coefficients: Vec<f64>,
    iterations: usize,
    normalization: Normalization,
}

impl TryFrom<RawPolynomialSpec> for PolynomialSpec {
    type Error = Error;
    fn try_from(raw: RawPolynomialSpec) -> Result<Self> {
        PolynomialSpec::new(raw.coefficients, raw.iterations, raw.normalization)
    }
}

impl From<PolynomialSpec> for RawPolynomialSpec {
    fn from(spec: PolynomialSpec) -> Self {
        RawPolynomialSpec {
            coefficients: spec.coefficients,
            iterations: spec.iterations,
            normalization: spec.normalization,
        }
    }
}

impl Default for PolynomialSpec {
    fn default() -> Self {
        Self::cubic(30)
    }
}

impl PolynomialSpec {
    /// Validates the coefficients by iterating the scalar map on a dense
    /// grid of `(0, 1]`, the singular-value range both normalizations
    /// guarantee. Every iterate must stay inside `(0, √3)`.
    pub fn new(
        coefficients: Vec<f64>,
        iterations: usize,
        normalization: Normalization,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::validation("polynomial needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("polynomial coefficients must be finite"));
        }
        if iterations == 0 {
            return Err(Error::validation("iteration count must be positive"));
        }
        let spec = Self {
            coefficients,
            iterations,
            normalization,
        };
        let upper = 3f64.sqrt();
        for k in 1..=GRID_POINTS {
            let mut x = k as f64 / GRID_POINTS as f64;
            for t in 0..iterations {
                x = spec.scalar_map(x);
                if !(x > 0.0 && x < upper) {
                    return Err(Error::validation(format!(
                        "iteration leaves (0, sqrt 3) at x0 = {}: step {} gives {x}",
                        k as f64 / GRID_POINTS as f64,
                        t + 1
                    )));
                }
            }
        }
        Ok(spec)
    }

    /// The classical cubic `X ← 1.5·X − 0.5·XXᵀX` with spectral normalization.
    pub fn cubic(iterations: usize) -> Self {
        Self::new(vec![1.5, -0.5], iterations, Normalization::Spectral)
            .expect("the cubic is a valid iteration")
    }

    pub fn with_iterations(&self, iterations: usize) -> Result<Self> {
        Self::new(self.coefficients.clone(), iterations, self.normalization)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `g(x) = Σ_k c_k x^(2k+1)`.
    pub fn scalar_map(&self, x: f64) -> f64 {
        let x2 = x * x;
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * x2 + c;
        }
        acc * x
    }

    /// Scales `g` so its singular values land in `(0, 1]`.
    pub fn normalize(&self, g: &Matrix) -> Result<Matrix> {
        if g.is_zero() {
            return Err(Error::validation("cannot orthogonalize the zero matrix"));
        }
        let scale = match self.normalization {
            Normalization::Frobenius => g.frobenius_norm(),
            Normalization::Spectral => match spectral_norm(g, POWER_TOL, POWER_MAX_ITER) {
                Ok(s) => s,
                Err(Error::NoConvergence { estimate, .. }) => estimate,
                Err(e) => return Err(e),
            },
        };
        let x = g.scale(1.0 / scale);
        if !scale.is_finite() || scale == 0.0 || !x.is_finite() {
            return Err(Error::validation("normalization produced non-finite entries"));
        }
        Ok(x)
    }

    /// One application of the matrix polynomial.
    pub fn step(&self, x: &Matrix) -> Matrix {
        // (XXᵀ)^k X = X (XᵀX)^k; use whichever Gram matrix is smaller.
        let left = x.rows() <= x.cols();
        let gram = if left { x.gram_rows() } else { x.gram_cols() };
        let n = gram.rows();
        let mut poly = Matrix::identity(n).scale(*self.coefficients.last().unwrap());
        for &c in self.coefficients.iter().rev().skip(1) {
            poly = poly.matmul(&gram).expect("square");
            for i in 0..n {
                poly[(i, i)] += c;
            }
        }
        if left {
            poly.matmul(x).expect("shapes agree")
        } else {
            x.matmul(&poly).expect("shapes agree")
        }
    }
}

/// Runs `spec.iterations()` steps from the normalized input.
pub fn orthogonalize_newton_schulz(g: &Matrix, spec: &PolynomialSpec) -> Result<Matrix> {
    let mut x = spec.normalize(g)?;
    for _ in 0..spec.iterations() {
        x = spec.step(&x);
    }
    Ok(x)
}

/// All iterates `X₀, X₁, …, X_T`.
pub fn newton_schulz_iterates(g: &Matrix, spec: &PolynomialSpec) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(spec.iterations() + 1);
    out.push(spec.normalize(g)?);
    for t in 0..spec.iterations() {
        let next = spec.step(&out[t]);
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cubic_step_on_diagonal() {
        let spec = PolynomialSpec::cubic(1);
        let x = orthogonalize_newton_schulz(&Matrix::from_diag(&[3.0, 1.0]), &spec).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((x[(1, 1)] - 13.0 / 27.0).abs() < 1e-14);
        assert_eq!(x[(0, 1)], 0.0);
        assert_eq!(x[(1, 0)], 0.0);
    }

    #[test]
    fn semi_orthogonal_is_fixed_point() {
        let (c, s) = (0.7_f64.cos(), 0.7_f64.sin());
        // 3x2 with orthonormal columns.
        let q = Matrix::from_rows(&[[c, 0.0], [s, 0.0], [0.0, 1.0]]).unwrap();
        let x = orthogonalize_newton_schulz(&q, &PolynomialSpec::default()).unwrap();
        assert!(x.sub(&q).unwrap().frobenius_norm() <= 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(PolynomialSpec::new(vec![], 5, Normalization::Spectral).is_err());
        assert!(PolynomialSpec::new(vec![1.5, -0.5], 0, Normalization::Spectral).is_err());
        // g(x) = 3x overshoots sqrt 3 on (0, 1].
        assert!(PolynomialSpec::new(vec![3.0], 1, Normalization::Spectral).is_err());
        // g(x) = -x leaves the positive half-line.
        assert!(PolynomialSpec::new(vec![-1.0], 1, Normalization::Frobenius).is_err());
        // A tuned quintic stays inside the band.
        assert!(PolynomialSpec::new(vec![3.4445, -4.7750, 2.0315], 10, Normalization::Spectral).is_ok());
    }

    #[test]
    fn zero_input_is_rejected() {
        assert!(matches!(
            orthogonalize_newton_schulz(&Matrix::zeros(2, 2), &PolynomialSpec::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn scalar_map_horner() {
        let spec = PolynomialSpec::cubic(1);
        assert!((spec.scalar_map(1.0 / 3.0) - 13.0 / 27.0).abs() < 1e-16);
        assert_eq!(spec.scalar_map(1.0), 1.0);
    }

    #[test]
    fn serde_validates() {
        let json = r#"{"coefficients":[3.0],"iterations":1,"normalization":"spectral"}"#;
        assert!(serde_json::from_str::<PolynomialSpec>(json).is_err());
        let ok = serde_json::to_string(&PolynomialSpec::default()).unwrap();
        let back: PolynomialSpec = serde_json::from_str(&ok).unwrap();
        assert_eq!(back, PolynomialSpec::default());
    }
}
