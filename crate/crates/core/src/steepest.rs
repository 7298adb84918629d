//! Closed-form steepest descent.
//!
//! `argmin_Δ ⟨g, Δ⟩ + (λ/2)‖Δ‖²` factors into a step size (dual norm over
//! sharpness) and a direction (the norm's linear maximization oracle). Under
//! the modular norm `max_l s_l‖W_l‖_l` the step size becomes a single global
//! `η = (1/λ) Σ_k ‖G_k‖†_k / s_k` and layer `l` moves by `η / s_l` along its
//! own oracle direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::LayerList;
use crate::linalg::{reduced_svd, Matrix};
use crate::norms::{dual_norm, lmo_direction, matrix_norm, Exponent, ModularNormSpec, NormSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepestSolution {
    pub updates: LayerList,
    pub step_size: f64,
    pub dual_values: Vec<f64>,
    pub objective_value: f64,
}

fn check_sharpness(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::validation(format!(
            "sharpness must be finite and > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Steepest descent under a single norm.
pub fn solve_single(g: &Matrix, spec: &NormSpec, lambda: f64) -> Result<SteepestSolution> {
    solve_modular(
        &LayerList::single(g.clone()),
        &ModularNormSpec::uniform(*spec, 1)?,
        lambda,
    )
}

/// Steepest descent under the modular norm. Layers with zero gradient get a
/// zero update and contribute nothing to the step size.
pub fn solve_modular(
    gs: &LayerList,
    spec: &ModularNormSpec,
    lambda: f64,
) -> Result<SteepestSolution> {
    check_sharpness(lambda)?;
    spec.check_len(gs)?;

    let mut duals = Vec::with_capacity(gs.len());
    let mut directions = Vec::with_capacity(gs.len());
    for (g, entry) in gs.iter().zip(spec.entries()) {
        if g.is_zero() {
            // Still reject vector-only norms on matrices.
            dual_norm(g, &entry.norm)?;
            duals.push(0.0);
            directions.push(None);
        } else {
            duals.push(dual_norm(g, &entry.norm)?);
            directions.push(Some(lmo_direction(g, &entry.norm)?));
        }
    }
    let weighted: f64 = duals
        .iter()
        .zip(spec.entries())
        .map(|(d, e)| d / e.scale)
        .sum();
    let eta = weighted / lambda;

    let updates = gs
        .iter()
        .zip(spec.entries())
        .zip(directions)
        .map(|((g, e), dir)| match dir {
            Some(t) => t.scale(-eta / e.scale),
            None => Matrix::zeros(g.rows(), g.cols()),
        })
        .collect();

    Ok(SteepestSolution {
        updates: LayerList::new(updates)?,
        step_size: eta,
        dual_values: duals,
        objective_value: -weighted * eta + 0.5 * lambda * eta * eta,
    })
}

/// Unit scales, ℓ₁ → ℓ∞ everywhere: layerwise sign descent.
pub fn solve_max_of_max(gs: &LayerList, lambda: f64) -> Result<SteepestSolution> {
    solve_modular(gs, &ModularNormSpec::uniform(NormSpec::max_abs(), gs.len())?, lambda)
}

/// Unit scales, spectral norm everywhere: layerwise `−η U Vᵀ`.
pub fn solve_spectral_layers(gs: &LayerList, lambda: f64) -> Result<SteepestSolution> {
    solve_modular(gs, &ModularNormSpec::uniform(NormSpec::Spectral, gs.len())?, lambda)
}

/// `Σ_l ⟨G_l, Δ_l⟩ + (λ/2) · max_l s_l² ‖Δ_l‖_l²`, the objective the
/// solvers minimize.
pub fn modular_objective(
    gs: &LayerList,
    updates: &LayerList,
    spec: &ModularNormSpec,
    lambda: f64,
) -> Result<f64> {
    spec.check_len(gs)?;
    let linear = gs.inner(updates)?;
    let mut penalty = 0.0_f64;
    for (d, e) in updates.iter().zip(spec.entries()) {
        penalty = penalty.max(e.scale * matrix_norm(d, &e.norm)?);
    }
    Ok(linear + 0.5 * lambda * penalty * penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Vector,
    Matrix,
}

/// One row of the norm/solution/optimizer correspondence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub domain: Domain,
    pub norm: NormSpec,
    pub solution: &'static str,
    pub optimizer: &'static str,
    pub cousin: &'static str,
}

impl ReferenceRow {
    /// The tabulated update, computed directly from its formula.
    pub fn closed_form(&self, g: &Matrix, lambda: f64) -> Result<Matrix> {
        check_sharpness(lambda)?;
        if self.domain == Domain::Vector && !g.is_vector() {
            return Err(Error::validation("vector rows need a column-vector gradient"));
        }
        Ok(match self.norm {
            NormSpec::VectorLp { p } if p == Exponent::TWO => {
                let n = g.frobenius_norm();
                g.scale(1.0 / n).scale(-n / lambda)
            }
            NormSpec::VectorLp { p } if p.is_infinite() => {
                let l1: f64 = g.as_slice().iter().map(|x| x.abs()).sum();
                g.map(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
                    .scale(-l1 / lambda)
            }
            NormSpec::Frobenius => {
                let n = g.frobenius_norm();
                g.scale(1.0 / n).scale(-n / lambda)
            }
            NormSpec::Spectral => {
                let f = reduced_svd(g)?;
                f.polar_factor().scale(-f.trace() / lambda)
            }
            other => {
                return Err(Error::validation(format!(
                    "{} is not a reference row",
                    other.label()
                )))
            }
        })
    }
}

/// Gradient descent, sign descent, Frobenius-normalized descent and spectral
/// descent as steepest descent under ℓ₂, ℓ∞, Frobenius and spectral norms.
pub fn reference_table() -> Vec<ReferenceRow> {
    vec![
        ReferenceRow {
            domain: Domain::Vector,
            norm: NormSpec::lp(Exponent::TWO),
            solution: "dw = -(|g|_2 / lambda) * g / |g|_2",
            optimizer: "vanilla gradient descent",
            cousin: "SGD",
        },
        ReferenceRow {
            domain: Domain::Vector,
            norm: NormSpec::linf(),
            solution: "dw = -(|g|_1 / lambda) * sign(g)",
            optimizer: "sign descent",
            cousin: "Adam",
        },
        ReferenceRow {
            domain: Domain::Matrix,
            norm: NormSpec::Frobenius,
            solution: "dW = -(|G|_F / lambda) * G / |G|_F",
            optimizer: "vanilla gradient descent",
            cousin: "SGD",
        },
        ReferenceRow {
            domain: Domain::Matrix,
            norm: NormSpec::Spectral,
            solution: "dW = -(tr S / lambda) * U V^T",
            optimizer: "spectral descent",
            cousin: "Shampoo",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::column(v).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().frobenius_norm() <= tol
    }

    #[test]
    fn single_examples() {
        let s = solve_single(&col(&[2.0, -1.0, 0.0]), &NormSpec::linf(), 1.0).unwrap();
        assert_eq!(s.updates[0], col(&[-3.0, 3.0, 0.0]));
        assert_eq!(s.step_size, 3.0);

        let s = solve_single(&col(&[3.0, 4.0]), &NormSpec::lp(Exponent::TWO), 2.0).unwrap();
        assert!(close(&s.updates[0], &col(&[-1.5, -2.0]), 1e-15));

        let s = solve_single(&Matrix::from_diag(&[2.0, 0.5]), &NormSpec::Spectral, 1.0).unwrap();
        assert!(close(&s.updates[0], &Matrix::identity(2).scale(-2.5), 1e-14));
        assert!((s.objective_value + 2.5 * 2.5 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_and_bad_sharpness() {
        let s = solve_single(&Matrix::zeros(2, 2), &NormSpec::Spectral, 1.0).unwrap();
        assert_eq!(s.step_size, 0.0);
        assert!(s.updates[0].is_zero());
        assert!(solve_single(&col(&[1.0]), &NormSpec::linf(), 0.0).is_err());
        assert!(solve_single(&col(&[1.0]), &NormSpec::linf(), f64::NAN).is_err());
    }

    #[test]
    fn modular_scalar_layers() {
        let gs = LayerList::new(vec![col(&[1.0]), col(&[4.0])]).unwrap();
        let spec = ModularNormSpec::from_pairs([(1.0, NormSpec::Spectral), (2.0, NormSpec::Spectral)])
            .unwrap();
        let s = solve_modular(&gs, &spec, 1.0).unwrap();
        assert!((s.step_size - 3.0).abs() < 1e-15);
        assert!((s.updates[0][(0, 0)] + 3.0).abs() < 1e-15);
        assert!((s.updates[1][(0, 0)] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn max_of_max_examples() {
        let gs = LayerList::single(Matrix::from_rows(&[[2.0, -1.0]]).unwrap());
        let s = solve_max_of_max(&gs, 1.0).unwrap();
        assert_eq!(s.updates[0], Matrix::from_rows(&[[-3.0, 3.0]]).unwrap());

        let gs = LayerList::new(vec![
            Matrix::from_rows(&[[2.0, -1.0]]).unwrap(),
            Matrix::from_rows(&[[0.5], [-0.25]]).unwrap(),
        ])
        .unwrap();
        let s = solve_max_of_max(&gs, 2.0).unwrap();
        assert_eq!(s.step_size, (3.0 + 0.75) / 2.0);
        assert_eq!(s.updates[1], Matrix::from_rows(&[[-1.875], [1.875]]).unwrap());
    }

    #[test]
    fn spectral_layers_example() {
        let g = Matrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let s = solve_spectral_layers(&LayerList::single(g), 3.0).unwrap();
        assert!((s.step_size - 1.0).abs() < 1e-15);
        let expected = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(close(&s.updates[0], &expected, 1e-14));
    }

    #[test]
    fn reference_rows_match_solver() {
        let v = col(&[0.5, -2.0, 1.5]);
        let m = Matrix::from_rows(&[[1.0, 2.0, 0.0], [-1.0, 0.5, 3.0]]).unwrap();
        for row in reference_table() {
            let g = if row.domain == Domain::Vector { &v } else { &m };
            let expected = row.closed_form(g, 1.7).unwrap();
            let got = solve_single(g, &row.norm, 1.7).unwrap();
            assert!(close(&got.updates[0], &expected, 1e-13), "{}", row.optimizer);
        }
    }

    #[test]
    fn objective_matches_formula() {
        let gs = LayerList::single(col(&[1.0, -2.0]));
        let spec = ModularNormSpec::uniform(NormSpec::linf(), 1).unwrap();
        let s = solve_modular(&gs, &spec, 2.0).unwrap();
        let obj = modular_objective(&gs, &s.updates, &spec, 2.0).unwrap();
        assert!((obj - s.objective_value).abs() < 1e-14);
        assert!((obj + 9.0 / 4.0).abs() < 1e-14);
    }
}
