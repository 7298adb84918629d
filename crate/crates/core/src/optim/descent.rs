use serde::{Deserialize, Serialize};

use super::{check_positive, Optimizer};
use crate::error::Result;
use crate::layers::LayerList;
use crate::linalg::{orthogonalize_newton_schulz, orthogonalize_via_svd, Matrix, PolynomialSpec};
use crate::norms::ModularNormSpec;
use crate::steepest::solve_modular;

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `w − lr · sign(g)`, with `sign(0) = 0`.
pub fn sign_descent_step(w: &LayerList, g: &LayerList, lr: f64) -> Result<LayerList> {
    w.zip_map(g, "sign_descent_step", |wl, gl| {
        wl.zip_with(gl, "sign_descent_step", |a, b| a - lr * sign(b))
            .expect("checked")
    })
}

/// How spectral descent orthogonalizes the gradient.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrthoBackend {
    #[default]
    Svd,
    NewtonSchulz(PolynomialSpec),
}

impl OrthoBackend {
    pub fn orthogonalize(&self, g: &Matrix) -> Result<Matrix> {
        match self {
            OrthoBackend::Svd => orthogonalize_via_svd(g),
            OrthoBackend::NewtonSchulz(spec) => orthogonalize_newton_schulz(g, spec),
        }
    }
}

/// `W_l − lr · U_l V_lᵀ` per layer. Zero gradients leave the layer alone.
pub fn spectral_descent_step(
    w: &LayerList,
    g: &LayerList,
    lr: f64,
    backend: &OrthoBackend,
) -> Result<LayerList> {
    w.check_same_shapes(g, "spectral_descent_step")?;
    let mut out = Vec::with_capacity(w.len());
    for (wl, gl) in w.iter().zip(g) {
        if gl.is_zero() {
            out.push(wl.clone());
        } else {
            out.push(wl.sub(&backend.orthogonalize(gl)?.scale(lr))?);
        }
    }
    LayerList::new(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDescent {
    pub lr: f64,
}

impl SignDescent {
    pub fn new(lr: f64) -> Result<Self> {
        check_positive("lr", lr)?;
        Ok(Self { lr })
    }
}

impl Optimizer for SignDescent {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        sign_descent_step(w, g, self.lr)
    }

    fn applied_step_size(&self) -> f64 {
        self.lr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDescent {
    pub lr: f64,
    #[serde(default)]
    pub backend: OrthoBackend,
}

impl SpectralDescent {
    pub fn new(lr: f64, backend: OrthoBackend) -> Result<Self> {
        check_positive("lr", lr)?;
        Ok(Self { lr, backend })
    }
}

impl Optimizer for SpectralDescent {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        spectral_descent_step(w, g, self.lr, &self.backend)
    }

    fn applied_step_size(&self) -> f64 {
        self.lr
    }
}

/// Takes the full closed-form steepest step under a modular norm each
/// iteration. The step size varies with the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularSteepest {
    pub spec: ModularNormSpec,
    pub lambda: f64,
    #[serde(default)]
    pub last_step_size: f64,
    #[serde(default)]
    pub last_duals: Vec<f64>,
}

impl ModularSteepest {
    pub fn new(spec: ModularNormSpec, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self {
            spec,
            lambda,
            last_step_size: 0.0,
            last_duals: Vec::new(),
        })
    }
}

impl Optimizer for ModularSteepest {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        w.check_same_shapes(g, "modular_steepest_step")?;
        let sol = solve_modular(g, &self.spec, self.lambda)?;
        self.last_step_size = sol.step_size;
        self.last_duals = sol.dual_values;
        w.add(&sol.updates)
    }

    fn applied_step_size(&self) -> f64 {
        self.last_step_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;

    #[test]
    fn sign_step_example() {
        let w = LayerList::single(Matrix::column(&[1.0, 1.0, 1.0]).unwrap());
        let g = LayerList::single(Matrix::column(&[2.0, -1.0, 0.0]).unwrap());
        let out = sign_descent_step(&w, &g, 0.25).unwrap();
        assert_eq!(out[0], Matrix::column(&[0.75, 1.25, 1.0]).unwrap());
    }

    #[test]
    fn spectral_step_backends_agree() {
        let g = Matrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let w = LayerList::single(Matrix::zeros(2, 2));
        let gs = LayerList::single(g);
        let a = spectral_descent_step(&w, &gs, 1.0, &OrthoBackend::Svd).unwrap();
        let b = spectral_descent_step(
            &w,
            &gs,
            1.0,
            &OrthoBackend::NewtonSchulz(PolynomialSpec::default()),
        )
        .unwrap();
        let expected = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(a[0].sub(&expected).unwrap().frobenius_norm() < 1e-14);
        assert!(b[0].sub(&expected).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn spectral_zero_layer_unchanged() {
        let w = LayerList::new(vec![Matrix::identity(2), Matrix::identity(3)]).unwrap();
        let g = LayerList::new(vec![Matrix::zeros(2, 2), Matrix::identity(3)]).unwrap();
        let out = spectral_descent_step(&w, &g, 0.5, &OrthoBackend::Svd).unwrap();
        assert_eq!(out[0], Matrix::identity(2));
        assert!(out[1].sub(&Matrix::identity(3).scale(0.5)).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn modular_steepest_tracks_step_size() {
        let w = LayerList::single(Matrix::column(&[0.0, 0.0]).unwrap());
        let g = LayerList::single(Matrix::column(&[1.0, -2.0]).unwrap());
        let spec = ModularNormSpec::uniform(NormSpec::linf(), 1).unwrap();
        let mut opt = ModularSteepest::new(spec, 2.0).unwrap();
        let out = opt.step(&w, &g).unwrap();
        assert_eq!(opt.applied_step_size(), 1.5);
        assert_eq!(out[0], Matrix::column(&[-1.5, 1.5]).unwrap());
    }
}
