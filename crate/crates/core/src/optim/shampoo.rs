use serde::{Deserialize, Serialize};

use super::{check_beta, check_finite_nonneg, check_positive, Optimizer};
use crate::error::{Error, Result};
use crate::layers::LayerList;
use crate::linalg::{InverseRootBackend, Matrix};

/// How the left/right preconditioners accumulate gradient outer products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Accumulation {
    Sum,
    Ema { beta: f64 },
}

/// Per-layer Shampoo: `W ← W − lr · (L + εI)^(-1/4) G (R + εI)^(-1/4)` with
/// `L += GGᵀ`, `R += GᵀG`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShampooState {
    pub l_acc: Vec<Matrix>,
    pub r_acc: Vec<Matrix>,
    pub mode: Accumulation,
    pub lr: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub backend: InverseRootBackend,
    pub step_count: u64,
}

impl ShampooState {
    pub fn new(params: &LayerList, lr: f64, epsilon: f64, mode: Accumulation) -> Result<Self> {
        let state = Self {
            l_acc: params.iter().map(|w| Matrix::zeros(w.rows(), w.rows())).collect(),
            r_acc: params.iter().map(|w| Matrix::zeros(w.cols(), w.cols())).collect(),
            mode,
            lr,
            epsilon,
            backend: InverseRootBackend::Eigen,
            step_count: 0,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn with_backend(mut self, backend: InverseRootBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("lr", self.lr)?;
        check_finite_nonneg("epsilon", self.epsilon)?;
        if let Accumulation::Ema { beta } = self.mode {
            check_beta("mode.beta", beta)?;
        }
        if self.l_acc.len() != self.r_acc.len() {
            return Err(Error::validation("left and right accumulator counts differ"));
        }
        for (l, r) in self.l_acc.iter().zip(&self.r_acc) {
            if !l.is_square() || !r.is_square() {
                return Err(Error::validation("accumulators must be square"));
            }
        }
        Ok(())
    }

    fn check_layers(&self, g: &LayerList) -> Result<()> {
        if g.len() != self.l_acc.len() {
            return Err(Error::validation(format!(
                "shampoo state tracks {} layers, got {}",
                self.l_acc.len(),
                g.len()
            )));
        }
        for ((gl, l), r) in g.iter().zip(&self.l_acc).zip(&self.r_acc) {
            if gl.rows() != l.rows() || gl.cols() != r.rows() {
                return Err(Error::Shape {
                    op: "shampoo_step",
                    left: gl.shape(),
                    right: (l.rows(), r.rows()),
                });
            }
        }
        Ok(())
    }

    pub fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        w.check_same_shapes(g, "shampoo_step")?;
        self.check_layers(g)?;
        self.step_count += 1;
        let mut out = Vec::with_capacity(w.len());
        for (i, (wl, gl)) in w.iter().zip(g).enumerate() {
            accumulate(&mut self.l_acc[i], &gl.gram_rows(), self.mode);
            accumulate(&mut self.r_acc[i], &gl.gram_cols(), self.mode);
            let left = self.backend.inverse_root(&self.l_acc[i], 4, self.epsilon)?;
            let right = self.backend.inverse_root(&self.r_acc[i], 4, self.epsilon)?;
            let direction = left.matmul(gl)?.matmul(&right)?;
            out.push(wl.sub(&direction.scale(self.lr))?);
        }
        LayerList::new(out)
    }
}

/// Sum or EMA update; both keep exactly symmetric matrices symmetric.
fn accumulate(acc: &mut Matrix, term: &Matrix, mode: Accumulation) {
    let (decay, weight) = match mode {
        Accumulation::Sum => (1.0, 1.0),
        Accumulation::Ema { beta } => (beta, 1.0 - beta),
    };
    for (a, &t) in acc.as_mut_slice().iter_mut().zip(term.as_slice()) {
        *a = decay * *a + weight * t;
    }
}

impl Optimizer for ShampooState {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        ShampooState::step(self, w, g)
    }

    fn applied_step_size(&self) -> f64 {
        self.lr
    }
}
