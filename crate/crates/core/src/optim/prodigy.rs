use serde::{Deserialize, Serialize};

use super::{check_beta, check_finite_nonneg, check_positive, Optimizer};
use crate::error::{Error, Result};
use crate::layers::LayerList;
use crate::linalg::Matrix;

/// Which step size multiplies the weight update of step `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTiming {
    /// The step size after this step's `max` update, `η_{t+1}`. With EMA off
    /// and a constant 1-D gradient the step size then doubles every step
    /// once warm-up starts.
    #[default]
    Refreshed,
    /// The step size from before the update, `η_t`, as in the upstream
    /// algorithm. The same construction then grows like a Fibonacci sequence.
    Lagged,
}

/// Prodigy with the learning-rate schedule stripped.
///
/// Per step, with `η = η_t`:
/// `m ← β₁m + (1−β₁)ηg`, `v ← β₂v + (1−β₂)η²g²`,
/// `r ← √β₂ r + (1−√β₂)η² gᵀ(w₀ − w)`, `s ← √β₂ s + (1−√β₂)η² g`,
/// `η_{t+1} = max(η_t, r/‖s‖₁)`, and `w ← w − η' m / (√v + η ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProdigyState {
    pub m: LayerList,
    pub v: LayerList,
    pub r: f64,
    pub s: LayerList,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub w0: LayerList,
    #[serde(default)]
    pub timing: StepTiming,
    pub step_count: u64,
    #[serde(default)]
    pub applied_eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProdigyHyper {
    pub eta0: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub timing: StepTiming,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl ProdigyHyper {
    pub fn new(eta0: f64) -> Self {
        Self {
            eta0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            timing: StepTiming::default(),
        }
    }

    pub fn without_ema(eta0: f64) -> Self {
        Self {
            eta0,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
            timing: StepTiming::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("eta0", self.eta0)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        check_finite_nonneg("epsilon", self.epsilon)
    }
}

impl ProdigyState {
    /// `w0` is recorded as the anchor of the step-size rule.
    pub fn new(w0: &LayerList, hyper: ProdigyHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            m: LayerList::zeros_like(w0),
            v: LayerList::zeros_like(w0),
            r: 0.0,
            s: LayerList::zeros_like(w0),
            eta: hyper.eta0,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            w0: w0.clone(),
            timing: hyper.timing,
            step_count: 0,
            applied_eta: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        ProdigyHyper {
            eta0: self.eta,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            timing: self.timing,
        }
        .validate()?;
        if !self.r.is_finite() {
            return Err(Error::validation("r must be finite"));
        }
        self.w0.check_same_shapes(&self.m, "prodigy state")?;
        self.w0.check_same_shapes(&self.v, "prodigy state")?;
        self.w0.check_same_shapes(&self.s, "prodigy state")
    }

    pub fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        w.check_same_shapes(g, "prodigy_step")?;
        w.check_same_shapes(&self.w0, "prodigy_step")?;
        self.step_count += 1;
        let eta = self.eta;
        let eta_sq = eta * eta;
        let (b1, b2) = (self.beta1, self.beta2);
        let sb2 = b2.sqrt();

        let mut alignment = 0.0;
        for l in 0..w.len() {
            let gl = g[l].as_slice();
            for (mi, &gi) in self.m.layers_mut()[l].as_mut_slice().iter_mut().zip(gl) {
                *mi = b1 * *mi + (1.0 - b1) * eta * gi;
            }
            for (vi, &gi) in self.v.layers_mut()[l].as_mut_slice().iter_mut().zip(gl) {
                *vi = b2 * *vi + (1.0 - b2) * eta_sq * gi * gi;
            }
            for (si, &gi) in self.s.layers_mut()[l].as_mut_slice().iter_mut().zip(gl) {
                *si = sb2 * *si + (1.0 - sb2) * eta_sq * gi;
            }
            alignment += gl
                .iter()
                .zip(self.w0[l].as_slice().iter().zip(w[l].as_slice()))
                .map(|(&gi, (&w0i, &wi))| gi * (w0i - wi))
                .sum::<f64>();
        }
        self.r = sb2 * self.r + (1.0 - sb2) * eta_sq * alignment;
        let s_l1 = self.s.l1_norm();
        let eta_next = if s_l1 > 0.0 {
            eta.max(self.r / s_l1)
        } else {
            eta
        };

        let applied = match self.timing {
            StepTiming::Refreshed => eta_next,
            StepTiming::Lagged => eta,
        };
        let mut out = Vec::with_capacity(w.len());
        for l in 0..w.len() {
            let wl = &w[l];
            let data = wl
                .as_slice()
                .iter()
                .zip(self.m[l].as_slice().iter().zip(self.v[l].as_slice()))
                .map(|(&wi, (&mi, &vi))| {
                    let denom = vi.sqrt() + eta * self.epsilon;
                    let u = if denom == 0.0 { 0.0 } else { mi / denom };
                    wi - applied * u
                })
                .collect();
            out.push(Matrix::new(wl.rows(), wl.cols(), data)?);
        }
        self.eta = eta_next;
        self.applied_eta = applied;
        LayerList::new(out)
    }
}

impl Optimizer for ProdigyState {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        ProdigyState::step(self, w, g)
    }

    fn applied_step_size(&self) -> f64 {
        self.applied_eta
    }
}
