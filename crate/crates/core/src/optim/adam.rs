use serde::{Deserialize, Serialize};

use super::{check_beta, check_finite_nonneg, check_positive, Optimizer};
use crate::error::Result;
use crate::layers::LayerList;
use crate::linalg::Matrix;

/// Adam without weight decay. With `beta1 = beta2 = 0` and `epsilon = 0`
/// every step is `w − lr · sign(g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: LayerList,
    pub v: LayerList,
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub epsilon: f64,
    pub bias_correction: bool,
    pub step_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub bias_correction: bool,
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

impl AdamHyper {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            bias_correction: false,
        }
    }

    /// EMA off, no stabilization: the sign-descent reduction.
    pub fn without_ema(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
            bias_correction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("lr", self.lr)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        check_finite_nonneg("epsilon", self.epsilon)
    }
}

impl AdamState {
    pub fn new(params: &LayerList, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            m: LayerList::zeros_like(params),
            v: LayerList::zeros_like(params),
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            lr: hyper.lr,
            epsilon: hyper.epsilon,
            bias_correction: hyper.bias_correction,
            step_count: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        AdamHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            bias_correction: self.bias_correction,
        }
        .validate()?;
        self.m.check_same_shapes(&self.v, "adam state")
    }

    pub fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        w.check_same_shapes(g, "adam_step")?;
        w.check_same_shapes(&self.m, "adam_step")?;
        self.step_count += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let (c1, c2) = if self.bias_correction {
            let t = self.step_count as i32;
            (1.0 - b1.powi(t), 1.0 - b2.powi(t))
        } else {
            (1.0, 1.0)
        };

        let mut out = Vec::with_capacity(w.len());
        for l in 0..w.len() {
            let (wl, gl) = (&w[l], &g[l]);
            let m = &mut self.m.layers_mut()[l];
            let ms = m.as_mut_slice();
            for (mi, &gi) in ms.iter_mut().zip(gl.as_slice()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
            }
            let v = &mut self.v.layers_mut()[l];
            for (vi, &gi) in v.as_mut_slice().iter_mut().zip(gl.as_slice()) {
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            }
            let (m, v) = (&self.m[l], &self.v[l]);
            let data = wl
                .as_slice()
                .iter()
                .zip(m.as_slice().iter().zip(v.as_slice()))
                .map(|(&wi, (&mi, &vi))| {
                    let (mh, vh) = if self.bias_correction {
                        (mi / c1, vi / c2)
                    } else {
                        (mi, vi)
                    };
                    let denom = vh.sqrt() + self.epsilon;
                    // 0/0 only happens when every past gradient entry was 0.
                    let u = if denom == 0.0 { 0.0 } else { mh / denom };
                    wi - self.lr * u
                })
                .collect();
            out.push(Matrix::new(wl.rows(), wl.cols(), data)?);
        }
        LayerList::new(out)
    }
}

impl Optimizer for AdamState {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> Result<LayerList> {
        AdamState::step(self, w, g)
    }

    fn applied_step_size(&self) -> f64 {
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> LayerList {
        LayerList::single(Matrix::column(v).unwrap())
    }

    #[test]
    fn no_ema_is_sign_descent() {
        let w = col(&[1.0, 1.0]);
        let mut s = AdamState::new(&w, AdamHyper::without_ema(0.5)).unwrap();
        let out = s.step(&w, &col(&[4.0, -9.0])).unwrap();
        assert_eq!(out, col(&[0.5, 1.5]));
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let w = col(&[1.0, -2.0]);
        let mut s = AdamState::new(&w, AdamHyper::new(0.1)).unwrap();
        assert_eq!(s.step(&w, &col(&[0.0, 0.0])).unwrap(), w);
        // ε = 0 still yields zero movement rather than NaN.
        let mut s = AdamState::new(&w, AdamHyper::without_ema(0.1)).unwrap();
        assert_eq!(s.step(&w, &col(&[0.0, 3.0])).unwrap(), col(&[1.0, -2.1]));
    }

    #[test]
    fn bias_corrected_matches_scalar_recurrence() {
        let hyper = AdamHyper {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            bias_correction: true,
        };
        let g = [0.3, -2.0, 5.0];
        let w0 = col(&[0.0, 1.0, -1.0]);
        let mut s = AdamState::new(&w0, hyper).unwrap();
        let mut w = w0.clone();
        for _ in 0..2 {
            w = s.step(&w, &col(&g)).unwrap();
        }
        for (i, &gi) in g.iter().enumerate() {
            // Scalar oracle, written out independently.
            let (mut m, mut v, mut x) = (0.0_f64, 0.0_f64, w0[0].as_slice()[i]);
            for t in 1..=2 {
                m = 0.9 * m + 0.1 * gi;
                v = 0.99 * v + 0.01 * gi * gi;
                let mh = m / (1.0 - 0.9_f64.powi(t));
                let vh = v / (1.0 - 0.99_f64.powi(t));
                x -= 0.01 * mh / (vh.sqrt() + 1e-8);
            }
            assert!((w[0].as_slice()[i] - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn validation() {
        let w = col(&[1.0]);
        assert!(AdamState::new(&w, AdamHyper::new(0.0)).is_err());
        let mut h = AdamHyper::new(0.1);
        h.beta1 = 1.0;
        assert!(AdamState::new(&w, h).is_err());
        let mut s = AdamState::new(&w, AdamHyper::new(0.1)).unwrap();
        assert!(s.step(&w, &col(&[1.0, 2.0])).is_err());
    }
}
