//! Step-size rules driven by the escape signal `gᵀ(w₀ − w)`.
//!
//! A positive signal means the gradient still points back towards the
//! starting point, so the iterate has not yet travelled far enough.

use serde::{Deserialize, Serialize};

use super::check_positive;
use crate::error::Result;
use crate::layers::LayerList;

/// Lower bound on the cosine multiplier so a reversed gradient cannot zero
/// out the step size.
pub const COSINE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchPolicy {
    /// `η ← max(η, gᵀ(w₀ − w) / ‖g‖₁)`.
    ProdigyMax,
    /// Double while the escape signal is positive; freeze the first time it
    /// is not.
    Doubling,
    /// `η ← η · max(1 + cos θ, floor)` with θ the angle between `g` and
    /// `w₀ − w`.
    CosineRule,
}

/// Geometry of the current iterate relative to the start.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EscapeDiagnostics {
    pub escape_signal: f64,
    /// Undefined when either `g` or `w₀ − w` vanishes.
    pub cos_theta: Option<f64>,
    /// `‖g‖₂ / ‖g‖₁`; small for dense gradients.
    pub grad_norm_ratio: Option<f64>,
    pub displacement_rms: f64,
}

impl EscapeDiagnostics {
    pub fn compute(w0: &LayerList, w: &LayerList, g: &LayerList) -> Result<Self> {
        let disp = w0.sub(w)?;
        let escape_signal = g.inner(&disp)?;
        let (g2, g1, d2) = (g.l2_norm(), g.l1_norm(), disp.l2_norm());
        let cos_theta = (g2 > 0.0 && d2 > 0.0).then(|| (escape_signal / (g2 * d2)).clamp(-1.0, 1.0));
        Ok(Self {
            escape_signal,
            cos_theta,
            grad_norm_ratio: (g1 > 0.0).then(|| g2 / g1),
            displacement_rms: disp.rms_norm(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSearchState {
    pub eta: f64,
    pub policy: LineSearchPolicy,
    pub w0: LayerList,
    pub prev_w: Option<LayerList>,
    pub frozen: bool,
    pub last: Option<EscapeDiagnostics>,
}

impl LineSearchState {
    pub fn new(w0: &LayerList, eta0: f64, policy: LineSearchPolicy) -> Result<Self> {
        check_positive("eta0", eta0)?;
        Ok(Self {
            eta: eta0,
            policy,
            w0: w0.clone(),
            prev_w: None,
            frozen: false,
            last: None,
        })
    }

    /// Update the step size from the gradient at `w` and return it. At
    /// `w = w₀` (zero displacement) the step size is unchanged.
    pub fn update(&mut self, w: &LayerList, g: &LayerList) -> Result<f64> {
        w.check_same_shapes(g, "line_search_update")?;
        let diag = EscapeDiagnostics::compute(&self.w0, w, g)?;
        let moved = diag.displacement_rms > 0.0;
        match self.policy {
            LineSearchPolicy::ProdigyMax => {
                let l1 = g.l1_norm();
                if moved && l1 > 0.0 {
                    self.eta = self.eta.max(diag.escape_signal / l1);
                }
            }
            LineSearchPolicy::Doubling => {
                if moved && !self.frozen {
                    if diag.escape_signal > 0.0 {
                        self.eta *= 2.0;
                    } else {
                        self.frozen = true;
                    }
                }
            }
            LineSearchPolicy::CosineRule => {
                if let Some(c) = diag.cos_theta {
                    self.eta *= (1.0 + c).max(COSINE_FLOOR);
                }
            }
        }
        self.prev_w = Some(w.clone());
        self.last = Some(diag);
        Ok(self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn v(x: &[f64]) -> LayerList {
        LayerList::single(Matrix::column(x).unwrap())
    }

    #[test]
    fn zero_displacement_keeps_eta() {
        for policy in [
            LineSearchPolicy::ProdigyMax,
            LineSearchPolicy::Doubling,
            LineSearchPolicy::CosineRule,
        ] {
            let w0 = v(&[1.0, 2.0]);
            let mut s = LineSearchState::new(&w0, 0.1, policy).unwrap();
            assert_eq!(s.update(&w0, &v(&[1.0, -1.0])).unwrap(), 0.1);
            assert!(!s.frozen);
        }
    }

    #[test]
    fn prodigy_max_rule() {
        let w0 = v(&[0.0, 0.0]);
        let mut s = LineSearchState::new(&w0, 0.1, LineSearchPolicy::ProdigyMax).unwrap();
        // gᵀ(w₀ − w) = 1·1 + 1·1 = 2, ‖g‖₁ = 2.
        assert_eq!(s.update(&v(&[-1.0, -1.0]), &v(&[1.0, 1.0])).unwrap(), 1.0);
        // A negative signal never shrinks η.
        assert_eq!(s.update(&v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn doubling_freezes() {
        let w0 = v(&[0.0]);
        let mut s = LineSearchState::new(&w0, 1.0, LineSearchPolicy::Doubling).unwrap();
        assert_eq!(s.update(&v(&[-1.0]), &v(&[1.0])).unwrap(), 2.0);
        assert_eq!(s.update(&v(&[-2.0]), &v(&[1.0])).unwrap(), 4.0);
        assert_eq!(s.update(&v(&[-3.0]), &v(&[-1.0])).unwrap(), 4.0);
        assert!(s.frozen);
        assert_eq!(s.update(&v(&[-4.0]), &v(&[1.0])).unwrap(), 4.0);
    }

    #[test]
    fn cosine_rule() {
        let w0 = v(&[0.0, 0.0]);
        let mut s = LineSearchState::new(&w0, 1.0, LineSearchPolicy::CosineRule).unwrap();
        assert!((s.update(&v(&[-1.0, 0.0]), &v(&[1.0, 0.0])).unwrap() - 2.0).abs() < 1e-15);
        assert!((s.update(&v(&[-1.0, 0.0]), &v(&[0.0, 1.0])).unwrap() - 2.0).abs() < 1e-15);
        let eta = s.update(&v(&[-1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap();
        assert!((eta - 2.0 * COSINE_FLOOR).abs() < 1e-15);
    }

    #[test]
    fn diagnostics() {
        let d = EscapeDiagnostics::compute(&v(&[0.0, 0.0]), &v(&[-3.0, -4.0]), &v(&[3.0, 4.0]))
            .unwrap();
        assert_eq!(d.escape_signal, 25.0);
        assert!((d.cos_theta.unwrap() - 1.0).abs() < 1e-15);
        assert!((d.grad_norm_ratio.unwrap() - 5.0 / 7.0).abs() < 1e-15);
        assert!((d.displacement_rms - 5.0 / 2f64.sqrt()).abs() < 1e-14);
    }
}
