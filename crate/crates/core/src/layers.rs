use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Ordered, nonempty list of weight (or gradient) matrices `W₁ … W_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Matrix>", into = "Vec<Matrix>")]
pub struct LayerList {
    layers: Vec<Matrix>,
}

impl LayerList {
    pub fn new(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("layer list must not be empty"));
        }
        Ok(Self { layers })
    }

    pub fn single(layer: Matrix) -> Self {
        Self {
            layers: vec![layer],
        }
    }

    pub fn zeros_like(other: &LayerList) -> Self {
        Self {
            layers: other
                .layers
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.layers
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Matrix> {
        self.layers.iter()
    }

    pub fn into_inner(self) -> Vec<Matrix> {
        self.layers
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(Matrix::shape).collect()
    }

    pub fn check_same_shapes(&self, other: &LayerList, op: &'static str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::validation(format!(
                "{op}: layer count mismatch ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            a.check_same_shape(b, op)?;
        }
        Ok(())
    }

    /// Concatenation of all layers' row-major entries.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Matrix::len).sum()
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> LayerList {
        LayerList {
            layers: self.layers.iter().map(f).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &LayerList,
        op: &'static str,
        f: impl Fn(&Matrix, &Matrix) -> Matrix,
    ) -> Result<LayerList> {
        self.check_same_shapes(other, op)?;
        Ok(LayerList {
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &LayerList) -> Result<LayerList> {
        self.zip_map(other, "add", |a, b| a.add(b).expect("checked"))
    }

    pub fn sub(&self, other: &LayerList) -> Result<LayerList> {
        self.zip_map(other, "sub", |a, b| a.sub(b).expect("checked"))
    }

    /// Sum of per-layer Frobenius inner products.
    pub fn inner(&self, other: &LayerList) -> Result<f64> {
        self.check_same_shapes(other, "inner")?;
        Ok(self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.inner(b).expect("checked"))
            .sum())
    }

    pub fn scale(&self, c: f64) -> LayerList {
        self.map(|m| m.scale(c))
    }

    /// ℓ₂ norm of the flattened list.
    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|m| m.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// ℓ₁ norm of the flattened list.
    pub fn l1_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice())
            .map(|x| x.abs())
            .sum()
    }

    /// RMS norm `‖w‖₂ / √n` of the flattened list.
    pub fn rms_norm(&self) -> f64 {
        self.l2_norm() / (self.num_params() as f64).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }
}

impl TryFrom<Vec<Matrix>> for LayerList {
    type Error = Error;
    fn try_from(layers: Vec<Matrix>) -> Result<Self> {
        LayerList::new(layers)
    }
}

impl From<LayerList> for Vec<Matrix> {
    fn from(l: LayerList) -> Self {
        l.layers
    }
}

impl<'a> IntoIterator for &'a LayerList {
    type Item = &'a Matrix;
    type IntoIter = std::slice::Iter<'a, Matrix>;
    fn into_iter(self) -> Self::IntoIter {
        self.layers.iter()
    }
}

impl std::ops::Index<usize> for LayerList {
    type Output = Matrix;
    fn index(&self, i: usize) -> &Matrix {
        &self.layers[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty() {
        assert!(LayerList::new(vec![]).is_err());
        assert!(serde_json::from_str::<LayerList>("[]").is_err());
    }

    #[test]
    fn flatten_order() {
        let l = LayerList::new(vec![
            Matrix::from_rows(&[[1.0, -2.0]]).unwrap(),
            Matrix::column(&[3.0, 0.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(l.flatten(), vec![1.0, -2.0, 3.0, 0.0]);
        assert_eq!(l.l1_norm(), 6.0);
        assert_eq!(l.num_params(), 4);
    }

    #[test]
    fn shape_checks() {
        let a = LayerList::single(Matrix::zeros(2, 2));
        let b = LayerList::single(Matrix::zeros(2, 3));
        assert!(a.add(&b).is_err());
        let c = LayerList::new(vec![Matrix::zeros(2, 2), Matrix::zeros(1, 1)]).unwrap();
        assert!(a.sub(&c).is_err());
    }
}
