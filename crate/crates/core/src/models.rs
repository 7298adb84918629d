//! Square-loss models used by the experiments: a linear predictor and a
//! two-layer ReLU net, both scored by `(1/2n) Σ_i ‖y_i − f(x_i)‖² / d_out`.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::LayerList;
use crate::linalg::{reduced_svd, Matrix};
use crate::random::{gaussian_matrix, gaussian_vec, SeedTree};

/// Inputs must satisfy `‖x‖₂ = √d_in` to this tolerance.
pub const INPUT_NORM_TOL: f64 = 1e-10;

/// One sample per row of `inputs` (n × d_in) and `targets` (n × d_out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    inputs: Matrix,
    targets: Matrix,
}

#[derive(Deserialize)]
struct RawDataset {
    inputs: Matrix,
    targets: Matrix,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        Dataset::new(raw.inputs, raw.targets)
    }
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::validation(format!(
                "{} inputs but {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        let want = (inputs.cols() as f64).sqrt();
        for i in 0..inputs.rows() {
            let norm = inputs.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - want).abs() > INPUT_NORM_TOL * want.max(1.0) {
                return Err(Error::validation(format!(
                    "input {i} has norm {norm}, expected sqrt(d_in) = {want}"
                )));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    /// Always false: the matrix type has no empty shape.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn d_in(&self) -> usize {
        self.inputs.cols()
    }

    pub fn d_out(&self) -> usize {
        self.targets.cols()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// Header `x0..x{d_in-1},y0..y{d_out-1}`, one sample per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.d_in())
            .map(|j| format!("x{j}"))
            .chain((0..self.d_out()).map(|j| format!("y{j}")))
            .collect();
        wtr.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self
                .inputs
                .row(i)
                .iter()
                .chain(self.targets.row(i))
                .map(|x| format!("{x:.16e}"))
                .collect();
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::validation(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let d_in = header.iter().filter(|h| h.starts_with('x')).count();
        let d_out = header.iter().filter(|h| h.starts_with('y')).count();
        if d_in + d_out != header.len() || d_in == 0 || d_out == 0 {
            return Err(Error::validation("dataset header must be x0.., y0.. columns"));
        }
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::validation(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            xs.extend_from_slice(&vals[..d_in]);
            ys.extend_from_slice(&vals[d_in..]);
        }
        let n = xs.len() / d_in;
        if n == 0 {
            return Err(Error::validation("dataset has no samples"));
        }
        Dataset::new(Matrix::new(n, d_in, xs)?, Matrix::new(n, d_out, ys)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::validation(format!("csv: {e}"))
}

fn check_model(w_rows: usize, w_cols: usize, data: &Dataset, op: &'static str) -> Result<()> {
    if w_cols != data.d_in() || w_rows != data.d_out() {
        return Err(Error::Shape {
            op,
            left: (w_rows, w_cols),
            right: (data.d_out(), data.d_in()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// d_out × d_in.
    pub w: Matrix,
}

impl LinearModel {
    pub fn new(w: Matrix) -> Result<Self> {
        if !w.is_finite() {
            return Err(Error::validation("weights must be finite"));
        }
        Ok(Self { w })
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            w: Matrix::zeros(d_out, d_in),
        }
    }

    pub fn to_layers(&self) -> LayerList {
        LayerList::single(self.w.clone())
    }

    pub fn from_layers(layers: &LayerList) -> Result<Self> {
        if layers.len() != 1 {
            return Err(Error::validation("linear model has exactly one layer"));
        }
        Self::new(layers[0].clone())
    }
}

/// `W xᵢ − yᵢ` stacked as rows (n × d_out).
fn residuals(w: &Matrix, data: &Dataset) -> Result<Matrix> {
    data.inputs.matmul(&w.transpose())?.sub(&data.targets)
}

fn loss_from_residuals(r: &Matrix, n: usize, d_out: usize) -> f64 {
    let sq: f64 = r.as_slice().iter().map(|x| x * x).sum();
    sq / (2.0 * n as f64 * d_out as f64)
}

pub fn square_loss(model: &LinearModel, data: &Dataset) -> Result<f64> {
    check_model(model.w.rows(), model.w.cols(), data, "square_loss")?;
    let r = residuals(&model.w, data)?;
    Ok(loss_from_residuals(&r, data.len(), data.d_out()))
}

/// `(1/(n d_out)) Σ_i (W xᵢ − yᵢ) xᵢᵀ`.
pub fn square_loss_grad(model: &LinearModel, data: &Dataset) -> Result<Matrix> {
    check_model(model.w.rows(), model.w.cols(), data, "square_loss_grad")?;
    let r = residuals(&model.w, data)?;
    let c = 1.0 / (data.len() as f64 * data.d_out() as f64);
    Ok(r.transpose().matmul(&data.inputs)?.scale(c))
}

/// Upper bound minus loss at `W + Δ`, where the upper bound is
/// `L(W) + ⟨∇L, Δ⟩ + ½ (d_in/d_out) ‖Δ‖²_spec`. Non-negative up to rounding.
pub fn majorization_gap(model: &LinearModel, delta: &Matrix, data: &Dataset) -> Result<f64> {
    model.w.check_same_shape(delta, "majorization_gap")?;
    let loss = square_loss(model, data)?;
    let grad = square_loss_grad(model, data)?;
    let spec = if delta.is_zero() {
        0.0
    } else {
        reduced_svd(delta)?.sigma[0]
    };
    let ratio = data.d_in() as f64 / data.d_out() as f64;
    let bound = loss + grad.inner(delta)? + 0.5 * ratio * spec * spec;
    let moved = LinearModel {
        w: model.w.add(delta)?,
    };
    Ok(bound - square_loss(&moved, data)?)
}

/// `x ↦ W₂ relu(W₁ x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    /// h × d_in.
    pub w1: Matrix,
    /// d_out × h.
    pub w2: Matrix,
}

impl TwoLayerNet {
    pub fn new(w1: Matrix, w2: Matrix) -> Result<Self> {
        if w2.cols() != w1.rows() {
            return Err(Error::Shape {
                op: "two_layer_net",
                left: w1.shape(),
                right: w2.shape(),
            });
        }
        if !w1.is_finite() || !w2.is_finite() {
            return Err(Error::validation("weights must be finite"));
        }
        Ok(Self { w1, w2 })
    }

    /// Gaussian entries scaled by `1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, hidden: usize, d_out: usize) -> Self {
        Self {
            w1: gaussian_matrix(rng, hidden, d_in).scale(1.0 / (d_in as f64).sqrt()),
            w2: gaussian_matrix(rng, d_out, hidden).scale(1.0 / (hidden as f64).sqrt()),
        }
    }

    pub fn to_layers(&self) -> LayerList {
        LayerList::new(vec![self.w1.clone(), self.w2.clone()]).expect("two layers")
    }

    pub fn from_layers(layers: &LayerList) -> Result<Self> {
        if layers.len() != 2 {
            return Err(Error::validation("two-layer net has exactly two layers"));
        }
        Self::new(layers[0].clone(), layers[1].clone())
    }
}

/// Loss and exact gradients `[∂L/∂W₁, ∂L/∂W₂]`. ReLU uses subgradient 0 at 0.
pub fn two_layer_forward_backward(net: &TwoLayerNet, data: &Dataset) -> Result<(f64, LayerList)> {
    if net.w1.cols() != data.d_in() || net.w2.rows() != data.d_out() || net.w2.cols() != net.w1.rows()
    {
        return Err(Error::validation(format!(
            "net shapes {:?}, {:?} do not fit data with d_in={}, d_out={}",
            net.w1.shape(),
            net.w2.shape(),
            data.d_in(),
            data.d_out()
        )));
    }
    let pre = data.inputs.matmul(&net.w1.transpose())?; // n × h
    let act = pre.map(|x| x.max(0.0));
    let r = act.matmul(&net.w2.transpose())?.sub(&data.targets)?; // n × d_out
    let loss = loss_from_residuals(&r, data.len(), data.d_out());

    let dp = r.scale(1.0 / (data.len() as f64 * data.d_out() as f64));
    let g2 = dp.transpose().matmul(&act)?;
    let da = dp.matmul(&net.w2)?;
    let dh = da.zip_with(&pre, "relu_backward", |d, h| if h > 0.0 { d } else { 0.0 })?;
    let g1 = dh.transpose().matmul(&data.inputs)?;
    Ok((loss, LayerList::new(vec![g1, g2])?))
}

/// A dataset together with the linear map that generated its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// d_out × d_in, entries Gaussian with variance `1/d_in`.
    pub teacher: Matrix,
}

/// Inputs are Gaussian rescaled to `‖x‖₂ = √d_in`; targets are
/// `teacher · x + noise · ξ` with standard Gaussian `ξ`.
pub fn make_synthetic(
    d_in: usize,
    d_out: usize,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<SyntheticData> {
    if n == 0 || d_in == 0 || d_out == 0 {
        return Err(Error::validation("d_in, d_out and n must all be positive"));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::validation(format!("noise must be finite and >= 0, got {noise}")));
    }
    let tree = SeedTree::new(seed);
    let teacher = gaussian_matrix(&mut tree.stream("teacher"), d_out, d_in)
        .scale(1.0 / (d_in as f64).sqrt());

    let mut rng = tree.stream("inputs");
    let target_norm = (d_in as f64).sqrt();
    let mut xs = Vec::with_capacity(n * d_in);
    for _ in 0..n {
        loop {
            let x = gaussian_vec(&mut rng, d_in);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                xs.extend(x.iter().map(|v| v * (target_norm / norm)));
                break;
            }
        }
    }
    let inputs = Matrix::new(n, d_in, xs)?;
    let mut targets = inputs.matmul(&teacher.transpose())?;
    if noise > 0.0 {
        let xi = gaussian_matrix(&mut tree.stream("noise"), n, d_out);
        targets = targets.add(&xi.scale(noise))?;
    }
    Ok(SyntheticData {
        dataset: Dataset::new(inputs, targets)?,
        teacher,
    })
}

pub fn make_dataset(d_in: usize, d_out: usize, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    Ok(make_synthetic(d_in, d_out, n, noise, seed)?.dataset)
}
