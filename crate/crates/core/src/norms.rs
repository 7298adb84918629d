//! Vector and matrix norms, their duals, and linear maximization oracles.
//!
//! For every [`NormSpec`] the three quantities are tied together by
//! `⟨g, lmo_direction(g)⟩ = dual_norm(g)` with `‖lmo_direction(g)‖ = 1`.
//!
//! The induced operator norms use the column/row formulas
//! `‖M‖_{ℓ1→ℓp} = max_j ‖col_j M‖_p` and `‖M‖_{ℓp→ℓ∞} = max_i ‖row_i M‖_{p*}`
//! where `p* = p/(p−1)` is the conjugate exponent. Both are max-of-ℓp mixed
//! norms, so their duals are the matching sums of conjugate column (row)
//! norms and their oracles act column-by-column (row-by-row).

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::layers::LayerList;
use crate::linalg::{reduced_svd, Matrix, SvdFactors};
use crate::random::{gaussian_matrix, SeedTree};

/// An exponent `p ∈ [1, ∞]`. Infinity is stored as `f64::INFINITY`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::validation(format!("exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Exponent {
        if self.0 == 1.0 {
            Exponent::INFINITY
        } else if self.0.is_infinite() {
            Exponent::ONE
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Str(s) => return Err(de::Error::custom(format!("invalid exponent {s:?}"))),
        };
        Exponent::new(p).map_err(de::Error::custom)
    }
}

/// Which norm to measure, dualize and maximize against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    /// ℓp norm of a column vector.
    VectorLp { p: Exponent },
    /// `‖v‖₂ / √n` of a column vector.
    VectorRms,
    Frobenius,
    /// ℓ₂ → ℓ₂ operator norm, the largest singular value.
    Spectral,
    /// ℓp norm of the singular values.
    SchattenP { p: Exponent },
    /// `max_j ‖col_j‖_p`.
    InducedL1ToLp { p: Exponent },
    /// `max_i ‖row_i‖_{p/(p−1)}`.
    InducedLpToLinf { p: Exponent },
    /// RMS → RMS operator norm, `√(cols/rows) · σ_max`.
    RmsToRms,
    /// ℓ₁ → RMS operator norm, `max_j ‖col_j‖₂ / √rows`.
    L1ToRms,
}

impl NormSpec {
    pub fn lp(p: Exponent) -> Self {
        NormSpec::VectorLp { p }
    }

    pub fn linf() -> Self {
        NormSpec::VectorLp { p: Exponent::INFINITY }
    }

    /// ℓ₁ → ℓ∞ operator norm: the largest absolute entry.
    pub fn max_abs() -> Self {
        NormSpec::InducedLpToLinf { p: Exponent::ONE }
    }

    pub fn is_vector_only(&self) -> bool {
        matches!(self, NormSpec::VectorLp { .. } | NormSpec::VectorRms)
    }

    pub fn label(&self) -> String {
        match self {
            NormSpec::VectorLp { p } => format!("l{p}"),
            NormSpec::VectorRms => "rms".into(),
            NormSpec::Frobenius => "frobenius".into(),
            NormSpec::Spectral => "spectral".into(),
            NormSpec::SchattenP { p } => format!("schatten_{p}"),
            NormSpec::InducedL1ToLp { p } => format!("l1_to_l{p}"),
            NormSpec::InducedLpToLinf { p } => format!("l{p}_to_linf"),
            NormSpec::RmsToRms => "rms_to_rms".into(),
            NormSpec::L1ToRms => "l1_to_rms".into(),
        }
    }
}

/// Layer-wise scales and norms of `max_l s_l · ‖W_l‖_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModularEntry>", into = "Vec<ModularEntry>")]
pub struct ModularNormSpec {
    entries: Vec<ModularEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularEntry {
    pub scale: f64,
    pub norm: NormSpec,
}

impl ModularNormSpec {
    pub fn new(entries: Vec<ModularEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("modular norm needs at least one layer"));
        }
        for (l, e) in entries.iter().enumerate() {
            if !(e.scale > 0.0) || !e.scale.is_finite() {
                return Err(Error::validation(format!(
                    "layer {l}: scale must be finite and > 0, got {}",
                    e.scale
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, NormSpec)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(scale, norm)| ModularEntry { scale, norm })
                .collect(),
        )
    }

    /// Same norm with unit scale on every layer.
    pub fn uniform(norm: NormSpec, layers: usize) -> Result<Self> {
        Self::from_pairs(std::iter::repeat_n((1.0, norm), layers))
    }

    pub fn entries(&self) -> &[ModularEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.entries
                .iter()
                .map(|e| ModularEntry {
                    scale: e.scale * c,
                    norm: e.norm,
                })
                .collect(),
        )
    }

    pub fn check_len(&self, ws: &LayerList) -> Result<()> {
        if self.len() != ws.len() {
            return Err(Error::validation(format!(
                "modular norm has {} entries but the layer list has {} layers",
                self.len(),
                ws.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<ModularEntry>> for ModularNormSpec {
    type Error = Error;
    fn try_from(entries: Vec<ModularEntry>) -> Result<Self> {
        ModularNormSpec::new(entries)
    }
}

impl From<ModularNormSpec> for Vec<ModularEntry> {
    fn from(s: ModularNormSpec) -> Self {
        s.entries
    }
}

// ---------------------------------------------------------------------------
// Vector ℓp building blocks.

pub(crate) fn lp(x: &[f64], p: Exponent) -> f64 {
    let p = p.value();
    if p.is_infinite() {
        return x.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if p == 2.0 {
        return x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Unit-ℓp vector maximizing `⟨x, t⟩`; zero input maps to zero.
fn lp_oracle(x: &[f64], p: Exponent) -> Vec<f64> {
    if p.is_infinite() {
        return x.iter().map(|&v| sign(v)).collect();
    }
    let q = p.conjugate();
    let dual = lp(x, q);
    if dual == 0.0 {
        return vec![0.0; x.len()];
    }
    if p.value() == 1.0 {
        // First index of largest magnitude.
        let mut k = 0;
        for (i, v) in x.iter().enumerate() {
            if v.abs() > x[k].abs() {
                k = i;
            }
        }
        let mut t = vec![0.0; x.len()];
        t[k] = sign(x[k]);
        return t;
    }
    if p.value() == 2.0 {
        return x.iter().map(|v| v / dual).collect();
    }
    let e = q.value() - 1.0;
    x.iter()
        .map(|&v| sign(v) * (v.abs() / dual).powf(e))
        .collect()
}

fn require_vector(v: &Matrix, spec: &NormSpec) -> Result<()> {
    if !v.is_vector() {
        return Err(Error::validation(format!(
            "{} applies to column vectors, got a {}x{} matrix",
            spec.label(),
            v.rows(),
            v.cols()
        )));
    }
    Ok(())
}

fn columns(m: &Matrix) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..m.cols()).map(move |j| m.col(j))
}

fn rms_to_rms_factor(m: &Matrix) -> f64 {
    (m.cols() as f64 / m.rows() as f64).sqrt()
}

fn l1_to_rms_factor(m: &Matrix) -> f64 {
    1.0 / (m.rows() as f64).sqrt()
}

fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    match reduced_svd(m) {
        Ok(f) => Ok(f.sigma),
        Err(Error::ZeroMatrix) => Ok(vec![0.0]),
        Err(e) => Err(e),
    }
}

fn svd_nonzero(g: &Matrix) -> Result<SvdFactors> {
    reduced_svd(g)
}

// ---------------------------------------------------------------------------
// Public operations.

/// ℓp or RMS norm of a column vector.
pub fn vector_norm(v: &Matrix, spec: &NormSpec) -> Result<f64> {
    match spec {
        NormSpec::VectorLp { p } => {
            if !v.is_vector() {
                return Err(Error::Shape {
                    op: "vector_norm",
                    left: v.shape(),
                    right: (v.rows(), 1),
                });
            }
            Ok(lp(v.as_slice(), *p))
        }
        NormSpec::VectorRms => {
            if !v.is_vector() {
                return Err(Error::Shape {
                    op: "vector_norm",
                    left: v.shape(),
                    right: (v.rows(), 1),
                });
            }
            Ok(lp(v.as_slice(), Exponent::TWO) / (v.len() as f64).sqrt())
        }
        other => Err(Error::validation(format!(
            "{} is not a vector norm",
            other.label()
        ))),
    }
}

pub fn matrix_norm(m: &Matrix, spec: &NormSpec) -> Result<f64> {
    Ok(match *spec {
        NormSpec::VectorLp { .. } | NormSpec::VectorRms => {
            require_vector(m, spec)?;
            return vector_norm(m, spec);
        }
        NormSpec::Frobenius => m.frobenius_norm(),
        NormSpec::Spectral => singular_values(m)?[0],
        NormSpec::SchattenP { p } => lp(&singular_values(m)?, p),
        NormSpec::InducedL1ToLp { p } => columns(m).fold(0.0_f64, |acc, c| acc.max(lp(&c, p))),
        NormSpec::InducedLpToLinf { p } => {
            let q = p.conjugate();
            (0..m.rows()).fold(0.0, |acc, i| acc.max(lp(m.row(i), q)))
        }
        NormSpec::RmsToRms => rms_to_rms_factor(m) * singular_values(m)?[0],
        NormSpec::L1ToRms => {
            l1_to_rms_factor(m) * columns(m).fold(0.0_f64, |acc, c| acc.max(lp(&c, Exponent::TWO)))
        }
    })
}

/// `max_{‖t‖ = 1} ⟨g, t⟩`.
pub fn dual_norm(g: &Matrix, spec: &NormSpec) -> Result<f64> {
    Ok(match *spec {
        NormSpec::VectorLp { p } => {
            require_vector(g, spec)?;
            lp(g.as_slice(), p.conjugate())
        }
        NormSpec::VectorRms => {
            require_vector(g, spec)?;
            (g.len() as f64).sqrt() * lp(g.as_slice(), Exponent::TWO)
        }
        NormSpec::Frobenius => g.frobenius_norm(),
        NormSpec::Spectral => singular_values(g)?.iter().sum(),
        NormSpec::SchattenP { p } => lp(&singular_values(g)?, p.conjugate()),
        NormSpec::InducedL1ToLp { p } => {
            let q = p.conjugate();
            columns(g).map(|c| lp(&c, q)).sum()
        }
        // Entrywise ℓ₁ in flat order, so a single layer agrees bit for bit
        // with the ℓ∞ dual of its flattened vector.
        NormSpec::InducedLpToLinf { p } if p == Exponent::ONE => lp(g.as_slice(), p),
        NormSpec::InducedLpToLinf { p } => (0..g.rows()).map(|i| lp(g.row(i), p)).sum(),
        NormSpec::RmsToRms => singular_values(g)?.iter().sum::<f64>() / rms_to_rms_factor(g),
        NormSpec::L1ToRms => {
            columns(g).map(|c| lp(&c, Exponent::TWO)).sum::<f64>() / l1_to_rms_factor(g)
        }
    })
}

/// Unit-norm direction `t` maximizing `⟨g, t⟩`.
///
/// Zero entries of `g` get zero direction under sign-type oracles, and
/// rank-deficient spectral oracles return the rank-r polar factor.
pub fn lmo_direction(g: &Matrix, spec: &NormSpec) -> Result<Matrix> {
    if g.is_zero() {
        return Err(Error::validation("linear maximization oracle is undefined at g = 0"));
    }
    let (rows, cols) = g.shape();
    Ok(match *spec {
        NormSpec::VectorLp { p } => {
            require_vector(g, spec)?;
            Matrix::new(rows, 1, lp_oracle(g.as_slice(), p))?
        }
        NormSpec::VectorRms => {
            require_vector(g, spec)?;
            let scale = (g.len() as f64).sqrt() / lp(g.as_slice(), Exponent::TWO);
            g.scale(scale)
        }
        NormSpec::Frobenius => g.scale(1.0 / g.frobenius_norm()),
        NormSpec::Spectral => svd_nonzero(g)?.polar_factor(),
        NormSpec::SchattenP { p } => {
            let f = svd_nonzero(g)?;
            let weights = lp_oracle(&f.sigma, p);
            let uw = Matrix::from_fn(rows, f.rank(), |i, k| f.u[(i, k)] * weights[k]);
            uw.matmul(&f.v.transpose())?
        }
        NormSpec::InducedL1ToLp { p } => {
            let cols_t: Vec<Vec<f64>> = columns(g).map(|c| lp_oracle(&c, p)).collect();
            Matrix::from_fn(rows, cols, |i, j| cols_t[j][i])
        }
        NormSpec::InducedLpToLinf { p } => {
            let q = p.conjugate();
            let rows_t: Vec<Vec<f64>> = (0..rows).map(|i| lp_oracle(g.row(i), q)).collect();
            Matrix::from_fn(rows, cols, |i, j| rows_t[i][j])
        }
        NormSpec::RmsToRms => svd_nonzero(g)?
            .polar_factor()
            .scale(1.0 / rms_to_rms_factor(g)),
        NormSpec::L1ToRms => {
            let cols_t: Vec<Vec<f64>> = columns(g).map(|c| lp_oracle(&c, Exponent::TWO)).collect();
            let a = l1_to_rms_factor(g);
            Matrix::from_fn(rows, cols, |i, j| cols_t[j][i] / a)
        }
    })
}

/// `max_l ‖W_l‖_{ℓ1→ℓ∞}`, which equals the ℓ∞ norm of the flattened list.
pub fn max_of_max_norm(ws: &LayerList) -> f64 {
    ws.iter()
        .map(|w| matrix_norm(w, &NormSpec::max_abs()).expect("max-abs is defined for every matrix"))
        .fold(0.0, f64::max)
}

/// `max_l s_l · ‖W_l‖_l`.
pub fn modular_norm(ws: &LayerList, spec: &ModularNormSpec) -> Result<f64> {
    spec.check_len(ws)?;
    let mut out = 0.0_f64;
    for (w, e) in ws.iter().zip(spec.entries()) {
        out = out.max(e.scale * matrix_norm(w, &e.norm)?);
    }
    Ok(out)
}

/// Lower bound on the dual norm: the best `⟨g, t/‖t‖⟩` over Gaussian `t`.
pub fn brute_force_dual(g: &Matrix, spec: &NormSpec, samples: usize, seed: u64) -> Result<f64> {
    brute_force_dual_with_candidates(g, spec, samples, seed, &[])
}

/// As [`brute_force_dual`], additionally scoring the given candidates.
pub fn brute_force_dual_with_candidates(
    g: &Matrix,
    spec: &NormSpec,
    samples: usize,
    seed: u64,
    candidates: &[Matrix],
) -> Result<f64> {
    if samples == 0 && candidates.is_empty() {
        return Err(Error::validation("need at least one sample"));
    }
    let mut rng = SeedTree::new(seed).stream("brute_force_dual");
    let score = |t: &Matrix| -> Result<Option<f64>> {
        let n = matrix_norm(t, spec)?;
        if n > 0.0 {
            Ok(Some(g.inner(t)? / n))
        } else {
            Ok(None)
        }
    };
    let mut best = f64::NEG_INFINITY;
    for c in candidates {
        if let Some(s) = score(c)? {
            best = best.max(s);
        }
    }
    for _ in 0..samples {
        let t = gaussian_matrix(&mut rng, g.rows(), g.cols());
        if let Some(s) = score(&t)? {
            best = best.max(s);
        }
    }
    Ok(best)
}
