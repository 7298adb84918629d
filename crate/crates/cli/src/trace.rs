//! Per-iteration convergence of the Newton-Schulz orthogonalization.

use normdescent::linalg::{newton_schulz_iterates, orthogonalize_via_svd, reduced_svd, Matrix, PolynomialSpec};
use normdescent::Normalization;

use crate::error::{CliError, CliResult};
use crate::io::fmt_float;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub frob_error: f64,
    /// Smallest nonzero singular value of the iterate.
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn build_spec(
    coefficients: Option<Vec<f64>>,
    iterations: usize,
    normalization: Normalization,
) -> CliResult<PolynomialSpec> {
    let coefficients = coefficients.unwrap_or_else(|| PolynomialSpec::default().coefficients().to_vec());
    PolynomialSpec::new(coefficients, iterations, normalization)
        .map_err(|e| CliError::usage(format!("polynomial: {e}")))
}

pub fn trace(g: &Matrix, spec: &PolynomialSpec) -> CliResult<Vec<TraceRow>> {
    if g.is_zero() {
        return Err(CliError::usage("input matrix is zero; nothing to orthogonalize"));
    }
    let numerical = |e: normdescent::Error| CliError::Numerical(e.to_string());
    let target = orthogonalize_via_svd(g).map_err(numerical)?;
    let iterates = newton_schulz_iterates(g, spec).map_err(|e| CliError::usage(e.to_string()))?;
    iterates
        .iter()
        .enumerate()
        .map(|(iteration, x)| {
            let f = reduced_svd(x).map_err(numerical)?;
            Ok(TraceRow {
                iteration,
                frob_error: x.sub(&target).map_err(numerical)?.frobenius_norm(),
                sigma_min: f.sigma.last().copied().unwrap_or(0.0),
                sigma_max: f.sigma.first().copied().unwrap_or(0.0),
            })
        })
        .collect()
}

pub fn csv_text(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,frob_error,sigma_min,sigma_max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.iteration,
            fmt_float(r.frob_error),
            fmt_float(r.sigma_min),
            fmt_float(r.sigma_max)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use normdescent::random::{matrix_with_condition, random_semi_orthogonal};
    use normdescent::SeedTree;

    #[test]
    fn full_rank_input_converges() {
        let mut r = SeedTree::new(5).stream("trace");
        let g = matrix_with_condition(&mut r, 6, 4, 50.0);
        let rows = trace(&g, &PolynomialSpec::default()).unwrap();
        assert_eq!(rows.len(), 31);
        assert!(rows.last().unwrap().frob_error <= 1e-6);
        // Once converging, the error keeps shrinking.
        let tail: Vec<f64> = rows.iter().skip(12).map(|r| r.frob_error).collect();
        assert!(tail.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-14));
    }

    #[test]
    fn semi_orthogonal_input_starts_converged() {
        let mut r = SeedTree::new(6).stream("trace");
        let q = random_semi_orthogonal(&mut r, 5, 3);
        let rows = trace(&q, &PolynomialSpec::cubic(3)).unwrap();
        assert!(rows[0].frob_error <= 1e-12);
    }

    #[test]
    fn zero_input_is_a_usage_error() {
        let err = trace(&Matrix::zeros(2, 3), &PolynomialSpec::default()).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
        assert!(build_spec(Some(vec![3.0, -1.0]), 5, Normalization::Spectral).is_err());
    }
}
