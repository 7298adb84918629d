//! `norm-table`: every implemented norm and dual of one matrix, plus the
//! steepest-descent updates of the reference correspondence at λ = 1.

use normdescent::norms::{dual_norm, matrix_norm, vector_norm};
use normdescent::steepest::{reference_table, Domain};
use normdescent::{Exponent, Matrix, NormSpec};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub name: &'static str,
    pub spec: NormSpec,
    pub value: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteepestRow {
    pub domain: Domain,
    pub norm: String,
    pub solution: &'static str,
    pub optimizer: &'static str,
    pub cousin: &'static str,
    /// Dual norm of the input, the step size at unit sharpness.
    pub step_size: f64,
    pub update: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormTable {
    pub rows: usize,
    pub cols: usize,
    pub norms: Vec<NormRow>,
    pub steepest: Vec<SteepestRow>,
}

fn named_matrix_norms() -> Vec<(&'static str, NormSpec)> {
    let p = |x: f64| Exponent::new(x).expect("valid exponent");
    vec![
        ("spectral", NormSpec::Spectral),
        ("frobenius", NormSpec::Frobenius),
        ("nuclear", NormSpec::SchattenP { p: Exponent::ONE }),
        ("max_abs", NormSpec::max_abs()),
        ("l1_to_l1", NormSpec::InducedL1ToLp { p: Exponent::ONE }),
        ("l1_to_l2", NormSpec::InducedL1ToLp { p: Exponent::TWO }),
        ("l2_to_linf", NormSpec::InducedLpToLinf { p: Exponent::TWO }),
        ("linf_to_linf", NormSpec::InducedLpToLinf { p: Exponent::INFINITY }),
        ("schatten_3", NormSpec::SchattenP { p: p(3.0) }),
        ("rms_to_rms", NormSpec::RmsToRms),
        ("l1_to_rms", NormSpec::L1ToRms),
    ]
}

fn named_vector_norms() -> Vec<(&'static str, NormSpec)> {
    vec![
        ("l1", NormSpec::lp(Exponent::ONE)),
        ("l2", NormSpec::lp(Exponent::TWO)),
        ("linf", NormSpec::linf()),
        ("rms", NormSpec::VectorRms),
    ]
}

pub fn norm_table(m: &Matrix) -> CliResult<NormTable> {
    let e = |err: normdescent::Error| CliError::Numerical(err.to_string());
    let mut norms = Vec::new();
    for (name, spec) in named_matrix_norms() {
        norms.push(NormRow {
            name,
            spec,
            value: matrix_norm(m, &spec).map_err(e)?,
            dual: dual_norm(m, &spec).map_err(e)?,
        });
    }
    if m.is_vector() {
        for (name, spec) in named_vector_norms() {
            norms.push(NormRow {
                name,
                spec,
                value: vector_norm(m, &spec).map_err(e)?,
                dual: dual_norm(m, &spec).map_err(e)?,
            });
        }
    }

    let mut steepest = Vec::new();
    if !m.is_zero() {
        for row in reference_table() {
            if row.domain == Domain::Vector && !m.is_vector() {
                continue;
            }
            steepest.push(SteepestRow {
                domain: row.domain,
                norm: row.norm.label(),
                solution: row.solution,
                optimizer: row.optimizer,
                cousin: row.cousin,
                step_size: dual_norm(m, &row.norm).map_err(e)?,
                update: row.closed_form(m, 1.0).map_err(e)?.to_rows(),
            });
        }
    }
    Ok(NormTable {
        rows: m.rows(),
        cols: m.cols(),
        norms,
        steepest,
    })
}

pub fn render_text(t: &NormTable) -> String {
    let mut out = format!("matrix {}x{}\n\n", t.rows, t.cols);
    out.push_str(&format!("{:<14} {:>24} {:>24}\n", "norm", "value", "dual"));
    for r in &t.norms {
        out.push_str(&format!("{:<14} {:>24.16e} {:>24.16e}\n", r.name, r.value, r.dual));
    }
    if !t.steepest.is_empty() {
        out.push_str("\nsteepest descent at sharpness 1\n");
        for s in &t.steepest {
            out.push_str(&format!(
                "{:<10} {:<38} step {:.16e}  ({}; cousin: {})\n",
                s.norm, s.solution, s.step_size, s.optimizer, s.cousin
            ));
        }
    }
    out
}
