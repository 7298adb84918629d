//! JSON experiment configs.

use std::path::Path;

use normdescent::linalg::InverseRootBackend;
use normdescent::norms::{ModularNormSpec, NormSpec};
use normdescent::optim::{
    Accumulation, AdamHyper, LineSearchPolicy, OrthoBackend, ProdigyHyper, StepTiming,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Linear,
    TwoLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub d_in: usize,
    pub d_out: usize,
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_eta0() -> f64 {
    1e-6
}
fn default_shampoo_eps() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        epsilon: f64,
        #[serde(default)]
        bias_correction: bool,
    },
    Shampoo {
        lr: f64,
        #[serde(default = "default_shampoo_eps")]
        epsilon: f64,
        #[serde(default = "default_accumulation")]
        accumulation: Accumulation,
        #[serde(default)]
        backend: InverseRootBackend,
    },
    Prodigy {
        #[serde(default = "default_eta0")]
        eta0: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        epsilon: f64,
        #[serde(default)]
        timing: StepTiming,
    },
    SignDescent {
        lr: f64,
    },
    /// Fixed `lr`, or the closed-form step `tr Σ / λ` when `lambda` is given.
    SpectralDescent {
        #[serde(default)]
        lr: Option<f64>,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        backend: OrthoBackend,
    },
    /// Closed-form steepest step under a modular norm. `norms` holds one
    /// entry per layer or a single entry for all layers. `lambda` defaults
    /// to `d_in / d_out`.
    Steepest {
        #[serde(default)]
        lambda: Option<f64>,
        norms: Vec<NormSpec>,
        #[serde(default)]
        scales: Option<Vec<f64>>,
    },
    /// Sign descent whose step size follows a line-search policy.
    SignLineSearch {
        #[serde(default = "default_eta0")]
        eta0: f64,
        policy: LineSearchPolicy,
    },
}

fn default_accumulation() -> Accumulation {
    Accumulation::Sum
}

fn default_hidden() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub optimizer: OptimizerConfig,
    pub dataset: DatasetConfig,
    pub steps: usize,
    pub output_path: String,
}

/// A config file holds one experiment or a list of them.
#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<serde_json::Value>),
    One(serde_json::Value),
}

impl ExperimentConfig {
    pub fn layer_count(&self) -> usize {
        match self.task {
            Task::Linear => 1,
            Task::TwoLayer => 2,
        }
    }

    /// `d_in / d_out`, the sharpness matching the square-loss bound.
    pub fn matched_sharpness(&self) -> f64 {
        self.dataset.d_in as f64 / self.dataset.d_out as f64
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: String| Err(CliError::usage(format!("{field}: {msg}")));
        if self.steps == 0 {
            return bad("steps", "must be at least 1".into());
        }
        let d = &self.dataset;
        if d.d_in == 0 || d.d_out == 0 || d.n == 0 {
            return bad("dataset", "d_in, d_out and n must be positive".into());
        }
        if !(d.noise >= 0.0) || !d.noise.is_finite() {
            return bad("dataset.noise", format!("must be finite and >= 0, got {}", d.noise));
        }
        if self.task == Task::TwoLayer && self.hidden == 0 {
            return bad("hidden", "must be positive".into());
        }
        if self.output_path.trim().is_empty() {
            return bad("output_path", "must not be empty".into());
        }
        let check = |field: &str, r: normdescent::Result<()>| {
            r.map_err(|e| CliError::usage(format!("optimizer.{field}: {e}")))
        };
        match &self.optimizer {
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                bias_correction,
            } => check(
                "adam",
                AdamHyper {
                    lr: *lr,
                    beta1: *beta1,
                    beta2: *beta2,
                    epsilon: *epsilon,
                    bias_correction: *bias_correction,
                }
                .validate(),
            )?,
            OptimizerConfig::Prodigy {
                eta0,
                beta1,
                beta2,
                epsilon,
                timing,
            } => check(
                "prodigy",
                ProdigyHyper {
                    eta0: *eta0,
                    beta1: *beta1,
                    beta2: *beta2,
                    epsilon: *epsilon,
                    timing: *timing,
                }
                .validate(),
            )?,
            OptimizerConfig::Shampoo { lr, epsilon, accumulation, .. } => {
                positive("optimizer.lr", *lr)?;
                if !(*epsilon >= 0.0) || !epsilon.is_finite() {
                    return bad("optimizer.epsilon", format!("must be finite and >= 0, got {epsilon}"));
                }
                if let Accumulation::Ema { beta } = accumulation {
                    if !(0.0..1.0).contains(beta) {
                        return bad("optimizer.accumulation.beta", format!("must lie in [0, 1), got {beta}"));
                    }
                }
            }
            OptimizerConfig::SignDescent { lr } => positive("optimizer.lr", *lr)?,
            OptimizerConfig::SpectralDescent { lr, lambda, .. } => match (lr, lambda) {
                (Some(lr), None) => positive("optimizer.lr", *lr)?,
                (None, Some(l)) => positive("optimizer.lambda", *l)?,
                _ => return bad("optimizer", "spectral_descent takes exactly one of lr, lambda".into()),
            },
            OptimizerConfig::Steepest { lambda, .. } => {
                if let Some(l) = lambda {
                    positive("optimizer.lambda", *l)?;
                }
                self.modular_spec()?;
            }
            OptimizerConfig::SignLineSearch { eta0, .. } => positive("optimizer.eta0", *eta0)?,
        }
        Ok(())
    }

    /// The modular norm of a `steepest` optimizer, broadcast to all layers.
    pub fn modular_spec(&self) -> CliResult<ModularNormSpec> {
        let OptimizerConfig::Steepest { norms, scales, .. } = &self.optimizer else {
            return Err(CliError::usage("optimizer: not a steepest optimizer"));
        };
        let layers = self.layer_count();
        let norms: Vec<NormSpec> = match norms.len() {
            1 => vec![norms[0]; layers],
            n if n == layers => norms.clone(),
            n => {
                return Err(CliError::usage(format!(
                    "optimizer.norms: expected 1 or {layers} entries, got {n}"
                )))
            }
        };
        if let Some(n) = norms.iter().find(|n| n.is_vector_only()) {
            return Err(CliError::usage(format!(
                "optimizer.norms: {} applies only to vectors",
                n.label()
            )));
        }
        let scales = match scales {
            None => vec![1.0; layers],
            Some(s) if s.len() == layers => s.clone(),
            Some(s) => {
                return Err(CliError::usage(format!(
                    "optimizer.scales: expected {layers} entries, got {}",
                    s.len()
                )))
            }
        };
        ModularNormSpec::from_pairs(scales.into_iter().zip(norms))
            .map_err(|e| CliError::usage(format!("optimizer.scales: {e}")))
    }
}

fn positive(field: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{field}: must be finite and > 0, got {x}")))
    }
}

pub fn parse_configs(text: &str) -> CliResult<Vec<ExperimentConfig>> {
    let raw: OneOrMany =
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
    let values = match raw {
        OneOrMany::Many(v) => v,
        OneOrMany::One(v) => vec![v],
    };
    if values.is_empty() {
        return Err(CliError::usage("config: empty experiment list"));
    }
    let many = values.len() > 1;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let at = if many { format!("config[{i}]") } else { "config".into() };
            let cfg: ExperimentConfig =
                serde_json::from_value(v).map_err(|e| CliError::usage(format!("{at}: {e}")))?;
            cfg.validate()
                .map_err(|e| CliError::usage(format!("{at}: {e}")))?;
            Ok(cfg)
        })
        .collect()
}

pub fn load_configs(path: &Path) -> CliResult<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    parse_configs(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "task": "linear",
        "optimizer": {"name": "sign_descent", "lr": 0.01},
        "dataset": {"d_in": 4, "d_out": 2, "n": 8, "seed": 3},
        "steps": 5,
        "output_path": "out/run"
    }"#;

    #[test]
    fn parses_single_and_list() {
        assert_eq!(parse_configs(BASE).unwrap().len(), 1);
        assert_eq!(parse_configs(&format!("[{BASE}, {BASE}]")).unwrap().len(), 2);
    }

    #[test]
    fn field_level_errors() {
        let bad = BASE.replace("\"steps\": 5", "\"steps\": 0");
        assert!(parse_configs(&bad).unwrap_err().to_string().contains("steps"));
        let bad = BASE.replace("sign_descent", "sgd_magic");
        assert!(parse_configs(&bad).unwrap_err().to_string().contains("sgd_magic"));
        let bad = BASE.replace("\"lr\": 0.01", "\"lr\": -1");
        assert!(parse_configs(&bad).unwrap_err().to_string().contains("lr"));
        let bad = BASE.replace("\"n\": 8", "\"n\": 8, \"bogus\": 1");
        assert!(parse_configs(&bad).is_err());
    }

    #[test]
    fn steepest_norms_broadcast() {
        let cfg = BASE
            .replace("\"linear\"", "\"two_layer\"")
            .replace(
                r#"{"name": "sign_descent", "lr": 0.01}"#,
                r#"{"name": "steepest", "norms": [{"kind": "spectral"}], "scales": [1.0, 2.0]}"#,
            );
        let c = &parse_configs(&cfg).unwrap()[0];
        assert_eq!(c.modular_spec().unwrap().len(), 2);
        let vec_norm = cfg.replace(r#"{"kind": "spectral"}"#, r#"{"kind": "vector_rms"}"#);
        assert!(parse_configs(&vec_norm).is_err());
    }
}
