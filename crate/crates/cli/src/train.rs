//! Seeded training runs with periodic checkpoints.

use std::path::{Path, PathBuf};

use normdescent::models::{make_dataset, square_loss, square_loss_grad, two_layer_forward_backward};
use normdescent::norms::{dual_norm, ModularNormSpec, NormSpec};
use normdescent::optim::{
    sign_descent_step, AdamHyper, AdamState, EscapeDiagnostics, LineSearchState, ModularSteepest,
    Optimizer, ProdigyHyper, ProdigyState, ShampooState, SignDescent, SpectralDescent,
};
use normdescent::{Dataset, LayerList, LinearModel, SeedTree, TwoLayerNet};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OptimizerConfig, Task};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_float, write_atomic};

pub const CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub step: usize,
    pub loss: f64,
    pub eta: f64,
    pub duals: Vec<f64>,
    pub cos_theta: Option<f64>,
    pub displacement_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub status: RunStatus,
    /// Norm under which each `duals` entry is measured, per layer.
    pub dual_norms: Vec<String>,
    pub rows: Vec<RunRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { step: usize, reason: String },
}

/// Sign descent driven by a line-search step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignLineSearch {
    pub search: LineSearchState,
    pub last_eta: f64,
}

impl Optimizer for SignLineSearch {
    fn step(&mut self, w: &LayerList, g: &LayerList) -> normdescent::Result<LayerList> {
        self.last_eta = self.search.update(w, g)?;
        sign_descent_step(w, g, self.last_eta)
    }

    fn applied_step_size(&self) -> f64 {
        self.last_eta
    }
}

/// Serializable optimizer state for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerState {
    Adam(AdamState),
    Shampoo(ShampooState),
    Prodigy(ProdigyState),
    SignDescent(SignDescent),
    SpectralDescent(SpectralDescent),
    Steepest(ModularSteepest),
    SignLineSearch(SignLineSearch),
}

impl OptimizerState {
    pub fn build(cfg: &ExperimentConfig, w0: &LayerList) -> CliResult<Self> {
        let e = |err: normdescent::Error| CliError::usage(format!("optimizer: {err}"));
        Ok(match &cfg.optimizer {
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                bias_correction,
            } => OptimizerState::Adam(
                AdamState::new(
                    w0,
                    AdamHyper {
                        lr: *lr,
                        beta1: *beta1,
                        beta2: *beta2,
                        epsilon: *epsilon,
                        bias_correction: *bias_correction,
                    },
                )
                .map_err(e)?,
            ),
            OptimizerConfig::Shampoo {
                lr,
                epsilon,
                accumulation,
                backend,
            } => OptimizerState::Shampoo(
                ShampooState::new(w0, *lr, *epsilon, *accumulation)
                    .map_err(e)?
                    .with_backend(*backend),
            ),
            OptimizerConfig::Prodigy {
                eta0,
                beta1,
                beta2,
                epsilon,
                timing,
            } => OptimizerState::Prodigy(
                ProdigyState::new(
                    w0,
                    ProdigyHyper {
                        eta0: *eta0,
                        beta1: *beta1,
                        beta2: *beta2,
                        epsilon: *epsilon,
                        timing: *timing,
                    },
                )
                .map_err(e)?,
            ),
            OptimizerConfig::SignDescent { lr } => {
                OptimizerState::SignDescent(SignDescent::new(*lr).map_err(e)?)
            }
            OptimizerConfig::SpectralDescent {
                lr: Some(lr),
                backend,
                ..
            } => OptimizerState::SpectralDescent(SpectralDescent::new(*lr, backend.clone()).map_err(e)?),
            OptimizerConfig::SpectralDescent { lambda, .. } => {
                let lambda = lambda.unwrap_or_else(|| cfg.matched_sharpness());
                let spec = ModularNormSpec::uniform(NormSpec::Spectral, cfg.layer_count()).map_err(e)?;
                OptimizerState::Steepest(ModularSteepest::new(spec, lambda).map_err(e)?)
            }
            OptimizerConfig::Steepest { lambda, .. } => {
                let lambda = lambda.unwrap_or_else(|| cfg.matched_sharpness());
                OptimizerState::Steepest(ModularSteepest::new(cfg.modular_spec()?, lambda).map_err(e)?)
            }
            OptimizerConfig::SignLineSearch { eta0, policy } => OptimizerState::SignLineSearch(SignLineSearch {
                search: LineSearchState::new(w0, *eta0, *policy).map_err(e)?,
                last_eta: 0.0,
            }),
        })
    }

    pub fn as_optimizer(&mut self) -> &mut dyn Optimizer {
        match self {
            OptimizerState::Adam(s) => s,
            OptimizerState::Shampoo(s) => s,
            OptimizerState::Prodigy(s) => s,
            OptimizerState::SignDescent(s) => s,
            OptimizerState::SpectralDescent(s) => s,
            OptimizerState::Steepest(s) => s,
            OptimizerState::SignLineSearch(s) => s,
        }
    }

    /// Per-layer norms whose duals go in the run record: the optimizer's own
    /// geometry (entrywise ℓ₁ for sign-type methods, nuclear for spectral).
    pub fn dual_norms(&self, layers: usize) -> Vec<NormSpec> {
        match self {
            OptimizerState::Steepest(s) => s.spec.entries().iter().map(|e| e.norm).collect(),
            OptimizerState::Shampoo(_) | OptimizerState::SpectralDescent(_) => {
                vec![NormSpec::Spectral; layers]
            }
            _ => vec![NormSpec::max_abs(); layers],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub next_step: usize,
    pub w0: LayerList,
    pub weights: LayerList,
    pub optimizer: OptimizerState,
    pub rows: Vec<RunRow>,
}

pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub checkpoint: PathBuf,
}

impl OutputPaths {
    pub fn new(base: &str) -> Self {
        Self {
            csv: PathBuf::from(format!("{base}.csv")),
            json: PathBuf::from(format!("{base}.json")),
            checkpoint: PathBuf::from(format!("{base}.checkpoint.json")),
        }
    }
}

struct Problem {
    task: Task,
    data: Dataset,
}

impl Problem {
    fn loss_and_grad(&self, w: &LayerList) -> normdescent::Result<(f64, LayerList)> {
        match self.task {
            Task::Linear => {
                let m = LinearModel::from_layers(w)?;
                Ok((square_loss(&m, &self.data)?, LayerList::single(square_loss_grad(&m, &self.data)?)))
            }
            Task::TwoLayer => two_layer_forward_backward(&TwoLayerNet::from_layers(w)?, &self.data),
        }
    }
}

fn initial_weights(cfg: &ExperimentConfig) -> LayerList {
    let d = &cfg.dataset;
    match cfg.task {
        Task::Linear => LinearModel::zeros(d.d_in, d.d_out).to_layers(),
        Task::TwoLayer => {
            let mut rng = SeedTree::new(d.seed).stream("init");
            TwoLayerNet::init(&mut rng, d.d_in, cfg.hidden, d.d_out).to_layers()
        }
    }
}

/// Loads a checkpoint only if it was written by the same config.
fn try_resume(path: &Path, cfg: &ExperimentConfig) -> Option<Checkpoint> {
    let text = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str::<Checkpoint>(&text) {
        Ok(ck) if ck.config == *cfg && ck.next_step <= cfg.steps => Some(ck),
        Ok(_) => {
            eprintln!("note: ignoring checkpoint {} written by a different config", path.display());
            None
        }
        Err(e) => {
            eprintln!("note: ignoring unreadable checkpoint {}: {e}", path.display());
            None
        }
    }
}

pub fn csv_text(record: &RunRecord) -> String {
    let layers = record.dual_norms.len();
    let mut out = String::from("step,loss,eta");
    for l in 0..layers {
        out.push_str(&format!(",dual_{l}"));
    }
    out.push_str(",cos_theta,displacement_rms\n");
    for r in &record.rows {
        out.push_str(&r.step.to_string());
        for v in [r.loss, r.eta].iter().chain(&r.duals) {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push(',');
        out.push_str(&fmt_float(r.cos_theta.unwrap_or(0.0)));
        out.push(',');
        out.push_str(&fmt_float(r.displacement_rms));
        out.push('\n');
    }
    out
}

fn write_outputs(paths: &OutputPaths, record: &RunRecord) -> CliResult<()> {
    write_atomic(&paths.csv, csv_text(record).as_bytes())?;
    let json = serde_json::to_string_pretty(record).expect("records serialize");
    write_atomic(&paths.json, json.as_bytes())
}

fn write_checkpoint(path: &Path, ck: &Checkpoint) -> CliResult<()> {
    let json = serde_json::to_string(ck).expect("checkpoints serialize");
    write_atomic(path, json.as_bytes())
}

/// Runs one experiment to completion, writing CSV/JSON records and
/// checkpoints. A numerical abort still writes the partial record.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunRecord> {
    cfg.validate()?;
    let d = &cfg.dataset;
    let data = make_dataset(d.d_in, d.d_out, d.n, d.noise, d.seed)
        .map_err(|e| CliError::usage(format!("dataset: {e}")))?;
    let problem = Problem { task: cfg.task, data };
    let paths = OutputPaths::new(&cfg.output_path);
    if let Some(parent) = paths.csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }

    let (w0, mut w, mut opt, mut rows, start) = match try_resume(&paths.checkpoint, cfg) {
        Some(ck) => {
            eprintln!("{}: resuming at step {}", cfg.output_path, ck.next_step);
            (ck.w0, ck.weights, ck.optimizer, ck.rows, ck.next_step)
        }
        None => {
            let w0 = initial_weights(cfg);
            let opt = OptimizerState::build(cfg, &w0)?;
            (w0.clone(), w0, opt, Vec::with_capacity(cfg.steps), 0)
        }
    };
    let dual_specs = opt.dual_norms(w.len());
    let mut status = RunStatus::Completed;

    for step in start..cfg.steps {
        let outcome = (|| -> Result<(RunRow, LayerList), String> {
            let (loss, g) = problem.loss_and_grad(&w).map_err(|e| e.to_string())?;
            if !loss.is_finite() || !g.is_finite() {
                return Err(format!("non-finite loss {loss} at step {step}"));
            }
            let diag = EscapeDiagnostics::compute(&w0, &w, &g).map_err(|e| e.to_string())?;
            let duals = g
                .iter()
                .zip(&dual_specs)
                .map(|(gl, spec)| dual_norm(gl, spec))
                .collect::<normdescent::Result<Vec<f64>>>()
                .map_err(|e| e.to_string())?;
            let next = opt.as_optimizer().step(&w, &g).map_err(|e| format!("optimizer: {e}"))?;
            if !next.is_finite() {
                return Err(format!("non-finite weights after step {step}"));
            }
            let row = RunRow {
                step,
                loss,
                eta: opt.as_optimizer().applied_step_size(),
                duals,
                cos_theta: diag.cos_theta,
                displacement_rms: diag.displacement_rms,
            };
            Ok((row, next))
        })();
        match outcome {
            Ok((row, next)) => {
                rows.push(row);
                w = next;
            }
            Err(reason) => {
                status = RunStatus::Aborted { step, reason };
                break;
            }
        }
        if (step + 1) % CHECKPOINT_EVERY == 0 {
            write_checkpoint(
                &paths.checkpoint,
                &Checkpoint {
                    config: cfg.clone(),
                    next_step: step + 1,
                    w0: w0.clone(),
                    weights: w.clone(),
                    optimizer: opt.clone(),
                    rows: rows.clone(),
                },
            )?;
        }
    }

    let record = RunRecord {
        config: cfg.clone(),
        status,
        dual_norms: dual_specs.iter().map(NormSpec::label).collect(),
        rows,
    };
    write_outputs(&paths, &record)?;
    Ok(record)
}

pub fn record_error(record: &RunRecord) -> Option<CliError> {
    match &record.status {
        RunStatus::Completed => None,
        RunStatus::Aborted { reason, .. } => Some(CliError::Numerical(format!(
            "{}: {reason}",
            record.config.output_path
        ))),
    }
}
