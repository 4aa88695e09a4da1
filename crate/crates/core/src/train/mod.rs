//! Training BP / BPBP / (BP)^k_r models against dense targets.
//!
//! The objective is the full-matrix squared error `(1/N^2) ||T - M||_F^2`
//! (optionally plus a permutation-entropy penalty), differentiated by hand
//! in [`engine`] and minimized with Adam. [`search`] runs a seeded
//! successive-halving random search over learning rate, initialization seed
//! and logit tying.

mod adam;
pub mod engine;
mod model;
mod search;

pub use adam::AdamState;
pub use engine::{
    finite_difference_gradient, gradient_check, loss_and_gradient, objective, Evaluation, GradCheck, Workspace,
};
pub use model::{BPModel, BPProductModel, InitOptions, ModelShape};
pub use search::{resolve_threads, search, trial_config, SearchConfig, SearchResult, TrialRecord};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::numeric::{frobenius_rmse, DenseMatrix, Field, Rng};
use crate::perm::HardPermutation;
use crate::zoo::{TransformKind, TransformSpec};
use crate::{Error, Result};

/// Default step cap: 20 000 up to `N = 64`, doubled per doubling of `N`.
pub fn default_max_steps(n: usize) -> usize {
    let mut steps = 20_000;
    let mut size = 64;
    while size < n {
        steps *= 2;
        size *= 2;
    }
    steps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub tie_logits: bool,
    pub field: Field,
    pub early_stop_rmse: f64,
    pub entropy_weight: f64,
    pub grad_clip: Option<f64>,
    /// Standard deviation of the initial permutation logits.
    pub logit_init_std: f64,
    /// Loss-trace sampling period in steps.
    pub trace_every: usize,
    /// Learning-rate multiplier for permutation logits.
    pub logit_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_steps: 20_000,
            seed: 0,
            tie_logits: false,
            field: Field::Complex,
            early_stop_rmse: 1e-4,
            entropy_weight: 0.0,
            grad_clip: None,
            logit_init_std: 1.0,
            trace_every: 100,
            logit_lr_scale: 10.0,
        }
    }
}

/// What to fit: the target matrix and the model family.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTask {
    pub target: DenseMatrix,
    pub shape: ModelShape,
    pub extra_permutation: bool,
    /// Apply the real part at the end. Set for real targets fitted over C.
    pub post_real_part: bool,
}

impl TrainTask {
    /// Defaults per transform: BPBP for convolution, BP otherwise; an extra
    /// input permutation for DCT and DST; a final real part for real targets
    /// when training over the complex field.
    pub fn for_spec(spec: &TransformSpec, field: Field) -> Result<Self> {
        let target = spec.generate()?;
        let shape = if spec.kind == TransformKind::Convolution { ModelShape::BPBP } else { ModelShape::BP };
        Ok(Self {
            target,
            shape,
            extra_permutation: matches!(spec.kind, TransformKind::Dct | TransformKind::Dst),
            post_real_part: spec.kind.is_real() && field == Field::Complex,
        })
    }

    pub fn with_shape(mut self, shape: ModelShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn size(&self) -> usize {
        self.target.rows()
    }

    pub fn init_options(&self, config: &TrainConfig) -> InitOptions {
        InitOptions {
            field: config.field,
            tie_logits: config.tie_logits,
            logit_std: config.logit_init_std,
            extra_permutation: self.extra_permutation,
            post_real_part: self.post_real_part,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Recomputed from the dense expansion of `model`.
    pub final_rmse: f64,
    pub steps_used: usize,
    /// Step at which the returned parameters were observed.
    pub best_step: usize,
    pub model: BPProductModel,
    pub hard_permutations: Vec<HardPermutation>,
    pub rounding_distance: f64,
    pub loss_trace: Vec<TracePoint>,
    pub wall_time_s: f64,
    pub diverged: bool,
    pub config: TrainConfig,
}

impl TrainResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("step,loss,rmse\n");
        for p in &self.loss_trace {
            s.push_str(&format!("{},{:e},{:e}\n", p.step, p.loss, p.rmse));
        }
        s
    }
}

/// Resumable Adam loop keeping the best parameters seen.
fn logit_indices(model: &BPProductModel) -> Vec<usize> {
    let layout = model.layout();
    let mut out = Vec::new();
    for (m, ml) in model.modules.iter().zip(&layout.modules) {
        out.extend(ml.logits..ml.logits + m.permutation.logit_count());
    }
    if let (Some(p), Some(off)) = (&model.extra_permutation, layout.extra_logits) {
        out.extend(off..off + p.logit_count());
    }
    out
}

#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    target: DenseMatrix,
    model: BPProductModel,
    theta: Vec<f64>,
    grad: Vec<f64>,
    adam: AdamState,
    ws: Workspace,
    step: usize,
    best_theta: Vec<f64>,
    best_rmse: f64,
    best_step: usize,
    trace: Vec<TracePoint>,
    diverged: bool,
    converged: bool,
    /// Per-parameter learning-rate multiplier; zero freezes a parameter.
    lr_scale: Vec<f64>,
    elapsed_s: f64,
}

impl Trainer {
    pub fn new(task: &TrainTask, config: TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(config.seed);
        let model = BPProductModel::init_random(task.size(), task.shape, &task.init_options(&config), &mut rng)?;
        Self::from_model(task.target.clone(), model, config)
    }

    pub fn from_model(target: DenseMatrix, model: BPProductModel, config: TrainConfig) -> Result<Self> {
        if target.rows() != model.size() || target.cols() != model.size() {
            return Err(Error::dims(model.size(), target.rows()));
        }
        if !(config.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", config.learning_rate)));
        }
        let theta = model.params_flat();
        let len = theta.len();
        let mut lr_scale = vec![1.0; len];
        for i in logit_indices(&model) {
            lr_scale[i] = config.logit_lr_scale;
        }
        Ok(Self {
            lr_scale,
            config,
            target,
            model,
            best_theta: theta.clone(),
            theta,
            grad: vec![0.0; len],
            adam: AdamState::new(len),
            ws: Workspace::new(),
            step: 0,
            best_rmse: f64::INFINITY,
            best_step: 0,
            trace: Vec::new(),
            diverged: false,
            converged: false,
            elapsed_s: 0.0,
        })
    }

    /// Only butterfly entries move from now on.
    pub fn freeze_permutations(mut self) -> Self {
        for i in logit_indices(&self.model) {
            self.lr_scale[i] = 0.0;
        }
        self
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn best_rmse(&self) -> f64 {
        self.best_rmse
    }

    /// Converged (early stop) or diverged.
    pub fn is_finished(&self) -> bool {
        self.converged || self.diverged
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Runs until `until` steps have been taken in total, or until the loop
    /// converges or diverges.
    pub fn run_until(&mut self, until: usize) -> Result<()> {
        let start = Instant::now();
        let until = until.min(self.config.max_steps);
        while !self.is_finished() {
            let eval = self.ws.evaluate(&self.model, &self.target, self.config.entropy_weight, Some(&mut self.grad))?;
            if !eval.loss.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
                self.diverged = true;
                break;
            }
            if eval.rmse < self.best_rmse {
                self.best_rmse = eval.rmse;
                self.best_theta.copy_from_slice(&self.theta);
                self.best_step = self.step;
            }
            let traced = self.trace.last().is_some_and(|p| p.step == self.step);
            if self.config.trace_every > 0 && self.step.is_multiple_of(self.config.trace_every) && !traced {
                self.trace.push(TracePoint { step: self.step, loss: eval.loss, rmse: eval.rmse });
            }
            if eval.rmse < self.config.early_stop_rmse {
                self.converged = true;
                break;
            }
            if self.step >= until {
                break;
            }
            if let Some(c) = self.config.grad_clip {
                let norm = self.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    self.grad.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            if self
                .adam
                .step_scaled(&mut self.theta, &self.grad, self.config.learning_rate, Some(&self.lr_scale))
                .is_err()
            {
                self.diverged = true;
                break;
            }
            self.model.set_params_flat(&self.theta)?;
            self.step += 1;
        }
        self.elapsed_s += start.elapsed().as_secs_f64();
        // Release activations between rungs.
        self.ws = Workspace::new();
        Ok(())
    }

    /// Best parameters seen, with the RMSE recomputed from the dense expansion.
    pub fn result(&self) -> Result<TrainResult> {
        let mut model = self.model.clone();
        model.set_params_flat(&self.best_theta)?;
        let final_rmse = frobenius_rmse(&self.target, &model.expand())?;
        let final_rmse = if final_rmse.is_finite() { final_rmse } else { f64::INFINITY };
        Ok(TrainResult {
            final_rmse,
            steps_used: self.step,
            best_step: self.best_step,
            hard_permutations: model.hard_permutations(),
            rounding_distance: model.rounding_distance(),
            model,
            loss_trace: self.trace.clone(),
            wall_time_s: self.elapsed_s,
            diverged: self.diverged,
            config: self.config.clone(),
        })
    }
}

/// One training run of `config.max_steps` steps at most.
pub fn train(task: &TrainTask, config: &TrainConfig) -> Result<TrainResult> {
    let mut t = Trainer::new(task, config.clone())?;
    t.run_until(config.max_steps)?;
    t.result()
}

/// Rounds every permutation and re-optimizes the butterfly entries only.
pub fn harden_and_refit(
    result: &TrainResult,
    target: &DenseMatrix,
    refit_steps: usize,
    learning_rate: f64,
) -> Result<TrainResult> {
    let hard = result.model.hardened();
    let config = TrainConfig {
        learning_rate,
        max_steps: refit_steps,
        early_stop_rmse: 0.0,
        entropy_weight: 0.0,
        ..result.config.clone()
    };
    let mut t = Trainer::from_model(target.clone(), hard, config)?.freeze_permutations();
    t.run_until(refit_steps)?;
    let mut out = t.result()?;
    out.rounding_distance = result.model.rounding_distance();
    Ok(out)
}

/// One instance of [`gradcheck_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub instance: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub shape: ModelShape,
    pub field: Field,
    pub tied: bool,
    pub entropy_weight: f64,
    pub params: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

/// Finite-difference checks on `instances` random models with `N <= max_n`.
/// Instance 0 is always the largest BPBP complex model; the rest draw size,
/// BP or BPBP, field, tying, extra permutation and entropy weight from `seed`.
pub fn gradcheck_suite(instances: usize, max_n: usize, step: f64, seed: u64) -> Result<Vec<GradcheckRow>> {
    let max_log = crate::checked_log2(max_n, 2)?;
    let mut rng = Rng::new(seed);
    (0..instances)
        .map(|i| {
            let (n, shape, field) = if i == 0 {
                (max_n, ModelShape::BPBP, Field::Complex)
            } else {
                let n = 1 << (1 + (rng.next_u64() % max_log as u64) as usize);
                let shape = if rng.bernoulli(0.5) { ModelShape::BPBP } else { ModelShape::BP };
                let field = if rng.bernoulli(0.5) { Field::Complex } else { Field::Real };
                (n, shape, field)
            };
            let tied = rng.bernoulli(0.5);
            let opts = InitOptions {
                field,
                tie_logits: tied,
                logit_std: 1.0,
                extra_permutation: n >= 4 && rng.bernoulli(0.5),
                post_real_part: field == Field::Complex && rng.bernoulli(0.5),
            };
            let model = BPProductModel::init_random(n, shape, &opts, &mut rng)?;
            let mut entries = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                entries.push(match field {
                    Field::Real => crate::C64::new(rng.gaussian(0.0, 1.0)?, 0.0),
                    Field::Complex => rng.complex_gaussian(0.5)?,
                });
            }
            let target = DenseMatrix::from_entries(n, n, entries)?;
            let entropy_weight = if i % 2 == 1 { 0.1 } else { 0.0 };
            let gc = gradient_check(&model, &target, entropy_weight, step)?;
            Ok(GradcheckRow {
                instance: i,
                n,
                shape,
                field,
                tied,
                entropy_weight,
                params: gc.params,
                max_abs_error: gc.max_abs_error,
                max_rel_error: gc.max_rel_error,
            })
        })
        .collect()
}
