use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainResult, TrainTask, Trainer};
use crate::numeric::{splitmix64, Rng};
use crate::{Error, Result};

/// Worker count: `BF_THREADS` if set and valid, else `requested`, else 1.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    std::env::var("BF_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .or(requested.filter(|&t| t > 0))
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Number of sampled trials (at least 4).
    pub budget: usize,
    pub master_seed: u64,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Settings shared by every trial; `learning_rate`, `seed` and
    /// `tie_logits` are overwritten per trial.
    pub base: TrainConfig,
    /// Stop promoting survivors once some trial has met the early-stop RMSE.
    pub stop_on_success: bool,
    pub threads: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 16,
            master_seed: 0,
            lr_min: 1e-4,
            lr_max: 0.5,
            base: TrainConfig { entropy_weight: 1e-3, ..Default::default() },
            stop_on_success: true,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub tie_logits: bool,
    /// Best RMSE after the first rung.
    pub rung0_rmse: f64,
    pub promoted: bool,
    pub best_rmse: f64,
    pub steps: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: TrainResult,
    pub best_index: usize,
    pub trials: Vec<TrialRecord>,
    pub all_diverged: bool,
}

impl SearchResult {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("trial,seed,learning_rate,tie_logits,rung0_rmse,promoted,best_rmse,steps,diverged\n");
        for t in &self.trials {
            s.push_str(&format!(
                "{},{},{:e},{},{:e},{},{:e},{},{}\n",
                t.index,
                t.seed,
                t.learning_rate,
                t.tie_logits,
                t.rung0_rmse,
                t.promoted,
                t.best_rmse,
                t.steps,
                t.diverged
            ));
        }
        s
    }
}

/// Hyperparameters of trial `index`, derived only from `(master_seed, index)`.
pub fn trial_config(cfg: &SearchConfig, index: usize) -> TrainConfig {
    let mut rng = Rng::new(splitmix64(splitmix64(cfg.master_seed) ^ index as u64));
    let (lo, hi) = (cfg.lr_min.ln(), cfg.lr_max.ln());
    let learning_rate = rng.uniform_range(lo, hi).exp();
    let tie_logits = rng.bernoulli(0.5);
    let seed = rng.next_u64();
    TrainConfig { learning_rate, seed, tie_logits, ..cfg.base.clone() }
}

fn rank_key(t: &Trainer) -> f64 {
    if t.diverged() || !t.best_rmse().is_finite() {
        f64::INFINITY
    } else {
        t.best_rmse()
    }
}

/// Successive halving: every trial runs a quarter of `max_steps`, the best
/// quarter (by RMSE, ties by index) continues to `max_steps`.
pub fn search(task: &TrainTask, cfg: &SearchConfig) -> Result<SearchResult> {
    if cfg.budget < 4 {
        return Err(Error::Config(format!("search budget must be at least 4, got {}", cfg.budget)));
    }
    if !(cfg.lr_min > 0.0 && cfg.lr_min <= cfg.lr_max) {
        return Err(Error::Config("learning-rate range must satisfy 0 < lr_min <= lr_max".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let max_steps = cfg.base.max_steps;
    let rung0 = (max_steps / 4).max(1);

    let configs: Vec<TrainConfig> = (0..cfg.budget).map(|i| trial_config(cfg, i)).collect();
    let mut trainers: Vec<Trainer> = configs.iter().map(|c| Trainer::new(task, c.clone())).collect::<Result<_>>()?;

    pool.install(|| trainers.par_iter_mut().try_for_each(|t| t.run_until(rung0)))?;
    let rung0_rmse: Vec<f64> = trainers.iter().map(rank_key).collect();

    let mut order: Vec<usize> = (0..cfg.budget).collect();
    order.sort_by(|&a, &b| rung0_rmse[a].total_cmp(&rung0_rmse[b]).then(a.cmp(&b)));
    let keep = (cfg.budget / 4).max(1);
    let promoted: Vec<usize> = order[..keep].to_vec();

    let success = rung0_rmse.iter().any(|&r| r < cfg.base.early_stop_rmse);
    if !(cfg.stop_on_success && success) {
        pool.install(|| {
            trainers
                .par_iter_mut()
                .enumerate()
                .filter(|(i, _)| promoted.contains(i))
                .try_for_each(|(_, t)| t.run_until(max_steps))
        })?;
    }

    let finals: Vec<f64> = trainers.iter().map(rank_key).collect();
    let best_index =
        (0..cfg.budget).min_by(|&a, &b| finals[a].total_cmp(&finals[b]).then(a.cmp(&b))).expect("budget >= 4");
    let trials = (0..cfg.budget)
        .map(|i| TrialRecord {
            index: i,
            seed: configs[i].seed,
            learning_rate: configs[i].learning_rate,
            tie_logits: configs[i].tie_logits,
            rung0_rmse: rung0_rmse[i],
            promoted: promoted.contains(&i),
            best_rmse: finals[i],
            steps: trainers[i].step(),
            diverged: trainers[i].diverged(),
        })
        .collect::<Vec<_>>();
    let all_diverged = trials.iter().all(|t| t.diverged);
    Ok(SearchResult { best: trainers[best_index].result()?, best_index, trials, all_diverged })
}
