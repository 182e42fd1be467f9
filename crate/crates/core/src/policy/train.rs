//! REINFORCE with ε-greedy exploration.
//!
//! Each batch is rolled out from a snapshot of the parameters taken at the
//! start of the batch. Every episode then contributes one Adam step, applied
//! in episode order, on `-(R_i - b) Σ_k ∇ ln π(a_k | s_k)` where `R_i` is the
//! negated episode cost and `b` is zero unless the mean-reward baseline is
//! enabled.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::Adam;
use super::mlp::{Activations, Architecture, PolicyParams};
use crate::cdm::{EventSeries, NoiseModel};
use crate::seed;
use crate::simenv::{Action, Env, EnvError, EpisodeConfig, MdpState, Source};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training diverged at batch {batch}")]
    DivergedTraining { batch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("every episode of batch {batch} was aborted: {last}")]
    AllEpisodesAborted { batch: usize, last: EnvError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Moving-average window, batches.
    pub window: usize,
    /// Relative improvement below which the average counts as converged.
    pub tolerance: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { window: 200, tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_batch: usize,
    pub eps_max: f64,
    pub eps_min: f64,
    /// Per-batch decay λ of ε_i = max(ε_min, ε_max λ^i).
    pub eps_decay: f64,
    pub learning_rate: f64,
    /// Derived by callers from their root seed; not part of the file form.
    #[serde(skip)]
    pub seed: u64,
    pub architecture: Architecture,
    /// Subtract the batch-mean reward from every episode return.
    pub baseline: bool,
    pub convergence: ConvergenceConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 4000,
            episodes_per_batch: 200,
            eps_max: 0.1,
            eps_min: 0.01,
            eps_decay: 0.999,
            learning_rate: 1e-4,
            seed: 0,
            architecture: Architecture::default(),
            baseline: false,
            convergence: ConvergenceConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.iterations == 0 || self.episodes_per_batch == 0 {
            return bad("iterations and episodes_per_batch must be positive");
        }
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps_max && self.eps_max <= 1.0) {
            return bad("need 0 < eps_min <= eps_max <= 1");
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return bad("eps_decay must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.architecture.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        if self.convergence.window == 0 || !(self.convergence.tolerance > 0.0) {
            return bad("convergence window and tolerance must be positive");
        }
        Ok(())
    }

    /// ε of batch `i`.
    pub fn epsilon(&self, i: usize) -> f64 {
        let e = self.eps_max * self.eps_decay.powi(i.min(i32::MAX as usize) as i32);
        e.max(self.eps_min)
    }
}

/// Episode source of a training run.
#[derive(Debug, Clone)]
pub enum TrainSource {
    Synthetic(NoiseModel),
    /// Recorded series drawn uniformly at random per episode.
    Historical(Vec<EventSeries>),
}

impl TrainSource {
    fn pick<'a, R: Rng + ?Sized>(&'a self, rng: &mut R) -> Result<Source<'a>, EnvError> {
        match self {
            TrainSource::Synthetic(n) => Ok(Source::Synthetic(n)),
            TrainSource::Historical(v) if v.is_empty() => Err(EnvError::ExhaustedDataset),
            TrainSource::Historical(v) => Ok(Source::Replay(&v[rng.random_range(0..v.len())])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchStats {
    pub batch: usize,
    pub mean_reward: f64,
    pub epsilon: f64,
    /// Share of completed episodes with a burning maneuver.
    pub maneuver_rate: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub history: Vec<BatchStats>,
    /// First batch at which the convergence detector fired.
    pub converged_at: Option<usize>,
}

impl TrainOutcome {
    pub fn rewards(&self) -> Vec<f64> {
        self.history.iter().map(|b| b.mean_reward).collect()
    }
}

struct EpisodeSample {
    grad: Vec<f64>,
    reward: f64,
    maneuvered: bool,
}

/// Rolls out one training episode with ε-greedy actions and accumulates
/// `Σ_k ∇ ln π(a_k | s_k)` over the network-decided steps.
fn rollout<R: Rng + ?Sized>(
    params: &PolicyParams,
    source: Source<'_>,
    ep: &EpisodeConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpisodeSample, EnvError> {
    let mut env = Env::reset(ep, source, rng)?;
    let mut grad = vec![0.0; params.theta.len()];
    let mut act = Activations::new(&params.arch);
    let mut scratch = (Vec::new(), Vec::new());
    let mut fuel = 0.0;
    while !env.is_terminal() {
        let state: MdpState = env.state();
        let action = if state.moved {
            Action::Delay
        } else {
            params.forward_into(&state, &mut act);
            let explore = rng.random::<f64>() < epsilon;
            let a = if explore {
                if rng.random::<bool>() {
                    Action::Maneuver
                } else {
                    Action::Delay
                }
            } else if rng.random::<f64>() < act.probs[1] {
                Action::Maneuver
            } else {
                Action::Delay
            };
            params.accumulate_log_prob_grad(&act, a, 1.0, &mut grad, &mut scratch);
            a
        };
        fuel += env.step(action, rng)?.fuel_cost;
    }
    let cost = ep.eta * fuel + (1.0 - ep.eta) * env.terminal_cost();
    Ok(EpisodeSample { grad, reward: -cost, maneuvered: env.maneuver().is_some_and(|m| m.burned()) })
}

/// Trains a policy. `on_batch` sees the statistics of every batch as it
/// completes.
pub fn train(
    source: &TrainSource,
    ep: &EpisodeConfig,
    cfg: &TrainConfig,
    mut on_batch: impl FnMut(&BatchStats),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    ep.validate().map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let mut init_rng = seed::item_rng(seed::substream(cfg.seed, "init"), 0);
    let mut params = PolicyParams::init(cfg.architecture, &mut init_rng);
    let mut adam = Adam::new(params.theta.len(), cfg.learning_rate);
    let episode_seed = seed::substream(cfg.seed, "episodes");
    let b = cfg.episodes_per_batch;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut detector = ConvergenceDetector::new(cfg.convergence);
    let mut converged_at = None;

    for i in 0..cfg.iterations {
        let epsilon = cfg.epsilon(i);
        let snapshot = &params;
        let results: Vec<Result<EpisodeSample, EnvError>> = (0..b)
            .into_par_iter()
            .map(|j| {
                let mut rng = seed::item_rng(episode_seed, (i * b + j) as u64);
                let src = source.pick(&mut rng)?;
                rollout(snapshot, src, ep, epsilon, &mut rng)
            })
            .collect();

        let mut samples = Vec::with_capacity(b);
        let mut last_err = None;
        for r in results {
            match r {
                Ok(s) => samples.push(s),
                Err(e) => {
                    log::debug!("batch {i}: episode aborted: {e}");
                    last_err = Some(e);
                }
            }
        }
        if samples.is_empty() {
            return Err(TrainError::AllEpisodesAborted { batch: i, last: last_err.expect("at least one episode") });
        }
        let n = samples.len() as f64;
        let mean_reward = samples.iter().map(|s| s.reward).sum::<f64>() / n;
        if !mean_reward.is_finite() {
            return Err(TrainError::DivergedTraining { batch: i });
        }
        let baseline = if cfg.baseline { mean_reward } else { 0.0 };
        let mut g = vec![0.0; params.theta.len()];
        for s in &samples {
            let w = -(s.reward - baseline);
            for (gi, si) in g.iter_mut().zip(&s.grad) {
                *gi = w * si;
            }
            adam.step(&mut params.theta, &g);
        }
        if !params.is_finite() {
            return Err(TrainError::DivergedTraining { batch: i });
        }
        let stats = BatchStats {
            batch: i,
            mean_reward,
            epsilon,
            maneuver_rate: samples.iter().filter(|s| s.maneuvered).count() as f64 / n,
            skipped: b - samples.len(),
        };
        if converged_at.is_none() && detector.push(mean_reward) {
            converged_at = Some(i);
        }
        on_batch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { params, history, converged_at })
}

/// Moving-average plateau detector: with `MA_i` the mean of the last
/// `window` batch rewards, fires at the first batch where
/// `(MA_i - MA_{i-window}) / |MA_{i-window}| < tolerance`.
#[derive(Debug, Clone)]
pub struct ConvergenceDetector {
    cfg: ConvergenceConfig,
    rewards: Vec<f64>,
    /// Prefix sums for O(1) window means.
    prefix: Vec<f64>,
}

impl ConvergenceDetector {
    pub fn new(cfg: ConvergenceConfig) -> Self {
        Self { cfg, rewards: Vec::new(), prefix: vec![0.0] }
    }

    fn window_mean(&self, end: usize) -> f64 {
        let w = self.cfg.window;
        (self.prefix[end + 1] - self.prefix[end + 1 - w]) / w as f64
    }

    /// Relative improvement at the latest batch, once two windows exist.
    pub fn improvement(&self) -> Option<f64> {
        let w = self.cfg.window;
        let i = self.rewards.len().checked_sub(1)?;
        if i + 1 < 2 * w {
            return None;
        }
        let now = self.window_mean(i);
        let before = self.window_mean(i - w);
        Some((now - before) / before.abs())
    }

    /// Adds a batch reward; returns whether the detector fires at it.
    pub fn push(&mut self, reward: f64) -> bool {
        self.rewards.push(reward);
        let last = *self.prefix.last().expect("non-empty");
        self.prefix.push(last + reward);
        self.improvement().is_some_and(|r| r < self.cfg.tolerance)
    }
}

/// First batch index at which the detector fires on `rewards`.
pub fn convergence_iteration(rewards: &[f64], cfg: ConvergenceConfig) -> Option<usize> {
    let mut d = ConvergenceDetector::new(cfg);
    rewards.iter().position(|&r| d.push(r))
}

/// Writes `batch,mean_reward,epsilon` rows.
pub fn write_reward_csv<W: Write>(history: &[BatchStats], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["batch", "mean_reward", "epsilon"])?;
    for b in history {
        w.write_record([b.batch.to_string(), format!("{:?}", b.mean_reward), format!("{:?}", b.epsilon)])?;
    }
    w.flush()?;
    Ok(())
}
