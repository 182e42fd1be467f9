//! Variation 1 (HBR × phase) and Variation 2 (η sweep) training runs.

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport, Policy};
use crate::cdm::EventSeries;
use crate::policy::{train, BatchStats, PolicyParams, TrainConfig, TrainSource};
use crate::seed;
use crate::simenv::{generate_synthetic, EpisodeConfig, HbrMode, PhaseMode, RevMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSpec {
    /// Training iterations of every run except η = 1.
    pub iterations: usize,
    /// Training iterations of the η = 1 run.
    pub eta_one_iterations: usize,
    pub variation1: bool,
    /// η values of the sweep; empty disables it.
    pub etas: Vec<f64>,
    /// Adds a Variation 2 run at the base η with the fuel-optimal
    /// revolution count.
    pub optimal_revolutions: bool,
    /// HBR range of the randomized-HBR runs, m.
    pub hbr_min_m: f64,
    pub hbr_max_m: f64,
    /// Synthetic events per evaluation.
    pub eval_events: usize,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            iterations: 4000,
            eta_one_iterations: 20_000,
            variation1: true,
            etas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            optimal_revolutions: false,
            hbr_min_m: 2.0,
            hbr_max_m: 20.0,
            eval_events: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunGroup {
    Variation1,
    EtaSweep,
    OptimalRevolutions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    pub group: RunGroup,
    pub episode: EpisodeConfig,
    pub train: TrainConfig,
}

/// Expands an ablation spec against base configurations. Variation 1 names runs
/// `hbr{h}-phase{p}` with 1 for fixed and 0 for randomized/analytic;
/// Variation 2 uses randomized HBR and analytic phase.
pub fn ablation_runs(spec: &AblationSpec, base_ep: &EpisodeConfig, base_train: &TrainConfig) -> Vec<RunSpec> {
    let sampled = HbrMode::Sampled { min_m: spec.hbr_min_m, max_m: spec.hbr_max_m };
    let train = TrainConfig { iterations: spec.iterations, ..base_train.clone() };
    let mut runs = Vec::new();
    if spec.variation1 {
        for fixed_hbr in [true, false] {
            for fixed_phase in [true, false] {
                let episode = EpisodeConfig {
                    hbr: if fixed_hbr { base_ep.hbr } else { sampled },
                    phase: if fixed_phase { base_ep.phase } else { PhaseMode::Analytic },
                    ..base_ep.clone()
                };
                runs.push(RunSpec {
                    name: format!("hbr{}-phase{}", fixed_hbr as u8, fixed_phase as u8),
                    group: RunGroup::Variation1,
                    episode,
                    train: train.clone(),
                });
            }
        }
    }
    let var2 = EpisodeConfig { hbr: sampled, phase: PhaseMode::Analytic, ..base_ep.clone() };
    for &eta in &spec.etas {
        let iterations = if eta >= 1.0 { spec.eta_one_iterations } else { spec.iterations };
        runs.push(RunSpec {
            name: format!("eta-{eta:.2}"),
            group: RunGroup::EtaSweep,
            episode: EpisodeConfig { eta, ..var2.clone() },
            train: TrainConfig { iterations, ..train.clone() },
        });
    }
    if spec.optimal_revolutions {
        runs.push(RunSpec {
            name: "optimal-nrev".into(),
            group: RunGroup::OptimalRevolutions,
            episode: EpisodeConfig { n_rev: RevMode::Optimal, ..var2 },
            train,
        });
    }
    runs
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub group: Option<RunGroup>,
    pub episode: EpisodeConfig,
    pub iterations: usize,
    pub converged_at: Option<usize>,
    pub history: Vec<BatchStats>,
    pub params: Option<PolicyParams>,
    pub trained: Option<EvalReport>,
    pub cutoff: Option<EvalReport>,
    /// Failure of this run; the other runs are unaffected.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub runs: Vec<RunReport>,
    /// Events the runs were evaluated on when the source is historical;
    /// synthetic runs evaluate on their own generated sets.
    pub eval_events: Vec<EventSeries>,
}

/// Trains and evaluates every run of an ablation spec. Run `name` trains from
/// sub-stream `name` of `seed`; synthetic evaluation sets come from the
/// "eval-set" sub-stream, so runs with equal episode settings share them.
pub fn run_ablation(
    spec: &AblationSpec,
    source: &TrainSource,
    base_ep: &EpisodeConfig,
    base_train: &TrainConfig,
    seed: u64,
    mut on_run: impl FnMut(&RunReport),
) -> AblationReport {
    let eval_seed = seed::substream(seed, "eval");
    let set_seed = seed::substream(seed, "eval-set");
    let mut runs = Vec::new();
    for run in ablation_runs(spec, base_ep, base_train) {
        let cfg = TrainConfig { seed: seed::substream(seed, &run.name), ..run.train.clone() };
        log::info!("run {}: {} iterations", run.name, cfg.iterations);
        let events = match source {
            TrainSource::Synthetic(noise) => generate_synthetic(noise, spec.eval_events, &run.episode, set_seed),
            TrainSource::Historical(v) => v.clone(),
        };
        let mut report = RunReport {
            name: run.name.clone(),
            group: Some(run.group),
            episode: run.episode.clone(),
            iterations: cfg.iterations,
            converged_at: None,
            history: Vec::new(),
            params: None,
            trained: None,
            cutoff: Some(evaluate(Policy::Cutoff, &events, &run.episode, eval_seed)),
            error: None,
        };
        match train(source, &run.episode, &cfg, |_| {}) {
            Ok(out) => {
                report.trained = Some(evaluate(Policy::Trained(&out.params), &events, &run.episode, eval_seed));
                report.converged_at = out.converged_at;
                report.history = out.history;
                report.params = Some(out.params);
            }
            Err(e) => {
                log::warn!("run {} failed: {e}", run.name);
                report.error = Some(e.to_string());
            }
        }
        on_run(&report);
        runs.push(report);
    }
    let eval_events = match source {
        TrainSource::Synthetic(_) => Vec::new(),
        TrainSource::Historical(v) => v.clone(),
    };
    AblationReport { runs, eval_events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdm::NoiseModel;

    #[test]
    fn default_spec_has_four_plus_eleven_runs() {
        let runs = ablation_runs(&AblationSpec::default(), &EpisodeConfig::default(), &TrainConfig::default());
        assert_eq!(runs.len(), 15);
        let v1: Vec<_> = runs.iter().filter(|r| r.group == RunGroup::Variation1).collect();
        assert_eq!(v1.len(), 4);
        let combos: std::collections::HashSet<_> = v1
            .iter()
            .map(|r| (matches!(r.episode.hbr, HbrMode::Fixed { .. }), matches!(r.episode.phase, PhaseMode::Fixed { .. })))
            .collect();
        assert_eq!(combos.len(), 4);
        let sweep: Vec<_> = runs.iter().filter(|r| r.group == RunGroup::EtaSweep).collect();
        assert_eq!(sweep.len(), 11);
        for r in &sweep {
            assert!(matches!(r.episode.hbr, HbrMode::Sampled { .. }));
            assert_eq!(r.episode.phase, PhaseMode::Analytic);
            let expect = if r.episode.eta == 1.0 { 20_000 } else { 4000 };
            assert_eq!(r.train.iterations, expect);
        }
    }

    #[test]
    fn small_ablation_runs_end_to_end() {
        let spec = AblationSpec {
            iterations: 3,
            eta_one_iterations: 3,
            variation1: false,
            etas: vec![0.0, 1.0],
            optimal_revolutions: true,
            eval_events: 50,
            ..Default::default()
        };
        let train_cfg = TrainConfig { episodes_per_batch: 8, ..Default::default() };
        let src = TrainSource::Synthetic(NoiseModel::reference());
        let mut seen = 0;
        let rep = run_ablation(&spec, &src, &EpisodeConfig::default(), &train_cfg, 4, |_| seen += 1);
        assert_eq!(seen, 3);
        for r in &rep.runs {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert_eq!(r.history.len(), 3);
            assert_eq!(r.trained.as_ref().unwrap().actions.total(), 50);
        }
        // cut-off decisions do not depend on η
        assert_eq!(rep.runs[0].cutoff.as_ref().unwrap().fuel, rep.runs[1].cutoff.as_ref().unwrap().fuel);
    }

    #[test]
    fn failed_run_is_recorded() {
        let spec = AblationSpec { iterations: 2, variation1: false, etas: vec![0.5], eval_events: 10, ..Default::default() };
        let rep = run_ablation(
            &spec,
            &TrainSource::Historical(Vec::new()),
            &EpisodeConfig::default(),
            &TrainConfig { episodes_per_batch: 4, ..Default::default() },
            1,
            |_| {},
        );
        assert_eq!(rep.runs.len(), 1);
        assert!(rep.runs[0].error.is_some());
    }
}
