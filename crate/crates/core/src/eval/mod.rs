//! Cut-off baseline, greedy evaluation, ablations and report files.

pub mod ablation;
pub mod metrics;
pub mod report;

use rayon::prelude::*;
use serde::Serialize;

use crate::cdm::{label_true_risk, EventSeries, RiskLabel, CUTOFF_STEP, HORIZON};
use crate::policy::PolicyParams;
use crate::risk::RiskModel;
use crate::seed;
use crate::simenv::{Action, Env, EnvError, EpisodeConfig, MdpState, Source};

pub use ablation::{ablation_runs, run_ablation, AblationReport, AblationSpec, RunGroup, RunReport, RunSpec};
pub use metrics::{ActionDistribution, FuelReport};
pub use report::{emit_plots_data, RunMeta};

/// Maneuvers at the 24-hour grid point if and only if the PoC there is at
/// or above the threshold.
pub fn cutoff_action(state: &MdpState, hbr_km: f64, risk: &RiskModel) -> Action {
    if state.k == CUTOFF_STEP && !state.moved && risk.is_high(risk.state_poc(state.d_m, state.sigma_t, hbr_km)) {
        Action::Maneuver
    } else {
        Action::Delay
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Greedy actions of a trained network.
    Trained(&'a PolicyParams),
    Cutoff,
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Trained(_) => "trained",
            Policy::Cutoff => "cutoff",
        }
    }

    pub fn act(&self, state: &MdpState, hbr_km: f64, risk: &RiskModel) -> Action {
        match self {
            Policy::Trained(p) => p.act_greedy(state),
            Policy::Cutoff => cutoff_action(state, hbr_km, risk),
        }
    }
}

/// Outcome of one evaluated event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventOutcome {
    pub high_risk: bool,
    pub maneuver_k: Option<usize>,
    pub propellant_kg: f64,
    pub fuel_cost: f64,
    pub risk_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub policy: String,
    pub actions: ActionDistribution,
    pub fuel: FuelReport,
    /// Maneuver count per grid index.
    pub maneuver_steps: Vec<usize>,
    /// Mean episode cost at the configured η.
    pub mean_cost: f64,
    /// Events whose replay aborted on a planning error.
    pub skipped: usize,
    pub outcomes: Vec<Option<EventOutcome>>,
}

/// Replays every event under `policy`, classifying decisions against the
/// unmaneuvered true-risk label. Event `i` draws any missing service
/// altitude from sub-stream item `i` of `seed`, so trained and cut-off
/// evaluations with the same seed see identical orbits.
pub fn evaluate(policy: Policy<'_>, events: &[EventSeries], ep: &EpisodeConfig, seed: u64) -> EvalReport {
    let outcomes: Vec<Result<EventOutcome, EnvError>> = events
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = seed::item_rng(seed, i as u64);
            evaluate_event(policy, s, ep, &mut rng)
        })
        .collect();

    let mut actions = ActionDistribution::default();
    let mut fuel = FuelReport::default();
    let mut maneuver_steps = vec![0; HORIZON];
    let mut cost_sum = 0.0;
    let mut skipped = 0;
    let mut kept = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(o) => {
                actions.record(o.maneuver_k.is_some(), o.high_risk);
                fuel.per_episode_kg.push(o.propellant_kg);
                if let Some(k) = o.maneuver_k {
                    fuel.maneuvers += 1;
                    maneuver_steps[k] += 1;
                }
                cost_sum += ep.eta * o.fuel_cost + (1.0 - ep.eta) * o.risk_cost;
                kept.push(Some(o));
            }
            Err(e) => {
                log::warn!("evaluation episode aborted: {e}");
                skipped += 1;
                kept.push(None);
            }
        }
    }
    let n = actions.total();
    EvalReport {
        policy: policy.name().to_string(),
        actions,
        fuel,
        maneuver_steps,
        mean_cost: if n > 0 { cost_sum / n as f64 } else { 0.0 },
        skipped,
        outcomes: kept,
    }
}

fn evaluate_event<R: rand::Rng + ?Sized>(
    policy: Policy<'_>,
    series: &EventSeries,
    ep: &EpisodeConfig,
    rng: &mut R,
) -> Result<EventOutcome, EnvError> {
    let high = label_true_risk(series, &ep.risk, ep.risk.poc_threshold) == RiskLabel::High;
    let mut env = Env::reset(ep, Source::Replay(series), rng)?;
    let (mut fuel_cost, mut kg) = (0.0, 0.0);
    while !env.is_terminal() {
        let s = env.state();
        let a = if s.moved { Action::Delay } else { policy.act(&s, env.hbr_km(), &ep.risk) };
        let out = env.step(a, rng)?;
        fuel_cost += out.fuel_cost;
        kg += out.propellant_kg;
    }
    Ok(EventOutcome {
        high_risk: high,
        maneuver_k: env.maneuver().filter(|m| m.burned()).map(|m| m.k),
        propellant_kg: kg,
        fuel_cost,
        risk_cost: env.terminal_cost(),
    })
}
