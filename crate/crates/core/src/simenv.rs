//! Finite-horizon decision process over the 8-hour conjunction-message grid.
//!
//! The state is `(d_m, σ_T, moved, k)`. At every grid point `k < 20` the
//! satellite either delays or starts a phasing maneuver; once moved, the
//! only remaining action is to continue. Episode cost is
//! `η Σ_k C_fuel + (1 - η) C_risk`, with `C_risk = ±1` from the terminal PoC.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cdm::{CdmRecord, EventSeries, NoiseModel, HORIZON, LAST_STEP, STATE_BOUND_KM, grid_time};
use crate::cdm::noise::clip_state;
use crate::geom::{self, GeomError, RtnVector};
use crate::maneuver::{self, ManeuverError, ManeuverPlan, OrbitSpec, SERVICE_ALTITUDE_RANGE};
use crate::risk::RiskModel;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("maneuver planning failed at step {k}: {source}")]
    Maneuver { k: usize, source: ManeuverError },
    #[error("safe miss distance failed at step {k}: {source}")]
    Geometry { k: usize, source: GeomError },
    #[error("no more events in the dataset")]
    ExhaustedDataset,
    #[error("episode already terminated")]
    Terminated,
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Delay = 0,
    Maneuver = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Delay
        } else {
            Action::Maneuver
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpState {
    /// Miss distance, km.
    pub d_m: f64,
    /// Debris along-track standard deviation, km.
    pub sigma_t: f64,
    pub moved: bool,
    pub k: usize,
}

impl MdpState {
    pub fn in_bounds(&self) -> bool {
        (0.0..=STATE_BOUND_KM).contains(&self.d_m) && (0.0..=STATE_BOUND_KM).contains(&self.sigma_t) && self.k <= LAST_STEP
    }
}

/// Hard-body radius of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum HbrMode {
    Fixed { hbr_m: f64 },
    /// Uniform in `[min_m, max_m]`, drawn once per episode.
    Sampled { min_m: f64, max_m: f64 },
}

/// Phase shift of a maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseMode {
    Fixed { delta_theta: f64 },
    /// Shift reaching the safe miss distance for the reduction factor λ.
    Analytic,
}

/// Number of transit revolutions of a maneuver started at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevMode {
    /// `n_r = 21 - k`.
    Schedule,
    /// Largest count that fits in the remaining time and altitude cap.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Fuel weight η in [0, 1].
    pub eta: f64,
    pub hbr: HbrMode,
    pub phase: PhaseMode,
    pub n_rev: RevMode,
    /// Service altitude range sampled uniformly per episode, km.
    pub service_altitude_km: (f64, f64),
    /// Initial satellite mass, kg.
    pub m_o: f64,
    /// Specific impulse, s.
    pub isp: f64,
    /// Largest transit-orbit raise, km.
    pub delta_r_cap_km: f64,
    pub risk: RiskModel,
    /// PoC reduction factor λ of analytic maneuvers; `None` targets one
    /// order of magnitude below the threshold, λ = 10 P_C / threshold.
    pub lambda: Option<f64>,
    /// Tangential share of the miss vector used by analytic maneuvers:
    /// ρ_T = rho_t_fraction · d_m.
    pub rho_t_fraction: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            eta: 0.25,
            hbr: HbrMode::Fixed { hbr_m: 10.0 },
            phase: PhaseMode::Fixed { delta_theta: 0.01 },
            n_rev: RevMode::Schedule,
            service_altitude_km: SERVICE_ALTITUDE_RANGE,
            m_o: 300.0,
            isp: 300.0,
            delta_r_cap_km: 70.0,
            risk: RiskModel::default(),
            lambda: None,
            rho_t_fraction: 1.0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must be in [0, 1], got {}", self.eta));
        }
        match self.hbr {
            HbrMode::Fixed { hbr_m } if !(hbr_m > 0.0) => return bad(format!("hbr must be positive, got {hbr_m}")),
            HbrMode::Sampled { min_m, max_m } if !(min_m > 0.0 && max_m >= min_m) => {
                return bad(format!("need 0 < min <= max for sampled hbr, got {min_m}, {max_m}"))
            }
            _ => {}
        }
        if let PhaseMode::Fixed { delta_theta } = self.phase {
            if !(delta_theta >= 0.0 && delta_theta.is_finite()) {
                return bad(format!("phase shift must be >= 0, got {delta_theta}"));
            }
        }
        let (lo, hi) = self.service_altitude_km;
        let (a, b) = SERVICE_ALTITUDE_RANGE;
        if !(a <= lo && lo <= hi && hi <= b) {
            return bad(format!("service altitude range [{lo}, {hi}] outside [{a}, {b}]"));
        }
        if !(self.m_o > 0.0 && self.isp > 0.0 && self.delta_r_cap_km > 0.0) {
            return bad("mass, Isp and altitude cap must be positive".into());
        }
        if !(self.risk.poc_threshold >= 0.0 && self.risk.poc_threshold <= 1.0 && self.risk.sigma_floor_km > 0.0) {
            return bad("threshold must be in [0, 1] and sigma floor positive".into());
        }
        if let Some(l) = self.lambda {
            if !(l >= 1.0) {
                return bad(format!("lambda must be >= 1, got {l}"));
            }
        }
        if !(self.rho_t_fraction > 0.0 && self.rho_t_fraction <= 1.0) {
            return bad(format!("rho_t_fraction must be in (0, 1], got {}", self.rho_t_fraction));
        }
        Ok(())
    }

    /// Per-episode hard-body radius, km.
    pub fn sample_hbr_km<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.hbr {
            HbrMode::Fixed { hbr_m } => hbr_m * 1e-3,
            HbrMode::Sampled { min_m, max_m } => {
                if max_m > min_m {
                    rng.random_range(min_m..=max_m) * 1e-3
                } else {
                    min_m * 1e-3
                }
            }
        }
    }

    pub fn sample_altitude_km<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.service_altitude_km;
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    }
}

/// Where transitions come from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    /// Fitted noise model; the initial state is drawn from its empirical
    /// first-message states.
    Synthetic(&'a NoiseModel),
    /// Recorded series replayed step by step. After a maneuver the miss
    /// distance follows the recorded ratios from the shifted value.
    Replay(&'a EventSeries),
}

/// A maneuver executed during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManeuverEvent {
    pub k: usize,
    pub plan: ManeuverPlan,
    /// Normalised fuel cost C_fuel.
    pub fuel_cost: f64,
    pub d_before: f64,
    pub d_after: f64,
}

impl ManeuverEvent {
    /// A zero phase shift burns nothing and does not count as a
    /// collision-avoidance maneuver.
    pub fn burned(&self) -> bool {
        self.plan.delta_theta > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutcome {
    pub state: MdpState,
    pub fuel_cost: f64,
    pub propellant_kg: f64,
}

/// One running episode.
#[derive(Debug, Clone)]
pub struct Env<'a> {
    cfg: &'a EpisodeConfig,
    source: Source<'a>,
    state: MdpState,
    hbr_km: f64,
    service: OrbitSpec,
    maneuver: Option<ManeuverEvent>,
}

impl<'a> Env<'a> {
    /// Starts an episode. Synthetic episodes start at `k = 0`; replayed ones
    /// at the first grid point the series covers.
    pub fn reset<R: Rng + ?Sized>(cfg: &'a EpisodeConfig, source: Source<'a>, rng: &mut R) -> Result<Self, EnvError> {
        let (state, hbr_km, altitude) = match source {
            Source::Synthetic(noise) => {
                let (d_m, sigma_t) = noise.sample_initial(rng);
                let hbr = cfg.sample_hbr_km(rng);
                let alt = cfg.sample_altitude_km(rng);
                (MdpState { d_m, sigma_t, moved: false, k: 0 }, hbr, alt)
            }
            Source::Replay(series) => {
                if series.is_empty() {
                    return Err(EnvError::ExhaustedDataset);
                }
                let first = series.first();
                let alt = match series.service_altitude_km {
                    Some(a) => a,
                    None => cfg.sample_altitude_km(rng),
                };
                let state = MdpState {
                    d_m: clip_state(first.miss_distance),
                    sigma_t: clip_state(first.sigma_t),
                    moved: false,
                    k: series.start_k,
                };
                (state, series.hbr(), alt)
            }
        };
        let service = OrbitSpec::service(altitude).map_err(|e| EnvError::Maneuver { k: state.k, source: e })?;
        Ok(Self { cfg, source, state, hbr_km, service, maneuver: None })
    }

    pub fn state(&self) -> MdpState {
        self.state
    }

    pub fn hbr_km(&self) -> f64 {
        self.hbr_km
    }

    pub fn service(&self) -> OrbitSpec {
        self.service
    }

    pub fn maneuver(&self) -> Option<&ManeuverEvent> {
        self.maneuver.as_ref()
    }

    pub fn is_terminal(&self) -> bool {
        self.state.k >= LAST_STEP
    }

    /// Applies `action` at the current step and advances to `k + 1`. A
    /// maneuver request after the satellite has moved is a continuation and
    /// costs nothing.
    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<StepOutcome, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminated);
        }
        let k = self.state.k;
        let mut fuel_cost = 0.0;
        let mut propellant_kg = 0.0;
        let mut d = self.state.d_m;
        if action == Action::Maneuver && !self.state.moved {
            let ev = self.plan(k)?;
            fuel_cost = ev.fuel_cost;
            propellant_kg = ev.plan.propellant_kg;
            d = ev.d_after;
            self.maneuver = Some(ev);
            self.state.moved = true;
        }
        let (d_next, s_next) = match self.source {
            Source::Synthetic(noise) => noise.transition(k + 1, d, self.state.sigma_t, rng),
            Source::Replay(series) => {
                let prev = series.at(k).expect("replay covers current step");
                let next = series.at(k + 1).expect("replay covers next step");
                let d_next = if self.state.moved {
                    if prev.miss_distance > 0.0 {
                        d * next.miss_distance / prev.miss_distance
                    } else {
                        d
                    }
                } else {
                    next.miss_distance
                };
                (clip_state(d_next), clip_state(next.sigma_t))
            }
        };
        self.state = MdpState { d_m: d_next, sigma_t: s_next, moved: self.state.moved, k: k + 1 };
        Ok(StepOutcome { state: self.state, fuel_cost, propellant_kg })
    }

    fn plan(&self, k: usize) -> Result<ManeuverEvent, EnvError> {
        let cfg = self.cfg;
        let d = self.state.d_m;
        let r_s = self.service.radius_km;
        let rho_t = cfg.rho_t_fraction * d;
        let delta_theta = match cfg.phase {
            PhaseMode::Fixed { delta_theta } => delta_theta,
            PhaseMode::Analytic => self.analytic_phase(k, d, rho_t)?,
        };
        let n_rev = if delta_theta == 0.0 {
            1
        } else {
            match cfg.n_rev {
                RevMode::Schedule => (HORIZON - k) as u32,
                RevMode::Optimal => maneuver::optimal_revolutions(delta_theta, grid_time(k), &self.service, cfg.delta_r_cap_km)
                    .map_err(|e| EnvError::Maneuver { k, source: e })?,
            }
        };
        let plan = maneuver::plan_maneuver(delta_theta, n_rev, &self.service, cfg.m_o, cfg.isp, cfg.delta_r_cap_km)
            .map_err(|e| EnvError::Maneuver { k, source: e })?;
        let worst = maneuver::plan_uncapped(delta_theta, 1, &self.service, cfg.m_o, cfg.isp)
            .map_err(|e| EnvError::Maneuver { k, source: e })?;
        let fuel_cost = if worst.propellant_kg > 0.0 { plan.propellant_kg / worst.propellant_kg } else { 0.0 };
        let shift = r_s * delta_theta;
        let d_after = clip_state((d * d + 2.0 * rho_t * shift + shift * shift).sqrt());
        Ok(ManeuverEvent { k, plan, fuel_cost, d_before: d, d_after })
    }

    /// Phase shift that lowers the PoC of the current state by λ.
    fn analytic_phase(&self, k: usize, d: f64, rho_t: f64) -> Result<f64, EnvError> {
        let risk = &self.cfg.risk;
        let g = risk.state_geometry(d, self.state.sigma_t, self.hbr_km);
        let p = geom::poc_approx(&g).map_err(|e| EnvError::Geometry { k, source: e })?;
        let lambda = match self.cfg.lambda {
            Some(l) => l,
            None if risk.poc_threshold > 0.0 => 10.0 * p / risk.poc_threshold,
            None => 1.0,
        };
        if !(p > 0.0) || lambda <= 1.0 {
            return Ok(0.0);
        }
        let target = geom::safe_miss_distance(&g, p, lambda).map_err(|e| EnvError::Geometry { k, source: e })?;
        if target <= d {
            return Ok(0.0);
        }
        // the phase-shift relation needs a tangential component; a head-on
        // state is displaced from a vanishing along-track offset
        const TINY: f64 = 1e-12;
        let (rt, dd) = if rho_t > TINY { (rho_t, d) } else { (TINY, TINY) };
        let rho0 = RtnVector::new((dd * dd - rt * rt).max(0.0).sqrt(), rt, 0.0);
        maneuver::phase_shift_for_miss(rho0, dd, target, self.service.radius_km)
            .map_err(|e| EnvError::Maneuver { k, source: e })
    }

    /// ±1 risk cost of the current state; meaningful at `k = 20`.
    pub fn terminal_cost(&self) -> f64 {
        self.cfg.risk.terminal_cost(self.state.d_m, self.state.sigma_t, self.hbr_km)
    }

    pub fn terminal_poc(&self) -> f64 {
        self.cfg.risk.state_poc(self.state.d_m, self.state.sigma_t, self.hbr_km)
    }
}

/// One decision of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub state: MdpState,
    pub action: Action,
    pub fuel_cost: f64,
    pub propellant_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub final_state: MdpState,
    pub risk_cost: f64,
    pub terminal_poc: f64,
    pub maneuver: Option<ManeuverEvent>,
    pub hbr_km: f64,
    pub service_altitude_km: f64,
}

impl EpisodeTrace {
    pub fn fuel_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.fuel_cost).sum()
    }

    pub fn propellant_kg(&self) -> f64 {
        self.steps.iter().map(|s| s.propellant_kg).sum()
    }

    pub fn maneuver_step(&self) -> Option<usize> {
        self.maneuver.map(|m| m.k)
    }
}

/// `η Σ_k C_fuel + (1 - η) C_risk`.
pub fn episode_cost(trace: &EpisodeTrace, eta: f64) -> f64 {
    eta * trace.fuel_cost() + (1.0 - eta) * trace.risk_cost
}

/// Runs one episode under `policy`, which sees the state and may draw from
/// the episode generator.
pub fn run_episode<'a, R, P>(cfg: &'a EpisodeConfig, source: Source<'a>, rng: &mut R, mut policy: P) -> Result<EpisodeTrace, EnvError>
where
    R: Rng + ?Sized,
    P: FnMut(&MdpState, &mut R) -> Action,
{
    let mut env = Env::reset(cfg, source, rng)?;
    let mut steps = Vec::with_capacity(HORIZON);
    while !env.is_terminal() {
        let state = env.state();
        let action = if state.moved { Action::Delay } else { policy(&state, rng) };
        let out = env.step(action, rng)?;
        steps.push(TraceStep { state, action, fuel_cost: out.fuel_cost, propellant_kg: out.propellant_kg });
    }
    Ok(EpisodeTrace {
        steps,
        final_state: env.state(),
        risk_cost: env.terminal_cost(),
        terminal_poc: env.terminal_poc(),
        maneuver: env.maneuver,
        hbr_km: env.hbr_km,
        service_altitude_km: env.service.altitude_km(),
    })
}

/// Unmaneuvered series from the noise model, `k = 0..=20`. Event `i` uses
/// its own sub-stream of `seed`, so the set does not depend on how many
/// events are generated after it.
pub fn generate_synthetic(noise: &NoiseModel, n_events: usize, cfg: &EpisodeConfig, seed: u64) -> Vec<EventSeries> {
    (0..n_events).map(|i| synthetic_event(noise, i, cfg, seed)).collect()
}

fn synthetic_event(noise: &NoiseModel, i: usize, cfg: &EpisodeConfig, seed: u64) -> EventSeries {
    let mut rng = seed::item_rng(seed, i as u64);
    let (mut d, mut s) = noise.sample_initial(&mut rng);
    let hbr = cfg.sample_hbr_km(&mut rng);
    let altitude = cfg.sample_altitude_km(&mut rng);
    let event_id = format!("syn-{i}");
    let mut records = Vec::with_capacity(HORIZON);
    for k in 0..HORIZON {
        if k > 0 {
            (d, s) = noise.transition(k, d, s, &mut rng);
        }
        records.push(CdmRecord {
            event_id: event_id.clone(),
            time_to_tca: grid_time(k),
            miss_distance: d,
            sigma_t: s,
            geometry: None,
            r_t: 0.5 * hbr,
            r_c: 0.5 * hbr,
        });
    }
    EventSeries { event_id, start_k: 0, records, service_altitude_km: Some(altitude) }
}

/// Writes traces as CSV, one row per decision step:
/// `episode,k,d_m_km,sigma_t_km,moved,action,fuel_cost,propellant_kg`.
pub fn write_traces_csv<W: Write>(traces: &[EpisodeTrace], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["episode", "k", "d_m_km", "sigma_t_km", "moved", "action", "fuel_cost", "propellant_kg"])?;
    for (e, t) in traces.iter().enumerate() {
        for s in &t.steps {
            w.write_record([
                e.to_string(),
                s.state.k.to_string(),
                format!("{:?}", s.state.d_m),
                format!("{:?}", s.state.sigma_t),
                (s.state.moved as u8).to_string(),
                s.action.index().to_string(),
                format!("{:?}", s.fuel_cost),
                format!("{:?}", s.propellant_kg),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
