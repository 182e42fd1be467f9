//! Phasing-maneuver planning on circular orbits.
//!
//! A collision-avoidance maneuver raises the satellite into a slightly higher
//! transit orbit for `n_rev` revolutions and then returns it to its service
//! orbit. The longer transit period accumulates an along-track phase shift;
//! both burns are impulsive and the propellant follows the rocket equation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::RtnVector;

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 0.3986e6;
/// Mean Earth radius, km.
pub const R_EARTH: f64 = 6371.0;
/// Standard gravity, km/s².
pub const G0_KM_S2: f64 = 9.80665e-3;
/// Service-orbit altitude range, km.
pub const SERVICE_ALTITUDE_RANGE: (f64, f64) = (160.0, 2000.0);
/// Altitude ceiling for transit orbits chosen by [`optimal_revolutions`], km.
pub const TRANSIT_ALTITUDE_CEILING: f64 = 2000.0;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManeuverError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("transit altitude raise {raise_km:.3} km exceeds cap {cap_km:.3} km")]
    TransitAltitudeExceeded { raise_km: f64, cap_km: f64 },
    #[error("no feasible plan: {0}")]
    NoFeasiblePlan(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Circular orbit described by its radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    /// Orbit radius from Earth's centre, km.
    pub radius_km: f64,
}

impl OrbitSpec {
    /// Service orbit at `altitude_km`, which must lie in [160, 2000] km.
    pub fn service(altitude_km: f64) -> Result<Self, ManeuverError> {
        let (lo, hi) = SERVICE_ALTITUDE_RANGE;
        if !(lo..=hi).contains(&altitude_km) {
            return Err(ManeuverError::InvalidInput(format!(
                "service altitude {altitude_km} km outside [{lo}, {hi}]"
            )));
        }
        Ok(Self { radius_km: altitude_km + R_EARTH })
    }

    pub fn from_radius(radius_km: f64) -> Self {
        Self { radius_km }
    }

    pub fn altitude_km(&self) -> f64 {
        self.radius_km - R_EARTH
    }

    /// Orbital period, s.
    pub fn period(&self) -> f64 {
        TWO_PI * (self.radius_km.powi(3) / MU_EARTH).sqrt()
    }

    /// Circular speed, km/s.
    pub fn speed(&self) -> f64 {
        (MU_EARTH / self.radius_km).sqrt()
    }

    /// Radius of the circular orbit with the given period.
    pub fn from_period(period_s: f64) -> Self {
        Self { radius_km: (MU_EARTH * period_s * period_s / (TWO_PI * TWO_PI)).cbrt() }
    }
}

/// Result of [`plan_maneuver`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverPlan {
    /// Required phase shift, rad.
    pub delta_theta: f64,
    pub n_rev: u32,
    /// Transit orbit period, s.
    pub transit_period: f64,
    /// Transit orbit radius, km.
    pub transit_radius: f64,
    /// Transit orbit speed, km/s.
    pub transit_speed: f64,
    /// Total speed change of the out-going and return burns, km/s.
    pub delta_v: f64,
    pub propellant_kg: f64,
}

/// Phase shift that moves the relative position from `d_m` to `d_m_prime`
/// by sliding the satellite along-track.
pub fn phase_shift_for_miss(rho0: RtnVector, d_m: f64, d_m_prime: f64, r_s: f64) -> Result<f64, ManeuverError> {
    if !(rho0.t > 0.0) {
        return Err(ManeuverError::InvalidGeometry(format!(
            "tangential component must be positive, got {}",
            rho0.t
        )));
    }
    if !(r_s > 0.0) {
        return Err(ManeuverError::InvalidInput(format!("service radius must be positive, got {r_s}")));
    }
    if !(d_m >= 0.0 && d_m_prime >= d_m) {
        return Err(ManeuverError::InvalidInput(format!(
            "need d_m' >= d_m >= 0, got d_m = {d_m}, d_m' = {d_m_prime}"
        )));
    }
    let norm = rho0.norm();
    if (norm - d_m).abs() > 1e-6 * d_m.max(norm) {
        return Err(ManeuverError::InvalidGeometry(format!(
            "|rho0| = {norm} does not match d_m = {d_m}"
        )));
    }
    let rt = rho0.t;
    // (d_m'^2 - d_m^2) written as a product to avoid cancellation
    let gap = (d_m_prime - d_m) * (d_m_prime + d_m);
    let dtheta = (-rt + (rt * rt + gap).sqrt()) / r_s;
    Ok(dtheta.max(0.0))
}

/// Minimal transit period achieving `delta_theta` in `n_rev` revolutions.
pub fn transit_period_for_phase(delta_theta: f64, n_rev: u32, service: &OrbitSpec) -> Result<f64, ManeuverError> {
    if !(delta_theta >= 0.0) {
        return Err(ManeuverError::InvalidInput(format!("phase shift must be >= 0, got {delta_theta}")));
    }
    if n_rev < 1 {
        return Err(ManeuverError::InvalidInput("n_rev must be >= 1".into()));
    }
    Ok(service.period() + period_offset(delta_theta, n_rev, service))
}

/// T_t - T_s for the minimal transit period.
fn period_offset(delta_theta: f64, n_rev: u32, service: &OrbitSpec) -> f64 {
    service.radius_km * delta_theta / (n_rev as f64 * service.speed())
}

/// Transit orbit, burns and propellant for a phasing maneuver.
pub fn plan_maneuver(
    delta_theta: f64,
    n_rev: u32,
    service: &OrbitSpec,
    m_o: f64,
    isp: f64,
    delta_r_cap: f64,
) -> Result<ManeuverPlan, ManeuverError> {
    let plan = plan_uncapped(delta_theta, n_rev, service, m_o, isp)?;
    let raise = plan.transit_radius - service.radius_km;
    if raise > delta_r_cap {
        return Err(ManeuverError::TransitAltitudeExceeded { raise_km: raise, cap_km: delta_r_cap });
    }
    Ok(plan)
}

/// [`plan_maneuver`] without the altitude-raise check.
pub fn plan_uncapped(
    delta_theta: f64,
    n_rev: u32,
    service: &OrbitSpec,
    m_o: f64,
    isp: f64,
) -> Result<ManeuverPlan, ManeuverError> {
    if !(m_o > 0.0 && isp > 0.0) {
        return Err(ManeuverError::InvalidInput(format!("mass and Isp must be positive, got {m_o}, {isp}")));
    }
    let t_s = service.period();
    let transit_period = transit_period_for_phase(delta_theta, n_rev, service)?;
    let transit = OrbitSpec::from_period(transit_period);
    let v_s = service.speed();
    // V_t / V_s = (T_s / T_t)^(1/3); evaluate 1 - ratio without cancellation
    let x = period_offset(delta_theta, n_rev, service) / t_s;
    let speed_gap = v_s * -(-(x.ln_1p()) / 3.0).exp_m1();
    let delta_v = 2.0 * speed_gap;
    let propellant_kg = m_o * -(-delta_v / (isp * G0_KM_S2)).exp_m1();
    Ok(ManeuverPlan {
        delta_theta,
        n_rev,
        transit_period,
        transit_radius: transit.radius_km,
        transit_speed: v_s - speed_gap,
        delta_v,
        propellant_kg,
    })
}

/// Largest revolution count whose plan fits in `time_remaining_hr` while
/// keeping the transit orbit within `delta_r_cap` of the service orbit and
/// below the 2000 km altitude ceiling.
pub fn optimal_revolutions(
    delta_theta: f64,
    time_remaining_hr: f64,
    service: &OrbitSpec,
    delta_r_cap: f64,
) -> Result<u32, ManeuverError> {
    if !(time_remaining_hr > 0.0) {
        return Err(ManeuverError::InvalidInput(format!("time remaining must be positive, got {time_remaining_hr}")));
    }
    if !(delta_theta > 0.0) {
        return Err(ManeuverError::InvalidInput(format!("phase shift must be positive, got {delta_theta}")));
    }
    let t_s = service.period();
    let shift_time = service.radius_km * delta_theta / service.speed();
    // n * T_t(n) = n * T_s + R_s Δθ / V_s must fit in the window
    let window = time_remaining_hr * 3600.0;
    let n_time = ((window - shift_time) / t_s).floor();
    if n_time < 1.0 {
        return Err(ManeuverError::NoFeasiblePlan(format!(
            "a single transit revolution does not fit in {time_remaining_hr} h"
        )));
    }
    // the highest admissible transit orbit bounds n from below
    let ceiling = (service.radius_km + delta_r_cap).min(R_EARTH + TRANSIT_ALTITUDE_CEILING);
    if ceiling <= service.radius_km {
        return Err(ManeuverError::NoFeasiblePlan("service orbit already at the transit ceiling".into()));
    }
    let dt_max = OrbitSpec::from_radius(ceiling).period() - t_s;
    let n_min = (shift_time / dt_max).ceil().max(1.0);
    let n = n_time.min(u32::MAX as f64);
    if n < n_min {
        return Err(ManeuverError::NoFeasiblePlan(format!(
            "time window allows at most {n} revolutions but the altitude cap needs {n_min}"
        )));
    }
    Ok(n as u32)
}
