//! Collision-risk evaluation shared by the environment, the labeler and the
//! cut-off baseline.
//!
//! The decision state only carries the miss distance and the debris
//! along-track sigma, so the plane covariance is reconstructed as
//! `diag(σ_floor², max(σ_T, σ_floor)²)` with the miss distance on the x-axis.

use serde::{Deserialize, Serialize};

use crate::geom::{self, ConjunctionGeometry, PlaneCovariance};

/// Default operational PoC threshold.
pub const DEFAULT_POC_THRESHOLD: f64 = 1e-4;
/// Default lower bound on the plane standard deviations, km.
pub const DEFAULT_SIGMA_FLOOR_KM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskModel {
    pub poc_threshold: f64,
    pub sigma_floor_km: f64,
}

impl Default for RiskModel {
    fn default() -> Self {
        Self { poc_threshold: DEFAULT_POC_THRESHOLD, sigma_floor_km: DEFAULT_SIGMA_FLOOR_KM }
    }
}

impl RiskModel {
    /// Plane geometry reconstructed from the decision state.
    pub fn state_geometry(&self, d_m: f64, sigma_t: f64, hbr_km: f64) -> ConjunctionGeometry {
        let sx = self.sigma_floor_km;
        let sy = sigma_t.max(self.sigma_floor_km);
        let cov = PlaneCovariance { xx: sx * sx, xy: 0.0, yy: sy * sy };
        ConjunctionGeometry::on_plane(cov, d_m.max(0.0), hbr_km).expect("validated state geometry")
    }

    /// Approximate PoC of a decision state.
    pub fn state_poc(&self, d_m: f64, sigma_t: f64, hbr_km: f64) -> f64 {
        geom::poc_approx(&self.state_geometry(d_m, sigma_t, hbr_km)).expect("floored covariance is regular")
    }

    pub fn is_high(&self, poc: f64) -> bool {
        poc >= self.poc_threshold
    }

    /// +1 when the state is above threshold, -1 otherwise.
    pub fn terminal_cost(&self, d_m: f64, sigma_t: f64, hbr_km: f64) -> f64 {
        if self.is_high(self.state_poc(d_m, sigma_t, hbr_km)) {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_states_are_low_risk() {
        let m = RiskModel::default();
        assert_eq!(m.terminal_cost(100.0, 0.05, 0.01), -1.0);
    }

    #[test]
    fn crossing_along_sigma() {
        // at d_m = 0 the PoC is R² / (2 σ_floor σ_T); it equals the threshold
        // at σ_T = R² / (2 σ_floor · threshold) = 5 km for R = 10 m
        let m = RiskModel::default();
        let hbr = 0.01;
        let cross = hbr * hbr / (2.0 * m.sigma_floor_km * m.poc_threshold);
        assert!((cross - 5.0).abs() < 1e-12);
        assert_eq!(m.terminal_cost(0.0, 1.0, hbr), 1.0);
        assert_eq!(m.terminal_cost(0.0, cross * 0.999, hbr), 1.0);
        assert_eq!(m.terminal_cost(0.0, cross * 1.001, hbr), -1.0);
    }

    #[test]
    fn sigma_floor_keeps_covariance_regular() {
        let m = RiskModel::default();
        let p = m.state_poc(0.0, 0.0, 0.01);
        assert!(p > 0.0 && p <= 1.0);
    }
}
