use serde::{Deserialize, Serialize};

use crate::geom::{self, Covariance3, RtnVector};
use crate::risk::RiskModel;

/// Number of decision-grid points (k = 0..=20).
pub const HORIZON: usize = 21;
/// Index of the last grid point, where the terminal risk is assessed.
pub const LAST_STEP: usize = HORIZON - 1;
/// Grid spacing, hours.
pub const STEP_HOURS: f64 = 8.0;
/// Time to TCA at k = 0, hours.
pub const START_HOURS: f64 = 168.0;
/// Grid index of the conventional 24-hour cut-off.
pub const CUTOFF_STEP: usize = 18;
/// Upper bound of the miss-distance and sigma state components, km.
pub const STATE_BOUND_KM: f64 = 100.0;

/// Time to TCA at grid index `k`, hours.
pub fn grid_time(k: usize) -> f64 {
    START_HOURS - STEP_HOURS * k as f64
}

/// Relative state and covariances carried by a full conjunction message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdmGeometry {
    pub covariance_target: Covariance3,
    pub covariance_chaser: Covariance3,
    pub rel_position: RtnVector,
    pub rel_velocity: RtnVector,
}

/// One conjunction data message snapshot. Distances in km, time in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmRecord {
    pub event_id: String,
    pub time_to_tca: f64,
    pub miss_distance: f64,
    /// Debris along-track standard deviation.
    pub sigma_t: f64,
    pub geometry: Option<CdmGeometry>,
    pub r_t: f64,
    pub r_c: f64,
}

impl CdmRecord {
    pub fn hbr(&self) -> f64 {
        self.r_t + self.r_c
    }

    pub fn within_state_bounds(&self) -> bool {
        (0.0..=STATE_BOUND_KM).contains(&self.miss_distance)
            && (0.0..=STATE_BOUND_KM).contains(&self.sigma_t)
            && self.time_to_tca >= 0.0
    }

    /// Approximate PoC, from the full B-plane projection when the message
    /// carries the relative state and covariances, otherwise from the
    /// reduced decision state.
    pub fn poc(&self, risk: &RiskModel) -> f64 {
        if let Some(g) = &self.geometry {
            let sigma = g.covariance_target.combined(&g.covariance_chaser);
            if let Ok(geom) = geom::build_bplane(g.rel_position, g.rel_velocity, &sigma, self.r_t, self.r_c) {
                if let Ok(p) = geom::poc_approx(&geom) {
                    return p;
                }
            }
        }
        risk.state_poc(self.miss_distance, self.sigma_t, self.hbr())
    }
}

/// A conjunction event resampled onto the 8-hour decision grid.
///
/// `records[i]` holds the message in force at grid index `start_k + i`; the
/// last record is always at [`LAST_STEP`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub event_id: String,
    pub start_k: usize,
    pub records: Vec<CdmRecord>,
    /// Service altitude, km, when known.
    pub service_altitude_km: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskLabel {
    High,
    Low,
}

impl EventSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> &CdmRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &CdmRecord {
        self.records.last().expect("non-empty series")
    }

    /// Record at grid index `k`, if the series covers it.
    pub fn at(&self, k: usize) -> Option<&CdmRecord> {
        k.checked_sub(self.start_k).and_then(|i| self.records.get(i))
    }

    pub fn hbr(&self) -> f64 {
        self.first().hbr()
    }

    /// Checks the grid invariants: contiguous indices ending at the last
    /// step, strictly decreasing time to TCA.
    pub fn is_well_formed(&self) -> bool {
        !self.records.is_empty()
            && self.start_k + self.records.len() == HORIZON
            && self.records.windows(2).all(|w| w[1].time_to_tca < w[0].time_to_tca)
    }
}

/// True-risk label of an unmaneuvered event: PoC of its final message
/// against `threshold`.
pub fn label_true_risk(series: &EventSeries, risk: &RiskModel, threshold: f64) -> RiskLabel {
    if series.last().poc(risk) >= threshold {
        RiskLabel::High
    } else {
        RiskLabel::Low
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(d: f64, s: f64, t: f64) -> CdmRecord {
        CdmRecord {
            event_id: "e".into(),
            time_to_tca: t,
            miss_distance: d,
            sigma_t: s,
            geometry: None,
            r_t: 0.005,
            r_c: 0.005,
        }
    }

    #[test]
    fn grid_times() {
        assert_eq!(grid_time(0), 168.0);
        assert_eq!(grid_time(CUTOFF_STEP), 24.0);
        assert_eq!(grid_time(LAST_STEP), 8.0);
    }

    #[test]
    fn single_record_series_is_valid() {
        let s = EventSeries {
            event_id: "e".into(),
            start_k: LAST_STEP,
            records: vec![record(1.0, 0.1, 8.0)],
            service_altitude_km: None,
        };
        assert!(s.is_well_formed());
        assert!(s.at(LAST_STEP).is_some());
        assert!(s.at(3).is_none());
    }

    #[test]
    fn labels() {
        let risk = RiskModel::default();
        let mut s = EventSeries {
            event_id: "e".into(),
            start_k: LAST_STEP,
            records: vec![record(100.0, 0.1, 8.0)],
            service_altitude_km: None,
        };
        assert_eq!(label_true_risk(&s, &risk, 1e-4), RiskLabel::Low);
        // any PoC clears a zero threshold
        assert_eq!(label_true_risk(&s, &risk, 0.0), RiskLabel::High);
        s.records[0].miss_distance = 0.0;
        assert_eq!(label_true_risk(&s, &risk, 1e-4), RiskLabel::High);
    }
}
