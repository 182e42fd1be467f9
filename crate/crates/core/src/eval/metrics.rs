use serde::Serialize;

/// Decisions split by true risk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ActionDistribution {
    /// Maneuvered, true risk high.
    pub tp: usize,
    /// Maneuvered, true risk low.
    pub fp: usize,
    /// Stayed, true risk low.
    pub tn: usize,
    /// Stayed, true risk high.
    pub fn_: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl ActionDistribution {
    pub fn record(&mut self, maneuvered: bool, high: bool) {
        match (maneuvered, high) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn high(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn low(&self) -> usize {
        self.fp + self.tn
    }

    pub fn maneuvers(&self) -> usize {
        self.tp + self.fp
    }

    /// TP as a percentage of high-risk events.
    pub fn tp_pct(&self) -> f64 {
        pct(self.tp, self.high())
    }

    pub fn fn_pct(&self) -> f64 {
        pct(self.fn_, self.high())
    }

    /// FP as a percentage of low-risk events.
    pub fn fp_pct(&self) -> f64 {
        pct(self.fp, self.low())
    }

    pub fn tn_pct(&self) -> f64 {
        pct(self.tn, self.low())
    }

    /// Percentage of maneuvers spent on high-risk events.
    pub fn maneuver_precision_pct(&self) -> f64 {
        pct(self.tp, self.maneuvers())
    }
}

/// Propellant spent over an evaluation set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FuelReport {
    /// Propellant of each evaluated episode, kg, in event order.
    pub per_episode_kg: Vec<f64>,
    pub maneuvers: usize,
}

impl FuelReport {
    pub fn total_kg(&self) -> f64 {
        self.per_episode_kg.iter().sum()
    }

    /// Mean propellant per collision-avoidance maneuver, g; 0 without
    /// maneuvers.
    pub fn avg_per_cam_g(&self) -> f64 {
        if self.maneuvers == 0 {
            0.0
        } else {
            1e3 * self.total_kg() / self.maneuvers as f64
        }
    }

    /// Running total over the episodes, kg.
    pub fn cumulative_kg(&self) -> Vec<f64> {
        self.per_episode_kg
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}
