//! Two-hidden-layer tanh network with a softmax over {delay, maneuver} and
//! hand-written backpropagation of the log-probability.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::cdm::{LAST_STEP, STATE_BOUND_KM};
use crate::simenv::{Action, MdpState};

pub const N_INPUTS: usize = 4;
pub const N_ACTIONS: usize = 2;

/// How the state is mapped to network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScaling {
    /// `(d_m / 100, σ_T / 100, moved, k / 20)`.
    #[default]
    Linear,
    /// `(ln(1 + d_m / 0.1 km) / ln 1001, same for σ_T, moved, k / 20)`;
    /// spreads the sub-kilometre range where the risk changes.
    Log,
}

impl FeatureScaling {
    pub fn code(self) -> u8 {
        match self {
            FeatureScaling::Linear => 0,
            FeatureScaling::Log => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FeatureScaling::Linear),
            1 => Some(FeatureScaling::Log),
            _ => None,
        }
    }

    pub fn features(self, s: &MdpState) -> [f64; N_INPUTS] {
        let moved = if s.moved { 1.0 } else { 0.0 };
        let k = s.k as f64 / LAST_STEP as f64;
        match self {
            FeatureScaling::Linear => [s.d_m / STATE_BOUND_KM, s.sigma_t / STATE_BOUND_KM, moved, k],
            FeatureScaling::Log => {
                let f = |x: f64| (x / LOG_UNIT_KM).ln_1p() / (STATE_BOUND_KM / LOG_UNIT_KM).ln_1p();
                [f(s.d_m), f(s.sigma_t), moved, k]
            }
        }
    }
}

const LOG_UNIT_KM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: [usize; 2],
    pub features: FeatureScaling,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { hidden: [64, 128], features: FeatureScaling::Linear }
    }
}

impl Architecture {
    pub fn n_params(&self) -> usize {
        let [h1, h2] = self.hidden;
        N_INPUTS * h1 + h1 + h1 * h2 + h2 + h2 * N_ACTIONS + N_ACTIONS
    }

    /// Offsets of W1, b1, W2, b2, W3, b3 in the flat parameter vector.
    fn offsets(&self) -> [usize; 6] {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + N_INPUTS * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let w3 = b2 + h2;
        let b3 = w3 + h2 * N_ACTIONS;
        [w1, b1, w2, b2, w3, b3]
    }
}

/// Flat parameter vector. Weight matrices are stored input-major: row `i`
/// of `W` holds the weights from unit `i` to every unit of the next layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: Architecture,
    pub theta: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    x: [f64; N_INPUTS],
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub probs: [f64; N_ACTIONS],
}

impl Activations {
    pub fn new(arch: &Architecture) -> Self {
        Self { x: [0.0; N_INPUTS], h1: vec![0.0; arch.hidden[0]], h2: vec![0.0; arch.hidden[1]], probs: [0.5; N_ACTIONS] }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorise without reassociation
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Two-way softmax from logits, computed from their difference.
#[inline]
fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let z = l1 - l0;
    if z > 0.0 {
        let e = (-z).exp();
        [e / (1.0 + e), 1.0 / (1.0 + e)]
    } else {
        let e = z.exp();
        [1.0 / (1.0 + e), e / (1.0 + e)]
    }
}

impl PolicyParams {
    /// Weights uniform in ±1/sqrt(fan_in), zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut theta = vec![0.0; arch.n_params()];
        let [w1, b1, w2, b2, w3, b3] = arch.offsets();
        let [h1, h2] = arch.hidden;
        for (range, fan_in) in [(w1..b1, N_INPUTS), (w2..b2, h1), (w3..b3, h2)] {
            let r = 1.0 / (fan_in as f64).sqrt();
            let u = Uniform::new_inclusive(-r, r).expect("valid range");
            for v in &mut theta[range] {
                *v = u.sample(rng);
            }
        }
        Self { arch, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Network output for a state; moved states skip the network and
    /// return the forced continuation `[1, 0]`.
    pub fn forward(&self, s: &MdpState) -> [f64; N_ACTIONS] {
        if s.moved {
            return [1.0, 0.0];
        }
        let mut act = Activations::new(&self.arch);
        self.forward_into(s, &mut act);
        act.probs
    }

    /// Network pass that keeps the activations.
    pub fn forward_into(&self, s: &MdpState, act: &mut Activations) {
        let [h1n, h2n] = self.arch.hidden;
        let [w1, b1, w2, b2, w3, b3] = self.arch.offsets();
        let t = &self.theta;
        act.x = self.arch.features.features(s);

        act.h1.copy_from_slice(&t[b1..b1 + h1n]);
        for (i, &xi) in act.x.iter().enumerate() {
            axpy(&mut act.h1, xi, &t[w1 + i * h1n..w1 + (i + 1) * h1n]);
        }
        for v in &mut act.h1 {
            *v = v.tanh();
        }

        act.h2.copy_from_slice(&t[b2..b2 + h2n]);
        for j in 0..h1n {
            axpy(&mut act.h2, act.h1[j], &t[w2 + j * h2n..w2 + (j + 1) * h2n]);
        }
        for v in &mut act.h2 {
            *v = v.tanh();
        }

        let mut logits = [t[b3], t[b3 + 1]];
        for (m, &hm) in act.h2.iter().enumerate() {
            logits[0] += hm * t[w3 + m * N_ACTIONS];
            logits[1] += hm * t[w3 + m * N_ACTIONS + 1];
        }
        act.probs = softmax2(logits[0], logits[1]);
    }

    /// Adds `scale · ∇_θ ln π(action | s)` to `grad`, using the activations of
    /// a preceding [`forward_into`](Self::forward_into) on the same state.
    /// `dz1`/`dz2` are scratch buffers of the hidden sizes.
    pub fn accumulate_log_prob_grad(
        &self,
        act: &Activations,
        action: Action,
        scale: f64,
        grad: &mut [f64],
        scratch: &mut (Vec<f64>, Vec<f64>),
    ) {
        let [h1n, h2n] = self.arch.hidden;
        let [w1, b1, w2, b2, w3, b3] = self.arch.offsets();
        let t = &self.theta;
        let (dz1, dz2) = scratch;
        dz1.resize(h1n, 0.0);
        dz2.resize(h2n, 0.0);

        // d ln softmax_a / d logits = onehot(a) - p
        let a = action.index();
        let dl = [scale * ((a == 0) as u8 as f64 - act.probs[0]), scale * ((a == 1) as u8 as f64 - act.probs[1])];
        grad[b3] += dl[0];
        grad[b3 + 1] += dl[1];
        for m in 0..h2n {
            let hm = act.h2[m];
            grad[w3 + m * N_ACTIONS] += hm * dl[0];
            grad[w3 + m * N_ACTIONS + 1] += hm * dl[1];
            let dh = t[w3 + m * N_ACTIONS] * dl[0] + t[w3 + m * N_ACTIONS + 1] * dl[1];
            dz2[m] = dh * (1.0 - hm * hm);
        }

        axpy(&mut grad[b2..b2 + h2n], 1.0, dz2);
        for j in 0..h1n {
            let hj = act.h1[j];
            let row = w2 + j * h2n..w2 + (j + 1) * h2n;
            axpy(&mut grad[row.clone()], hj, dz2);
            let dh = dot(&t[row], dz2);
            dz1[j] = dh * (1.0 - hj * hj);
        }

        axpy(&mut grad[b1..b1 + h1n], 1.0, dz1);
        for (i, &xi) in act.x.iter().enumerate() {
            axpy(&mut grad[w1 + i * h1n..w1 + (i + 1) * h1n], xi, dz1);
        }
    }

    /// `ln π(action | s)` of a non-moved state.
    pub fn log_prob(&self, s: &MdpState, action: Action) -> f64 {
        self.forward(s)[action.index()].ln()
    }

    /// Most probable action; ties go to delay.
    pub fn act_greedy(&self, s: &MdpState) -> Action {
        let p = self.forward(s);
        if p[1] > p[0] {
            Action::Maneuver
        } else {
            Action::Delay
        }
    }

    /// Draws an action from the policy distribution.
    pub fn sample_action<R: Rng + ?Sized>(&self, s: &MdpState, rng: &mut R) -> Action {
        let p = self.forward(s);
        if rng.random::<f64>() < p[1] {
            Action::Maneuver
        } else {
            Action::Delay
        }
    }
}
