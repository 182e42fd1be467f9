//! Maximum-likelihood fitting of the per-step noise model.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use thiserror::Error;

use super::dist::{Gnd, Nct};
use super::noise::{NoiseModel, StepNoise};
use super::record::{EventSeries, HORIZON, LAST_STEP};

/// Fewest residuals a step is fitted on before neighbouring steps are pooled.
pub const MIN_STEP_SAMPLES: usize = 30;

const GND_BETA_RANGE: (f64, f64) = (0.05, 20.0);
const GND_ALPHA_RANGE: (f64, f64) = (1e-8, 1e3);
const NCT_NU_RANGE: (f64, f64) = (0.05, 1e3);
const PENALTY: f64 = 1e300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient data for step {k}: {found} residuals")]
    InsufficientData { k: usize, found: usize },
    #[error("{family} fit diverged at step {k}")]
    FitDiverged { k: usize, family: &'static str },
}

/// Ratio residuals `x_k / x_{k-1} - 1` of each transition into `k`, for the
/// miss distance and the sigma.
///
/// Pairs where the grid point merely holds the previous message are skipped,
/// as are pairs whose previous value is zero.
pub fn residuals(series: &[EventSeries]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = vec![(Vec::new(), Vec::new()); HORIZON];
    for s in series {
        for k in (s.start_k + 1)..HORIZON {
            let (Some(prev), Some(cur)) = (s.at(k - 1), s.at(k)) else { continue };
            if prev.miss_distance == cur.miss_distance && prev.sigma_t == cur.sigma_t {
                continue;
            }
            if prev.miss_distance > 0.0 {
                out[k].0.push(cur.miss_distance / prev.miss_distance - 1.0);
            }
            if prev.sigma_t > 0.0 {
                out[k].1.push(cur.sigma_t / prev.sigma_t - 1.0);
            }
        }
    }
    out
}

/// Fits GND and NCT parameters for every transition `k = 1..=20`.
pub fn fit_noise_model(series: &[EventSeries]) -> Result<NoiseModel, FitError> {
    let res = residuals(series);
    let mut steps = Vec::with_capacity(LAST_STEP);
    for k in 1..HORIZON {
        let d = pooled(&res, k, |r| &r.0)?;
        let s = pooled(&res, k, |r| &r.1)?;
        let gnd = fit_gnd(&d).ok_or(FitError::FitDiverged { k, family: "GND" })?;
        let nct = fit_nct(&s).ok_or(FitError::FitDiverged { k, family: "NCT" })?;
        steps.push(StepNoise { k, samples: d.len().min(s.len()), gnd, nct });
    }
    let initial = series
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| [s.first().miss_distance, s.first().sigma_t])
        .collect::<Vec<_>>();
    if initial.is_empty() {
        return Err(FitError::InsufficientData { k: 0, found: 0 });
    }
    Ok(NoiseModel::new(steps, initial).expect("fitted parameters respect the model invariants"))
}

/// Residuals of step `k`, widened symmetrically to neighbouring steps until
/// at least [`MIN_STEP_SAMPLES`] are available.
fn pooled<'a>(
    res: &'a [(Vec<f64>, Vec<f64>)],
    k: usize,
    pick: impl Fn(&'a (Vec<f64>, Vec<f64>)) -> &'a Vec<f64>,
) -> Result<Vec<f64>, FitError> {
    let mut width = 0;
    loop {
        let lo = k.saturating_sub(width).max(1);
        let hi = (k + width).min(LAST_STEP);
        let v: Vec<f64> = (lo..=hi).flat_map(|j| pick(&res[j]).iter().copied()).collect();
        if v.len() >= MIN_STEP_SAMPLES {
            if width > 0 {
                log::info!("step {k}: pooled steps {lo}..={hi} ({} residuals)", v.len());
            }
            return Ok(v);
        }
        if lo == 1 && hi == LAST_STEP {
            return Err(FitError::InsufficientData { k, found: v.len() });
        }
        width += 1;
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < v.len() {
        v[i] * (1.0 - f) + v[i + 1] * f
    } else {
        v[i]
    }
}

fn minimize<C>(cost: C, start: Vec<f64>, step: &[f64], max_iters: u64) -> Option<(Vec<f64>, f64)>
where
    C: CostFunction<Param = Vec<f64>, Output = f64>,
{
    let mut simplex = vec![start.clone()];
    for (i, h) in step.iter().enumerate() {
        let mut p = start.clone();
        p[i] += h;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-12).ok()?;
    let res = Executor::new(cost, solver).configure(|s| s.max_iters(max_iters)).run().ok()?;
    let state = res.state();
    let best = state.get_best_param()?.clone();
    let c = state.get_best_cost();
    c.is_finite().then_some((best, c))
}

/// GND negative log-likelihood over (μ, ln β) with α profiled out:
/// for fixed μ and β the maximiser is α = (β/n Σ|x-μ|^β)^(1/β).
struct GndProfile<'a> {
    xs: &'a [f64],
}

impl GndProfile<'_> {
    fn alpha(&self, mu: f64, beta: f64) -> f64 {
        let n = self.xs.len() as f64;
        let s: f64 = self.xs.iter().map(|x| (x - mu).abs().powf(beta)).sum();
        (beta * s / n).powf(1.0 / beta)
    }

    fn model(&self, p: &[f64]) -> Option<Gnd> {
        let (mu, beta) = (p[0], p[1].exp());
        if !(GND_BETA_RANGE.0..=GND_BETA_RANGE.1).contains(&beta) {
            return None;
        }
        let alpha = self.alpha(mu, beta);
        if !(GND_ALPHA_RANGE.0..=GND_ALPHA_RANGE.1).contains(&alpha) {
            return None;
        }
        Gnd::new(mu, alpha, beta)
    }
}

impl CostFunction for GndProfile<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        Ok(match self.model(p) {
            Some(g) => {
                let v = -g.sum_ln_pdf(self.xs);
                if v.is_finite() {
                    v
                } else {
                    PENALTY
                }
            }
            None => PENALTY,
        })
    }
}

/// Maximum-likelihood GND fit; `None` if the optimiser leaves the admissible
/// parameter region or the data are degenerate.
pub fn fit_gnd(xs: &[f64]) -> Option<Gnd> {
    if xs.len() < 2 || xs.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mu0 = median(xs);
    let mad = xs.iter().map(|x| (x - mu0).abs()).sum::<f64>() / xs.len() as f64;
    if !(mad > 0.0) {
        return None;
    }
    let cost = GndProfile { xs };
    // start from the best of a few shapes; the profile is cheap
    let start_beta = [0.5f64, 1.0, 2.0]
        .into_iter()
        .min_by(|a, b| {
            let ca = cost.cost(&vec![mu0, a.ln()]).unwrap_or(PENALTY);
            let cb = cost.cost(&vec![mu0, b.ln()]).unwrap_or(PENALTY);
            ca.total_cmp(&cb)
        })
        .expect("non-empty");
    let (mut best, c) = minimize(GndProfile { xs }, vec![mu0, start_beta.ln()], &[0.2 * mad, 0.3], 2000)?;
    // one restart from the optimum guards against a collapsed simplex
    if let Some((b2, c2)) = minimize(GndProfile { xs }, best.clone(), &[0.05 * mad, 0.1], 2000) {
        if c2 <= c {
            best = b2;
        }
    }
    cost.model(&best)
}

/// NCT negative log-likelihood over (ln ν, δ, loc, ln scale).
struct NctLikelihood<'a> {
    xs: &'a [f64],
}

fn nct_from(p: &[f64]) -> Option<Nct> {
    let nu = p[0].exp();
    if !(NCT_NU_RANGE.0..=NCT_NU_RANGE.1).contains(&nu) || p[1].abs() > 50.0 {
        return None;
    }
    Nct::new(nu, p[1], p[2], p[3].exp())
}

impl CostFunction for NctLikelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        Ok(match nct_from(p) {
            Some(n) => {
                let v = -n.sum_ln_pdf(self.xs);
                if v.is_finite() {
                    v
                } else {
                    PENALTY
                }
            }
            None => PENALTY,
        })
    }
}

/// Maximum-likelihood location/scale NCT fit.
pub fn fit_nct(xs: &[f64]) -> Option<Nct> {
    if xs.len() < 2 || xs.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    if !(iqr > 0.0) {
        return None;
    }
    // a Cauchy-like start: the quartiles of t_1 sit at ±1
    let scale0 = 0.5 * iqr;
    let starts = [[2.0f64.ln(), 0.0, med, scale0.ln()], [1.0f64.ln(), -0.5, med + 0.5 * scale0, scale0.ln()], [
        1.0f64.ln(),
        0.5,
        med - 0.5 * scale0,
        scale0.ln(),
    ]];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let Some((p, c)) = minimize(NctLikelihood { xs }, s.to_vec(), &[0.3, 0.3, 0.3 * scale0, 0.3], 3000) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
            best = Some((p, c));
        }
    }
    let (mut p, mut c) = best?;
    for _ in 0..3 {
        let scale = p[3].exp();
        match minimize(NctLikelihood { xs }, p.clone(), &[0.05, 0.05, 0.05 * scale, 0.05], 3000) {
            Some((p2, c2)) if c2 < c - 1e-9 * c.abs() => {
                p = p2;
                c = c2;
            }
            _ => break,
        }
    }
    nct_from(&p)
}
