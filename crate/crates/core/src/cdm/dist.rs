//! Noise families for the conjunction-data transitions.
//!
//! Miss-distance ratio noise follows a generalized normal distribution (GND)
//! and along-track-sigma ratio noise a non-central t distribution (NCT) with
//! an added location/scale.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::quad::GaussLegendre;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// GND(μ, α, β): density β / (2αΓ(1/β)) · exp(-(|x-μ|/α)^β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gnd {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Gnd {
    pub fn new(mu: f64, alpha: f64, beta: f64) -> Option<Self> {
        (mu.is_finite() && alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite())
            .then_some(Self { mu, alpha, beta })
    }

    /// log of the normalising constant β / (2αΓ(1/β)).
    fn ln_norm(&self) -> f64 {
        self.beta.ln() - (2.0 * self.alpha).ln() - ln_gamma(1.0 / self.beta)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm() - ((x - self.mu).abs() / self.alpha).powf(self.beta)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu).abs() / self.alpha;
        let half = 0.5 * gamma_lr(1.0 / self.beta, z.powf(self.beta));
        if x >= self.mu {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    pub fn variance(&self) -> f64 {
        let b = self.beta;
        self.alpha * self.alpha * (ln_gamma(3.0 / b) - ln_gamma(1.0 / b)).exp()
    }

    /// Signed Gamma transform: (|X-μ|/α)^β ~ Gamma(1/β, 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = Gamma::new(1.0 / self.beta, 1.0).expect("shape > 0").sample(rng);
        let mag = self.alpha * g.powf(1.0 / self.beta);
        if rng.random::<bool>() {
            self.mu + mag
        } else {
            self.mu - mag
        }
    }

    pub fn sum_ln_pdf(&self, xs: &[f64]) -> f64 {
        let c = self.ln_norm();
        let inv = 1.0 / self.alpha;
        xs.iter().map(|x| c - ((x - self.mu).abs() * inv).powf(self.beta)).sum()
    }
}

/// Location/scale NCT: X = loc + scale · (Z + δ) / sqrt(χ²_ν / ν).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nct {
    pub nu: f64,
    pub delta: f64,
    pub loc: f64,
    pub scale: f64,
}

impl Nct {
    pub fn new(nu: f64, delta: f64, loc: f64, scale: f64) -> Option<Self> {
        (nu > 0.0 && nu.is_finite() && delta.is_finite() && loc.is_finite() && scale > 0.0 && scale.is_finite())
            .then_some(Self { nu, delta, loc, scale })
    }

    /// Standard form (loc 0, scale 1).
    pub fn standard(nu: f64, delta: f64) -> Option<Self> {
        Self::new(nu, delta, 0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let v: f64 = ChiSquared::new(self.nu).expect("dof > 0").sample(rng);
        self.loc + self.scale * (z + self.delta) / (v / self.nu).sqrt()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let t = (x - self.loc) / self.scale;
        NctKernel::new(self.nu, self.delta).ln_pdf_standard(t) - self.scale.ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Sum of log densities over `xs`; for large inputs the standardised
    /// log density is tabulated on an asinh grid and interpolated.
    pub fn sum_ln_pdf(&self, xs: &[f64]) -> f64 {
        let kernel = NctKernel::new(self.nu, self.delta);
        let ln_scale = self.scale.ln();
        if xs.len() < 2 * GRID_POINTS {
            return xs
                .iter()
                .map(|x| kernel.ln_pdf_standard((x - self.loc) / self.scale) - ln_scale)
                .sum();
        }
        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            let t = (x - self.loc) / self.scale;
            (lo.min(t), hi.max(t))
        });
        let table = AsinhTable::build(lo.asinh(), hi.asinh(), |t| kernel.ln_pdf_standard(t));
        xs.iter().map(|x| table.eval(((x - self.loc) / self.scale).asinh()) - ln_scale).sum()
    }
}

const GRID_POINTS: usize = 1024;

/// Cubic interpolation table of a function of u = asinh(t).
struct AsinhTable {
    u0: f64,
    h: f64,
    values: Vec<f64>,
}

impl AsinhTable {
    fn build(u_lo: f64, u_hi: f64, f: impl Fn(f64) -> f64) -> Self {
        let span = (u_hi - u_lo).max(1e-9);
        // two guard cells at each end
        let h = span / (GRID_POINTS - 5) as f64;
        let u0 = u_lo - 2.0 * h;
        let values = (0..GRID_POINTS).map(|i| f((u0 + h * i as f64).sinh())).collect();
        Self { u0, h, values }
    }

    fn eval(&self, u: f64) -> f64 {
        let s = (u - self.u0) / self.h;
        let i = (s.floor() as isize).clamp(1, GRID_POINTS as isize - 3) as usize;
        let f = s - i as f64;
        let (p0, p1, p2, p3) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        // Catmull-Rom
        p1 + 0.5
            * f
            * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// Standard NCT density through the mixture representation
/// f(t) = E_S[ sqrt(S) φ(t sqrt(S) - δ) ], S = χ²_ν/ν, integrated over y = ln S.
struct NctKernel {
    nu: f64,
    delta: f64,
    ln_c: f64,
    gl: GaussLegendre,
}

impl NctKernel {
    fn new(nu: f64, delta: f64) -> Self {
        let half = 0.5 * nu;
        let ln_c = half * half.ln() - ln_gamma(half) - LN_SQRT_2PI;
        Self { nu, delta, ln_c, gl: GaussLegendre::new(8) }
    }

    fn ln_pdf_standard(&self, t: f64) -> f64 {
        let nu = self.nu;
        let d = self.delta;
        let a = 0.5 * (nu + 1.0);
        // exponent in y: a*y - (nu/2) e^y - (t e^{y/2} - δ)^2 / 2
        let expo = |y: f64| {
            let s = y.exp();
            let u = t * (0.5 * y).exp() - d;
            a * y - 0.5 * nu * s - 0.5 * u * u
        };
        let y_star = ((nu + 1.0) / nu).ln();
        let sigma_y = (1.0 / a).sqrt();
        // where |t| e^{y/2} is of order one, or where t e^{y/2} hits δ
        let mut y_ref = y_star;
        if t != 0.0 {
            y_ref = y_ref.min(-2.0 * t.abs().ln());
            if d * t > 0.0 {
                y_ref = y_ref.min(2.0 * (d / t).ln());
            }
        }
        let y_lo = y_ref - 80.0 / (nu + 1.0) - 2.0;
        // right cut: e^x - 1 - x = 80 / (nu + 1)
        let target = 80.0 / (nu + 1.0);
        let mut x: f64 = (1.0 + target).ln().max(1.0);
        for _ in 0..30 {
            x -= (x.exp() - 1.0 - x - target) / (x.exp() - 1.0);
        }
        let y_hi = y_star + x.max(0.5);
        let h = 0.5f64.min(0.5 * sigma_y).min(1.0 / (1.0 + d.abs()));
        let panels = ((y_hi - y_lo) / h).ceil().max(1.0) as usize;

        // log-sum-exp over the quadrature nodes
        let mut m = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(panels * self.gl.order());
        self.gl.for_each_composite(y_lo, y_hi, panels, |y, w| {
            let e = expo(y) + w.ln();
            m = m.max(e);
            terms.push(e);
        });
        let s: f64 = terms.iter().map(|e| (e - m).exp()).sum();
        self.ln_c + m + s.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gnd_matches_reference_values() {
        // scipy.stats.gennorm(beta, loc=0, scale=0.02)
        let g = Gnd::new(0.0, 0.02, 0.59).unwrap();
        assert_relative_eq!(g.ln_pdf(0.01), 2.1237580184324516, max_relative = 1e-12);
        assert_relative_eq!(g.ln_pdf(-0.3), -2.1537978193331626, max_relative = 1e-12);
        assert_relative_eq!(g.cdf(0.01), 0.6085389354909692, max_relative = 1e-10);
        assert_relative_eq!(g.cdf(-0.3), 0.01353434467324022, max_relative = 1e-9);
        let g = Gnd::new(0.0, 0.02, 1.0).unwrap();
        assert_relative_eq!(g.ln_pdf(-1.0), -46.7811241751318, max_relative = 1e-12);
    }

    #[test]
    fn nct_matches_reference_values() {
        // scipy.stats.nct.logpdf(x, nu, delta)
        let cases = [
            (1.05, -0.89, 0.0, -1.5315095498614015),
            (1.05, -0.89, -3.0, -2.6040143491642924),
            (1.05, -0.89, 250.0, -13.781648128383324),
            (1.05, -0.89, -250.0, -11.475836750575764),
            (4.0, 1.5, 2.0, -1.292765891109246),
            (30.0, 0.0, 1.0, -1.4355125791352041),
            (0.6, 2.5, -0.3, -5.335863712630405),
            (2.0, -5.0, -40.0, -7.134075110385456),
            (8.0, 3.0, 0.5, -3.9964979627898836),
        ];
        for (nu, d, x, want) in cases {
            let got = Nct::standard(nu, d).unwrap().ln_pdf(x);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "nu={nu} d={d} x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn nct_location_scale() {
        let a = Nct::new(3.0, 0.5, 1.0, 2.0).unwrap();
        let b = Nct::standard(3.0, 0.5).unwrap();
        assert_relative_eq!(a.ln_pdf(4.0), b.ln_pdf(1.5) - 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn nct_tabulated_sum_matches_direct() {
        let n = Nct::new(1.05, -0.89, 0.01, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..5000).map(|_| n.sample(&mut rng)).collect();
        let direct: f64 = xs.iter().map(|&x| n.ln_pdf(x)).sum();
        let tab = n.sum_ln_pdf(&xs);
        assert!((direct - tab).abs() < 1e-6 * direct.abs(), "{direct} vs {tab}");
    }

    #[test]
    fn gnd_beta_two_is_normal() {
        let g = Gnd::new(0.3, 0.5, 2.0).unwrap();
        let sd = 0.5 / 2f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = sd / (n as f64).sqrt();
        let se_var = sd * sd * (2.0 / (n - 1) as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - sd * sd).abs() < 3.0 * se_var, "var {var}");
        assert_relative_eq!(g.variance(), sd * sd, max_relative = 1e-12);
    }

    #[test]
    fn nct_central_is_symmetric() {
        let t = Nct::standard(5.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let pos = (0..n).filter(|_| t.sample(&mut rng) > 0.0).count() as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((pos - 0.5).abs() < 3.0 * se, "fraction positive {pos}");
    }

    #[test]
    fn gnd_sample_variance_matches_analytic() {
        let g = Gnd::new(0.0, 0.02, 0.59).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let var = (0..n).map(|_| g.sample(&mut rng).powi(2)).sum::<f64>() / n as f64;
        // heavy tails: loose relative band
        assert!((var / g.variance() - 1.0).abs() < 0.05, "{var} vs {}", g.variance());
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Gnd::new(0.0, 0.0, 1.0).is_none());
        assert!(Gnd::new(0.0, 1.0, -1.0).is_none());
        assert!(Nct::new(0.0, 0.0, 0.0, 1.0).is_none());
        assert!(Nct::new(1.0, 0.0, 0.0, 0.0).is_none());
    }
}
