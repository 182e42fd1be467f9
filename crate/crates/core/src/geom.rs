//! Conjunction geometry and probability of collision.
//!
//! The combined position covariance of the two objects is projected onto the
//! conjunction plane (B-plane), whose x-axis is aligned with the relative
//! position and whose z-axis follows the relative velocity. Two estimates of
//! the probability of collision are provided:
//!
//! * [`poc_foster`]: numerical integration of the projected bivariate Gaussian
//!   over the hard-body disk,
//! * [`poc_approx`]: the closed form obtained by treating the density as
//!   constant over the disk.
//!
//! [`safe_miss_distance`] inverts the closed form to find the miss distance
//! that reduces the probability by a chosen factor.

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::GaussLegendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate conjunction geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("covariance is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NonPsdCovariance { min_eigenvalue: f64 },
    #[error("projected covariance is singular (det = {det:e})")]
    SingularCovariance { det: f64 },
    #[error("requested reduction is infeasible: log argument {log_arg:e} >= 1")]
    InfeasibleReduction { log_arg: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A vector in the radial / tangential (along-track) / normal frame, km or km/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RtnVector {
    pub r: f64,
    pub t: f64,
    pub n: f64,
}

impl RtnVector {
    pub const fn new(r: f64, t: f64, n: f64) -> Self {
        Self { r, t, n }
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.t.is_finite() && self.n.is_finite()
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.r, self.t, self.n)
    }
}

impl std::ops::Sub for RtnVector {
    type Output = RtnVector;
    fn sub(self, o: RtnVector) -> RtnVector {
        RtnVector::new(self.r - o.r, self.t - o.t, self.n - o.n)
    }
}

/// Symmetric positive semi-definite 3×3 position covariance, km².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance3 {
    m: [[f64; 3]; 3],
}

impl Covariance3 {
    /// Symmetrizes `m` as (A + Aᵀ)/2 and checks that every eigenvalue is at
    /// least `-1e-12 * trace`.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self, GeomError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidInput("non-finite covariance entry".into()));
        }
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
        let cov = Self { m: s };
        let eig = cov.eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let trace = s[0][0] + s[1][1] + s[2][2];
        if min < -1e-12 * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(GeomError::NonPsdCovariance { min_eigenvalue: min });
        }
        Ok(cov)
    }

    /// Diagonal covariance from standard deviations.
    pub fn diagonal(sr: f64, st: f64, sn: f64) -> Result<Self, GeomError> {
        Self::new([[sr * sr, 0.0, 0.0], [0.0, st * st, 0.0], [0.0, 0.0, sn * sn]])
    }

    /// Covariance from standard deviations and the correlation coefficients
    /// ρ_TR, ρ_NR, ρ_NT.
    pub fn from_sigmas_correlations(
        sigma: [f64; 3],
        corr_tr: f64,
        corr_nr: f64,
        corr_nt: f64,
    ) -> Result<Self, GeomError> {
        let [sr, st, sn] = sigma;
        let rt = corr_tr * sr * st;
        let rn = corr_nr * sr * sn;
        let tn = corr_nt * st * sn;
        Self::new([[sr * sr, rt, rn], [rt, st * st, tn], [rn, tn, sn * sn]])
    }

    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn entries(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn as_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j])
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = self.as_matrix().symmetric_eigenvalues();
        [e[0], e[1], e[2]]
    }

    /// Σ_target + Σ_chaser.
    pub fn combined(&self, other: &Covariance3) -> Covariance3 {
        let mut m = self.m;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += other.m[i][j];
            }
        }
        Covariance3 { m }
    }
}

/// 2×2 covariance on the conjunction plane, km².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneCovariance {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl PlaneCovariance {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let half = 0.5 * (self.xx - self.yy);
        let r = (half * half + self.xy * self.xy).sqrt();
        [mean - r, mean + r]
    }

    /// ρᵀ Σ⁻¹ ρ.
    pub fn mahalanobis_sq(&self, x: f64, y: f64) -> f64 {
        let det = self.det();
        (self.yy * x * x - 2.0 * self.xy * x * y + self.xx * y * y) / det
    }
}

/// Projection products on the conjunction plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjunctionGeometry {
    pub sigma_b: PlaneCovariance,
    /// Relative position on the plane, `[d_m, 0]`, km.
    pub rho_b: [f64; 2],
    /// Hard-body radius R_T + R_C, km.
    pub hbr: f64,
    /// Rows are the plane axes x̂_B and ŷ_B expressed in RTN.
    pub projection: [[f64; 3]; 2],
}

impl ConjunctionGeometry {
    /// Geometry directly on the plane: miss distance along x, with the given
    /// projected covariance.
    pub fn on_plane(sigma_b: PlaneCovariance, miss_distance: f64, hbr: f64) -> Result<Self, GeomError> {
        if !(hbr > 0.0 && hbr.is_finite()) {
            return Err(GeomError::InvalidInput(format!("hbr must be positive, got {hbr}")));
        }
        if !(miss_distance >= 0.0 && miss_distance.is_finite()) {
            return Err(GeomError::InvalidInput(format!("miss distance must be >= 0, got {miss_distance}")));
        }
        Ok(Self {
            sigma_b,
            rho_b: [miss_distance, 0.0],
            hbr,
            projection: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        })
    }

    pub fn miss_distance(&self) -> f64 {
        self.rho_b[0]
    }

    /// Same plane covariance and radius at a different miss distance.
    pub fn with_miss_distance(&self, d_m: f64) -> Self {
        Self { rho_b: [d_m, 0.0], ..*self }
    }

    fn checked_det(&self) -> Result<f64, GeomError> {
        let det = self.sigma_b.det();
        if !(det > 0.0) || self.sigma_b.xx <= 0.0 {
            return Err(GeomError::SingularCovariance { det });
        }
        Ok(det)
    }
}

/// Projects the combined covariance onto the conjunction plane.
pub fn build_bplane(
    rho_r: RtnVector,
    v_r: RtnVector,
    sigma_combined: &Covariance3,
    r_t: f64,
    r_c: f64,
) -> Result<ConjunctionGeometry, GeomError> {
    if !(r_t > 0.0 && r_c > 0.0) {
        return Err(GeomError::InvalidInput(format!("radii must be positive, got {r_t}, {r_c}")));
    }
    if !rho_r.is_finite() || !v_r.is_finite() {
        return Err(GeomError::InvalidInput("non-finite relative state".into()));
    }
    let rho = rho_r.as_vector();
    let v = v_r.as_vector();
    let (rho_n, v_n) = (rho.norm(), v.norm());
    if rho_n == 0.0 {
        return Err(GeomError::DegenerateGeometry("zero relative position"));
    }
    if v_n == 0.0 {
        return Err(GeomError::DegenerateGeometry("zero relative velocity"));
    }
    let cross = rho.cross(&v);
    let cn = cross.norm();
    if cn <= 1e-12 * rho_n * v_n {
        return Err(GeomError::DegenerateGeometry("relative position parallel to relative velocity"));
    }
    // re-validate in case the caller built the matrix by hand
    let sigma = Covariance3::new(sigma_combined.entries())?;

    let x_hat = rho / rho_n;
    let y_hat = cross / cn;
    let t_b = Matrix2x3::from_rows(&[x_hat.transpose(), y_hat.transpose()]);
    let s_b = t_b * sigma.as_matrix() * t_b.transpose();
    let xy = 0.5 * (s_b[(0, 1)] + s_b[(1, 0)]);

    Ok(ConjunctionGeometry {
        sigma_b: PlaneCovariance { xx: s_b[(0, 0)], xy, yy: s_b[(1, 1)] },
        rho_b: [rho_n, 0.0],
        hbr: r_t + r_c,
        projection: [[x_hat[0], x_hat[1], x_hat[2]], [y_hat[0], y_hat[1], y_hat[2]]],
    })
}

/// Constant-density approximation of the probability of collision, clamped to [0, 1].
pub fn poc_approx(geom: &ConjunctionGeometry) -> Result<f64, GeomError> {
    let det = geom.checked_det()?;
    let [x, y] = geom.rho_b;
    let q = geom.sigma_b.mahalanobis_sq(x, y);
    let p = geom.hbr * geom.hbr / (2.0 * det.sqrt()) * (-0.5 * q).exp();
    Ok(p.clamp(0.0, 1.0))
}

const FOSTER_ORDER: usize = 8;

/// Probability of collision by 2D quadrature of the projected Gaussian over
/// the hard-body disk.
///
/// `steps` is the number of nodes per axis; both axes use a composite
/// 8-point Gauss–Legendre rule with `ceil(steps / 8)` panels.
pub fn poc_foster(geom: &ConjunctionGeometry, steps: usize) -> Result<f64, GeomError> {
    if steps < 16 {
        return Err(GeomError::InvalidInput(format!("steps must be >= 16, got {steps}")));
    }
    let det = geom.checked_det()?;
    let gl = GaussLegendre::new(FOSTER_ORDER);
    let panels = steps.div_ceil(FOSTER_ORDER);
    let r = geom.hbr;
    let [cx, cy] = geom.rho_b;
    let s = geom.sigma_b;

    let mut total = 0.0;
    gl.for_each_composite(-r, r, panels, |x, wx| {
        let half = (r * r - x * x).max(0.0).sqrt();
        let px = x + cx;
        let mut inner = 0.0;
        gl.for_each_composite(-half, half, panels, |y, wy| {
            let py = y + cy;
            inner += wy * (-0.5 * s.mahalanobis_sq(px, py)).exp();
        });
        total += wx * inner;
    });
    let p = total / (2.0 * std::f64::consts::PI * det.sqrt());
    Ok(p.clamp(0.0, 1.0))
}

/// Miss distance at which [`poc_approx`] drops to `current_poc / lambda`.
pub fn safe_miss_distance(geom: &ConjunctionGeometry, current_poc: f64, lambda: f64) -> Result<f64, GeomError> {
    if !(current_poc > 0.0 && current_poc <= 1.0) {
        return Err(GeomError::InvalidInput(format!("current PoC must be in (0, 1], got {current_poc}")));
    }
    if !(lambda >= 1.0) {
        return Err(GeomError::InvalidInput(format!("lambda must be >= 1, got {lambda}")));
    }
    let det = geom.checked_det()?;
    let log_arg = 2.0 * det.sqrt() * current_poc / (geom.hbr * geom.hbr * lambda);
    if log_arg >= 1.0 {
        return Err(GeomError::InfeasibleReduction { log_arg });
    }
    let d2 = -(2.0 * det / geom.sigma_b.yy) * log_arg.ln();
    Ok(d2.sqrt())
}
