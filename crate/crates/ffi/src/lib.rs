//! C ABI over `camdp`.
//!
//! Every fallible function returns a [`CamdpStatus`] and writes its result
//! through an out-pointer. On failure the message of the last error on the
//! calling thread is available from [`camdp_last_error_message`]. Objects
//! behind opaque handles are created by `*_load`/`*_reference` functions and
//! released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use camdp::cdm::{NoiseModel, HORIZON};
use camdp::geom::{self, Covariance3, RtnVector};
use camdp::maneuver::{self, OrbitSpec};
use camdp::policy::{load_params, PolicyParams};
use camdp::risk::RiskModel;
use camdp::simenv::{generate_synthetic, Action, EpisodeConfig, MdpState};

/// Grid points per event, `k = 0..=20`.
pub const CAMDP_HORIZON: usize = 21;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numeric = 5,
    Panic = 6,
}

/// Vector in the radial / tangential / normal frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamdpRtn {
    pub r: f64,
    pub t: f64,
    pub n: f64,
}

impl From<CamdpRtn> for RtnVector {
    fn from(v: CamdpRtn) -> Self {
        RtnVector::new(v.r, v.t, v.n)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CamdpManeuverPlan {
    /// rad
    pub delta_theta: f64,
    pub n_rev: u32,
    /// s
    pub transit_period: f64,
    /// km
    pub transit_radius: f64,
    /// km/s
    pub transit_speed: f64,
    /// km/s
    pub delta_v: f64,
    pub propellant_kg: f64,
}

/// Loaded policy network.
pub struct CamdpPolicy {
    params: PolicyParams,
}

/// Per-step noise model.
pub struct CamdpNoiseModel {
    model: NoiseModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

type FfiResult = Result<(), (CamdpStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> CamdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CamdpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside camdp");
            CamdpStatus::Panic
        }
    }
}

fn invalid(e: impl ToString) -> (CamdpStatus, String) {
    (CamdpStatus::InvalidArgument, e.to_string())
}

fn numeric(e: impl ToString) -> (CamdpStatus, String) {
    (CamdpStatus::Numeric, e.to_string())
}

fn null(name: &str) -> (CamdpStatus, String) {
    (CamdpStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn write_out<T>(out: *mut T, v: T) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (CamdpStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn camdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated when `len > 0`) and returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn camdp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Collision probability on the conjunction plane from a relative state
/// (km, km/s), the combined 3×3 RTN covariance (km², row-major) and the
/// object radii (km). `foster_steps` = 0 selects the small-object
/// approximation, otherwise the quadrature with that many steps (≥ 16).
///
/// # Safety
/// `covariance` must point to 9 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_bplane_poc(
    rel_position: CamdpRtn,
    rel_velocity: CamdpRtn,
    covariance: *const f64,
    r_t: f64,
    r_c: f64,
    foster_steps: u32,
    out: *mut f64,
) -> CamdpStatus {
    guard(|| {
        if covariance.is_null() {
            return Err(null("covariance"));
        }
        let c = std::slice::from_raw_parts(covariance, 9);
        let m = [[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]];
        let cov = Covariance3::new(m).map_err(invalid)?;
        let g = geom::build_bplane(rel_position.into(), rel_velocity.into(), &cov, r_t, r_c).map_err(invalid)?;
        let p = if foster_steps == 0 {
            geom::poc_approx(&g)
        } else {
            geom::poc_foster(&g, foster_steps as usize)
        }
        .map_err(numeric)?;
        write_out(out, p)
    })
}

/// PoC of an MDP state under the default risk model: miss distance and
/// along-track sigma in km, hard-body radius in km.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_state_poc(d_m: f64, sigma_t: f64, hbr_km: f64, out: *mut f64) -> CamdpStatus {
    guard(|| {
        if !(d_m >= 0.0 && sigma_t >= 0.0 && hbr_km > 0.0) {
            return Err(invalid("need d_m >= 0, sigma_t >= 0, hbr > 0"));
        }
        write_out(out, RiskModel::default().state_poc(d_m, sigma_t, hbr_km))
    })
}

/// Miss distance (km) at which the state PoC drops by the factor `lambda`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_safe_miss_distance(
    d_m: f64,
    sigma_t: f64,
    hbr_km: f64,
    lambda: f64,
    out: *mut f64,
) -> CamdpStatus {
    guard(|| {
        if !(d_m >= 0.0 && sigma_t >= 0.0 && hbr_km > 0.0) {
            return Err(invalid("need d_m >= 0, sigma_t >= 0, hbr > 0"));
        }
        let risk = RiskModel::default();
        let g = risk.state_geometry(d_m, sigma_t, hbr_km);
        let p = geom::poc_approx(&g).map_err(numeric)?;
        let d = geom::safe_miss_distance(&g, p, lambda).map_err(invalid)?;
        write_out(out, d)
    })
}

/// Phasing maneuver from a circular service orbit at `altitude_km`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_plan_maneuver(
    delta_theta: f64,
    n_rev: u32,
    altitude_km: f64,
    m_o: f64,
    isp: f64,
    delta_r_cap_km: f64,
    out: *mut CamdpManeuverPlan,
) -> CamdpStatus {
    guard(|| {
        let svc = OrbitSpec::service(altitude_km).map_err(invalid)?;
        let p = maneuver::plan_maneuver(delta_theta, n_rev, &svc, m_o, isp, delta_r_cap_km).map_err(invalid)?;
        write_out(
            out,
            CamdpManeuverPlan {
                delta_theta: p.delta_theta,
                n_rev: p.n_rev,
                transit_period: p.transit_period,
                transit_radius: p.transit_radius,
                transit_speed: p.transit_speed,
                delta_v: p.delta_v,
                propellant_kg: p.propellant_kg,
            },
        )
    })
}

/// Phase shift (rad) moving the miss distance from `d_m` to `d_m_prime`
/// (km) for a service orbit of radius `r_s` (km).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_phase_shift_for_miss(
    rho0: CamdpRtn,
    d_m: f64,
    d_m_prime: f64,
    r_s: f64,
    out: *mut f64,
) -> CamdpStatus {
    guard(|| {
        let dt = maneuver::phase_shift_for_miss(rho0.into(), d_m, d_m_prime, r_s).map_err(invalid)?;
        write_out(out, dt)
    })
}

/// Fuel-minimizing revolution count for the time left to TCA.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_optimal_revolutions(
    delta_theta: f64,
    time_remaining_hr: f64,
    altitude_km: f64,
    delta_r_cap_km: f64,
    out: *mut u32,
) -> CamdpStatus {
    guard(|| {
        let svc = OrbitSpec::service(altitude_km).map_err(invalid)?;
        let n = maneuver::optimal_revolutions(delta_theta, time_remaining_hr, &svc, delta_r_cap_km).map_err(invalid)?;
        write_out(out, n)
    })
}

/// Action of the 24-hour cut-off policy: 1 to maneuver, 0 to delay.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_cutoff_action(
    d_m: f64,
    sigma_t: f64,
    hbr_km: f64,
    moved: bool,
    k: u32,
    out: *mut u32,
) -> CamdpStatus {
    guard(|| {
        let s = MdpState { d_m, sigma_t, moved, k: k as usize };
        if !s.in_bounds() || !(hbr_km > 0.0) {
            return Err(invalid("state out of bounds"));
        }
        let a = camdp::eval::cutoff_action(&s, hbr_km, &RiskModel::default());
        write_out(out, a.index() as u32)
    })
}

/// Loads a policy checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_policy_load(path: *const c_char, out: *mut *mut CamdpPolicy) -> CamdpStatus {
    guard(|| {
        let path = path_arg(path)?;
        let ck = load_params(&path, None).map_err(|e| match e {
            camdp::policy::CheckpointError::Io(e) => (CamdpStatus::Io, e.to_string()),
            e => (CamdpStatus::Parse, e.to_string()),
        })?;
        write_out(out, Box::into_raw(Box::new(CamdpPolicy { params: ck.params })))
    })
}

/// # Safety
/// `policy` must be null or a handle from [`camdp_policy_load`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn camdp_policy_free(policy: *mut CamdpPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

fn state(d_m: f64, sigma_t: f64, moved: bool, k: u32) -> Result<MdpState, (CamdpStatus, String)> {
    let s = MdpState { d_m, sigma_t, moved, k: k as usize };
    if s.in_bounds() {
        Ok(s)
    } else {
        Err(invalid("state out of bounds"))
    }
}

/// Action probabilities `[delay, maneuver]` for a state.
///
/// # Safety
/// `policy` must be a live handle; `out` must point to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn camdp_policy_probabilities(
    policy: *const CamdpPolicy,
    d_m: f64,
    sigma_t: f64,
    moved: bool,
    k: u32,
    out: *mut f64,
) -> CamdpStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let probs = p.params.forward(&state(d_m, sigma_t, moved, k)?);
        std::ptr::copy_nonoverlapping(probs.as_ptr(), out, 2);
        Ok(())
    })
}

/// Greedy action for a state: 1 to maneuver, 0 to delay.
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_policy_act(
    policy: *const CamdpPolicy,
    d_m: f64,
    sigma_t: f64,
    moved: bool,
    k: u32,
    out: *mut u32,
) -> CamdpStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let a: Action = p.params.act_greedy(&state(d_m, sigma_t, moved, k)?);
        write_out(out, a.index() as u32)
    })
}

/// The built-in reference noise model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_noise_model_reference(out: *mut *mut CamdpNoiseModel) -> CamdpStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(CamdpNoiseModel { model: NoiseModel::reference() }))))
}

/// Loads a noise model TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camdp_noise_model_load(path: *const c_char, out: *mut *mut CamdpNoiseModel) -> CamdpStatus {
    guard(|| {
        let path = path_arg(path)?;
        let model = NoiseModel::load(&path).map_err(|e| match e {
            camdp::cdm::NoiseModelError::Io(e) => (CamdpStatus::Io, e.to_string()),
            e => (CamdpStatus::Parse, e.to_string()),
        })?;
        write_out(out, Box::into_raw(Box::new(CamdpNoiseModel { model })))
    })
}

/// # Safety
/// `model` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camdp_noise_model_free(model: *mut CamdpNoiseModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulates `n_events` unmaneuvered events. Event `i`, grid index `k`
/// lands at `[i * CAMDP_HORIZON + k]` of `out_d_m` and `out_sigma_t` (km),
/// each of which must hold `len = n_events * CAMDP_HORIZON` doubles.
///
/// # Safety
/// `model` must be a live handle; both outputs must be valid for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn camdp_noise_model_simulate(
    model: *const CamdpNoiseModel,
    n_events: usize,
    seed: u64,
    out_d_m: *mut f64,
    out_sigma_t: *mut f64,
    len: usize,
) -> CamdpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out_d_m.is_null() || out_sigma_t.is_null() {
            return Err(null("output buffer"));
        }
        if n_events.checked_mul(HORIZON) != Some(len) {
            return Err(invalid(format!("len must be n_events * {HORIZON}")));
        }
        let d = std::slice::from_raw_parts_mut(out_d_m, len);
        let s = std::slice::from_raw_parts_mut(out_sigma_t, len);
        let events = generate_synthetic(&m.model, n_events, &EpisodeConfig::default(), seed);
        for (i, e) in events.iter().enumerate() {
            for (k, r) in e.records.iter().enumerate() {
                d[i * HORIZON + k] = r.miss_distance;
                s[i * HORIZON + k] = r.sigma_t;
            }
        }
        Ok(())
    })
}
