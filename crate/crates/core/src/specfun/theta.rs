//! The Hartman–Watson density `Θ_r(t)`.
//!
//! The defining integral
//!
//! ```text
//! Θ_r(t) = r / sqrt(2π³t) · e^{π²/2t} ∫_0^∞ e^{−y²/2t} e^{−r cosh y} sinh y sin(πy/t) dy
//! ```
//!
//! is evaluated panel by panel between consecutive zeros `y = kt` of the
//! sine, and the alternating panel values are added with compensated
//! summation. The prefactor `e^{π²/2t}` amplifies rounding in the cancelling
//! sum, so for `t < 1/2` the same integral is also evaluated along the
//! shifted line `Im y = θ` (`θ` slightly below `π/2`), where the amplifying
//! factor drops to `e^{(π−θ)²/2t}`. The evaluation with the smaller error
//! estimate is returned.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::elementary::KahanSum;
use super::SpecfunError;
use crate::quad::{self, Tolerance};

/// Below this time the result is flagged as low precision.
pub const THETA_LOW_PRECISION_T: f64 = 0.4;
/// Times at or above this use the real-axis panels only.
const CONTOUR_SWITCH_T: f64 = 0.5;
/// Distance of the shifted contour below `Im y = π/2`.
const CONTOUR_OFFSET: f64 = 0.3;
/// Log-magnitude drop at which the integrand is considered negligible.
const LOG_CUTOFF: f64 = 60.0;
/// Below this log-magnitude a value is reported as zero.
const UNDERFLOW_LOG: f64 = -745.0;
/// Relative error estimate above which a value is flagged as low precision.
const LOW_PRECISION_REL_ERR: f64 = 1e-8;

/// One evaluation of `Θ_r(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub r: f64,
    pub t: f64,
    pub value: f64,
    pub err_est: f64,
    /// Set when `t` is below [`THETA_LOW_PRECISION_T`] or the error estimate
    /// is large relative to the value.
    pub low_precision: bool,
}

/// Evaluates the Hartman–Watson density `Θ_r(t)`.
pub fn theta_hw(r: f64, t: f64) -> Result<ThetaPoint, SpecfunError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(SpecfunError::Domain { what: "r", value: r });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(SpecfunError::Domain { what: "t", value: t });
    }
    // |Θ_r(t)| ≤ e^{π²/2t − r} / sqrt(2π³t), from |sin| ≤ 1 on the real axis.
    let log_bound = PI * PI / (2.0 * t) - r - 0.5 * (2.0 * PI.powi(3) * t).ln();
    if log_bound < UNDERFLOW_LOG {
        return Ok(ThetaPoint {
            r,
            t,
            value: 0.0,
            err_est: log_bound.exp(),
            low_precision: false,
        });
    }
    let mut best = real_axis(r, t)?;
    if t < CONTOUR_SWITCH_T {
        let shifted = shifted_contour(r, t, PI / 2.0 - CONTOUR_OFFSET)?;
        if shifted.1 < best.1 {
            best = shifted;
        }
    }
    let (value, err_est) = best;
    let low_precision =
        t < THETA_LOW_PRECISION_T || err_est > LOW_PRECISION_REL_ERR * value.abs();
    Ok(ThetaPoint {
        r,
        t,
        value,
        err_est,
        low_precision,
    })
}

fn prefactor(r: f64, t: f64) -> f64 {
    r / (2.0 * PI.powi(3) * t).sqrt()
}

/// Maximiser of a concave function on `(lo, ∞)` given its derivative,
/// which must be positive just above `lo`.
fn concave_argmax(lo: f64, dg: impl Fn(f64) -> f64) -> f64 {
    let mut hi = lo.max(1e-3) + 1.0;
    while dg(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut a = lo;
    let mut b = hi;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if dg(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// First point beyond `start` where the decreasing function `g` falls below `level`.
fn decreasing_crossing(start: f64, level: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut step = 1.0f64.max(start);
    let mut hi = start + step;
    while g(hi) > level {
        step *= 2.0;
        hi = start + step;
    }
    let mut a = start;
    let mut b = hi;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > level {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Panels between zeros of `sin(πy/t)`, compensated summation.
/// Returns `(value, err_est)`.
fn real_axis(r: f64, t: f64) -> Result<(f64, f64), SpecfunError> {
    // log of e^{−y²/2t − r cosh y} sinh y, concave in y.
    let log_env = |y: f64| -y * y / (2.0 * t) - r * y.cosh() + y.sinh().ln();
    let d_log_env = |y: f64| -y / t - r * y.sinh() + 1.0 / y.tanh();
    let y_peak = concave_argmax(0.0, d_log_env);
    let peak = log_env(y_peak);
    let y_end = decreasing_crossing(y_peak, peak - LOG_CUTOFF, log_env);

    // Scale everything by e^{-peak} to stay clear of underflow.
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        (log_env(y) - peak).exp() * (PI * y / t).sin()
    };
    let tol = Tolerance {
        abs_tol: 1e-17 * t.min(y_end),
        rel_tol: 1e-14,
    };
    let mut sum = KahanSum::new();
    let mut abs_sum = 0.0;
    let mut err = 0.0;
    let mut k = 0usize;
    loop {
        let a = k as f64 * t;
        if a >= y_end {
            break;
        }
        let b = ((k + 1) as f64 * t).min(y_end);
        let res = match quad::integrate_finite_with(f, a, b, tol) {
            Ok(res) => res,
            Err(e) => e.best_estimate().ok_or(e)?,
        };
        sum.add(res.value);
        abs_sum += res.value.abs();
        err += res.err_est;
        k += 1;
    }
    let scale = prefactor(r, t) * (PI * PI / (2.0 * t) + peak).exp();
    let value = scale * sum.total();
    let err_est = scale * (err + 16.0 * f64::EPSILON * abs_sum);
    Ok((value, err_est))
}

/// Same integral along `Im y = theta`, `0 < theta < π/2`.
fn shifted_contour(r: f64, t: f64, theta: f64) -> Result<(f64, f64), SpecfunError> {
    let (sin_th, cos_th) = theta.sin_cos();
    let phi = PI - theta;
    // log-amplitude, concave for t < 1 with maximum at s = 0
    let log_amp = |s: f64| -s * s / (2.0 * t) - r * cos_th * s.cosh() + s.cosh().ln();
    let peak = log_amp(0.0);
    let s_end = decreasing_crossing(0.0, peak - LOG_CUTOFF, log_amp);
    let f = |s: f64| {
        let amp = (-s * s / (2.0 * t) - r * cos_th * (s.cosh() - 1.0)).exp();
        let psi = phi * s / t - r * s.sinh() * sin_th;
        let (sp, cp) = psi.sin_cos();
        amp * (sp * s.sinh() * cos_th + cp * s.cosh() * sin_th)
    };
    let tol = Tolerance {
        abs_tol: 1e-17 * s_end,
        rel_tol: 1e-14,
    };
    let abs_f = |s: f64| {
        (-s * s / (2.0 * t) - r * cos_th * (s.cosh() - 1.0)).exp() * s.cosh()
    };
    let l1 = match quad::integrate_finite_with(abs_f, 0.0, s_end, Tolerance::relative(1e-6)) {
        Ok(res) => res.value,
        Err(e) => e.best_estimate().ok_or(e)?.value,
    };
    let res = match quad::integrate_finite_with(f, 0.0, s_end, tol) {
        Ok(res) => res,
        Err(e) => e.best_estimate().ok_or(e)?,
    };
    let scale = prefactor(r, t) * (phi * phi / (2.0 * t) - r * cos_th).exp();
    let value = scale * res.value;
    let err_est = scale * (res.err_est + 16.0 * f64::EPSILON * l1);
    Ok((value, err_est))
}
