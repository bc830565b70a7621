//! Residuals of integral identities among `K_ν`, `I_ν` and `Θ_r(t)`.
//!
//! Every function evaluates both sides independently and returns
//! `|lhs − rhs| / max(|rhs|, floor)`, with [`RESIDUAL_FLOOR`] or, for the
//! Fourier-type identities, [`FOURIER_RESIDUAL_FLOOR`].

use std::f64::consts::PI;

use super::bessel::{bessel_i, k_imag_unchecked, k_unchecked};
use super::gamma::gamma;
use super::theta::theta_hw;
use super::{normal_pdf, KahanSum, SpecfunError};
use crate::quad::{self, QuadResult, Tolerance};

/// Smallest time at which `Θ_r(t)` is evaluated at full precision.
const THETA_MIN_FULL_PRECISION_T: f64 = 0.5;

/// Denominator floor for right-hand sides that vanish or nearly vanish.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Denominator floor for the Fourier-type identities. Their right-hand
/// sides drop to `1e-16` and below for `α = 2π` at small `t`, while the
/// left-hand sides carry absolute rounding near `1e-14` from cancellation
/// in the oscillatory Gaussian integral.
pub const FOURIER_RESIDUAL_FLOOR: f64 = 1e-9;

fn fourier_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs().max(FOURIER_RESIDUAL_FLOOR)
}

/// Relative quadrature error accepted without convergence to the requested tolerance.
const ACCEPT_REL_ERR: f64 = 1e-9;
/// Start of the directly integrated `t` range is chosen among these values.
const SMALL_T_CANDIDATES: [f64; 8] = [0.35, 0.3, 0.25, 0.2, 0.15, 0.12, 0.1, 0.08];
/// Beyond this time the `t`-integral switches to `u = t^{-1/2}`.
const LARGE_T_SWITCH: f64 = 8.0;

pub fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs().max(RESIDUAL_FLOOR)
}

fn value(res: Result<QuadResult, quad::QuadError>) -> Result<f64, SpecfunError> {
    settle(res, 0.0)
}

/// Accepts a non-converged quadrature whose error estimate is still far
/// below the residual tolerances used downstream.
fn settle(res: Result<QuadResult, quad::QuadError>, abs_slack: f64) -> Result<f64, SpecfunError> {
    match res {
        Ok(r) => Ok(r.value),
        Err(e) => match e.best_estimate() {
            Some(b) if b.err_est <= (ACCEPT_REL_ERR * b.value.abs()).max(abs_slack) => Ok(b.value),
            _ => Err(e.into()),
        },
    }
}

fn ensure(cond: bool, what: &'static str, v: f64) -> Result<(), SpecfunError> {
    if cond {
        Ok(())
    } else {
        Err(SpecfunError::Domain { what, value: v })
    }
}

/// Bound on `∫_0^{t0} Θ_r(t) dt` from `∫_0^∞ e^{−λ²t/2} Θ_r(t) dt = I_λ(r)`:
/// for every `λ ≥ 0` the left side is at most `e^{λ²t0/2} I_λ(r)`.
pub fn theta_small_t_mass_bound(r: f64, t0: f64) -> Result<f64, SpecfunError> {
    let mut best = f64::INFINITY;
    for k in 0..=50 {
        let lam = k as f64;
        let b = (0.5 * lam * lam * t0).exp() * bessel_i(lam, r)?;
        best = best.min(b);
    }
    Ok(best)
}

/// `∫_0^∞ e^{−λ²t/2} Θ_r(t) dt`, together with the bound on the part
/// below the integration start that was dropped.
pub fn theta_laplace_t(r: f64, lambda: f64) -> Result<(f64, f64), SpecfunError> {
    ensure(r > 0.0 && r <= 100.0, "r", r)?;
    ensure(lambda.is_finite(), "lambda", lambda)?;
    let lam2 = lambda * lambda;
    let target_scale = bessel_i(lambda.abs(), r)?;
    let mut t0 = *SMALL_T_CANDIDATES.last().expect("non-empty");
    let mut dropped = theta_small_t_mass_bound(r, t0)?;
    for &cand in &SMALL_T_CANDIDATES {
        let b = theta_small_t_mass_bound(r, cand)?;
        if b < 1e-13 * target_scale {
            t0 = cand;
            dropped = b;
            break;
        }
    }
    let tol = Tolerance {
        abs_tol: 1e-13 * target_scale,
        rel_tol: 1e-11,
    };
    let mut err: Option<SpecfunError> = None;
    let mut body = |t: f64| match theta_hw(r, t) {
        Ok(p) => (-0.5 * lam2 * t).exp() * p.value,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let middle = quad::integrate_finite_with(&mut body, t0, LARGE_T_SWITCH, tol);
    if let Some(e) = err.take() {
        return Err(e);
    }
    let middle = value(middle)?;
    // t = u^{-2}: dt = 2u^{-3} du and Θ_r(t) ~ t^{-3/2} keeps the integrand bounded.
    let mut tail_fn = |u: f64| {
        let t = 1.0 / (u * u);
        let damp = (-0.5 * lam2 * t).exp();
        if damp == 0.0 {
            return 0.0;
        }
        match theta_hw(r, t) {
            Ok(p) => 2.0 * damp * p.value / (u * u * u),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let tail = quad::integrate_finite_with(&mut tail_fn, 0.0, LARGE_T_SWITCH.powf(-0.5), tol);
    if let Some(e) = err {
        return Err(e);
    }
    Ok((middle + value(tail)?, dropped))
}

/// Relative gap between `∫_0^∞ e^{−λ²t/2} Θ_r(t) dt` and `I_{|λ|}(r)`.
///
/// The integral starts at the largest `t0` among a fixed candidate list for
/// which the mass below `t0` is provably under `1e-13 · I_{|λ|}(r)`.
pub fn theta_laplace_t_residual(r: f64, lambda: f64) -> Result<f64, SpecfunError> {
    let (lhs, _) = theta_laplace_t(r, lambda)?;
    Ok(relative_residual(lhs, bessel_i(lambda.abs(), r)?))
}

/// Relative gap between `∫_0^∞ (dr/r) Θ_r(t) e^{−r cosh x}` and the
/// Gaussian kernel `(2πt)^{−1/2} e^{−x²/2t}`.
pub fn theta_laplace_r_residual(x: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure(x.is_finite(), "x", x)?;
    ensure(t > 0.0 && t.is_finite(), "t", t)?;
    let c = x.cosh();
    let target = (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    let mut err: Option<SpecfunError> = None;
    let f = |r: f64| {
        let damp = (-r * c).exp();
        if damp == 0.0 || r < 1e-300 {
            return 0.0;
        }
        match theta_hw(r, t) {
            Ok(p) => p.value / r * damp,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let tol = Tolerance {
        abs_tol: 1e-14 * target,
        rel_tol: 1e-11,
    };
    let res = quad::integrate_half_line_with(f, tol);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(relative_residual(value(res)?, target))
}

/// Relative gap in
/// `Θ_r(t) = (r/t) e^{π²/2t} ∫_0^∞ du/(u(u+r)) K_{iπ/t}(u+r) Θ_u(t)`.
pub fn theta_integral_equation_residual(r: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure(r > 0.0 && r.is_finite(), "r", r)?;
    ensure(t > 0.0 && t.is_finite(), "t", t)?;
    let lhs = theta_hw(r, t)?.value;
    let xi = PI / t;
    let mut err: Option<SpecfunError> = None;
    let f = |u: f64| {
        if u + r > 740.0 || u < 1e-300 {
            return 0.0;
        }
        let th = match theta_hw(u, t) {
            Ok(p) => p.value,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        match k_imag_unchecked(xi, u + r) {
            Ok(k) => th * k / (u * (u + r)),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let scale = r / t * (PI * PI / (2.0 * t)).exp();
    let tol = Tolerance {
        abs_tol: 1e-13 * lhs / scale,
        rel_tol: 1e-10,
    };
    let res = quad::integrate_half_line_with(f, tol);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(relative_residual(lhs, scale * value(res)?))
}

/// Relative gap in
/// `K_ν(z) K_ν(w) = ½ ∫_0^∞ (dv/v) e^{−1/2v} e^{−(z²+w²)v/2} K_ν(zwv) dv`.
pub fn bessel_k_product_residual(nu: f64, z: f64, w: f64) -> Result<f64, SpecfunError> {
    ensure(nu.abs() <= 50.0, "nu", nu)?;
    ensure(z > 0.0 && z.is_finite(), "z", z)?;
    ensure(w > 0.0 && w.is_finite(), "w", w)?;
    let lhs = k_unchecked(nu, z)? * k_unchecked(nu, w)?;
    let s = 0.5 * (z * z + w * w);
    let mut err: Option<SpecfunError> = None;
    let f = |v: f64| {
        let expo = -0.5 / v - s * v;
        if expo < -740.0 {
            return 0.0;
        }
        match k_unchecked(nu, z * w * v) {
            Ok(k) => expo.exp() * k / v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let res = quad::integrate_half_line_with(f, Tolerance::relative(1e-12));
    if let Some(e) = err {
        return Err(e);
    }
    Ok(relative_residual(lhs, 0.5 * value(res)?))
}

/// Relative gap in
/// `K_ν(z) = √π z^ν / (2^ν Γ(ν+½)) ∫_0^∞ e^{−z cosh x} sinh^{2ν} x dx`, `ν > −½`.
pub fn bessel_k_sinh_representation_residual(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    ensure(nu > -0.5 && nu <= 50.0, "nu", nu)?;
    ensure(z > 0.0 && z.is_finite(), "z", z)?;
    let lhs = k_unchecked(nu, z)?;
    // scaled by e^{z}
    let f = |x: f64| {
        if x > 700.0 {
            return 0.0;
        }
        (-z * (x.cosh() - 1.0) + 2.0 * nu * x.sinh().ln()).exp()
    };
    let integral = value(quad::integrate_half_line_with(f, Tolerance::relative(1e-13)))?;
    let pref = PI.sqrt() * (nu * (0.5 * z).ln() - z).exp() / gamma(nu + 0.5);
    Ok(relative_residual(lhs, pref * integral))
}

/// Relative gap in `∫ cos(ξx)/(cosh b + cosh x) dx = 2π sin(ξb)/(sinh(πξ) sinh b)`, `b ≠ 0`.
pub fn intrel_residual(xi: f64, b: f64) -> Result<f64, SpecfunError> {
    ensure(b != 0.0 && b.is_finite(), "b", b)?;
    ensure(xi.is_finite(), "xi", xi)?;
    let cb = b.cosh();
    let lhs = value(quad::integrate_real_line_with(
        |x| (xi * x).cos() / (cb + x.cosh()),
        Tolerance::relative(1e-13),
    ))?;
    let rhs = 2.0 * PI * sin_ratio(xi, b) / b.sinh();
    Ok(relative_residual(lhs, rhs))
}

/// `sin(ξb)/sinh(πξ)` with its limit `b/π` at `ξ = 0`.
fn sin_ratio(xi: f64, b: f64) -> f64 {
    if xi.abs() < 1e-8 {
        b / PI
    } else {
        (xi * b).sin() / (PI * xi).sinh()
    }
}

/// Relative gap in `∫_0^∞ e^{−u cosh b} K_{iξ}(u) du = π sin(ξb)/(sinh(πξ) sinh b)`.
pub fn phw_residual(xi: f64, b: f64) -> Result<f64, SpecfunError> {
    ensure(b != 0.0 && b.is_finite(), "b", b)?;
    ensure(xi.abs() <= 50.0, "xi", xi)?;
    let cb = b.cosh();
    let mut err: Option<SpecfunError> = None;
    let f = |u: f64| {
        let damp = (-u * cb).exp();
        if damp == 0.0 || u < 1e-300 {
            return 0.0;
        }
        match k_imag_unchecked(xi, u) {
            Ok(k) => damp * k,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let res = quad::integrate_half_line_with(f, Tolerance::relative(1e-11));
    if let Some(e) = err {
        return Err(e);
    }
    let rhs = PI * sin_ratio(xi, b) / b.sinh();
    Ok(relative_residual(value(res)?, rhs))
}

/// Node spacing of the Gaussian trapezoid rule, in standard-deviation units.
const GAUSS_TRAPEZOID_STEP: f64 = 0.05;
/// `e^{−y²/2}` underflows beyond this.
const GAUSS_TRAPEZOID_HALF_WIDTH: f64 = 38.6;

/// `E[g(B_t)]` for `B_t ~ N(0, t)`, by the trapezoid rule in `y = B_t/√t`.
///
/// For integrands analytic in the strip `|Im y| < d` the rule converges like
/// `e^{−2πd/h}`; every `g` used here has `d ≥ π/(2√t)`. Unlike an adaptive
/// rule, the node set does not depend on parameters inside `g`, so the
/// result is smooth in them and an outer quadrature sees no noise. The
/// half-step sum is compared with the full-step one as a check.
fn gaussian_expectation(t: f64, g: impl Fn(f64) -> f64) -> Result<f64, SpecfunError> {
    let sd = t.sqrt();
    let n = (GAUSS_TRAPEZOID_HALF_WIDTH / GAUSS_TRAPEZOID_STEP).ceil() as i64;
    let mut even = KahanSum::new();
    let mut odd = KahanSum::new();
    let mut l1 = 0.0;
    for k in -n..=n {
        let y = k as f64 * GAUSS_TRAPEZOID_STEP;
        let term = normal_pdf(y) * g(sd * y);
        l1 += term.abs();
        if k % 2 == 0 {
            even.add(term);
        } else {
            odd.add(term);
        }
    }
    let fine = GAUSS_TRAPEZOID_STEP * (even.total() + odd.total());
    let coarse = 2.0 * GAUSS_TRAPEZOID_STEP * even.total();
    if !fine.is_finite() || (fine - coarse).abs() > 1e-12 * GAUSS_TRAPEZOID_STEP * l1 {
        return Err(SpecfunError::Unsupported { what: "t", value: t });
    }
    Ok(fine)
}

/// `sinh b / (cosh b + cosh x)`, bounded by 1 in absolute value.
fn sinh_over_sum(b: f64, x: f64) -> f64 {
    let (ab, ax) = (b.abs(), x.abs());
    let m = ab.max(ax);
    // Multiply through by 2e^{-m} to avoid overflow.
    let num = (ab - m).exp() - (-ab - m).exp();
    let den = (ab - m).exp() + (-ab - m).exp() + (ax - m).exp() + (-ax - m).exp();
    b.signum() * num / den
}

/// Inner expectation `E[sinh B_t sin(αB_t/t)/(cosh B_t + cosh x)]`, or for
/// `α = 0` the derivative in `α` at zero, `E[(B_t/t) sinh B_t/(cosh B_t + cosh x)]`.
fn fourier_inner(alpha: f64, x: f64, t: f64) -> Result<f64, SpecfunError> {
    // |G(x)| ≤ e^{−|x|} E[(1 + |B|/t) e^{|B|}], far below anything representable.
    if x.abs() > 700.0 {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        gaussian_expectation(t, |b| b / t * sinh_over_sum(b, x))
    } else {
        gaussian_expectation(t, |b| (alpha * b / t).sin() * sinh_over_sum(b, x))
    }
}

/// Residual of
/// `∫ dx cos(ξx) E[sinh B_t sin(αB_t/t)/(cosh B_t + cosh x)] = 2π e^{−α²/2t − ξ²t/2} sinh(αξ)/sinh(πξ)`.
///
/// `alpha = 0` selects the limit obtained after dividing both sides by `α`.
/// The expectation is a Gaussian integral evaluated by quadrature.
pub fn fourier_theta_residual(alpha: f64, xi: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure((0.0..=2.0 * PI + 1e-12).contains(&alpha), "alpha", alpha)?;
    ensure(t > 0.0 && t.is_finite(), "t", t)?;
    ensure(xi.is_finite(), "xi", xi)?;
    let mut err: Option<SpecfunError> = None;
    let f = |x: f64| {
        match fourier_inner(alpha, x, t) {
            Ok(g) => (xi * x).cos() * g,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let tol = Tolerance {
        abs_tol: 1e-16,
        rel_tol: 1e-10,
    };
    let lhs = quad::integrate_real_line_with(f, tol);
    if let Some(e) = err {
        return Err(e);
    }
    // cos(ξx) cancels against an O(1) integral: the rounding floor is near 1e-14.
    let lhs = settle(lhs, 1e-13)?;
    let damp = (-0.5 * xi * xi * t).exp();
    let rhs = if alpha == 0.0 {
        // d/dα of the right side at α = 0
        2.0 * PI * damp * if xi.abs() < 1e-8 { 1.0 / PI } else { xi / (PI * xi).sinh() }
    } else {
        let ratio = if xi.abs() < 1e-8 {
            alpha / PI
        } else {
            (alpha * xi).sinh() / (PI * xi).sinh()
        };
        2.0 * PI * (-alpha * alpha / (2.0 * t)).exp() * damp * ratio
    };
    Ok(fourier_residual(lhs, rhs))
}

/// Pointwise special cases of the Fourier identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierRemark {
    /// `(1/t) E[B sinh B/(cosh B + cosh x)] = E[1/(cosh(x+B) + 1)]`.
    ZeroLimit,
    /// `E[sinh B sin(πB/2t)/(cosh B + cosh x)] = e^{−π²/8t} E[1/cosh(x+B)]`.
    HalfPi,
    /// `E[sinh B sin(2πB/t)/(cosh B + cosh x)] = 2√(2π/t) e^{−3π²/2t − x²/2t} cos(πx/t)`.
    TwoPi,
}

/// Residual of one pointwise special case at `(x, t)`.
pub fn fourier_remark_residual(case: FourierRemark, x: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure(t > 0.0 && t.is_finite(), "t", t)?;
    ensure(x.is_finite(), "x", x)?;
    let (lhs, rhs) = match case {
        FourierRemark::ZeroLimit => (
            fourier_inner(0.0, x, t)?,
            gaussian_expectation(t, |b| 1.0 / ((x + b).cosh() + 1.0))?,
        ),
        FourierRemark::HalfPi => (
            fourier_inner(PI / 2.0, x, t)?,
            (-PI * PI / (8.0 * t)).exp() * gaussian_expectation(t, |b| 1.0 / (x + b).cosh())?,
        ),
        FourierRemark::TwoPi => (
            fourier_inner(2.0 * PI, x, t)?,
            2.0 * (2.0 * PI / t).sqrt()
                * (-3.0 * PI * PI / (2.0 * t) - x * x / (2.0 * t)).exp()
                * (PI * x / t).cos(),
        ),
    };
    Ok(fourier_residual(lhs, rhs))
}

/// `√(2μ/π) e^μ K_ν(μ)`, which tends to 1 as `μ → ∞`.
pub fn k_large_argument_ratio(nu: f64, mu: f64) -> Result<f64, SpecfunError> {
    ensure(mu >= 2.0 && mu.is_finite(), "mu", mu)?;
    let scaled = super::bessel::bessel_k_scaled_cf(nu, mu)?;
    Ok((2.0 * mu / PI).sqrt() * scaled)
}

/// Frequency cut-off in [`sinh_fourier_density_residual`].
const INVERSION_CUTOFF: f64 = 40.0;
/// Half-width, in standard deviations of `B_t`, of the range integrated there.
const INVERSION_SD_RANGE: f64 = 8.5;

/// Relative gap between `(1/2π) ∫ dξ E[cos(ξ sinh(x + B_t))]` and the
/// Gaussian density of `B_t` at `x`.
///
/// Cutting the frequencies at `|ξ| ≤ Ξ` turns the left side into
/// `E[sin(Ξ S)/(π S)]` with `S = sinh(x + B_t)`, integrated against the
/// density of `S` panel by panel between zeros of `sin(Ξs)`. The density of
/// `S` is analytic for `|Im s| < 1`, so the dropped frequencies carry
/// `O(e^{−Ξ})`.
pub fn sinh_fourier_density_residual(x: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure(x.is_finite() && x.abs() <= 5.0, "x", x)?;
    ensure(t > 0.0 && t <= 10.0, "t", t)?;
    let sd = t.sqrt();
    let density = |s: f64| normal_pdf((super::argsh(s) - x) / sd) / (sd * s.hypot(1.0));
    let kernel = |s: f64| {
        let arg = INVERSION_CUTOFF * s;
        let sinc = if arg.abs() < 1e-8 { INVERSION_CUTOFF } else { arg.sin() / s };
        density(s) * sinc / PI
    };
    let lo = (x - INVERSION_SD_RANGE * sd).sinh();
    let hi = (x + INVERSION_SD_RANGE * sd).sinh();
    let width = PI / INVERSION_CUTOFF;
    let first = (lo / width).floor() as i64;
    let last = (hi / width).ceil() as i64;
    let mut sum = KahanSum::new();
    let mut err = 0.0;
    for k in first..last {
        let a = (k as f64 * width).max(lo);
        let b = ((k + 1) as f64 * width).min(hi);
        let r = quad::gauss_kronrod_panel(kernel, a, b)?;
        sum.add(r.value);
        err += r.err_est;
    }
    let lhs = sum.total();
    let rhs = normal_pdf(x / sd) / sd;
    if err > 1e-3 * ACCEPT_REL_ERR * rhs {
        return Err(SpecfunError::Unsupported { what: "t", value: t });
    }
    Ok(relative_residual(lhs, rhs))
}

/// `2 ∫_0^∞ (dr/r) K₀(√((r+λ)² + ξ² − λ²)) Θ_r(t)`, which equals
/// `E[exp(−λ e^{B_t} − ξ² A_t / 2)]` for `λ ≥ 0`.
pub fn joint_laplace_theta_integral(lambda: f64, xi: f64, t: f64) -> Result<f64, SpecfunError> {
    ensure(lambda >= 0.0 && lambda.is_finite(), "lambda", lambda)?;
    ensure(xi.is_finite() && (lambda > 0.0 || xi != 0.0), "xi", xi)?;
    ensure(t >= THETA_MIN_FULL_PRECISION_T && t.is_finite(), "t", t)?;
    let mut err: Option<SpecfunError> = None;
    // In s = ln r.
    let f = |s: f64| {
        let r = s.exp();
        if !(1e-300..=740.0).contains(&r) {
            return 0.0;
        }
        let arg = (r * r + 2.0 * r * lambda + xi * xi).sqrt();
        if arg > 740.0 {
            return 0.0;
        }
        let th = match theta_hw(r, t) {
            Ok(p) => p.value,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        match k_unchecked(0.0, arg) {
            Ok(k) => 2.0 * k * th,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let res = quad::integrate_real_line_with(f, Tolerance { abs_tol: 1e-15, rel_tol: 1e-11 });
    if let Some(e) = err {
        return Err(e);
    }
    value(res)
}
