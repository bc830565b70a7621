//! Modified Bessel functions: `K_ν` of real and purely imaginary order and `I_ν`.

use std::f64::consts::PI;

use super::gamma::{ln_gamma, recip_gamma_parts};
use super::SpecfunError;
use crate::quad::{self, Tolerance};

/// Smallest argument accepted by [`bessel_k`].
pub const K_MIN_ARG: f64 = 1e-3;
/// Largest argument accepted by [`bessel_k`].
pub const K_MAX_ARG: f64 = 700.0;
/// Largest order magnitude accepted by [`bessel_k`] and [`bessel_k_imag`].
pub const K_MAX_ORDER: f64 = 50.0;
/// Below this argument `K_ν` comes from the ascending series.
pub const K_SERIES_LIMIT: f64 = 2.0;
/// Largest argument accepted by [`bessel_i`].
pub const I_MAX_ARG: f64 = 100.0;

const SERIES_EPS: f64 = 1e-17;
const MAX_TERMS: usize = 10_000;

fn check_k_args(nu: f64, z: f64) -> Result<(), SpecfunError> {
    if !nu.is_finite() || nu.abs() > K_MAX_ORDER {
        return Err(SpecfunError::Unsupported { what: "order", value: nu });
    }
    if z.is_nan() || z <= 0.0 {
        return Err(SpecfunError::Domain { what: "argument", value: z });
    }
    if !(K_MIN_ARG..=K_MAX_ARG).contains(&z) {
        return Err(SpecfunError::Unsupported { what: "argument", value: z });
    }
    Ok(())
}

/// `K_ν(z)` on the supported window `z ∈ [1e-3, 700]`, `|ν| ≤ 50`.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    check_k_args(nu, z)?;
    k_unchecked(nu, z)
}

/// `ln K_ν(z)` for any finite `z > 0`. Outside the window of [`bessel_k`]
/// the ascending series (small `z`) or the scaled continued fraction
/// (large `z`) is used directly, so the result neither overflows nor
/// underflows.
pub fn ln_bessel_k(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    check_k_args(nu, z.clamp(K_MIN_ARG, K_MAX_ARG))?;
    if z.is_nan() || z <= 0.0 || z.is_infinite() {
        return Err(SpecfunError::Domain { what: "argument", value: z });
    }
    if z > K_MAX_ARG {
        return Ok(bessel_k_scaled_cf(nu, z)?.ln() - z);
    }
    let k = k_unchecked(nu, z)?;
    if k.is_finite() {
        Ok(k.ln())
    } else {
        // Overflow only happens for tiny z, where K_ν(z) ~ Γ(ν) 2^{ν−1} z^{−ν}.
        let nu = nu.abs();
        Ok(ln_gamma(nu) + (nu - 1.0) * std::f64::consts::LN_2 - nu * z.ln())
    }
}

/// `K_ν(z)` for any `z > 0`; underflows to zero for very large `z`.
pub(crate) fn k_unchecked(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    let nu = nu.abs();
    if z < K_SERIES_LIMIT {
        Ok(k_series(nu, z))
    } else {
        Ok(k_integral_scaled(nu, z)? * (-z).exp())
    }
}

/// Splits `ν ≥ 0` into an integer count and a remainder in `[-1/2, 1/2)`.
fn split_order(nu: f64) -> (usize, f64) {
    let n = (nu + 0.5).floor();
    (n as usize, nu - n)
}

/// Returns `(K_μ(x), K_{μ+1}(x))` for `|μ| ≤ 1/2` and `0 < x < 2` by Temme's series.
fn temme_pair(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < 1e-4 {
        1.0 + pimu * pimu / 6.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < 1e-4 { 1.0 + e * e / 6.0 } else { e.sinh() / e };
    let (gam1, gam2) = recip_gamma_parts(mu);
    // 1/Γ(1+μ) and 1/Γ(1−μ)
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..MAX_TERMS {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * SERIES_EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Upward recurrence `K_{ν+1} = K_{ν−1} + (2ν/x) K_ν`, stable for `K`.
fn recur_up(mu: f64, steps: usize, x: f64, mut k_mu: f64, mut k_mu1: f64) -> f64 {
    for i in 1..=steps {
        let next = (mu + i as f64) * 2.0 / x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    k_mu
}

fn k_series(nu: f64, x: f64) -> f64 {
    let (n, mu) = split_order(nu);
    let (k0, k1) = temme_pair(mu, x);
    recur_up(mu, n, x, k0, k1)
}

/// `e^z K_ν(z)` from `K_ν(z) = ½ ∫_0^∞ u^{ν−1} exp(−(z/2)(u + 1/u)) du`,
/// which is the substitution `v = zu/2` in the `v^{ν−1} e^{−v−z²/4v}` form.
fn k_integral_scaled(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    let half_z = 0.5 * z;
    let f = |u: f64| {
        let l = (nu - 1.0) * u.ln() - half_z * (u + 1.0 / u - 2.0);
        l.exp()
    };
    let r = quad::integrate_half_line_with(f, Tolerance::relative(1e-13))
        .or_else(|e| e.accept_within(Tolerance::relative(1e-12)))?;
    Ok(0.5 * r.value)
}

/// Returns `(K_μ(x), K_{μ+1}(x))` for `|μ| ≤ 1/2`, `x ≥ 2`, scaled by `e^x`,
/// from Steed's continued fraction.
fn steed_pair_scaled(mu: f64, x: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < SERIES_EPS {
            break;
        }
    }
    let h = a1 * h;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// `e^x K_ν(x)` by Steed's continued fraction plus upward recurrence.
/// Independent of the quadrature path; valid for `x ≥ 2`.
pub fn bessel_k_scaled_cf(nu: f64, x: f64) -> Result<f64, SpecfunError> {
    if !(x >= K_SERIES_LIMIT) || !x.is_finite() {
        return Err(SpecfunError::Unsupported { what: "argument", value: x });
    }
    let (n, mu) = split_order(nu.abs());
    let (k0, k1) = steed_pair_scaled(mu, x);
    Ok(recur_up(mu, n, x, k0, k1))
}

/// `K_1(x) / K_0(x)` for any `x > 0`, including arguments far beyond the
/// overflow range of `K` itself. Tends to `1` as `x → ∞`.
pub fn bessel_k1_over_k0(x: f64) -> Result<f64, SpecfunError> {
    if x.is_nan() || x <= 0.0 {
        return Err(SpecfunError::Domain { what: "argument", value: x });
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < K_SERIES_LIMIT {
        let (k0, k1) = temme_pair(0.0, x);
        Ok(k1 / k0)
    } else {
        let (k0, k1) = steed_pair_scaled(0.0, x);
        Ok(k1 / k0)
    }
}

/// `K_{iξ}(z) = ∫_0^∞ e^{−z cosh x} cos(ξx) dx`, real and even in `ξ`.
///
/// The absolute error is about `1e-13 · K_0(z)`, so the relative accuracy
/// degrades as `K_{iξ}(z)` shrinks like `e^{−π|ξ|/2}` for large `|ξ|`.
pub fn bessel_k_imag(xi: f64, z: f64) -> Result<f64, SpecfunError> {
    if !xi.is_finite() || xi.abs() > K_MAX_ORDER {
        return Err(SpecfunError::Unsupported { what: "order", value: xi });
    }
    check_k_args(0.0, z)?;
    k_imag_unchecked(xi, z)
}

pub(crate) fn k_imag_unchecked(xi: f64, z: f64) -> Result<f64, SpecfunError> {
    if xi == 0.0 {
        return k_unchecked(0.0, z);
    }
    // Beyond this point e^{−z(cosh x − 1)} < e^{−750}.
    let upper = super::argch(1.0 + 750.0 / z);
    let scale = k_unchecked(0.0, z)? * z.exp();
    let f = |x: f64| (-z * (x.cosh() - 1.0)).exp() * (xi * x).cos();
    let tol = Tolerance {
        abs_tol: 1e-13 * scale,
        rel_tol: 1e-13,
    };
    let r = quad::integrate_finite_with(f, 0.0, upper, tol).or_else(|e| {
        e.accept_within(Tolerance {
            abs_tol: 1e-12 * scale,
            rel_tol: 1e-12,
        })
    })?;
    Ok(r.value * (-z).exp())
}

/// `I_ν(z)` by its ascending series, `ν ≥ 0`, `0 ≤ z ≤ 100`.
pub fn bessel_i(nu: f64, z: f64) -> Result<f64, SpecfunError> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(SpecfunError::Domain { what: "order", value: nu });
    }
    if !z.is_finite() || z < 0.0 {
        return Err(SpecfunError::Domain { what: "argument", value: z });
    }
    if z > I_MAX_ARG {
        return Err(SpecfunError::Unsupported { what: "argument", value: z });
    }
    if z == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * z;
    let q = half * half;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..MAX_TERMS {
        let fk = k as f64;
        let ratio = q / (fk * (fk + nu));
        term *= ratio;
        sum += term;
        // All terms are positive; once the ratio is below 1 the tail is
        // bounded by a geometric series.
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < SERIES_EPS * sum {
            break;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn half_order_closed_form() {
        for &z in &[0.01, 0.5, 1.0, 1.99, 2.0, 2.01, 5.0, 30.0, 300.0] {
            let exact = (PI / (2.0 * z)).sqrt() * (-z).exp();
            assert!(rel(bessel_k(0.5, z).unwrap(), exact) < 1e-12, "z={z}");
            // K_{3/2}(z) = K_{1/2}(z)(1 + 1/z)
            assert!(rel(bessel_k(1.5, z).unwrap(), exact * (1.0 + 1.0 / z)) < 1e-12, "z={z}");
        }
    }

    #[test]
    fn quadrature_branch_matches_continued_fraction() {
        for &nu in &[0.0, 0.25, 1.0, 2.7, 10.0, 33.3, 50.0] {
            for &z in &[2.0, 2.5, 7.0, 40.0, 250.0, 700.0] {
                let quad = k_integral_scaled(nu, z).unwrap();
                let cf = bessel_k_scaled_cf(nu, z).unwrap();
                assert!(rel(quad, cf) < 1e-11, "nu={nu} z={z}: {quad} vs {cf}");
            }
        }
    }

    #[test]
    fn seam_at_two_is_continuous() {
        for &nu in &[0.0, 0.4, 1.0, 3.5, 12.0, 50.0] {
            let below = k_series(nu, 2.0);
            let above = k_integral_scaled(nu, 2.0).unwrap() * (-2.0f64).exp();
            assert!(rel(below, above) < 1e-9, "nu={nu}: {below} vs {above}");
        }
    }

    #[test]
    fn window_is_enforced() {
        assert!(matches!(bessel_k(0.0, 0.0), Err(SpecfunError::Domain { .. })));
        assert!(matches!(bessel_k(0.0, -1.0), Err(SpecfunError::Domain { .. })));
        assert!(matches!(bessel_k(0.0, 1e-4), Err(SpecfunError::Unsupported { .. })));
        assert!(matches!(bessel_k(0.0, 800.0), Err(SpecfunError::Unsupported { .. })));
        assert!(matches!(bessel_k(51.0, 1.0), Err(SpecfunError::Unsupported { .. })));
    }

    #[test]
    fn ratio_limits() {
        let r = bessel_k1_over_k0(50.0).unwrap();
        assert!((r - 1.0).abs() < 0.02);
        assert!((bessel_k1_over_k0(1e12).unwrap() - 1.0).abs() < 1e-11);
        let k0 = bessel_k(0.0, 1.0).unwrap();
        let k1 = bessel_k(1.0, 1.0).unwrap();
        assert!(rel(bessel_k1_over_k0(1.0).unwrap(), k1 / k0) < 1e-14);
        let k0 = bessel_k(0.0, 3.0).unwrap();
        let k1 = bessel_k(1.0, 3.0).unwrap();
        assert!(rel(bessel_k1_over_k0(3.0).unwrap(), k1 / k0) < 1e-11);
    }

    #[test]
    fn imaginary_order_at_zero_is_k0() {
        for &z in &[0.01, 1.0, 4.0] {
            let a = k_imag_unchecked(1e-300, z).unwrap();
            let b = bessel_k(0.0, z).unwrap();
            assert!(rel(a, b) < 1e-10);
        }
    }

    #[test]
    fn i_series_small_cases() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(2.0, 0.0).unwrap(), 0.0);
        // I_{1/2}(z) = sqrt(2/(πz)) sinh z
        for &z in &[0.1, 1.0, 10.0, 90.0] {
            let exact = (2.0 / (PI * z)).sqrt() * z.sinh();
            assert!(rel(bessel_i(0.5, z).unwrap(), exact) < 1e-13, "z={z}");
        }
    }
}
