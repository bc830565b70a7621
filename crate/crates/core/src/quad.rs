//! Adaptive quadrature on finite, half-line and full-line domains.
//!
//! Finite intervals use a globally adaptive 21-point Gauss–Kronrod rule.
//! Infinite domains are first mapped onto a bounded parameter interval by a
//! double-exponential substitution (exp-sinh for `(0, ∞)`, sinh-sinh for
//! `ℝ`) and then handed to the same adaptive engine, which copes well with
//! endpoint singularities such as `v^{-1/2}` or `e^{-1/(2v)}/v`.
//!
//! Everything works in plain `f64`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when callers do not specify one.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Relative accuracy below which no further refinement is requested.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Maximum bisection depth of any panel.
pub const MAX_DEPTH: u32 = 60;
/// Hard cap on the number of live panels.
pub const MAX_PANELS: usize = 20_000;

/// Half-width of the parameter interval used by the double-exponential maps.
/// At `|t| = 4.5` the exp-sinh map reaches `e^{±70.7}`.
const DE_HALF_WIDTH: f64 = 4.5;

/// Which rule (and variable change) produced a [`QuadResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Adaptive Gauss–Kronrod on the original finite interval.
    GaussKronrod,
    /// `v = exp(π/2 · sinh t)` on `t ∈ [-4.5, 4.5]`, then Gauss–Kronrod.
    ExpSinh,
    /// `x = sinh(π/2 · sinh t)` on `t ∈ [-4.5, 4.5]`, then Gauss–Kronrod.
    SinhSinh,
}

/// Value, absolute error estimate and evaluation count of one integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub n_evals: usize,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid quadrature input: {0}")]
    InvalidInput(&'static str),
    #[error("integrand returned a non-finite value ({value}) at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("requested accuracy not reached: best estimate {} with error estimate {}", .best.value, .best.err_est)]
    NotConverged { best: QuadResult },
}

impl QuadError {
    /// Best available estimate, when the failure carries one.
    pub fn best_estimate(&self) -> Option<QuadResult> {
        match self {
            QuadError::NotConverged { best } => Some(*best),
            _ => None,
        }
    }

    /// Turns a near miss into success: the best estimate is accepted when
    /// its error estimate is within `fallback`.
    pub fn accept_within(self, fallback: Tolerance) -> Result<QuadResult, QuadError> {
        match self.best_estimate() {
            Some(b) if b.err_est <= fallback.abs_tol.max(fallback.rel_tol * b.value.abs()) => Ok(b),
            _ => Err(self),
        }
    }
}

/// Stopping rule for the adaptive engine.
///
/// Refinement stops once the summed error estimate is below
/// `max(abs_tol, rel_tol · |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl Tolerance {
    /// Absolute tolerance with the default relative cap. A non-positive
    /// value is kept as given so that validation rejects it.
    pub fn absolute(abs_tol: f64) -> Self {
        Tolerance {
            abs_tol,
            rel_tol: if abs_tol > 0.0 { DEFAULT_REL_TOL } else { 0.0 },
        }
    }

    pub fn relative(rel_tol: f64) -> Self {
        Tolerance {
            abs_tol: 0.0,
            rel_tol,
        }
    }

    fn validate(&self) -> Result<(), QuadError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.abs_tol) || !ok(self.rel_tol) || (self.abs_tol == 0.0 && self.rel_tol == 0.0) {
            return Err(QuadError::InvalidInput("tolerance must be positive and finite"));
        }
        Ok(())
    }
}

// Kronrod abscissae, descending; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Number of integrand evaluations per Gauss–Kronrod panel.
pub const PANEL_EVALS: usize = 21;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    depth: u32,
    at_floor: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn checked<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64, QuadError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { x, value: v })
    }
}

/// One 21-point Gauss–Kronrod panel: returns (Kronrod value, error estimate,
/// whether the estimate is pinned at the rounding floor).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, bool), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = checked(f, center)?;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut res_g = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = checked(f, center - dx)?;
        let f2 = checked(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let round_floor = 50.0 * f64::EPSILON * res_abs;
    let at_floor = round_floor >= err;
    if at_floor {
        err = round_floor;
    }
    Ok((value, err, at_floor))
}

/// Single fixed Gauss–Kronrod panel without adaptation; used where panel
/// boundaries are already chosen by the caller.
pub fn gauss_kronrod_panel<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
) -> Result<QuadResult, QuadError> {
    let (value, err_est, _) = gk21(&mut f, a, b)?;
    Ok(QuadResult {
        value,
        err_est,
        n_evals: PANEL_EVALS,
        rule: Rule::GaussKronrod,
    })
}

fn adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: Tolerance,
    rule: Rule,
) -> Result<QuadResult, QuadError> {
    tol.validate()?;
    if !(a.is_finite() && b.is_finite()) || !(a < b) {
        return Err(QuadError::InvalidInput("interval must satisfy a < b with finite ends"));
    }
    let (v0, e0, floor0) = gk21(f, a, b)?;
    let mut n_evals = PANEL_EVALS;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v0,
        err: e0,
        depth: 0,
        at_floor: floor0,
    });
    // Panels that may not be split any further.
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut total_value = v0;
    let mut total_err = e0;
    let mut iterations = 0u64;

    loop {
        let target = tol.abs_tol.max(tol.rel_tol * total_value.abs());
        // Frozen panels alone exceed the target: refinement cannot succeed.
        if total_err <= target || frozen_err > target {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let too_narrow = !(worst.a < mid && mid < worst.b);
        // Splitting cannot beat rounding error, so such panels are final.
        if worst.depth >= MAX_DEPTH || too_narrow || worst.at_floor {
            frozen_value += worst.value;
            frozen_err += worst.err;
            continue;
        }
        if heap.len() + 2 > MAX_PANELS {
            heap.push(worst);
            break;
        }
        let (vl, el, fl) = gk21(f, worst.a, mid)?;
        let (vr, er, fr) = gk21(f, mid, worst.b)?;
        n_evals += 2 * PANEL_EVALS;
        total_value += vl + vr - worst.value;
        total_err += el + er - worst.err;
        let depth = worst.depth + 1;
        heap.push(Panel { a: worst.a, b: mid, value: vl, err: el, depth, at_floor: fl });
        heap.push(Panel { a: mid, b: worst.b, value: vr, err: er, depth, at_floor: fr });
        // Re-sum occasionally so the running totals do not drift.
        iterations += 1;
        if iterations.is_multiple_of(64) {
            total_value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
            total_err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
        }
    }

    let value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
    let err_est = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
    let result = QuadResult {
        value,
        err_est,
        n_evals,
        rule,
    };
    if err_est <= tol.abs_tol.max(tol.rel_tol * value.abs()) {
        Ok(result)
    } else {
        Err(QuadError::NotConverged { best: result })
    }
}

/// `∫_a^b f` with absolute tolerance `tol`.
pub fn integrate_finite<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult, QuadError> {
    integrate_finite_with(f, a, b, Tolerance::absolute(tol))
}

pub fn integrate_finite_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadResult, QuadError> {
    adaptive(&mut f, a, b, tol, Rule::GaussKronrod)
}

/// `∫_0^∞ f` via `v = exp(π/2 · sinh t)`.
///
/// Points where `f` returns exactly zero contribute nothing, so integrands
/// may underflow freely in the tails; any NaN or infinity is an error.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(f: F, tol: f64) -> Result<QuadResult, QuadError> {
    integrate_half_line_with(f, Tolerance::absolute(tol))
}

pub fn integrate_half_line_with<F: FnMut(f64) -> f64>(
    mut f: F,
    tol: Tolerance,
) -> Result<QuadResult, QuadError> {
    let mut g = |t: f64| {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let v = u.exp();
        let fv = f(v);
        if fv == 0.0 {
            return 0.0;
        }
        fv * v * std::f64::consts::FRAC_PI_2 * t.cosh()
    };
    adaptive(&mut g, -DE_HALF_WIDTH, DE_HALF_WIDTH, tol, Rule::ExpSinh)
}

/// `∫_{-∞}^{∞} f` via `x = sinh(π/2 · sinh t)`.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(f: F, tol: f64) -> Result<QuadResult, QuadError> {
    integrate_real_line_with(f, Tolerance::absolute(tol))
}

pub fn integrate_real_line_with<F: FnMut(f64) -> f64>(
    mut f: F,
    tol: Tolerance,
) -> Result<QuadResult, QuadError> {
    let mut g = |t: f64| {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = u.sinh();
        let fx = f(x);
        if fx == 0.0 {
            return 0.0;
        }
        fx * u.cosh() * std::f64::consts::FRAC_PI_2 * t.cosh()
    };
    adaptive(&mut g, -DE_HALF_WIDTH, DE_HALF_WIDTH, tol, Rule::SinhSinh)
}

/// `∫_a^∞ f` for finite `a`, by shifting onto the half line.
pub fn integrate_from_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: Tolerance,
) -> Result<QuadResult, QuadError> {
    if !a.is_finite() {
        return Err(QuadError::InvalidInput("lower limit must be finite"));
    }
    integrate_half_line_with(|v| f(a + v), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_high_degree_polynomials() {
        // 21-point Kronrod integrates degree 31 exactly.
        for deg in [0u32, 5, 17, 30, 31] {
            let r = gauss_kronrod_panel(|x| x.powi(deg as i32), 0.0, 1.0).unwrap();
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((r.value - exact).abs() < 1e-14, "degree {deg}: {}", r.value);
        }
    }

    #[test]
    fn gauss_weights_sum_to_one_half_each_side() {
        let s: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((s - 2.0).abs() < 1e-14);
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_and_gaussian() {
        let r = integrate_finite(|_| 1.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        let r = integrate_finite(|x| (-0.5 * x * x).exp(), -8.0, 8.0, 1e-10).unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn nan_is_reported() {
        let e = integrate_finite(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(e, QuadError::NonFinite { .. }));
    }

    #[test]
    fn bad_interval_is_rejected() {
        assert!(matches!(
            integrate_finite(|x| x, 1.0, 0.0, 1e-10),
            Err(QuadError::InvalidInput(_))
        ));
        assert!(matches!(
            integrate_finite(|x| x, 0.0, 1.0, 0.0),
            Err(QuadError::InvalidInput(_))
        ));
    }

    #[test]
    fn nonconvergence_carries_best_estimate() {
        // A jump discontinuity cannot reach 1e-300 absolute accuracy.
        let tol = Tolerance { abs_tol: 1e-300, rel_tol: 0.0 };
        let e = integrate_finite_with(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, tol).unwrap_err();
        let best = e.best_estimate().expect("best estimate");
        assert!((best.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn half_line_basics() {
        let r = integrate_half_line(|v| (-v).exp(), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.rule, Rule::ExpSinh);
        let r = integrate_half_line(|v| (-v).exp() / v.sqrt(), 1e-10).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn real_line_basics() {
        let r = integrate_real_line(|x| (-x * x).exp(), 1e-10).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let r = integrate_real_line(|x| x * (-x * x).exp(), 1e-10).unwrap();
        assert!(r.value.abs() <= r.err_est.max(1e-15));
    }
}
