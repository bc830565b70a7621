//! Exact samplers for the laws that appear in the identities, with their
//! densities and distribution functions.

mod dist;
mod gig;
mod rng;

use std::f64::consts::PI;

use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::specfun::SpecfunError;

pub use dist::{cdf, density, CdfTable, Dist, Support};
pub use gig::{gig_eigenfunction_residual, sample_gig, GigParams, GigSampler};
pub use rng::{RngStream, StreamKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

impl SamplerError {
    pub(crate) fn invalid(name: &'static str, value: f64) -> Self {
        SamplerError::InvalidParameter { name, value }
    }
}

/// Gamma variate with density `v^{ν−1} e^{−v} / Γ(ν)`.
///
/// Marsaglia–Tsang squeeze on the cube of a Gaussian, with the `U^{1/ν}`
/// boost for `ν < 1` (both inside `rand_distr::Gamma`).
pub fn sample_gamma(nu: f64, rng: &mut RngStream) -> Result<f64, SamplerError> {
    gamma_law(nu).map(|g| g.sample(rng.as_rng()))
}

/// A reusable gamma law, for loops.
pub fn gamma_law(nu: f64) -> Result<Gamma<f64>, SamplerError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(SamplerError::invalid("nu", nu));
    }
    Gamma::new(nu, 1.0).map_err(|_| SamplerError::invalid("nu", nu))
}

/// Standard Cauchy: `tan(π(U − 1/2))`.
pub fn sample_cauchy(rng: &mut RngStream) -> f64 {
    (PI * (rng.uniform() - 0.5)).tan()
}

/// Fair `±1`.
pub fn sample_rademacher(rng: &mut RngStream) -> f64 {
    if rng.coin() {
        1.0
    } else {
        -1.0
    }
}

/// `z_μ = ln(μG)` with `G ~ GIG(0; 1, μ)`; its density is
/// `e^{−μ cosh x} / (2K₀(μ))`.
pub fn sample_zmu(mu: f64, rng: &mut RngStream) -> Result<f64, SamplerError> {
    Ok(ZmuSampler::new(mu)?.sample(rng))
}

/// Repeated draws of `z_μ` for one `μ`.
#[derive(Debug, Clone)]
pub struct ZmuSampler {
    ln_mu: f64,
    gig: GigSampler,
}

impl ZmuSampler {
    pub fn new(mu: f64) -> Result<Self, SamplerError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(SamplerError::invalid("mu", mu));
        }
        Ok(Self {
            ln_mu: mu.ln(),
            gig: GigSampler::new(GigParams::new(0.0, 1.0, mu)?),
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.ln_mu + self.gig.sample(rng).ln()
    }
}

/// Distribution function of `z_μ` by direct quadrature of its tail,
/// for one-off evaluations at varying `μ`.
pub fn zmu_cdf(mu: f64, x: f64) -> Result<f64, SamplerError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SamplerError::invalid("mu", mu));
    }
    if x.is_nan() {
        return Err(SamplerError::invalid("x", x));
    }
    let c = x.abs();
    // ∫_c^∞ e^{−μ(cosh y − 1)} dy over 2 e^{μ} K₀(μ)
    let tail = crate::quad::integrate_half_line_with(
        |s: f64| (-mu * ((c + s).cosh() - 1.0)).exp(),
        crate::quad::Tolerance::relative(1e-12),
    )
    .or_else(|e| e.accept_within(crate::quad::Tolerance::relative(1e-9)))
    .map_err(SpecfunError::from)?
    .value;
    let half = tail / (2.0 * (crate::specfun::ln_bessel_k(0.0, mu)? + mu).exp());
    Ok(if x <= 0.0 { half } else { 1.0 - half })
}

/// First hitting time of `a` by standard Brownian motion: `a²/N²`.
pub fn sample_hitting_time_bm(a: f64, rng: &mut RngStream) -> Result<f64, SamplerError> {
    if !(a != 0.0 && a.is_finite()) {
        return Err(SamplerError::invalid("a", a));
    }
    let n = rng.normal();
    Ok(a * a / (n * n))
}

/// First hitting time of `a > 0` by `B_t + μt`, `μ > 0`: `GIG(−1/2; a, μ)`.
pub fn sample_hitting_time_drifted(a: f64, mu: f64, rng: &mut RngStream) -> Result<f64, SamplerError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(SamplerError::invalid("a", a));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SamplerError::invalid("mu", mu));
    }
    Ok(sample_gig(GigParams::new(-0.5, a, mu)?, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut rng = RngStream::new(0, 0);
        assert!(sample_gamma(0.0, &mut rng).is_err());
        assert!(sample_zmu(-1.0, &mut rng).is_err());
        assert!(sample_hitting_time_bm(0.0, &mut rng).is_err());
        assert!(sample_hitting_time_drifted(1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn rademacher_values() {
        let mut rng = RngStream::new(0, 0);
        for _ in 0..100 {
            let r = sample_rademacher(&mut rng);
            assert!(r == 1.0 || r == -1.0);
        }
    }
}
