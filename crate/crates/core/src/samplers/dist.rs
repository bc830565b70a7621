//! Distribution descriptors, densities and fast distribution functions.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::{GigParams, SamplerError};
use crate::quad;
use crate::specfun::{argsh, ln_bessel_k, ln_gamma, normal_cdf, normal_pdf, theta_hw, SpecfunError};

/// A law with a known density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Dist {
    Gig(GigParams),
    Gamma { nu: f64 },
    /// Density `e^{−μ cosh x} / (2K₀(μ))` on the real line.
    Zmu { mu: f64 },
    /// First hitting time of `a` by Brownian motion.
    HittingTimeBm { a: f64 },
    /// First hitting time of `a` by Brownian motion with drift `μ`.
    HittingTimeDrifted { a: f64, mu: f64 },
    Cauchy,
    Normal { mean: f64, sd: f64 },
    /// Law of `sinh(B_t)`.
    SinhGaussian { t: f64 },
    /// Law of `1/(2γ_ν)` for a gamma variable `γ_ν`.
    HalfInverseGamma { nu: f64 },
    /// Law of `1/Z_t`, density `(2/μ) K₀(μ) Θ_μ(t)`.
    InverseZMarginal { t: f64 },
}

/// Coordinates in which a tabulated law is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// `(0, ∞)`, tabulated in `u = ln x`.
    Positive,
    /// `ℝ`, tabulated in `u = x`.
    Real,
}

fn positive(name: &'static str, v: f64) -> Result<(), SamplerError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SamplerError::invalid(name, v))
    }
}

impl Dist {
    pub fn validate(&self) -> Result<(), SamplerError> {
        match *self {
            Dist::Gig(_) | Dist::Cauchy => Ok(()),
            Dist::Gamma { nu } | Dist::HalfInverseGamma { nu } => positive("nu", nu),
            Dist::Zmu { mu } => positive("mu", mu),
            Dist::HittingTimeBm { a } => {
                if a != 0.0 && a.is_finite() {
                    Ok(())
                } else {
                    Err(SamplerError::invalid("a", a))
                }
            }
            Dist::HittingTimeDrifted { a, mu } => positive("a", a).and(positive("mu", mu)),
            Dist::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(SamplerError::invalid("mean", mean));
                }
                positive("sd", sd)
            }
            Dist::SinhGaussian { t } | Dist::InverseZMarginal { t } => positive("t", t),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Dist::Zmu { .. } | Dist::Cauchy | Dist::Normal { .. } | Dist::SinhGaussian { .. } => Support::Real,
            _ => Support::Positive,
        }
    }

    /// Distribution function in closed form, where one exists.
    fn closed_cdf(&self, x: f64) -> Option<f64> {
        match *self {
            Dist::Cauchy => Some(0.5 + x.atan() / PI),
            Dist::Normal { mean, sd } => Some(normal_cdf((x - mean) / sd)),
            Dist::SinhGaussian { t } => Some(normal_cdf(argsh(x) / t.sqrt())),
            // P(a²/N² ≤ x) = P(|N| ≥ |a|/√x)
            Dist::HittingTimeBm { a } => Some(if x <= 0.0 {
                0.0
            } else {
                2.0 * crate::specfun::normal_sf(a.abs() / x.sqrt())
            }),
            _ => None,
        }
    }

    /// Log-density in the tabulation coordinate `u` (including the Jacobian
    /// `e^u` for positive laws), up to an additive constant.
    fn ln_g(&self, u: f64) -> Result<f64, SpecfunError> {
        Ok(match *self {
            Dist::Gig(p) => p.nu() * u - 0.5 * (p.a() * p.a() * (-u).exp() + p.b() * p.b() * u.exp()),
            Dist::HittingTimeDrifted { a, mu } => -0.5 * u - 0.5 * (a * a * (-u).exp() + mu * mu * u.exp()),
            Dist::Gamma { nu } => nu * u - u.exp(),
            // x = e^u = 1/(2G): g(u) ∝ G^ν e^{−G}
            Dist::HalfInverseGamma { nu } => {
                let g = 0.5 * (-u).exp();
                nu * g.ln() - g
            }
            Dist::Zmu { mu } => -mu * (u.cosh() - 1.0),
            Dist::HittingTimeBm { a } => -0.5 * u - 0.5 * a * a * (-u).exp(),
            Dist::InverseZMarginal { t } => {
                let mu = u.exp();
                let th = theta_hw(mu, t)?.value;
                if th > 0.0 {
                    ln_bessel_k(0.0, mu)? + th.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist::Cauchy => -(u * u).ln_1p(),
            Dist::Normal { mean, sd } => -0.5 * ((u - mean) / sd).powi(2),
            Dist::SinhGaussian { t } => -0.5 * argsh(u).powi(2) / t - 0.5 * (u * u).ln_1p(),
        })
    }

    /// Location and scale of the bulk in the tabulation coordinate.
    fn u_hint(&self) -> (f64, f64) {
        match *self {
            Dist::Gig(p) => {
                let w = (p.nu() + p.nu().hypot(p.a() * p.b())) / (p.b() * p.b());
                let m = if p.nu() >= 0.0 {
                    w.ln()
                } else {
                    (p.a() * p.a() / (p.nu().hypot(p.a() * p.b()) - p.nu())).ln()
                };
                let curv = 0.5 * (p.a() * p.a() * (-m).exp() + p.b() * p.b() * m.exp());
                (m, 1.0 / curv.sqrt())
            }
            Dist::HittingTimeDrifted { a, mu } => {
                Dist::Gig(GigParams::new(-0.5, a, mu).expect("validated")).u_hint()
            }
            Dist::Gamma { nu } => (nu.ln(), 1.0 / nu.sqrt()),
            Dist::HalfInverseGamma { nu } => (-LN_2 - nu.ln(), 1.0 / nu.sqrt()),
            Dist::Zmu { mu } => (0.0, (1.0 / mu.sqrt()).min(1.0)),
            Dist::HittingTimeBm { a } => ((a * a).ln(), 1.0),
            Dist::InverseZMarginal { .. } => (0.0, 1.0),
            Dist::Cauchy => (0.0, 1.0),
            Dist::Normal { mean, sd } => (mean, sd),
            Dist::SinhGaussian { t } => (0.0, t.sqrt().sinh().max(0.1)),
        }
    }
}

/// Pointwise density of `dist` at `x`.
pub fn density(dist: &Dist, x: f64) -> Result<f64, SamplerError> {
    dist.validate()?;
    Ok(match *dist {
        Dist::Gig(p) => p.density(x)?,
        Dist::HittingTimeDrifted { a, mu } => GigParams::new(-0.5, a, mu)?.density(x)?,
        Dist::Gamma { nu } => {
            if x <= 0.0 {
                0.0
            } else {
                ((nu - 1.0) * x.ln() - x - ln_gamma(nu)).exp()
            }
        }
        Dist::HalfInverseGamma { nu } => {
            if x <= 0.0 {
                0.0
            } else {
                let g = 0.5 / x;
                ((nu - 1.0) * g.ln() - g - ln_gamma(nu)).exp() * g / x
            }
        }
        Dist::Zmu { mu } => (-mu * x.cosh() - LN_2 - ln_bessel_k(0.0, mu)?).exp(),
        Dist::HittingTimeBm { a } => {
            if x <= 0.0 {
                0.0
            } else {
                a.abs() / (2.0 * PI * x.powi(3)).sqrt() * (-a * a / (2.0 * x)).exp()
            }
        }
        Dist::Cauchy => 1.0 / (PI * (1.0 + x * x)),
        Dist::Normal { mean, sd } => normal_pdf((x - mean) / sd) / sd,
        Dist::SinhGaussian { t } => {
            let sd = t.sqrt();
            normal_pdf(argsh(x) / sd) / (sd * (1.0 + x * x).sqrt())
        }
        Dist::InverseZMarginal { t } => {
            if x <= 0.0 {
                0.0
            } else {
                2.0 / x * (ln_bessel_k(0.0, x)?.exp()) * theta_hw(x, t)?.value
            }
        }
    })
}

/// Log-density drop, relative to the peak, at which the table ends.
const TAIL_LOG_DROP: f64 = 46.0;
const DEFAULT_PANELS: usize = 4096;
/// Θ-based densities are costly; fewer panels still keep the cubic
/// interpolation error far below KS resolution.
const THETA_PANELS: usize = 256;

#[derive(Debug, Clone)]
enum Table {
    Closed(Dist),
    Grid {
        support: Support,
        lo: f64,
        step: f64,
        /// Normalized distribution function at the panel edges.
        cum: Vec<f64>,
        /// Normalized density (in `u`) at the panel edges.
        dens: Vec<f64>,
        /// Integral of the unnormalized density over the table, relative to
        /// its peak value; kept for normalization checks.
        mass: f64,
        ln_peak: f64,
    },
}

/// Distribution function of one law, ready for many evaluations.
///
/// Laws without a closed form are tabulated once: the density is integrated
/// panel by panel with 21-point Gauss–Kronrod, and the distribution function
/// between panel edges is the cubic Hermite interpolant through the
/// cumulative masses and the density values.
#[derive(Debug, Clone)]
pub struct CdfTable {
    table: Table,
}

impl CdfTable {
    pub fn new(dist: &Dist) -> Result<Self, SamplerError> {
        dist.validate()?;
        if dist.closed_cdf(0.0).is_some() {
            return Ok(Self {
                table: Table::Closed(*dist),
            });
        }
        let panels = match dist {
            Dist::InverseZMarginal { .. } => THETA_PANELS,
            _ => DEFAULT_PANELS,
        };
        let (center, scale) = dist.u_hint();
        Self::from_log_density(dist.support(), center, scale, panels, |u| dist.ln_g(u))
    }

    /// Tabulates the law whose log-density in the coordinate `u` is `ln_g`
    /// (up to a constant). `center` and `scale` locate the bulk.
    pub fn from_log_density(
        support: Support,
        center: f64,
        scale: f64,
        panels: usize,
        ln_g: impl Fn(f64) -> Result<f64, SpecfunError>,
    ) -> Result<Self, SamplerError> {
        if !(scale > 0.0 && scale.is_finite()) || !center.is_finite() {
            return Err(SamplerError::invalid("scale", scale));
        }
        if panels < 2 {
            return Err(SamplerError::invalid("panels", panels as f64));
        }
        let step0 = 0.25 * scale;
        let mut ln_peak = ln_g(center)?;
        let edge = |dir: f64, ln_peak: &mut f64| -> Result<f64, SamplerError> {
            let mut u = center;
            for _ in 0..200_000 {
                u += dir * step0;
                let l = ln_g(u)?;
                if l > *ln_peak {
                    *ln_peak = l;
                }
                if l < *ln_peak - TAIL_LOG_DROP {
                    return Ok(u);
                }
            }
            Err(SamplerError::invalid("tail", u))
        };
        let hi = edge(1.0, &mut ln_peak)?;
        let lo = edge(-1.0, &mut ln_peak)?;
        let step = (hi - lo) / panels as f64;

        let mut err: Option<SpecfunError> = None;
        let mut g = |u: f64| match ln_g(u) {
            Ok(l) => (l - ln_peak).exp(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let mut cum = Vec::with_capacity(panels + 1);
        let mut dens = Vec::with_capacity(panels + 1);
        let mut acc = crate::specfun::KahanSum::new();
        cum.push(0.0);
        dens.push(g(lo));
        for i in 0..panels {
            let a = lo + i as f64 * step;
            let b = if i + 1 == panels { hi } else { a + step };
            let r = quad::gauss_kronrod_panel(&mut g, a, b).map_err(SpecfunError::from)?;
            acc.add(r.value);
            cum.push(acc.total());
            dens.push(g(b));
        }
        if let Some(e) = err {
            return Err(e.into());
        }
        let mass = acc.total();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(SamplerError::invalid("mass", mass));
        }
        for c in cum.iter_mut() {
            *c /= mass;
        }
        for d in dens.iter_mut() {
            *d /= mass;
        }
        Ok(Self {
            table: Table::Grid {
                support,
                lo,
                step,
                cum,
                dens,
                mass,
                ln_peak,
            },
        })
    }

    /// `∫ e^{ln_g(u)} du` over the table: the normalizing constant of the
    /// tabulated log-density, `None` for closed forms.
    pub fn log_total_mass(&self) -> Option<f64> {
        match &self.table {
            Table::Closed(_) => None,
            Table::Grid { mass, ln_peak, .. } => Some(mass.ln() + ln_peak),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.table {
            Table::Closed(d) => d.closed_cdf(x).expect("closed form"),
            Table::Grid {
                support,
                lo,
                step,
                cum,
                dens,
                ..
            } => {
                let u = match support {
                    Support::Real => x,
                    Support::Positive => {
                        if x <= 0.0 {
                            return 0.0;
                        }
                        x.ln()
                    }
                };
                if x.is_nan() {
                    return f64::NAN;
                }
                let pos = (u - lo) / step;
                if pos <= 0.0 {
                    return 0.0;
                }
                let panels = cum.len() - 1;
                if pos >= panels as f64 {
                    return 1.0;
                }
                let i = (pos.floor() as usize).min(panels - 1);
                let tau = pos - i as f64;
                let (c0, c1) = (cum[i], cum[i + 1]);
                let (d0, d1) = (dens[i] * step, dens[i + 1] * step);
                let t2 = tau * tau;
                let t3 = t2 * tau;
                let v = (2.0 * t3 - 3.0 * t2 + 1.0) * c0
                    + (t3 - 2.0 * t2 + tau) * d0
                    + (-2.0 * t3 + 3.0 * t2) * c1
                    + (t3 - t2) * d1;
                v.clamp(c0, c1)
            }
        }
    }
}

/// Distribution function of `dist` at `x`, tabulating if needed. Build a
/// [`CdfTable`] directly for repeated evaluation.
pub fn cdf(dist: &Dist, x: f64) -> Result<f64, SamplerError> {
    Ok(CdfTable::new(dist)?.cdf(x))
}
