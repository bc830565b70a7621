//! Grid simulation of Brownian motion with drift and of the functionals
//! `A_t = ∫₀ᵗ e^{2B_s} ds` and `Z_t = e^{−B_t} A_t`.
//!
//! Paths are streamed: each step draws one Gaussian increment and folds it
//! into a running trapezoid sum, so memory does not grow with the grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::samplers::RngStream;
use crate::quad::gauss_kronrod_panel;
use crate::specfun::{bessel_k1_over_k0, theta_hw, SpecfunError};

/// Grid resolution used when none is given.
pub const DEFAULT_STEPS_PER_UNIT: u32 = 1 << 14;
/// Smallest accepted grid resolution.
pub const MIN_STEPS_PER_UNIT: u32 = 1 << 6;
/// Largest total number of grid steps in one path.
pub const MAX_STEPS: u64 = 1 << 36;
/// Fraction of reflected steps above which a Z-diffusion run is rejected.
pub const MAX_REFLECTION_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("invalid path configuration: {0}")]
    InvalidConfig(String),
    #[error("safety cap t = {cap} reached before the stopping time")]
    CapHit { cap: f64 },
    #[error("{incidents} of {steps} steps reflected at zero")]
    TooManyReflections { incidents: u64, steps: u64 },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Time horizon, grid resolution and drift of `B_t + drift·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    t_end: f64,
    steps_per_unit: u32,
    drift: f64,
}

impl PathConfig {
    pub fn new(t_end: f64, steps_per_unit: u32, drift: f64) -> Result<Self, PathError> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(PathError::InvalidConfig(format!("t_end = {t_end}")));
        }
        if steps_per_unit < MIN_STEPS_PER_UNIT {
            return Err(PathError::InvalidConfig(format!(
                "steps_per_unit = {steps_per_unit} is below {MIN_STEPS_PER_UNIT}"
            )));
        }
        if !drift.is_finite() {
            return Err(PathError::InvalidConfig(format!("drift = {drift}")));
        }
        let cfg = Self {
            t_end,
            steps_per_unit,
            drift,
        };
        if cfg.n_steps() > MAX_STEPS {
            return Err(PathError::InvalidConfig(format!("{} grid steps", cfg.n_steps())));
        }
        Ok(cfg)
    }

    /// Driftless path on `[0, t_end]` at the default resolution.
    pub fn standard(t_end: f64) -> Result<Self, PathError> {
        Self::new(t_end, DEFAULT_STEPS_PER_UNIT, 0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps_per_unit(&self) -> u32 {
        self.steps_per_unit
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.steps_per_unit)
    }

    /// Number of steps, rounding `t_end` up to the grid. The last step is
    /// shortened so the path ends exactly at `t_end`.
    pub fn n_steps(&self) -> u64 {
        ((self.t_end * f64::from(self.steps_per_unit)) - 1e-9).ceil().max(1.0) as u64
    }

    pub fn with_t_end(self, t_end: f64) -> Result<Self, PathError> {
        Self::new(t_end, self.steps_per_unit, self.drift)
    }

    pub fn with_drift(self, drift: f64) -> Result<Self, PathError> {
        Self::new(self.t_end, self.steps_per_unit, drift)
    }
}

/// Terminal state of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub b_t: f64,
    pub a_t: f64,
    pub z_t: f64,
    /// Stopping time, for runs stopped before the horizon.
    pub tau: Option<f64>,
}

impl FunctionalSample {
    fn new(b_t: f64, a_t: f64, tau: Option<f64>) -> Self {
        Self {
            b_t,
            a_t,
            z_t: (-b_t).exp() * a_t,
            tau,
        }
    }
}

/// Running trapezoid state along one path.
struct Walker {
    b: f64,
    e2b: f64,
    a: f64,
    t: f64,
}

impl Walker {
    fn new() -> Self {
        Self {
            b: 0.0,
            e2b: 1.0,
            a: 0.0,
            t: 0.0,
        }
    }

    #[inline]
    fn step(&mut self, h: f64, drift: f64, rng: &mut RngStream) {
        self.b += h.sqrt() * rng.normal() + drift * h;
        let next = (2.0 * self.b).exp();
        self.a += 0.5 * h * (self.e2b + next);
        self.e2b = next;
        self.t += h;
    }

    fn sample(&self, tau: Option<f64>) -> FunctionalSample {
        FunctionalSample::new(self.b, self.a, tau)
    }
}

/// Step lengths of the grid on `[0, t_end]`.
fn steps(cfg: &PathConfig) -> impl Iterator<Item = f64> {
    let n = cfg.n_steps();
    let dt = cfg.dt();
    let last = cfg.t_end - (n - 1) as f64 * dt;
    (0..n).map(move |k| if k + 1 == n { last } else { dt })
}

/// `(B_t, A_t, Z_t)` at `t = t_end` for `B` with the configured drift.
///
/// The trapezoid rule on `e^{2B}` has pathwise error of order `1/steps_per_unit`;
/// its mean error is second order since `E[e^{2B_s}]` is smooth.
pub fn simulate_functionals(cfg: &PathConfig, rng: &mut RngStream) -> FunctionalSample {
    let mut w = Walker::new();
    for h in steps(cfg) {
        w.step(h, cfg.drift, rng);
    }
    w.sample(None)
}

/// The path at each of the given increasing times, sharing one path.
pub fn simulate_functionals_at(times: &[f64], cfg: &PathConfig, rng: &mut RngStream) -> Result<Vec<FunctionalSample>, PathError> {
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|&t| !(t > 0.0)) {
        return Err(PathError::InvalidConfig("times must be positive and increasing".into()));
    }
    let dt = cfg.dt();
    let mut w = Walker::new();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while t - w.t > 1e-12 * t.max(1.0) {
            w.step((t - w.t).min(dt), cfg.drift, rng);
        }
        out.push(w.sample(None));
    }
    Ok(out)
}

/// Runs until the first grid time with `Z ≥ level`; `cfg.t_end` is a safety cap.
///
/// The crossing is detected on the grid only, so `Z` at the returned time
/// overshoots `level` by at most one step's increment.
pub fn simulate_until_z_hits(level: f64, cfg: &PathConfig, rng: &mut RngStream) -> Result<FunctionalSample, PathError> {
    let s = simulate_z_stopped(level, cfg, rng)?;
    if s.a_t >= level * s.b_t.exp() {
        Ok(s)
    } else {
        Err(PathError::CapHit { cap: cfg.t_end })
    }
}

/// The path stopped at `min(τ_level(Z), cfg.t_end)`, itself a stopping
/// time of `Z`. The `tau` field holds the stopping time.
pub fn simulate_z_stopped(level: f64, cfg: &PathConfig, rng: &mut RngStream) -> Result<FunctionalSample, PathError> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(PathError::InvalidConfig(format!("level = {level}")));
    }
    let mut w = Walker::new();
    for h in steps(cfg) {
        w.step(h, cfg.drift, rng);
        // Z ≥ level ⟺ A ≥ level·e^{B}
        if w.a >= level * w.b.exp() {
            break;
        }
    }
    Ok(w.sample(Some(w.t)))
}

/// `A^{(−ν)}` up to `horizon`, a proxy for the perpetual functional
/// `∫₀^∞ e^{2(B_s − νs)} ds`. The configured horizon and drift are ignored.
pub fn simulate_drifted_a(nu: f64, horizon: f64, cfg: &PathConfig, rng: &mut RngStream) -> Result<f64, PathError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(PathError::InvalidConfig(format!("nu = {nu}")));
    }
    let run = PathConfig::new(horizon, cfg.steps_per_unit, -nu)?;
    Ok(simulate_functionals(&run, rng).a_t)
}

/// Default Dufresne horizon for drift `−ν`.
pub fn default_horizon(nu: f64) -> f64 {
    30.0 / nu
}

/// Drift of the Z diffusion, `z/2 + K₁(1/z)/K₀(1/z)`.
pub fn z_drift(z: f64) -> Result<f64, SpecfunError> {
    if !(z > 0.0) {
        return Err(SpecfunError::Domain { what: "z", value: z });
    }
    Ok(0.5 * z + bessel_k1_over_k0(1.0 / z)?)
}

/// Result of an Euler–Maruyama run of the Z diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDiffusionRun {
    pub z: f64,
    /// Steps that left `(0, ∞)` and were reflected to machine epsilon.
    pub reflections: u64,
    pub steps: u64,
}

/// Euler–Maruyama for `dZ = Z dW + (Z/2 + K₁(1/Z)/K₀(1/Z)) dt` from `z0` to time `t`.
///
/// Steps that would leave `(0, ∞)` are reflected to `f64::EPSILON` and
/// counted; runs with more than [`MAX_REFLECTION_FRACTION`] reflected steps
/// are rejected.
pub fn simulate_z_diffusion(z0: f64, t: f64, cfg: &PathConfig, rng: &mut RngStream) -> Result<ZDiffusionRun, PathError> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(PathError::InvalidConfig(format!("z0 = {z0}")));
    }
    let run = PathConfig::new(t, cfg.steps_per_unit, 0.0)?;
    let mut z = z0;
    let mut reflections = 0u64;
    for h in steps(&run) {
        z += z_drift(z)? * h + z * h.sqrt() * rng.normal();
        if !(z > 0.0) {
            z = f64::EPSILON;
            reflections += 1;
        }
    }
    let steps = run.n_steps();
    if reflections as f64 > MAX_REFLECTION_FRACTION * steps as f64 {
        return Err(PathError::TooManyReflections {
            incidents: reflections,
            steps,
        });
    }
    Ok(ZDiffusionRun { z, reflections, steps })
}

/// Joint density of `(e^{B_t}, A_t)` at `(u, v)`:
/// `(uv)⁻¹ exp(−(1+u²)/2v) Θ_{u/v}(t)`.
pub fn joint_density(u: f64, v: f64, t: f64) -> Result<f64, SpecfunError> {
    if !(u > 0.0 && v > 0.0) {
        return Ok(0.0);
    }
    let theta = theta_hw(u / v, t)?;
    Ok((-(1.0 + u * u) / (2.0 * v)).exp() * theta.value / (u * v))
}

/// Probability of each rectangle `[u_i, u_{i+1}] × [v_j, v_{j+1}]` under
/// [`joint_density`], row-major in `u`. Each cell is integrated by a
/// 21×21 Gauss–Kronrod product rule in logarithmic coordinates.
pub fn joint_cell_masses(u_edges: &[f64], v_edges: &[f64], t: f64) -> Result<Vec<f64>, PathError> {
    let valid = |e: &[f64]| e.len() >= 2 && e[0] > 0.0 && e.windows(2).all(|w| w[0] < w[1]) && e.iter().all(|x| x.is_finite());
    if !valid(u_edges) || !valid(v_edges) {
        return Err(PathError::InvalidConfig("cell edges must be positive and increasing".into()));
    }
    let mut masses = Vec::with_capacity((u_edges.len() - 1) * (v_edges.len() - 1));
    for uw in u_edges.windows(2) {
        for vw in v_edges.windows(2) {
            let mut err: Option<SpecfunError> = None;
            let outer = gauss_kronrod_panel(
                |x: f64| {
                    let u = x.exp();
                    let inner = gauss_kronrod_panel(
                        |y: f64| {
                            let v = y.exp();
                            match joint_density(u, v, t) {
                                Ok(d) => d * u * v,
                                Err(e) => {
                                    err.get_or_insert(e);
                                    0.0
                                }
                            }
                        },
                        vw[0].ln(),
                        vw[1].ln(),
                    );
                    inner.map(|r| r.value).unwrap_or(f64::NAN)
                },
                uw[0].ln(),
                uw[1].ln(),
            )
            .map_err(SpecfunError::from)?;
            if let Some(e) = err {
                return Err(e.into());
            }
            masses.push(outer.value);
        }
    }
    Ok(masses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(PathConfig::new(1.0, 32, 0.0).is_err());
        assert!(PathConfig::new(0.0, 64, 0.0).is_err());
        assert!(PathConfig::new(1.0, 64, f64::NAN).is_err());
        let c = PathConfig::new(1.5, 64, 0.0).unwrap();
        assert_eq!(c.n_steps(), 96);
        assert_eq!(steps(&c).count(), 96);
        let odd = PathConfig::new(0.01, 64, 0.0).unwrap();
        assert!((steps(&odd).sum::<f64>() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn z_is_definitional() {
        let mut rng = RngStream::new(0, 0);
        let s = simulate_functionals(&PathConfig::new(1.0, 256, 0.0).unwrap(), &mut rng);
        assert_eq!(s.z_t, (-s.b_t).exp() * s.a_t);
    }
}
