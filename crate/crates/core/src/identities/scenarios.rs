//! Constructions of both sides of every registered identity.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{IdentityError, Params};
use crate::pathsim::{
    default_horizon, joint_cell_masses, joint_density, simulate_drifted_a, simulate_functionals, simulate_z_diffusion,
    simulate_z_stopped, FunctionalSample, PathConfig,
};
use crate::samplers::{
    gamma_law, gig_eigenfunction_residual, sample_cauchy, sample_hitting_time_bm, sample_hitting_time_drifted,
    sample_rademacher, zmu_cdf, CdfTable, Dist, GigParams, RngStream, Support, ZmuSampler,
};
use crate::specfun::checks::{
    bessel_k_product_residual, bessel_k_sinh_representation_residual, fourier_remark_residual, fourier_theta_residual,
    intrel_residual, joint_laplace_theta_integral, phw_residual, sinh_fourier_density_residual,
    theta_integral_equation_residual, theta_laplace_r_residual, theta_laplace_t_residual, FourierRemark,
};
use crate::specfun::{argsh, ln_bessel_k, normal_cdf, normal_pdf, theta_hw, SpecfunError};
use crate::stats::{
    chi_square_binned, ecf_compare, energy_distance_test, ks_two_sample, ks_vs_cdf, mean_vs_target,
    mean_vs_target_with_allowance, TestReport,
};
use rand_distr::Distribution;

pub(super) type Outcome = Result<TestReport, IdentityError>;

/// Permutations in every energy-distance test.
pub const ENERGY_PERMUTATIONS: usize = 200;
/// Safety cap on the time to wait for `Z` to reach a level.
pub const Z_LEVEL_CAP: f64 = 50.0;
/// Mean checks pass within this many standard errors.
pub const MEAN_K_SE: f64 = 4.0;
/// Half-width of the window `|1/Z_t − μ| ≤ δ` in the conditional-law check.
pub const CONDITIONAL_WINDOW: f64 = 0.05;
/// Frequencies at which characteristic functions are compared.
const ECF_GRID_STEP: f64 = 0.1;
const ECF_GRID_LEN: usize = 50;
/// Stream id reserved for permutation draws.
const PERM_STREAM: u64 = 1 << 20;

/// Random streams of one scenario run.
pub(super) struct Ctx {
    base: RngStream,
}

impl Ctx {
    pub(super) fn new(base: RngStream) -> Self {
        Self { base }
    }

    fn rng(&self, k: u64) -> RngStream {
        self.base.split(k)
    }

    fn energy(&self, lhs: &[Vec<f64>], rhs: &[Vec<f64>]) -> Outcome {
        Ok(energy_distance_test(lhs, rhs, ENERGY_PERMUTATIONS, &mut self.rng(PERM_STREAM))?)
    }
}

fn fixed_paths(p: &Params, t: f64, drift: f64, ctx: &Ctx, k: u64) -> Result<Vec<FunctionalSample>, IdentityError> {
    let cfg = PathConfig::new(t, p.steps, drift)?;
    let mut rng = ctx.rng(k);
    Ok((0..p.n).map(|_| simulate_functionals(&cfg, &mut rng)).collect())
}

fn paths(p: &Params, ctx: &Ctx, k: u64) -> Result<Vec<FunctionalSample>, IdentityError> {
    fixed_paths(p, p.t, 0.0, ctx, k)
}

/// Paths stopped at `min(τ_level(Z), cap)`.
fn level_paths(p: &Params, ctx: &Ctx, k: u64) -> Result<Vec<FunctionalSample>, IdentityError> {
    let cfg = PathConfig::new(Z_LEVEL_CAP, p.steps, 0.0)?;
    let mut rng = ctx.rng(k);
    (0..p.n).map(|_| Ok(simulate_z_stopped(p.level, &cfg, &mut rng)?)).collect()
}

fn draws(n: usize, ctx: &Ctx, k: u64, mut f: impl FnMut(&mut RngStream) -> f64) -> Vec<f64> {
    let mut rng = ctx.rng(k);
    (0..n).map(|_| f(&mut rng)).collect()
}

fn try_draws(n: usize, ctx: &Ctx, k: u64, mut f: impl FnMut(&mut RngStream) -> Result<f64, IdentityError>) -> Result<Vec<f64>, IdentityError> {
    let mut rng = ctx.rng(k);
    (0..n).map(|_| f(&mut rng)).collect()
}

fn gaussian(t: f64, rng: &mut RngStream) -> f64 {
    t.sqrt() * rng.normal()
}

fn invalid(key: &str, value: f64, reason: &'static str) -> IdentityError {
    IdentityError::InvalidOverride {
        key: key.to_owned(),
        value,
        reason,
    }
}

/// Reports the grid cell with the largest residual-to-tolerance ratio.
fn worst_cell<E>(cells: impl IntoIterator<Item = Result<(f64, f64), E>>) -> Outcome
where
    IdentityError: From<E>,
{
    let mut worst: Option<(f64, f64)> = None;
    for cell in cells {
        let (res, tol) = cell?;
        let res = if res.is_nan() { f64::INFINITY } else { res };
        if worst.is_none_or(|(r, t)| res / tol > r / t) {
            worst = Some((res, tol));
        }
    }
    let (res, tol) = worst.ok_or_else(|| invalid("grid", 0.0, "empty grid"))?;
    Ok(TestReport::residual(res, tol, false))
}

// ---- Bougerol's identity and its extensions -------------------------------

pub(super) fn bougerol_basic(p: &Params, ctx: &Ctx) -> Outcome {
    let mut beta = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?.iter().map(|s| s.a_t.sqrt() * beta.normal()).collect();
    let rhs = draws(p.n, ctx, 2, |r| gaussian(p.t, r).sinh());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

/// `A_t` replaced by `t`: a Gaussian against `sinh` of a Gaussian.
pub(super) fn neg_bougerol_time(p: &Params, ctx: &Ctx) -> Outcome {
    let lhs = draws(p.n, ctx, 1, |r| gaussian(p.t, r));
    let rhs = draws(p.n, ctx, 2, |r| gaussian(p.t, r).sinh());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn bougerol_shifted(p: &Params, ctx: &Ctx) -> Outcome {
    let sx = p.x.sinh();
    let mut beta = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| s.b_t.exp() * sx + s.a_t.sqrt() * beta.normal())
        .collect();
    let rhs = draws(p.n, ctx, 2, |r| (p.x + gaussian(p.t, r)).sinh());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn time_reversal(p: &Params, ctx: &Ctx) -> Outcome {
    let lhs: Vec<Vec<f64>> = paths(p, ctx, 0)?
        .iter()
        .map(|s| vec![(-s.b_t).exp(), (-2.0 * s.b_t).exp() * s.a_t])
        .collect();
    let rhs: Vec<Vec<f64>> = paths(p, ctx, 1)?.iter().map(|s| vec![s.b_t.exp(), s.a_t]).collect();
    ctx.energy(&lhs, &rhs)
}

/// Reversal without the `e^{−2B}` factor on the functional.
pub(super) fn neg_time_reversal(p: &Params, ctx: &Ctx) -> Outcome {
    let lhs: Vec<Vec<f64>> = paths(p, ctx, 0)?.iter().map(|s| vec![(-s.b_t).exp(), s.a_t]).collect();
    let rhs: Vec<Vec<f64>> = paths(p, ctx, 1)?.iter().map(|s| vec![s.b_t.exp(), s.a_t]).collect();
    ctx.energy(&lhs, &rhs)
}

/// `(e^{B}sinh x + β(A), atan(C e^{B}cosh x + β̂(A)), Z)` against
/// `(sinh(x+B), atan(C cosh(x+B)), Z)` on independent stopped paths.
fn tm1(p: &Params, ctx: &Ctx, lhs_paths: &[FunctionalSample], rhs_paths: &[FunctionalSample]) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(10);
    let lhs: Vec<Vec<f64>> = lhs_paths
        .iter()
        .map(|s| {
            let e = s.b_t.exp();
            let sd = s.a_t.sqrt();
            let first = e * sx + sd * r.normal();
            let second = sample_cauchy(&mut r) * e * cx + sd * r.normal();
            vec![first, second.atan(), s.z_t]
        })
        .collect();
    let mut r = ctx.rng(11);
    let rhs: Vec<Vec<f64>> = rhs_paths
        .iter()
        .map(|s| {
            let y = p.x + s.b_t;
            vec![y.sinh(), (sample_cauchy(&mut r) * y.cosh()).atan(), s.z_t]
        })
        .collect();
    ctx.energy(&lhs, &rhs)
}

pub(super) fn tm1_fixed_time(p: &Params, ctx: &Ctx) -> Outcome {
    tm1(p, ctx, &paths(p, ctx, 0)?, &paths(p, ctx, 1)?)
}

pub(super) fn tm1_hitting_time(p: &Params, ctx: &Ctx) -> Outcome {
    tm1(p, ctx, &level_paths(p, ctx, 0)?, &level_paths(p, ctx, 1)?)
}

pub(super) fn tm1_prime(p: &Params, ctx: &Ctx) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(10);
    let lhs = paths(p, ctx, 0)?
        .iter()
        .map(|s| {
            let e = s.b_t.exp();
            let first = e * sx + s.a_t.sqrt() * r.normal();
            let second = sample_hitting_time_bm(e * cx, &mut r)? + s.a_t;
            Ok(vec![first, second.atan(), s.z_t])
        })
        .collect::<Result<Vec<_>, IdentityError>>()?;
    let mut r = ctx.rng(11);
    let rhs = paths(p, ctx, 1)?
        .iter()
        .map(|s| {
            let y = p.x + s.b_t;
            Ok(vec![y.sinh(), sample_hitting_time_bm(y.cosh(), &mut r)?.atan(), s.z_t])
        })
        .collect::<Result<Vec<_>, IdentityError>>()?;
    ctx.energy(&lhs, &rhs)
}

/// `τ_{cosh(x+B)}(B̂^{(cosh x / Z)}) / Z` for one path.
fn tm2_second(x: f64, s: &FunctionalSample, r: &mut RngStream) -> Result<f64, IdentityError> {
    Ok(sample_hitting_time_drifted((x + s.b_t).cosh(), x.cosh() / s.z_t, r)? / s.z_t)
}

pub(super) fn tm2_fixed_time(p: &Params, ctx: &Ctx) -> Outcome {
    let sx = p.x.sinh();
    let mut r = ctx.rng(10);
    let lhs: Vec<Vec<f64>> = paths(p, ctx, 0)?
        .iter()
        .map(|s| {
            let e = s.b_t.exp();
            vec![e * sx + s.a_t.sqrt() * r.normal(), e, s.z_t]
        })
        .collect();
    let mut r = ctx.rng(11);
    let rhs = paths(p, ctx, 1)?
        .iter()
        .map(|s| Ok(vec![(p.x + s.b_t).sinh(), tm2_second(p.x, s, &mut r)?, s.z_t]))
        .collect::<Result<Vec<_>, IdentityError>>()?;
    ctx.energy(&lhs, &rhs)
}

pub(super) fn tm2_mean(p: &Params, ctx: &Ctx) -> Outcome {
    let mut r = ctx.rng(10);
    let xs = paths(p, ctx, 0)?
        .iter()
        .map(|s| tm2_second(p.x, s, &mut r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_vs_target(&xs, (0.5 * p.t).exp(), MEAN_K_SE)?)
}

pub(super) fn rstop_half_inverse(p: &Params, ctx: &Ctx) -> Outcome {
    let mut beta = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?.iter().map(|s| beta.normal() / s.a_t.sqrt()).collect();
    let rhs: Vec<f64> = paths(p, ctx, 2)?
        .iter()
        .map(|s| 0.5 * ((2.0 * s.b_t).exp() - 1.0) / s.a_t)
        .collect();
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn rstop_sqrt(p: &Params, ctx: &Ctx) -> Outcome {
    let mut beta = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| (0.5 * s.b_t).exp() * beta.normal())
        .collect();
    let rhs: Vec<f64> = paths(p, ctx, 2)?
        .iter()
        .map(|s| 0.5 * (((3.0 * s.b_t).exp() / s.a_t).sqrt() - ((-s.b_t).exp() / s.a_t).sqrt()))
        .collect();
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn invcauchy(p: &Params, ctx: &Ctx) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| {
            let e = s.b_t.exp();
            let sd = s.a_t.sqrt();
            let den = (e * sx + sd * r.normal()).hypot(1.0);
            ((sample_cauchy(&mut r) * e * cx + sd * r.normal()) / den).atan()
        })
        .collect();
    let rhs = draws(p.n, ctx, 2, |r| sample_cauchy(r).atan());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn agi(p: &Params, ctx: &Ctx) -> Outcome {
    let mut beta = ctx.rng(1);
    let lhs: Vec<Vec<f64>> = paths(p, ctx, 0)?
        .iter()
        .map(|s| vec![s.a_t.sqrt() * beta.normal(), s.b_t])
        .collect();
    let mut r = ctx.rng(2);
    let rhs: Vec<Vec<f64>> = (0..p.n)
        .map(|_| {
            let b = gaussian(p.t, &mut r);
            let r2 = p.t * (r.normal().powi(2) + r.normal().powi(2));
            let z = (r2 + b * b).sqrt();
            let y = (0.5 * PI * r.uniform()).sin().powi(2);
            let phi = (2.0 * b.exp() * (z.cosh() - b.cosh())).max(0.0).sqrt();
            vec![(2.0 * y - 1.0) * phi, b]
        })
        .collect();
    ctx.energy(&lhs, &rhs)
}

// ---- Cauchy invariance ----------------------------------------------------

fn ecf_grid() -> Vec<f64> {
    (1..=ECF_GRID_LEN).map(|k| k as f64 * ECF_GRID_STEP).collect()
}

fn tm3_sample(p: &Params, ctx: &Ctx) -> Vec<f64> {
    draws(p.n, ctx, 1, |r| {
        let c = sample_cauchy(r);
        p.a * c + p.theta * (1.0 + p.a * p.a * c * c).sqrt() * sample_rademacher(r)
    })
}

fn tm3_cf_cosh(a: f64, theta: f64) -> impl Fn(f64) -> Complex64 {
    let b = theta * (a * a - 1.0).sqrt();
    move |xi: f64| Complex64::new((-(a * xi).abs()).exp() * (b * xi).cosh(), 0.0)
}

fn tm3_cf_cos(a: f64, theta: f64) -> impl Fn(f64) -> Complex64 {
    let b = theta * (1.0 - a * a).sqrt();
    move |xi: f64| Complex64::new((-(a * xi).abs()).exp() * (b * xi).cos(), 0.0)
}

pub(super) fn tm3_i(p: &Params, ctx: &Ctx) -> Outcome {
    if p.a.abs() < 1.0 {
        return Err(invalid("a", p.a, "needs |a| >= 1"));
    }
    if p.theta.abs() > 1.0 {
        return Err(invalid("theta", p.theta, "needs |theta| <= 1"));
    }
    Ok(ecf_compare(&tm3_sample(p, ctx), tm3_cf_cosh(p.a.abs(), p.theta), &ecf_grid())?)
}

pub(super) fn tm3_ii(p: &Params, ctx: &Ctx) -> Outcome {
    if p.a.abs() > 1.0 {
        return Err(invalid("a", p.a, "needs |a| <= 1"));
    }
    Ok(ecf_compare(&tm3_sample(p, ctx), tm3_cf_cos(p.a.abs(), p.theta), &ecf_grid())?)
}

/// Samples for `|a| ≥ 1` tested against the other branch's transform.
pub(super) fn neg_tm3_wrong_branch(p: &Params, ctx: &Ctx) -> Outcome {
    let a = p.a.abs();
    if a < 1.0 {
        return Err(invalid("a", p.a, "needs |a| >= 1"));
    }
    let b = p.theta * (a * a - 1.0).sqrt();
    let cf = move |xi: f64| Complex64::new((-(a * xi).abs()).exp() * (b * xi).cos(), 0.0);
    Ok(ecf_compare(&tm3_sample(p, ctx), cf, &ecf_grid())?)
}

pub(super) fn pcauchy_i(p: &Params, ctx: &Ctx) -> Outcome {
    let cx = p.x.cosh();
    let lhs = draws(p.n, ctx, 1, |r| {
        (argsh(sample_cauchy(r) * cx) + p.y * sample_rademacher(r)).sinh().atan()
    });
    let rhs = draws(p.n, ctx, 2, |r| {
        (sample_cauchy(r) * (p.x + p.y * sample_rademacher(r)).cosh()).atan()
    });
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn pcauchy_ii(p: &Params, ctx: &Ctx) -> Outcome {
    if p.a.abs() > 1.0 {
        return Err(invalid("a", p.a, "needs |a| <= 1"));
    }
    let lhs = draws(p.n, ctx, 1, |r| {
        (argsh(p.a * sample_cauchy(r)) + p.y * sample_rademacher(r)).sinh().atan()
    });
    let s = (1.0 - p.a * p.a).sqrt();
    let rhs = draws(p.n, ctx, 2, |r| {
        (p.a * sample_cauchy(r) * p.y.cosh() + s * (p.y * sample_rademacher(r)).sinh()).atan()
    });
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn cauchy_subordination(p: &Params, ctx: &Ctx) -> Outcome {
    if p.a == 0.0 {
        return Err(invalid("a", p.a, "must be non-zero"));
    }
    let lhs = try_draws(p.n, ctx, 1, |r| {
        let tau = sample_hitting_time_bm(p.a, r)?;
        Ok((tau.sqrt() * r.normal()).atan())
    })?;
    let rhs = draws(p.n, ctx, 2, |r| (p.a * sample_cauchy(r)).atan());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

// ---- The variable z_μ -----------------------------------------------------

fn zmu_draws(p: &Params, ctx: &Ctx, k: u64) -> Result<Vec<f64>, IdentityError> {
    let s = ZmuSampler::new(p.mu)?;
    Ok(draws(p.n, ctx, k, |r| s.sample(r)))
}

pub(super) fn phinge(p: &Params, ctx: &Ctx) -> Outcome {
    let lhs: Vec<f64> = zmu_draws(p, ctx, 1)?.iter().map(|z| z.sinh()).collect();
    let mut beta = ctx.rng(3);
    let rhs: Vec<f64> = zmu_draws(p, ctx, 2)?
        .iter()
        .map(|z| (z.exp() / p.mu).sqrt() * beta.normal())
        .collect();
    Ok(ks_two_sample(&lhs, &rhs)?)
}

/// Inverse of a tabulated distribution function by bisection.
fn table_quantile(table: &CdfTable, u: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while table.cdf(lo) > u {
        lo *= 2.0;
    }
    while table.cdf(hi) < u {
        hi *= 2.0;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if table.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `e^{z}/μ` with `z` drawn by inverting the tabulated law of `z_μ`, so
/// that the left side never touches the GIG sampler.
pub(super) fn zmu_gig(p: &Params, ctx: &Ctx) -> Outcome {
    let table = CdfTable::new(&Dist::Zmu { mu: p.mu })?;
    let lhs = draws(p.n, ctx, 1, |r| table_quantile(&table, r.uniform()).exp() / p.mu);
    let gig = GigParams::new(0.0, 1.0, p.mu)?;
    let sampler = crate::samplers::GigSampler::new(gig);
    let rhs = draws(p.n, ctx, 2, |r| sampler.sample(r));
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn rpkey_clt(p: &Params, ctx: &Ctx) -> Outcome {
    let lhs: Vec<f64> = zmu_draws(p, ctx, 1)?.iter().map(|z| p.mu.sqrt() * z.sinh()).collect();
    let rhs = draws(p.n, ctx, 2, |r| r.normal());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn pkey_1(p: &Params, ctx: &Ctx) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(10);
    let lhs: Vec<Vec<f64>> = zmu_draws(p, ctx, 1)?
        .iter()
        .map(|z| {
            let e = z.exp();
            let sd = (e / p.mu).sqrt();
            vec![e * sx + sd * r.normal(), (sample_cauchy(&mut r) * e * cx + sd * r.normal()).atan()]
        })
        .collect();
    let mut r = ctx.rng(11);
    let rhs: Vec<Vec<f64>> = zmu_draws(p, ctx, 2)?
        .iter()
        .map(|z| vec![(p.x + z).sinh(), (sample_cauchy(&mut r) * (p.x + z).cosh()).atan()])
        .collect();
    ctx.energy(&lhs, &rhs)
}

pub(super) fn pkey_2(p: &Params, ctx: &Ctx) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(10);
    let lhs = zmu_draws(p, ctx, 1)?
        .iter()
        .map(|z| {
            let e = z.exp();
            let first = e * sx + (e / p.mu).sqrt() * r.normal();
            let second = sample_hitting_time_bm(e * cx, &mut r)? + e / p.mu;
            Ok(vec![first, second.atan()])
        })
        .collect::<Result<Vec<_>, IdentityError>>()?;
    let mut r = ctx.rng(11);
    let rhs = zmu_draws(p, ctx, 2)?
        .iter()
        .map(|z| Ok(vec![(p.x + z).sinh(), sample_hitting_time_bm((p.x + z).cosh(), &mut r)?.atan()]))
        .collect::<Result<Vec<_>, IdentityError>>()?;
    ctx.energy(&lhs, &rhs)
}

pub(super) fn pkey_3(p: &Params, ctx: &Ctx) -> Outcome {
    let (sx, cx) = (p.x.sinh(), p.x.cosh());
    let mut r = ctx.rng(10);
    let lhs: Vec<Vec<f64>> = zmu_draws(p, ctx, 1)?
        .iter()
        .map(|z| {
            let e = z.exp();
            vec![e * sx + (e / p.mu).sqrt() * r.normal(), e]
        })
        .collect();
    let mut r = ctx.rng(11);
    let rhs = zmu_draws(p, ctx, 2)?
        .iter()
        .map(|z| {
            let tau = sample_hitting_time_drifted((p.x + z).cosh(), p.mu * cx, &mut r)?;
            Ok(vec![(p.x + z).sinh(), p.mu * tau])
        })
        .collect::<Result<Vec<_>, IdentityError>>()?;
    ctx.energy(&lhs, &rhs)
}

// ---- Dufresne-type identities ---------------------------------------------

fn half_inverse_gamma(nu: f64, n: usize, ctx: &Ctx, k: u64) -> Result<Vec<f64>, IdentityError> {
    let g = gamma_law(nu)?;
    Ok(draws(n, ctx, k, |r| 0.5 / g.sample(r.as_rng())))
}

pub(super) fn dufresne(p: &Params, ctx: &Ctx) -> Outcome {
    let cfg = PathConfig::new(1.0, p.steps, 0.0)?;
    let horizon = default_horizon(p.nu);
    let lhs = try_draws(p.n, ctx, 1, |r| Ok(simulate_drifted_a(p.nu, horizon, &cfg, r)?))?;
    let rhs = half_inverse_gamma(p.nu, p.n, ctx, 2)?;
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn pduf_finite_t(p: &Params, ctx: &Ctx) -> Outcome {
    let g = gamma_law(p.nu)?;
    let mut r = ctx.rng(1);
    let lhs: Vec<f64> = fixed_paths(p, p.t, -p.nu, ctx, 0)?
        .iter()
        .map(|s| (2.0 * s.b_t).exp() * 0.5 / g.sample(r.as_rng()) + s.a_t)
        .collect();
    let rhs = half_inverse_gamma(p.nu, p.n, ctx, 2)?;
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn eqdufd(p: &Params, ctx: &Ctx) -> Outcome {
    let g = gamma_law(0.5)?;
    let c2 = p.x.cosh().powi(2);
    let mut r = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| (2.0 * s.b_t).exp() * c2 * 0.5 / g.sample(r.as_rng()) + s.a_t)
        .collect();
    let rhs = draws(p.n, ctx, 2, |r| {
        let b = gaussian(p.t, r);
        (p.x + b).cosh().powi(2) * 0.5 / g.sample(r.as_rng())
    });
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn ppar_1(p: &Params, ctx: &Ctx) -> Outcome {
    let cx = p.x.cosh();
    let mut r = ctx.rng(1);
    let lhs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| (sample_cauchy(&mut r) * s.b_t.exp() * cx + s.a_t.sqrt() * r.normal()).atan())
        .collect();
    let rhs = draws(p.n, ctx, 2, |r| (sample_cauchy(r) * (p.x + gaussian(p.t, r)).cosh()).atan());
    Ok(ks_two_sample(&lhs, &rhs)?)
}

pub(super) fn ppar_2(p: &Params, ctx: &Ctx) -> Outcome {
    let mut r = ctx.rng(1);
    let lhs: Vec<Vec<f64>> = paths(p, ctx, 0)?
        .iter()
        .map(|s| {
            let sd = s.a_t.sqrt();
            vec![sd * r.normal(), (sample_cauchy(&mut r) * s.b_t.exp() + sd * r.normal()).atan()]
        })
        .collect();
    let rhs: Vec<Vec<f64>> = (0..p.n)
        .map(|_| {
            let b = gaussian(p.t, &mut r);
            vec![b.sinh(), (sample_cauchy(&mut r) * b.cosh()).atan()]
        })
        .collect();
    ctx.energy(&lhs, &rhs)
}

// ---- Joint Laplace transform ----------------------------------------------

fn jlt_lhs(lambda: f64, xi: f64, s: &FunctionalSample) -> f64 {
    (-lambda * s.b_t.exp() - 0.5 * xi * xi * s.a_t).exp()
}

/// Paired difference with the Gaussian-functional form on the same `B_t`.
fn pjlt(p: &Params, ctx: &Ctx, cos_branch: bool) -> Outcome {
    let (lambda, xi) = (p.lambda, p.xi.abs());
    if cos_branch != (lambda <= xi) {
        let reason = if cos_branch { "needs lambda <= |xi|" } else { "needs lambda >= |xi|" };
        return Err(invalid("lambda", lambda, reason));
    }
    let w = (xi * xi - lambda * lambda).abs().sqrt();
    let diffs: Vec<f64> = paths(p, ctx, 0)?
        .iter()
        .map(|s| {
            let phase = w * s.b_t.sinh();
            let osc = if cos_branch { phase.cos() } else { phase.cosh() };
            jlt_lhs(lambda, xi, s) - (-lambda * s.b_t.cosh()).exp() * osc
        })
        .collect();
    Ok(mean_vs_target(&diffs, 0.0, MEAN_K_SE)?)
}

pub(super) fn pjlt_cos(p: &Params, ctx: &Ctx) -> Outcome {
    pjlt(p, ctx, true)
}

pub(super) fn pjlt_cosh(p: &Params, ctx: &Ctx) -> Outcome {
    pjlt(p, ctx, false)
}

pub(super) fn jlt_theta_crosscheck(p: &Params, ctx: &Ctx) -> Outcome {
    let target = joint_laplace_theta_integral(p.lambda, p.xi, p.t)?;
    let xs: Vec<f64> = paths(p, ctx, 0)?.iter().map(|s| jlt_lhs(p.lambda, p.xi, s)).collect();
    Ok(mean_vs_target(&xs, target, MEAN_K_SE)?)
}

// ---- Densities ------------------------------------------------------------

/// Log of the density of `e^{2z_μ} v + e^{z_μ}/μ` at `u`, up to a constant
/// in `u`, from the closed form symmetric in `(u, v)`.
fn psym_ln_density(mu: f64, u: f64, v: f64) -> f64 {
    let s = (1.0 + 4.0 * mu * mu * u * v).sqrt();
    -(u * v).ln() + (1.0 + 1.0 / s).ln() - (u + v) / (4.0 * u * v) * (s + 1.0)
}

fn psym_table(mu: f64, v: f64) -> Result<CdfTable, IdentityError> {
    let center = (v + 1.0 / mu).ln();
    Ok(CdfTable::from_log_density(Support::Positive, center, 1.0, 4096, |lu| {
        Ok(psym_ln_density(mu, lu.exp(), v) + lu)
    })?)
}

fn psym_draws(p: &Params, ctx: &Ctx) -> Result<Vec<f64>, IdentityError> {
    Ok(zmu_draws(p, ctx, 1)?
        .iter()
        .map(|z| (2.0 * z).exp() * p.v + z.exp() / p.mu)
        .collect())
}

pub(super) fn psym_density(p: &Params, ctx: &Ctx) -> Outcome {
    let table = psym_table(p.mu, p.v)?;
    Ok(ks_vs_cdf(&psym_draws(p, ctx)?, |u| table.cdf(u))?)
}

/// Samples at `v` tested against the law for `2v`.
pub(super) fn neg_psym_wrong_v(p: &Params, ctx: &Ctx) -> Outcome {
    let table = psym_table(p.mu, 2.0 * p.v)?;
    Ok(ks_vs_cdf(&psym_draws(p, ctx)?, |u| table.cdf(u))?)
}

/// `(1/v) e^{−1/2v}` times the density of `(e^{2B_t}v + A_t, Z_t)` at
/// `(u, w)`, by change of variables in the joint density of `(e^{B_t}, A_t)`.
fn psym_weighted(u: f64, v: f64, w: f64, t: f64) -> Result<f64, SpecfunError> {
    // e^{B} = X solves vX² + wX = u; then A = wX.
    let x = 2.0 * u / (w + (w * w + 4.0 * u * v).sqrt());
    let jac = 2.0 * v + w / x;
    Ok((-0.5 / v).exp() / v * joint_density(x, w * x, t)? / jac)
}

fn psym_closed(u: f64, v: f64, w: f64, t: f64) -> Result<f64, SpecfunError> {
    let s = (1.0 + 4.0 * u * v / (w * w)).sqrt();
    let body = (1.0 + 1.0 / s) * (-(u + v) / (4.0 * u * v) * (s + 1.0)).exp() / (2.0 * u * v * w);
    Ok(body * theta_hw(1.0 / w, t)?.value)
}

pub(super) fn psym_swap(p: &Params, _ctx: &Ctx) -> Outcome {
    const GRID: [f64; 4] = [0.3, 1.0, 2.0, 5.0];
    const W: [f64; 3] = [0.5, 1.0, 2.0];
    let mut cells: Vec<Result<(f64, f64), SpecfunError>> = Vec::new();
    for &u in &GRID {
        for &v in &GRID {
            for &w in &W {
                cells.push((|| {
                    let a = psym_weighted(u, v, w, p.t)?;
                    let b = psym_weighted(v, u, w, p.t)?;
                    let c = psym_closed(u, v, w, p.t)?;
                    let res = ((a - b).abs().max((a - c).abs())) / c.abs().max(1e-300);
                    Ok((res, 1e-10))
                })());
            }
        }
    }
    worst_cell(cells)
}

fn grel_samples(p: &Params, ctx: &Ctx, square: f64) -> Result<Vec<f64>, IdentityError> {
    Ok(paths(p, ctx, 0)?
        .iter()
        .map(|s| (-(2.0 * s.b_t).exp() * square / (2.0 * s.a_t)).exp() / (2.0 * PI * s.a_t).sqrt())
        .collect())
}

/// Declared bias allowance of path functionals, relative to the target,
/// per unit of `1/steps`.
const PATH_BIAS_PER_STEP: f64 = 1.0;

pub(super) fn grel(p: &Params, ctx: &Ctx) -> Outcome {
    let xs = grel_samples(p, ctx, p.x.sinh().powi(2))?;
    let target = normal_pdf(p.x / p.t.sqrt()) / p.t.sqrt();
    let allowance = PATH_BIAS_PER_STEP * target / p.steps as f64;
    Ok(mean_vs_target_with_allowance(&xs, target, MEAN_K_SE, allowance)?)
}

/// `cosh² x` in place of `sinh² x`.
pub(super) fn neg_grel_cosh(p: &Params, ctx: &Ctx) -> Outcome {
    let xs = grel_samples(p, ctx, p.x.cosh().powi(2))?;
    let target = normal_pdf(p.x / p.t.sqrt()) / p.t.sqrt();
    let allowance = PATH_BIAS_PER_STEP * target / p.steps as f64;
    Ok(mean_vs_target_with_allowance(&xs, target, MEAN_K_SE, allowance)?)
}

pub(super) fn pden_gaussian(p: &Params, _ctx: &Ctx) -> Outcome {
    worst_cell([0.0, 1.0].map(|x| sinh_fourier_density_residual(x, p.t).map(|r| (r, 1e-6))))
}

fn z_marginal_check(p: &Params, ctx: &Ctx, law_t: f64) -> Outcome {
    let table = CdfTable::new(&Dist::InverseZMarginal { t: law_t })?;
    let xs: Vec<f64> = paths(p, ctx, 0)?.iter().map(|s| 1.0 / s.z_t).collect();
    Ok(ks_vs_cdf(&xs, |x| table.cdf(x))?)
}

pub(super) fn z_marginal(p: &Params, ctx: &Ctx) -> Outcome {
    z_marginal_check(p, ctx, p.t)
}

/// `1/Z_t` against the law of `1/Z_{2t}`.
pub(super) fn neg_z_marginal(p: &Params, ctx: &Ctx) -> Outcome {
    z_marginal_check(p, ctx, 2.0 * p.t)
}

/// Inverse of the standard normal distribution function by bisection.
fn normal_quantile(q: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bins per axis in the joint-law check.
const JOINT_BINS: usize = 10;
const JOINT_PILOT: usize = 20_000;

pub(super) fn joint_law(p: &Params, ctx: &Ctx) -> Outcome {
    let k = JOINT_BINS;
    // Deciles of the central 90% of e^{B_t}; A_t edges from an independent pilot.
    let u_edges: Vec<f64> = (0..=k)
        .map(|i| (p.t.sqrt() * normal_quantile(0.05 + 0.9 * i as f64 / k as f64)).exp())
        .collect();
    let pilot_params = Params { n: JOINT_PILOT, ..*p };
    let mut pilot: Vec<f64> = paths(&pilot_params, ctx, 99)?.iter().map(|s| s.a_t).collect();
    pilot.sort_by(f64::total_cmp);
    let v_edges: Vec<f64> = (0..=k)
        .map(|i| pilot[((0.05 + 0.9 * i as f64 / k as f64) * JOINT_PILOT as f64) as usize])
        .collect();
    let masses = joint_cell_masses(&u_edges, &v_edges, p.t)?;
    let inside: f64 = masses.iter().sum();
    let mut counts = vec![0.0; k * k + 1];
    for s in paths(p, ctx, 0)? {
        let i = u_edges.partition_point(|&e| e <= s.b_t.exp());
        let j = v_edges.partition_point(|&e| e <= s.a_t);
        let bin = if (1..=k).contains(&i) && (1..=k).contains(&j) { (i - 1) * k + (j - 1) } else { k * k };
        counts[bin] += 1.0;
    }
    let n = p.n as f64;
    let mut expected: Vec<f64> = masses.iter().map(|m| m * n).collect();
    expected.push((1.0 - inside).max(0.0) * n);
    Ok(chi_square_binned(&counts, &expected, 0)?)
}

/// Given `1/Z_t = μ`, `B_t` has the law of `z_μ`: the probability integral
/// transform with each sample's own `μ` is uniform.
pub(super) fn pparti_conditional(p: &Params, ctx: &Ctx) -> Outcome {
    let pits = paths(p, ctx, 0)?
        .iter()
        .filter(|s| (1.0 / s.z_t - p.mu).abs() <= CONDITIONAL_WINDOW)
        .map(|s| Ok(zmu_cdf(1.0 / s.z_t, s.b_t)?))
        .collect::<Result<Vec<f64>, IdentityError>>()?;
    Ok(ks_vs_cdf(&pits, |x| x.clamp(0.0, 1.0))?)
}

pub(super) fn z_diffusion_consistency(p: &Params, ctx: &Ctx) -> Outcome {
    let cfg = PathConfig::new(p.t, p.steps, 0.0)?;
    let sde = try_draws(p.n, ctx, 1, |r| Ok(simulate_z_diffusion(1e-12, p.t, &cfg, r)?.z))?;
    let pathwise: Vec<f64> = paths(p, ctx, 2)?.iter().map(|s| s.z_t).collect();
    Ok(ks_two_sample(&sde, &pathwise)?)
}

// ---- Deterministic residual checks ----------------------------------------

pub(super) fn gig_eigenfunction(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for mu in [0.5, 1.0, 2.0] {
        for lambda in [0.5, 1.0, 2.0] {
            cells.push(gig_eigenfunction_residual(mu, lambda).map(|r| (r, 1e-8)));
        }
    }
    worst_cell(cells)
}

/// `E[exp(−λ²G/2)]` in place of `E[exp(−λ²/(2G))]`.
pub(super) fn neg_gig_eigenfunction(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells: Vec<Result<(f64, f64), IdentityError>> = Vec::new();
    for mu in [0.5, 1.0, 2.0] {
        for lambda in [0.5, 1.0, 2.0] {
            cells.push((|| {
                let g = GigParams::new(0.0, 1.0, mu)?;
                let lhs = crate::quad::integrate_real_line_with(
                    |s: f64| {
                        let v = s.exp();
                        let d = g.density(v).unwrap_or(0.0);
                        if d == 0.0 { 0.0 } else { d * v * (-0.5 * lambda * lambda * v).exp() }
                    },
                    crate::quad::Tolerance::relative(1e-12),
                )
                .or_else(|e| e.accept_within(crate::quad::Tolerance::relative(1e-9)))
                .map_err(SpecfunError::from)?
                .value;
                let rhs = (ln_bessel_k(0.0, mu * (1.0 + lambda * lambda).sqrt())? - ln_bessel_k(0.0, mu)?).exp();
                Ok(((lhs - rhs).abs() / rhs, 1e-8))
            })());
        }
    }
    worst_cell(cells)
}

pub(super) fn theta_laplace_t(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        for lambda in [0.0, 1.0, 2.0] {
            cells.push(theta_laplace_t_residual(r, lambda).map(|res| (res, 1e-6)));
        }
    }
    worst_cell(cells)
}

pub(super) fn theta_laplace_r(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for x in [0.0, 1.0, 2.0] {
        for t in [0.5, 1.0, 2.0] {
            let tol = if x == 2.0 && t == 2.0 { 1e-5 } else { 1e-6 };
            cells.push(theta_laplace_r_residual(x, t).map(|res| (res, tol)));
        }
    }
    worst_cell(cells)
}

pub(super) fn theta_integral_equation(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        for t in [0.5, 1.0, 2.0] {
            let tol = if t == 0.5 { 1e-4 } else { 1e-5 };
            cells.push(theta_integral_equation_residual(r, t).map(|res| (res, tol)));
        }
    }
    worst_cell(cells)
}

pub(super) fn bessel_k_product(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for nu in [0.0, 0.5, 1.3, 3.0] {
        for (z, w) in [(0.5, 1.0), (1.0, 3.0), (2.5, 2.5)] {
            cells.push(bessel_k_product_residual(nu, z, w).map(|r| (r, 1e-6)));
        }
    }
    worst_cell(cells)
}

pub(super) fn bessel_k_sinh(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for nu in [-0.3, 0.0, 0.5, 2.0] {
        for z in [0.2, 1.0, 10.0] {
            cells.push(bessel_k_sinh_representation_residual(nu, z).map(|r| (r, 1e-6)));
        }
    }
    worst_cell(cells)
}

pub(super) fn intrel(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for xi in [0.0, 0.5, 1.0, 2.0, 3.0] {
        for b in [-1.0, 0.5, 1.0, 2.0] {
            cells.push(intrel_residual(xi, b).map(|r| (r, 1e-6)));
        }
    }
    worst_cell(cells)
}

pub(super) fn phw(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for xi in [0.0, 0.5, 1.0, 2.0] {
        for b in [0.5, 1.0, 2.0] {
            cells.push(phw_residual(xi, b).map(|r| (r, 1e-6)));
        }
    }
    worst_cell(cells)
}

const FOURIER_XI: [f64; 3] = [0.0, 1.0, 3.0];
const FOURIER_T: [f64; 3] = [0.5, 1.0, 3.0];

pub(super) fn fourier_aim(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for xi in FOURIER_XI {
        for t in FOURIER_T {
            cells.push(fourier_theta_residual(PI, xi, t).map(|r| (r, 1e-6)));
        }
    }
    worst_cell(cells)
}

pub(super) fn fourier_aimd(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for alpha in [0.0, PI / 2.0, 2.0 * PI] {
        for xi in FOURIER_XI {
            for t in FOURIER_T {
                cells.push(fourier_theta_residual(alpha, xi, t).map(|r| (r, 1e-6)));
            }
        }
    }
    worst_cell(cells)
}

pub(super) fn fourier_remark(_p: &Params, _ctx: &Ctx) -> Outcome {
    let mut cells = Vec::new();
    for case in [FourierRemark::ZeroLimit, FourierRemark::HalfPi, FourierRemark::TwoPi] {
        for x in [0.0, 1.0] {
            for t in [0.5, 1.0, 2.0] {
                cells.push(fourier_remark_residual(case, x, t).map(|r| (r, 1e-6)));
            }
        }
    }
    worst_cell(cells)
}
