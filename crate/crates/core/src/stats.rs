//! Tests of equality in law and of numerical identities.
//!
//! Every test returns a [`TestReport`]. Statistical tests carry a p-value;
//! deterministic checks carry a residual. The verdict follows a fixed
//! threshold declared by the caller.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::samplers::RngStream;
use crate::specfun::normal_sf;

/// Significance level of every statistical check.
pub const ALPHA: f64 = 0.01;
/// Constant in the ECF threshold `c √(ln n / n)`; see `ecf_compare`.
pub const ECF_THRESHOLD_C: f64 = 1.0;
/// Energy tests use at most this many points per sample.
pub const ENERGY_MAX_POINTS: usize = 2000;
/// The exact one-sample KS distribution is used while its matrix order
/// `2⌈nD⌉ − 1` stays at or below this.
const KS_EXACT_MAX_ORDER: usize = 201;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{what}: need at least {need} values, got {got}")]
    TooFewSamples { what: &'static str, need: usize, got: usize },
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("points must share one dimension between 1 and 4")]
    Dimension,
    #[error("invalid argument {0}")]
    InvalidArgument(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    LowPrecision,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::LowPrecision => "low-precision",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Statistic names whose reports carry a p-value.
pub const STATISTICAL_NAMES: [&str; 6] =
    ["ks_two_sample", "ks_one_sample", "energy_distance", "ecf_sup", "mean_z", "chi_square"];
/// Statistic name of deterministic residual checks.
pub const RESIDUAL_NAME: &str = "relative_residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub identity_id: String,
    pub statistic_name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub residual: Option<f64>,
    pub n_lhs: usize,
    pub n_rhs: usize,
    pub seed: u64,
    pub verdict: Verdict,
}

impl TestReport {
    /// A statistical report that passes iff `p ≥ ALPHA`.
    pub fn statistical(name: &str, statistic: f64, p_value: f64, n_lhs: usize, n_rhs: usize) -> Self {
        let p = p_value.clamp(0.0, 1.0);
        Self {
            identity_id: String::new(),
            statistic_name: name.to_owned(),
            statistic,
            p_value: Some(p),
            residual: None,
            n_lhs,
            n_rhs,
            seed: 0,
            verdict: if p >= ALPHA { Verdict::Pass } else { Verdict::Fail },
        }
    }

    /// A deterministic report: pass iff `residual ≤ tol`. A failing residual
    /// whose inputs were flagged low precision gets that verdict instead.
    pub fn residual(residual: f64, tol: f64, low_precision: bool) -> Self {
        let verdict = if residual <= tol {
            Verdict::Pass
        } else if low_precision {
            Verdict::LowPrecision
        } else {
            Verdict::Fail
        };
        Self {
            identity_id: String::new(),
            statistic_name: RESIDUAL_NAME.to_owned(),
            statistic: residual,
            p_value: None,
            residual: Some(residual.max(0.0)),
            n_lhs: 0,
            n_rhs: 0,
            seed: 0,
            verdict,
        }
    }

    pub fn with_identity(mut self, id: &str, seed: u64) -> Self {
        self.identity_id = id.to_owned();
        self.seed = seed;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Whether exactly one of `p_value` and `residual` is present, matching the statistic's family.
    pub fn is_well_formed(&self) -> bool {
        let statistical = STATISTICAL_NAMES.contains(&self.statistic_name.as_str());
        match (self.p_value, self.residual) {
            (Some(p), None) => statistical && (0.0..=1.0).contains(&p),
            (None, Some(r)) => !statistical && self.statistic_name == RESIDUAL_NAME && r >= 0.0,
            _ => false,
        }
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn need(what: &'static str, got: usize, need: usize) -> Result<(), StatsError> {
    if got < need {
        Err(StatsError::TooFewSamples { what, need, got })
    } else {
        Ok(())
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series converges fast for small λ.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=8).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value and
/// Stephens' small-sample correction of the scale.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<TestReport, StatsError> {
    need("ks_two_sample lhs", xs.len(), 100)?;
    need("ks_two_sample rhs", ys.len(), 100)?;
    check_finite(xs)?;
    check_finite(ys)?;
    let (a, b) = (sorted(xs), sorted(ys));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let p = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    Ok(TestReport::statistical("ks_two_sample", d, p, a.len(), b.len()))
}

/// Exact `P(D_n < d)` (Marsaglia, Tsang and Wang 2003).
fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut e) = mat_pow(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / n as f64;
        if s < 1e-140 {
            s *= 1e140;
            e -= 140;
        }
    }
    s * 10f64.powi(e)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * m..(k + 1) * m];
            let out = &mut c[i * m..(i + 1) * m];
            for (o, &bkj) in out.iter_mut().zip(row) {
                *o += aik * bkj;
            }
        }
    }
    c
}

/// `A^n` with a decimal exponent kept aside to avoid overflow.
fn mat_pow(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, he) = mat_pow(a, m, n / 2);
    let mut b = mat_mul(&half, &half, m);
    let mut e = 2 * he;
    if n % 2 == 1 {
        b = mat_mul(a, &b, m);
    }
    let centre = (m / 2) * m + m / 2;
    if b[centre] > 1e140 {
        for v in b.iter_mut() {
            *v *= 1e-140;
        }
        e += 140;
    }
    (b, e)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
///
/// The p-value is exact while the Marsaglia–Tsang–Wang matrix is small
/// (order `2⌈nD⌉ − 1 ≤ 201`); larger `nD`, which only occurs for p-values
/// far below any test level or for very large `n`, uses the asymptotic law
/// with Stephens' correction.
pub fn ks_vs_cdf(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport, StatsError> {
    need("ks_one_sample", xs.len(), 100)?;
    check_finite(xs)?;
    let a = sorted(xs);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        if !f.is_finite() {
            return Err(StatsError::NonFinite);
        }
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let k = (n * d).floor() as usize + 1;
    let p = if 2 * k - 1 <= KS_EXACT_MAX_ORDER {
        (1.0 - ks_exact_cdf(a.len(), d)).clamp(0.0, 1.0)
    } else {
        let sn = n.sqrt();
        kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
    };
    Ok(TestReport::statistical("ks_one_sample", d, p, a.len(), 0))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Energy-distance two-sample test with a permutation p-value
/// `(1 + #{E_perm ≥ E}) / (1 + n_perm)`.
///
/// Samples longer than [`ENERGY_MAX_POINTS`] are truncated to their first
/// `ENERGY_MAX_POINTS` points (callers pass i.i.d. draws, so this is a
/// random subsample); `n_lhs`/`n_rhs` report the sizes actually used.
pub fn energy_distance_test(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    n_perm: usize,
    rng: &mut RngStream,
) -> Result<TestReport, StatsError> {
    need("energy lhs", xs.len(), 500)?;
    need("energy rhs", ys.len(), 500)?;
    if n_perm < 200 {
        return Err(StatsError::InvalidArgument("n_perm must be at least 200"));
    }
    let dim = xs[0].len();
    if !(1..=4).contains(&dim) || xs.iter().chain(ys).any(|p| p.len() != dim) {
        return Err(StatsError::Dimension);
    }
    if xs.iter().chain(ys).flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let xs = &xs[..xs.len().min(ENERGY_MAX_POINTS)];
    let ys = &ys[..ys.len().min(ENERGY_MAX_POINTS)];
    let (n, m) = (xs.len(), ys.len());
    let pts: Vec<&[f64]> = xs.iter().chain(ys).map(|p| p.as_slice()).collect();
    let total = n + m;
    // Packed strict upper triangle, row by row.
    let mut dist = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        for j in (i + 1)..total {
            dist.push(euclid(pts[i], pts[j]));
        }
    }
    let offset = |i: usize| i * total - i * (i + 1) / 2;
    let row_sums: Vec<f64> = (0..total)
        .map(|i| {
            (0..total)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    dist[offset(a) + b - a - 1]
                })
                .sum()
        })
        .collect();
    let grand: f64 = dist.iter().sum();
    // With the total and the row sums fixed, the statistic only needs the
    // within-rhs sum for each relabelling.
    let stat_for = |rhs: &[usize]| -> f64 {
        let mut within_rhs = 0.0;
        for (k, &a) in rhs.iter().enumerate() {
            let row = &dist[offset(a)..];
            within_rhs += rhs[k + 1..].iter().map(|&b| row[b - a - 1]).sum::<f64>();
        }
        let cross = rhs.iter().map(|&i| row_sums[i]).sum::<f64>() - 2.0 * within_rhs;
        let within_lhs = grand - cross - within_rhs;
        let (nf, mf) = (n as f64, m as f64);
        2.0 * cross / (nf * mf) - 2.0 * within_lhs / (nf * nf) - 2.0 * within_rhs / (mf * mf)
    };
    let observed = stat_for(&(n..total).collect::<Vec<_>>());
    let mut order: Vec<usize> = (0..total).collect();
    let mut rhs = Vec::with_capacity(m);
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        for i in (1..total).rev() {
            let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
            order.swap(i, j);
        }
        rhs.clear();
        rhs.extend_from_slice(&order[..m]);
        rhs.sort_unstable();
        if stat_for(&rhs) >= observed - 1e-12 * observed.abs() {
            exceed += 1;
        }
    }
    let p = (1 + exceed) as f64 / (1 + n_perm) as f64;
    // E ≥ 0 for any two samples; the tiny negative values are rounding.
    Ok(TestReport::statistical("energy_distance", observed.max(0.0), p, n, m))
}

/// Empirical characteristic function `(1/n) Σ e^{iξx}`.
pub fn empirical_cf(xs: &[f64], xi: f64) -> Complex64 {
    let (mut c, mut s) = (0.0, 0.0);
    for &x in xs {
        let (sn, cs) = (xi * x).sin_cos();
        c += cs;
        s += sn;
    }
    Complex64::new(c, s) / xs.len() as f64
}

/// Compares the empirical characteristic function with `cf` on `xi_grid`.
///
/// The statistic is `sup_ξ |φ_n(ξ) − φ(ξ)|`; the check passes iff it is at
/// most `ECF_THRESHOLD_C · √(ln n / n)`. The reported p-value is a
/// Bonferroni bound over the grid from the Gaussian limit of
/// `√n (φ_n(ξ) − φ(ξ))`, whose covariance uses `φ(2ξ)`.
pub fn ecf_compare(xs: &[f64], cf: impl Fn(f64) -> Complex64, xi_grid: &[f64]) -> Result<TestReport, StatsError> {
    need("ecf", xs.len(), 10_000)?;
    check_finite(xs)?;
    if xi_grid.is_empty() || xi_grid.iter().any(|x| !(-5.0..=5.0).contains(x)) {
        return Err(StatsError::InvalidArgument("grid must be non-empty and inside [-5, 5]"));
    }
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    let mut p_min: f64 = 1.0;
    for &xi in xi_grid {
        let phi = cf(xi);
        let diff = empirical_cf(xs, xi) - phi;
        sup = sup.max(diff.norm());
        if xi == 0.0 {
            continue;
        }
        // Covariance of (cos ξX, sin ξX).
        let phi2 = cf(2.0 * xi);
        let vcc = 0.5 * (1.0 + phi2.re) - phi.re * phi.re;
        let vss = 0.5 * (1.0 - phi2.re) - phi.im * phi.im;
        let vcs = 0.5 * phi2.im - phi.re * phi.im;
        let det = vcc * vss - vcs * vcs;
        let p = if det > 1e-14 {
            let (a, b) = (diff.re, diff.im);
            let maha = n * (vss * a * a - 2.0 * vcs * a * b + vcc * b * b) / det;
            (-0.5 * maha).exp()
        } else {
            // Degenerate direction: test the larger-variance coordinate alone.
            let (v, z) = if vcc >= vss { (vcc, diff.re) } else { (vss, diff.im) };
            if v <= 0.0 {
                if diff.norm() > 1e-12 { 0.0 } else { 1.0 }
            } else {
                2.0 * normal_sf((z * (n / v).sqrt()).abs())
            }
        };
        p_min = p_min.min(p);
    }
    let p = (p_min * xi_grid.len() as f64).min(1.0);
    let threshold = ECF_THRESHOLD_C * (n.ln() / n).sqrt();
    let mut report = TestReport::statistical("ecf_sup", sup, p, xs.len(), 0);
    report.verdict = if sup <= threshold { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

/// z-test of the sample mean: passes iff `|mean − target| ≤ k_se · SE`.
pub fn mean_vs_target(xs: &[f64], target: f64, k_se: f64) -> Result<TestReport, StatsError> {
    mean_vs_target_with_allowance(xs, target, k_se, 0.0)
}

/// As [`mean_vs_target`] with an extra deterministic allowance (for example
/// a known discretization bias bound) added to the tolerance.
pub fn mean_vs_target_with_allowance(
    xs: &[f64],
    target: f64,
    k_se: f64,
    allowance: f64,
) -> Result<TestReport, StatsError> {
    need("mean", xs.len(), 1000)?;
    check_finite(xs)?;
    if !(k_se > 0.0) || !(allowance >= 0.0) {
        return Err(StatsError::InvalidArgument("k_se must be positive and allowance non-negative"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let gap = (mean - target).abs();
    let z = if se > 0.0 { (mean - target) / se } else if gap == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean - target) };
    let excess = (gap - allowance).max(0.0);
    let p = if se > 0.0 { 2.0 * normal_sf(excess / se) } else if excess == 0.0 { 1.0 } else { 0.0 };
    let mut report = TestReport::statistical("mean_z", z, p, xs.len(), 0);
    report.verdict = if gap <= k_se * se + allowance { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

/// Pearson chi-square goodness of fit of binned counts against expected
/// counts. Bins with expected count below 5 are merged into their
/// successor before testing.
pub fn chi_square_binned(observed: &[f64], expected: &[f64], fitted_params: usize) -> Result<TestReport, StatsError> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(StatsError::InvalidArgument("bins must match and number at least two"));
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if !(e >= 0.0) || !(o >= 0.0) {
            return Err(StatsError::NonFinite);
        }
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            merged.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => merged.push((o_acc, e_acc)),
        }
    }
    if merged.len() < fitted_params + 2 {
        return Err(StatsError::InvalidArgument("too few bins after merging"));
    }
    let stat: f64 = merged.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (merged.len() - 1 - fitted_params) as f64;
    let p = 1.0 - ChiSquared::new(dof).map_err(|_| StatsError::InvalidArgument("dof"))?.cdf(stat);
    let n = observed.iter().sum::<f64>() as usize;
    Ok(TestReport::statistical("chi_square", stat, p, n, 0))
}

/// Majority vote over repeated seeds: passes iff at least two thirds of the
/// runs pass (2 of 3 for the standard three seeds). The returned report is
/// the run with the median p-value (or residual), carrying the combined
/// verdict.
pub fn aggregate_seeds(runs: &[TestReport]) -> Option<TestReport> {
    if runs.is_empty() {
        return None;
    }
    let passes = runs.iter().filter(|r| r.passed()).count();
    let mut order: Vec<&TestReport> = runs.iter().collect();
    order.sort_by(|a, b| {
        let ka = a.p_value.or(a.residual.map(|r| -r)).unwrap_or(0.0);
        let kb = b.p_value.or(b.residual.map(|r| -r)).unwrap_or(0.0);
        ka.total_cmp(&kb)
    });
    let mut out = order[order.len() / 2].clone();
    out.verdict = if 3 * passes >= 2 * runs.len() {
        Verdict::Pass
    } else if runs.iter().any(|r| r.verdict == Verdict::LowPrecision) {
        Verdict::LowPrecision
    } else {
        Verdict::Fail
    };
    Some(out)
}

/// Fraction of `replications` null runs whose check fails.
pub fn null_rejection_rate(replications: u64, mut run: impl FnMut(u64) -> TestReport) -> f64 {
    let fails = (0..replications).filter(|&r| !run(r).passed()).count();
    fails as f64 / replications as f64
}
