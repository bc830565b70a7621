//! Registry of identities in law, each bound to a construction of both
//! sides and a test.
//!
//! Every scenario draws from its own random stream, keyed by the seed and
//! a hash of its id, so results do not depend on which other scenarios run
//! or in what order.

mod filter;
mod params;
mod scenarios;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::pathsim::PathError;
use crate::samplers::{RngStream, SamplerError};
use crate::specfun::SpecfunError;
use crate::stats::{aggregate_seeds, StatsError, TestReport, Verdict};

pub use filter::TagExpr;
pub use params::{Overrides, Param, Params};
pub use scenarios::{CONDITIONAL_WINDOW, ENERGY_PERMUTATIONS, MEAN_K_SE, Z_LEVEL_CAP};

use scenarios as s;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentityError {
    #[error("unknown identity `{0}`")]
    UnknownId(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid value {value} for `{key}`: {reason}")]
    InvalidOverride { key: String, value: f64, reason: &'static str },
    #[error("`{id}` does not use parameter `{key}`")]
    UnusedParameter { id: String, key: &'static str },
    #[error("invalid filter `{filter}`: {reason}")]
    InvalidFilter { filter: String, reason: &'static str },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Significance level of statistical scenarios unless stated otherwise.
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Level of scenarios with a known, tolerated bias.
pub const BIASED_ALPHA: f64 = 0.001;
/// Seeds of the default three-seed policy.
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
/// Tag carried by every deliberately wrong variant.
pub const NEGATIVE_TAG: &str = "negative";

/// How the two sides of a scenario are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Ks2,
    KsCdf,
    Energy,
    Ecf,
    Mean,
    ChiSquare,
    Residual,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Ks2 => "ks2",
            TestKind::KsCdf => "ks_cdf",
            TestKind::Energy => "energy",
            TestKind::Ecf => "ecf",
            TestKind::Mean => "mean",
            TestKind::ChiSquare => "chi_square",
            TestKind::Residual => "residual",
        }
    }
}

type RunFn = fn(&Params, &s::Ctx) -> Result<TestReport, IdentityError>;

/// One registered identity.
#[derive(Clone, Serialize)]
pub struct IdentityScenario {
    pub id: &'static str,
    pub description: &'static str,
    /// The identity in plain notation.
    pub formula: &'static str,
    pub tags: Vec<&'static str>,
    pub dimension: u8,
    pub test_kind: TestKind,
    pub defaults: Params,
    /// Parameters the construction reads.
    pub uses: &'static [Param],
    pub alpha: f64,
    /// A deliberately wrong variant that should fail.
    pub negative: bool,
    #[serde(skip)]
    run: RunFn,
}

impl std::fmt::Debug for IdentityScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IdentityScenario")
            .field("id", &self.id)
            .field("tags", &self.tags)
            .field("test_kind", &self.test_kind)
            .finish_non_exhaustive()
    }
}

impl IdentityScenario {
    fn new(id: &'static str, family: &'static str, test_kind: TestKind, dimension: u8, uses: &'static [Param], run: RunFn) -> Self {
        let mut tags = vec![family, test_kind.as_str()];
        if test_kind != TestKind::Residual {
            tags.push(if uses.contains(&Param::Steps) { "path" } else { "exact" });
        }
        let mut defaults = Params::BASE;
        if test_kind == TestKind::Energy {
            defaults.n = 2000;
        }
        Self {
            id,
            description: "",
            formula: "",
            tags,
            dimension,
            test_kind,
            defaults,
            uses,
            alpha: DEFAULT_ALPHA,
            negative: false,
            run,
        }
    }

    fn about(mut self, description: &'static str, formula: &'static str) -> Self {
        self.description = description;
        self.formula = formula;
        self
    }

    fn tag(mut self, tag: &'static str) -> Self {
        self.tags.push(tag);
        self
    }

    fn defaults(mut self, f: impl FnOnce(&mut Params)) -> Self {
        f(&mut self.defaults);
        self
    }

    fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn negative(mut self) -> Self {
        self.negative = true;
        self.tag(NEGATIVE_TAG)
    }

    pub fn matches(&self, expr: &TagExpr) -> bool {
        expr.matches(self.id, &self.tags)
    }
}

use Param::{Lambda, Level, Mu, Nu, Steps, Theta, Xi, A, N, T, V, X, Y};
use TestKind::{ChiSquare, Ecf, Energy, KsCdf, Ks2, Mean, Residual};

fn build_registry() -> Vec<IdentityScenario> {
    type S = IdentityScenario;
    let mut r = vec![
        // Bougerol's identity and its extensions.
        S::new("bougerol_basic", "bougerol", Ks2, 1, &[N, T, Steps], s::bougerol_basic)
            .about("Brownian motion run for the clock A_t has the law of sinh B_t", "beta(A_t) = sinh(B_t)"),
        S::new("bougerol_shifted", "bougerol", Ks2, 1, &[N, T, X, Steps], s::bougerol_shifted)
            .about("Shifted form of Bougerol's identity", "e^{B_t} sinh x + beta(A_t) = sinh(x + B_t)"),
        S::new("time_reversal", "bougerol", Energy, 2, &[N, T, Steps], s::time_reversal)
            .about("Reversing the path at time t", "(e^{-B_t}, e^{-2B_t} A_t) = (e^{B_t}, A_t)"),
        S::new("tm1_fixed_time", "bougerol", Energy, 3, &[N, T, X, Steps], s::tm1_fixed_time).about(
            "Joint extension with a Cauchy coordinate and Z, at a fixed time",
            "(e^{B} sinh x + beta(A), C e^{B} cosh x + hat beta(A), Z) = (sinh(x+B), C cosh(x+B), Z) at tau = t",
        ),
        S::new("tm1_hitting_time", "bougerol", Energy, 3, &[N, X, Level, Steps], s::tm1_hitting_time).about(
            "Joint extension at the first time Z reaches a level",
            "same as tm1_fixed_time with tau = inf{s : Z_s = level} capped at 50",
        ),
        S::new("tm1_prime", "bougerol", Energy, 3, &[N, T, X, Steps], s::tm1_prime).about(
            "Joint extension with a Brownian hitting time in place of the Cauchy coordinate",
            "(e^{B} sinh x + beta(A), tau_{e^{B} cosh x} + A, Z) = (sinh(x+B), tau_{cosh(x+B)}, Z)",
        ),
        S::new("tm2_fixed_time", "bougerol", Energy, 3, &[N, T, X, Steps], s::tm2_fixed_time).about(
            "Joint extension recovering e^{B} through a drifted hitting time",
            "(e^{B} sinh x + beta(A), e^{B}, Z) = (sinh(x+B), tau_{cosh(x+B)}(W^{(cosh x / Z)}) / Z, Z)",
        ),
        S::new("tm2_mean", "bougerol", Mean, 1, &[N, T, X, Steps], s::tm2_mean)
            .about("Mean of the drifted hitting-time coordinate", "E[tau_{cosh(x+B_t)}(W^{(cosh x / Z_t)}) / Z_t] = e^{t/2}"),
        S::new("rstop_half_inverse", "bougerol", Ks2, 1, &[N, T, Steps], s::rstop_half_inverse)
            .about("Brownian motion at the clock 1/A_t", "beta(1/A_t) = (e^{2B_t} - 1) / (2 A_t)"),
        S::new("rstop_sqrt", "bougerol", Ks2, 1, &[N, T, Steps], s::rstop_sqrt).about(
            "Brownian motion at the clock e^{B_t}",
            "beta(e^{B_t}) = (sqrt(e^{3B_t}/A_t) - sqrt(e^{-B_t}/A_t)) / 2",
        ),
        S::new("invcauchy", "cauchy", Ks2, 1, &[N, T, X, Steps], s::invcauchy).about(
            "A ratio built from the extension is standard Cauchy",
            "(C e^{B} cosh x + hat beta(A)) / sqrt(1 + (e^{B} sinh x + beta(A))^2) = C",
        ),
        S::new("agi", "bougerol", Energy, 2, &[N, T, Steps], s::agi).about(
            "Conditional law of beta(A_t) given B_t through an arcsine variable and a Bessel radius",
            "(beta(A_t), B_t) = ((2Y - 1) phi(B_t, sqrt(R_t^2 + B_t^2)), B_t), phi(x, z) = sqrt(2 e^x (cosh z - cosh x))",
        ),
        // Cauchy invariance.
        S::new("tm3_i", "cauchy", Ecf, 1, &[N, A, Theta], s::tm3_i)
            .about("Characteristic function for |a| >= 1", "E[e^{i xi (aC + theta sqrt(1 + a^2 C^2) eps)}] = e^{-|a xi|} cosh(theta xi sqrt(a^2 - 1))")
            .defaults(|p| p.n = 1_000_000),
        S::new("tm3_ii", "cauchy", Ecf, 1, &[N, A, Theta], s::tm3_ii)
            .about("Characteristic function for |a| <= 1", "E[e^{i xi (aC + theta sqrt(1 + a^2 C^2) eps)}] = e^{-|a xi|} cos(theta xi sqrt(1 - a^2))")
            .defaults(|p| {
                p.n = 1_000_000;
                p.a = 0.5;
            }),
        S::new("pcauchy_i", "cauchy", Ks2, 1, &[N, X, Y], s::pcauchy_i)
            .about("Random hyperbolic shift of a scaled Cauchy variable", "sinh(argsh(C cosh x) + y eps) = C cosh(x + y eps)"),
        S::new("pcauchy_ii", "cauchy", Ks2, 1, &[N, A, Y], s::pcauchy_ii)
            .about("Random hyperbolic shift for |a| <= 1", "sinh(argsh(aC) + y eps) = aC cosh y + sqrt(1 - a^2) sinh(y eps)")
            .defaults(|p| p.a = 0.5),
        S::new("cauchy_subordination", "cauchy", Ks2, 1, &[N, A], s::cauchy_subordination)
            .about("Brownian motion at an independent hitting time is Cauchy", "beta(tau_a) = a C"),
        // The variable z_mu.
        S::new("phinge", "zmu", Ks2, 1, &[N, Mu], s::phinge)
            .about("One-dimensional form of the key proposition", "sinh z_mu = beta(e^{z_mu} / mu)"),
        S::new("zmu_gig", "zmu", Ks2, 1, &[N, Mu], s::zmu_gig)
            .about("Exponential of z_mu is generalized inverse Gaussian", "e^{z_mu} / mu = GIG(0; 1, mu)"),
        S::new("rpkey_clt", "zmu", Ks2, 1, &[N, Mu], s::rpkey_clt)
            .about("Gaussian limit for large mu", "sqrt(mu) sinh z_mu -> N(0, 1)")
            .defaults(|p| p.mu = 1e4),
        S::new("pkey_1", "zmu", Energy, 2, &[N, Mu, X], s::pkey_1).about(
            "Key proposition with a Cauchy coordinate",
            "(e^{z} sinh x + beta(e^{z}/mu), C e^{z} cosh x + hat beta(e^{z}/mu)) = (sinh(x+z), C cosh(x+z))",
        ),
        S::new("pkey_2", "zmu", Energy, 2, &[N, Mu, X], s::pkey_2).about(
            "Key proposition with a Brownian hitting time",
            "(e^{z} sinh x + beta(e^{z}/mu), tau_{e^{z} cosh x} + e^{z}/mu) = (sinh(x+z), tau_{cosh(x+z)})",
        ),
        S::new("pkey_3", "zmu", Energy, 2, &[N, Mu, X], s::pkey_3).about(
            "Key proposition with a drifted hitting time",
            "(e^{z} sinh x + beta(e^{z}/mu), e^{z}) = (sinh(x+z), mu tau_{cosh(x+z)}(W^{(mu cosh x)}))",
        ),
        // Dufresne-type identities.
        S::new("dufresne", "dufresne", Ks2, 1, &[N, Nu, Steps], s::dufresne)
            .about("Perpetuity of Brownian motion with negative drift", "A_infinity^{(-nu)} = 1 / (2 gamma_nu)")
            .defaults(|p| p.steps = 1 << 8),
        S::new("pduf_finite_t", "dufresne", Ks2, 1, &[N, T, Nu, Steps], s::pduf_finite_t)
            .about("Finite-time form of Dufresne's identity", "e^{2B_t^{(-nu)}} / (2 gamma_nu) + A_t^{(-nu)} = 1 / (2 gamma_nu)"),
        S::new("eqdufd", "dufresne", Ks2, 1, &[N, T, X, Steps], s::eqdufd).about(
            "Dufresne-type identity with a shift",
            "e^{2B_t} cosh^2 x / (2 gamma_{1/2}) + A_t = cosh^2(x + B_t) / (2 gamma_{1/2})",
        ),
        S::new("ppar_1", "dufresne", Ks2, 1, &[N, T, X, Steps], s::ppar_1)
            .about("Cauchy coordinate of the extension alone", "C e^{B_t} cosh x + hat beta(A_t) = C cosh(x + B_t)"),
        S::new("ppar_2", "dufresne", Energy, 2, &[N, T, Steps], s::ppar_2)
            .about("Joint Cauchy form at x = 0", "(beta(A_t), C e^{B_t} + hat beta(A_t)) = (sinh B_t, C cosh B_t)"),
        // Joint Laplace transform.
        S::new("pjlt_cos", "laplace", Mean, 1, &[N, T, Lambda, Xi, Steps], s::pjlt_cos).about(
            "Joint Laplace transform as a Gaussian expectation, lambda <= |xi|",
            "E[e^{-lambda e^{B_t} - xi^2 A_t / 2}] = E[e^{-lambda cosh B_t} cos(sqrt(xi^2 - lambda^2) sinh B_t)]",
        ),
        S::new("pjlt_cosh", "laplace", Mean, 1, &[N, T, Lambda, Xi, Steps], s::pjlt_cosh)
            .about(
                "Joint Laplace transform as a Gaussian expectation, lambda >= |xi|",
                "E[e^{-lambda e^{B_t} - xi^2 A_t / 2}] = E[e^{-lambda cosh B_t} cosh(sqrt(lambda^2 - xi^2) sinh B_t)]",
            )
            .defaults(|p| {
                p.lambda = 1.0;
                p.xi = 0.5;
            }),
        S::new("jlt_theta_crosscheck", "laplace", Mean, 1, &[N, T, Lambda, Xi, Steps], s::jlt_theta_crosscheck).about(
            "Joint Laplace transform against its Hartman-Watson integral",
            "E[e^{-lambda e^{B_t} - xi^2 A_t / 2}] = 2 int_0^inf K_0(sqrt((r + lambda)^2 + xi^2 - lambda^2)) Theta_r(t) dr / r",
        ),
        // Densities.
        S::new("psym_density", "density", KsCdf, 1, &[N, Mu, V], s::psym_density)
            .about("Law of e^{2z_mu} v + e^{z_mu}/mu against its closed-form density", "density of e^{2 z_mu} v + e^{z_mu} / mu"),
        S::new("psym_swap", "density", Residual, 3, &[T], s::psym_swap).about(
            "Weighted joint density of (e^{2B_t} v + A_t, Z_t) is symmetric in (u, v)",
            "e^{-1/2v} p_v(u, w) / v = e^{-1/2u} p_u(v, w) / u",
        ),
        S::new("grel", "density", Mean, 1, &[N, T, X, Steps], s::grel).about(
            "Gaussian kernel as an expectation of path functionals",
            "E[(2 pi A_t)^{-1/2} e^{-e^{2B_t} sinh^2 x / (2 A_t)}] = (2 pi t)^{-1/2} e^{-x^2 / 2t}",
        ),
        S::new("pden_gaussian", "density", Residual, 1, &[T], s::pden_gaussian).about(
            "Density of B_t recovered by Fourier inversion of sinh(x + B_t)",
            "phi(x) = (1/2pi) int E[cos(xi sinh(x + B_t))] dxi",
        ),
        S::new("z_marginal", "density", KsCdf, 1, &[N, T, Steps], s::z_marginal)
            .about("Marginal law of 1/Z_t", "density of 1/Z_t at m is (2/m) K_0(m) Theta_m(t)"),
        S::new("joint_law", "density", ChiSquare, 2, &[N, T, Steps], s::joint_law)
            .about("Binned joint law of (e^{B_t}, A_t)", "density of (e^{B_t}, A_t) in closed form via Theta")
            .alpha(BIASED_ALPHA),
        S::new("pparti_conditional", "zmu", KsCdf, 1, &[N, T, Mu, Steps], s::pparti_conditional)
            .about("Law of B_t given 1/Z_t = mu is that of z_mu", "B_t | {1/Z_t = mu} = z_mu")
            .defaults(|p| p.n = 200_000)
            .alpha(BIASED_ALPHA),
        S::new("z_diffusion_consistency", "density", Ks2, 1, &[N, T, Steps], s::z_diffusion_consistency)
            .about("Z_t from its own diffusion equation against the pathwise construction", "Z_t (generator) = A_t e^{-B_t}")
            .defaults(|p| p.n = 10_000)
            .alpha(BIASED_ALPHA),
        // Deterministic residual checks.
        S::new("gig_eigenfunction", "zmu", Residual, 1, &[], s::gig_eigenfunction)
            .about("Laplace transform of 1/G for G ~ GIG(0; 1, mu)", "E[e^{-lambda^2 / (2G)}] = K_0(mu sqrt(1 + lambda^2)) / K_0(mu)"),
        S::new("theta_laplace_t", "theta", Residual, 1, &[], s::theta_laplace_t)
            .about("Laplace transform of Theta_r in t", "int_0^inf e^{-lambda^2 t / 2} Theta_r(t) dt = I_lambda(r)"),
        S::new("theta_laplace_r", "theta", Residual, 1, &[], s::theta_laplace_r)
            .about("Integral of Theta_r against e^{-r cosh x}", "int_0^inf e^{-r cosh x} Theta_r(t) dr / r = (2 pi t)^{-1/2} e^{-x^2 / 2t}"),
        S::new("theta_integral_equation", "theta", Residual, 1, &[], s::theta_integral_equation)
            .about("Integral equation satisfied by Theta", "Theta against K_0 reproduces the Gaussian kernel"),
        S::new("bessel_k_product", "bessel", Residual, 1, &[], s::bessel_k_product)
            .about("Product formula for K_nu", "K_nu(z) K_nu(w) as a single integral of K_0"),
        S::new("bessel_k_sinh", "bessel", Residual, 1, &[], s::bessel_k_sinh)
            .about("Integral representation of K_nu", "K_nu(z) = int_0^inf e^{-z cosh u} cosh(nu u) du"),
        S::new("intrel", "theta", Residual, 1, &[], s::intrel)
            .about("Integral relation between Theta and the Gaussian law", "Fourier pair involving Theta and K_{i xi}"),
        S::new("phw", "theta", Residual, 1, &[], s::phw)
            .about("Integral relation for the Hartman-Watson law", "Fourier pair involving Theta and K_{i xi}, b != 0"),
        S::new("fourier_aim", "theta", Residual, 1, &[], s::fourier_aim)
            .about("Fourier representation of Theta at alpha = pi", "Fourier transform in xi of Theta-weighted Bessel kernel"),
        S::new("fourier_aimd", "theta", Residual, 1, &[], s::fourier_aimd)
            .about("Fourier representation of Theta at other angles", "as fourier_aim, alpha in {0, pi/2, 2 pi}"),
        S::new("fourier_remark", "theta", Residual, 1, &[], s::fourier_remark)
            .about("Special cases of the Fourier representation", "zero limit and alpha in {pi/2, 2 pi}"),
        // Negative controls.
        S::new("neg_bougerol_time", "bougerol", Ks2, 1, &[N, T], s::neg_bougerol_time)
            .about("Bougerol's identity with A_t replaced by t", "beta(t) vs sinh(B_t)")
            .negative(),
        S::new("neg_time_reversal", "bougerol", Energy, 2, &[N, T, Steps], s::neg_time_reversal)
            .about("Time reversal without rescaling A_t", "(e^{-B_t}, A_t) vs (e^{B_t}, A_t)")
            .negative(),
        S::new("neg_tm3_wrong_branch", "cauchy", Ecf, 1, &[N, A, Theta], s::neg_tm3_wrong_branch)
            .about("Cosine branch used for |a| > 1", "e^{-|a xi|} cos(theta xi sqrt(a^2 - 1))")
            .defaults(|p| p.n = 1_000_000)
            .negative(),
        S::new("neg_grel_cosh", "density", Mean, 1, &[N, T, X, Steps], s::neg_grel_cosh)
            .about("Gaussian kernel representation with cosh in place of sinh", "cosh^2 x in place of sinh^2 x")
            .negative(),
        S::new("neg_psym_wrong_v", "density", KsCdf, 1, &[N, Mu, V], s::neg_psym_wrong_v)
            .about("Symmetric density evaluated at the wrong v", "law at 2v")
            .negative(),
        S::new("neg_gig_eigenfunction", "zmu", Residual, 1, &[], s::neg_gig_eigenfunction)
            .about("Eigenfunction relation with G in place of 1/G", "E[e^{-lambda^2 G / 2}] vs K_0(mu sqrt(1 + lambda^2)) / K_0(mu)")
            .negative(),
        S::new("neg_z_marginal", "density", KsCdf, 1, &[N, T, Steps], s::neg_z_marginal)
            .about("1/Z_t against the law at time 2t", "law of 1/Z_{2t}")
            .negative(),
    ];
    r.sort_by_key(|sc| sc.id);
    r
}

static REGISTRY: LazyLock<Vec<IdentityScenario>> = LazyLock::new(build_registry);

/// Every registered scenario, sorted by id.
pub fn list_identities() -> &'static [IdentityScenario] {
    &REGISTRY
}

pub fn find_identity(id: &str) -> Result<&'static IdentityScenario, IdentityError> {
    REGISTRY
        .binary_search_by(|sc| sc.id.cmp(id))
        .map(|i| &REGISTRY[i])
        .map_err(|_| IdentityError::UnknownId(id.to_owned()))
}

/// FNV-1a hash of an id, used as its stream number.
fn stream_id(id: &str) -> u64 {
    id.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// p-value families whose verdict is re-decided at the scenario's level.
const LEVEL_DECIDED: [&str; 4] = ["ks_two_sample", "ks_one_sample", "energy_distance", "chi_square"];

fn execute(sc: &IdentityScenario, params: &Params, alpha: f64, seed: u64) -> Result<TestReport, IdentityError> {
    let ctx = s::Ctx::new(RngStream::new(seed, stream_id(sc.id)));
    let mut report = (sc.run)(params, &ctx)?;
    if let Some(p) = report.p_value {
        if LEVEL_DECIDED.contains(&report.statistic_name.as_str()) {
            report.verdict = if p >= alpha { Verdict::Pass } else { Verdict::Fail };
        }
    }
    Ok(report.with_identity(sc.id, seed))
}

/// Runs one scenario with its defaults, replaced by `overrides`. Every
/// overridden key must be one the scenario reads.
pub fn run_identity(id: &str, overrides: &Overrides, seed: u64) -> Result<TestReport, IdentityError> {
    let sc = find_identity(id)?;
    let params = overrides.apply(sc.id, sc.defaults, sc.uses, true)?;
    execute(sc, &params, overrides.alpha().unwrap_or(sc.alpha), seed)
}

/// Result of one scenario across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub id: &'static str,
    pub runs: Vec<TestReport>,
    /// Seed-aggregated report, absent when a run errored.
    pub aggregate: Option<TestReport>,
    pub error: Option<String>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.aggregate.as_ref().is_some_and(TestReport::passed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seeds: Vec<u64>,
    pub outcomes: Vec<ScenarioOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(ScenarioOutcome::passed)
    }

    pub fn aggregates(&self) -> impl Iterator<Item = &TestReport> {
        self.outcomes.iter().filter_map(|o| o.aggregate.as_ref())
    }
}

/// Scenarios selected by `filter`. Negative controls are left out unless
/// the filter names them or the `negative` tag.
pub fn select(filter: &str) -> Result<Vec<&'static IdentityScenario>, IdentityError> {
    let expr = TagExpr::parse(filter)?;
    let wants_negative = expr.mentions(&|w| w == NEGATIVE_TAG || w.starts_with("neg_"));
    Ok(REGISTRY
        .iter()
        .filter(|sc| sc.matches(&expr) && (wants_negative || !sc.negative))
        .collect())
}

/// Runs every selected scenario under each seed and aggregates the runs
/// by the two-thirds rule. Override keys a scenario does not read are
/// ignored for that scenario. Work is spread over the available cores.
pub fn run_suite(filter: &str, seeds: &[u64], overrides: &Overrides) -> Result<SuiteReport, IdentityError> {
    let scenarios = select(filter)?;
    let jobs: Vec<(usize, u64)> = (0..scenarios.len())
        .flat_map(|i| seeds.iter().map(move |&seed| (i, seed)))
        .collect();
    let results: Vec<Mutex<Option<Result<TestReport, IdentityError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, seed)) = jobs.get(k) else { break };
                let sc = scenarios[i];
                let out = overrides
                    .apply(sc.id, sc.defaults, sc.uses, false)
                    .and_then(|p| execute(sc, &p, overrides.alpha().unwrap_or(sc.alpha), seed));
                *results[k].lock().expect("result slot") = Some(out);
            });
        }
    });
    let mut results = results.into_iter().map(|m| m.into_inner().expect("result slot").expect("job ran"));
    let outcomes = scenarios
        .iter()
        .map(|sc| {
            let mut runs = Vec::with_capacity(seeds.len());
            let mut error = None;
            for r in results.by_ref().take(seeds.len()) {
                match r {
                    Ok(rep) => runs.push(rep),
                    Err(e) => error = error.or(Some(e.to_string())),
                }
            }
            let aggregate = if error.is_none() { aggregate_seeds(&runs) } else { None };
            ScenarioOutcome { id: sc.id, runs, aggregate, error }
        })
        .collect();
    Ok(SuiteReport {
        seeds: seeds.to_vec(),
        outcomes,
    })
}
