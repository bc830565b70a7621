//! Acceptance criteria 1 to 11, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines always reach the terminal; exits non-zero
//! if any criterion fails.

use std::time::{Duration, Instant};

use expfun_core::identities::{list_identities, run_identity, run_suite, Overrides, DEFAULT_SEEDS};
use expfun_core::pathsim::{simulate_functionals, PathConfig};
use expfun_core::samplers::*;
use expfun_core::specfun::checks::{
    theta_integral_equation_residual, theta_laplace_r_residual, theta_laplace_t_residual,
};
use expfun_core::specfun::normal_cdf;
use expfun_core::stats::*;
use num_complex::Complex64;
use statrs::distribution::{Binomial, DiscreteCDF};

type Sampler = Box<dyn Fn(&mut RngStream) -> f64 + Sync>;

/// Outcome of one criterion.
struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, detail: String::new() }
    }

    fn note(&mut self, ok: bool, msg: impl AsRef<str>) {
        self.ok &= ok;
        if !ok || self.detail.len() < 400 {
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(msg.as_ref());
            if !ok {
                self.detail.push_str(" [FAIL]");
            }
        }
    }

    fn report(&mut self, label: &str, r: &TestReport) {
        let stat = r.p_value.map_or_else(|| format!("res={:.2e}", r.statistic), |p| format!("p={p:.3}"));
        self.note(r.passed(), format!("{label} {stat}"));
    }
}

fn criterion(k: u32, budget_s: u64, body: impl FnOnce(&mut Check)) -> bool {
    let start = Instant::now();
    let mut c = Check::new();
    body(&mut c);
    let took = start.elapsed();
    if took > Duration::from_secs(budget_s) {
        c.note(false, format!("runtime {:.0}s over {budget_s}s budget", took.as_secs_f64()));
    }
    println!(
        "criterion {k:>2}: {} ({:.1}s) {}",
        if c.ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        c.detail
    );
    c.ok
}

fn over(pairs: &[(&str, f64)]) -> Overrides {
    let mut o = Overrides::new();
    for &(k, v) in pairs {
        o.set(k, v).expect("valid override");
    }
    o
}

/// Three-seed majority of one scenario.
fn policy(id: &str, o: &Overrides) -> TestReport {
    let runs: Vec<TestReport> = DEFAULT_SEEDS.iter().map(|&s| run_identity(id, o, s).expect(id)).collect();
    aggregate_seeds(&runs).expect("runs")
}

fn draws(n: usize, seed: u64, stream: u64, mut f: impl FnMut(&mut RngStream) -> f64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, stream);
    (0..n).map(|_| f(&mut rng)).collect()
}

fn majority(run: impl Fn(u64) -> TestReport) -> TestReport {
    let runs: Vec<TestReport> = DEFAULT_SEEDS.iter().map(|&s| run(s)).collect();
    aggregate_seeds(&runs).expect("runs")
}

fn theta_transforms(c: &mut Check) {
    let mut worst_t: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        for lambda in [0.0, 1.0, 2.0] {
            let res = theta_laplace_t_residual(r, lambda).expect("laplace t");
            worst_t = worst_t.max(res);
            if res > 1e-6 {
                c.note(false, format!("t-transform r={r} lambda={lambda}: {res:.1e}"));
            }
        }
    }
    let mut worst_r: f64 = 0.0;
    for x in [0.0, 1.0, 2.0] {
        for t in [0.5, 1.0, 2.0] {
            let tol = if x == 2.0 && t == 2.0 { 1e-5 } else { 1e-6 };
            let res = theta_laplace_r_residual(x, t).expect("laplace r");
            worst_r = worst_r.max(res);
            if res > tol {
                c.note(false, format!("r-transform x={x} t={t}: {res:.1e}"));
            }
        }
    }
    c.note(c.ok, format!("max t-transform residual {worst_t:.1e}, max r-transform residual {worst_r:.1e}"));
}

fn integral_equation(c: &mut Check) {
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        for t in [0.5, 1.0, 2.0] {
            let tol = if t == 0.5 { 1e-4 } else { 1e-5 };
            let res = theta_integral_equation_residual(r, t).expect("integral equation");
            worst = worst.max(res);
            if res > tol {
                c.note(false, format!("r={r} t={t}: {res:.1e}"));
            }
        }
    }
    c.note(c.ok, format!("max residual {worst:.1e}"));
}

fn bessel_identities(c: &mut Check) {
    for id in ["bessel_k_product", "bessel_k_sinh", "intrel", "phw", "fourier_aim", "fourier_aimd", "fourier_remark"] {
        let r = run_identity(id, &Overrides::new(), 0).expect(id);
        c.report(id, &r);
    }
}

fn bougerol(c: &mut Check) {
    let ids = ["bougerol_basic", "bougerol_shifted", "tm1_fixed_time", "tm1_hitting_time", "tm1_prime", "tm2_fixed_time"];
    let suite = run_suite(&ids.join(" | "), &DEFAULT_SEEDS, &Overrides::new()).expect("filter");
    for o in &suite.outcomes {
        match (&o.aggregate, &o.error) {
            (Some(r), None) => c.report(o.id, r),
            _ => c.note(false, format!("{}: {:?}", o.id, o.error)),
        }
    }
    // The shifted form at a second shift.
    c.report("bougerol_shifted x=1", &policy("bougerol_shifted", &over(&[("x", 1.0)])));
}

fn cauchy(c: &mut Check) {
    let n = 1e6;
    c.report("tm3_i a=1 theta=1", &policy("tm3_i", &over(&[("a", 1.0), ("theta", 1.0), ("n", n)])));
    c.report("tm3_i a=2 theta=0.5", &policy("tm3_i", &over(&[("a", 2.0), ("theta", 0.5), ("n", n)])));
    c.report("tm3_ii a=0.5 theta=0.5", &policy("tm3_ii", &over(&[("a", 0.5), ("theta", 0.5), ("n", n)])));
}

fn dufresne(c: &mut Check) {
    for nu in [1.0, 2.0] {
        let r = policy("dufresne", &over(&[("nu", nu), ("n", 1e5)]));
        c.note(r.passed() && r.p_value.unwrap_or(0.0) > 0.01, format!("dufresne nu={nu} p={:.3}", r.p_value.unwrap_or(f64::NAN)));
    }
    c.report("pduf_finite_t t=1", &policy("pduf_finite_t", &over(&[("t", 1.0)])));
}

fn moments(c: &mut Check) {
    let cfg = PathConfig::new(1.0, 1 << 14, 0.0).expect("config");
    let mut rng = RngStream::new(DEFAULT_SEEDS[0], 0xacce);
    let n = 1_000_000;
    let mut a = Vec::with_capacity(n);
    let mut inv = Vec::with_capacity(n);
    for _ in 0..n {
        let s = simulate_functionals(&cfg, &mut rng);
        a.push(s.a_t);
        inv.push(1.0 / s.a_t.sqrt());
    }
    let e1 = 1f64.exp();
    c.report("E[A_1]", &mean_vs_target(&a, (e1 * e1 - 1.0) / 2.0, 4.0).expect("mean"));
    c.report("E[A_1^-1/2]", &mean_vs_target(&inv, 1.0, 4.0).expect("mean"));
    let (level, mu) = (2.0, 1.5);
    let tau = draws(n, DEFAULT_SEEDS[0], 0xacc1, |r| sample_hitting_time_drifted(level, mu, r).expect("tau"));
    c.report("E[tau_a(B^mu)]", &mean_vs_target(&tau, level / mu, 4.0).expect("mean"));
    c.report("tm2_mean t=1", &policy("tm2_mean", &over(&[("t", 1.0)])));
}

fn densities(c: &mut Check) {
    c.report("z_marginal", &policy("z_marginal", &Overrides::new()));
    c.report("joint_law", &policy("joint_law", &Overrides::new()));
    c.report("psym_density", &policy("psym_density", &Overrides::new()));
    for x in [0.0, 1.0] {
        c.report(&format!("grel x={x}"), &policy("grel", &over(&[("x", x)])));
    }
}

fn sampler_fits(c: &mut Check) {
    let gig = |nu, a, b| GigParams::new(nu, a, b).expect("gig");
    let cases: Vec<(&str, Dist, Sampler)> = vec![
        ("gig(0;1,1)", Dist::Gig(gig(0.0, 1.0, 1.0)), {
            let s = GigSampler::new(gig(0.0, 1.0, 1.0));
            Box::new(move |r| s.sample(r))
        }),
        ("gig(-0.5;2,1)", Dist::Gig(gig(-0.5, 2.0, 1.0)), {
            let s = GigSampler::new(gig(-0.5, 2.0, 1.0));
            Box::new(move |r| s.sample(r))
        }),
        ("gig(2.5;0.5,3)", Dist::Gig(gig(2.5, 0.5, 3.0)), {
            let s = GigSampler::new(gig(2.5, 0.5, 3.0));
            Box::new(move |r| s.sample(r))
        }),
        ("gamma(0.5)", Dist::Gamma { nu: 0.5 }, Box::new(|r| sample_gamma(0.5, r).expect("gamma"))),
        ("gamma(3)", Dist::Gamma { nu: 3.0 }, Box::new(|r| sample_gamma(3.0, r).expect("gamma"))),
        ("zmu(1)", Dist::Zmu { mu: 1.0 }, {
            let s = ZmuSampler::new(1.0).expect("zmu");
            Box::new(move |r| s.sample(r))
        }),
        ("zmu(0.1)", Dist::Zmu { mu: 0.1 }, {
            let s = ZmuSampler::new(0.1).expect("zmu");
            Box::new(move |r| s.sample(r))
        }),
        ("hitting_bm(1.5)", Dist::HittingTimeBm { a: 1.5 }, Box::new(|r| sample_hitting_time_bm(1.5, r).expect("tau"))),
        (
            "hitting_drifted(2,1)",
            Dist::HittingTimeDrifted { a: 2.0, mu: 1.0 },
            Box::new(|r| sample_hitting_time_drifted(2.0, 1.0, r).expect("tau")),
        ),
        ("cauchy", Dist::Cauchy, Box::new(sample_cauchy)),
        ("normal", Dist::Normal { mean: 0.0, sd: 1.0 }, Box::new(|r| r.normal())),
        ("sinh_gaussian(1)", Dist::SinhGaussian { t: 1.0 }, Box::new(|r| r.normal().sinh())),
        (
            "half_inverse_gamma(1)",
            Dist::HalfInverseGamma { nu: 1.0 },
            Box::new(|r| 0.5 / sample_gamma(1.0, r).expect("gamma")),
        ),
    ];
    for (k, (label, dist, sampler)) in cases.iter().enumerate() {
        let table = CdfTable::new(dist).expect("table");
        let r = majority(|s| ks_vs_cdf(&draws(100_000, s, k as u64, sampler), |x| table.cdf(x)).expect("ks"));
        c.report(label, &r);
    }
    // Scaling: c²·GIG(ν; a, b) is GIG(ν; ac, b/c).
    let (p, k) = (gig(0.5, 1.0, 2.0), 3.0);
    let (base, scaled) = (GigSampler::new(p), GigSampler::new(p.scaled(k).expect("scaled")));
    let r = majority(|s| {
        let lhs = draws(100_000, s, 100, |r| k * k * base.sample(r));
        let rhs = draws(100_000, s, 101, |r| scaled.sample(r));
        ks_two_sample(&lhs, &rhs).expect("ks")
    });
    c.report("gig scaling", &r);
    c.report("zmu_gig", &policy("zmu_gig", &Overrides::new()));
}

/// Rejection rate at `ALPHA` over null replications, judged against the
/// central 99% binomial band.
fn calibrate(c: &mut Check, family: &str, reps: u64, run: impl Fn(u64) -> TestReport) {
    let rejections = (0..reps).filter(|&r| run(r).p_value.expect("p-value") < ALPHA).count() as u64;
    let b = Binomial::new(ALPHA, reps).expect("binomial");
    // statrs' own inverse_cdf panics near the upper tail here.
    let quantile = |q: f64| (0..=reps).find(|&k| b.cdf(k) >= q).unwrap_or(reps);
    let (lo, hi) = (quantile(0.005), quantile(0.995));
    c.note((lo..=hi).contains(&rejections), format!("{family} {rejections}/{reps} in [{lo},{hi}]"));
}

fn calibration_and_power(c: &mut Check) {
    let reps = 500;
    calibrate(c, "ks_two_sample", reps, |r| {
        let xs = draws(1000, r, 0, |g| g.normal());
        let ys = draws(1000, r, 1, |g| g.normal());
        ks_two_sample(&xs, &ys).expect("ks2")
    });
    calibrate(c, "ks_one_sample", reps, |r| ks_vs_cdf(&draws(1000, r, 2, |g| g.normal()), normal_cdf).expect("ks1"));
    calibrate(c, "energy_distance", reps, |r| {
        let pts = |s| {
            let mut g = RngStream::new(r, s);
            (0..500).map(|_| vec![g.normal(), g.exponential()]).collect::<Vec<_>>()
        };
        energy_distance_test(&pts(3), &pts(4), 200, &mut RngStream::new(r, 5)).expect("energy")
    });
    calibrate(c, "ecf_sup", reps, |r| {
        let grid: Vec<f64> = (1..=50).map(|k| k as f64 * 0.1).collect();
        ecf_compare(&draws(10_000, r, 6, |g| g.normal()), |xi| Complex64::new((-0.5 * xi * xi).exp(), 0.0), &grid)
            .expect("ecf")
    });
    calibrate(c, "mean_z", reps, |r| mean_vs_target(&draws(1000, r, 7, |g| g.exponential()), 1.0, 4.0).expect("mean"));
    calibrate(c, "chi_square", reps, |r| {
        let mut counts = [0.0; 10];
        for u in draws(1000, r, 8, |g| g.uniform()) {
            counts[((u * 10.0) as usize).min(9)] += 1.0;
        }
        chi_square_binned(&counts, &[100.0; 10], 0).expect("chi2")
    });
    let negatives = run_suite("negative", &DEFAULT_SEEDS, &Overrides::new()).expect("filter");
    let expected = list_identities().iter().filter(|s| s.negative).count();
    c.note(negatives.outcomes.len() == expected, format!("{expected} negative controls"));
    for o in &negatives.outcomes {
        let failed = o.error.is_none() && o.aggregate.as_ref().is_some_and(|r| r.verdict == Verdict::Fail);
        c.note(failed, format!("{} fails", o.id));
    }
}

fn determinism(c: &mut Check) {
    let render = || {
        let s = run_suite("", &DEFAULT_SEEDS, &Overrides::new()).expect("suite");
        (serde_json::to_string(&s).expect("serialize"), s)
    };
    let (first, suite) = render();
    let (second, _) = render();
    c.note(first == second, format!("{} bytes, identical", first.len()));
    // Not a numbered criterion, but the same run shows the default suite outcome.
    let failing: Vec<&str> = suite.outcomes.iter().filter(|o| !o.passed()).map(|o| o.id).collect();
    println!("default suite: {} of {} scenarios pass {:?}", suite.outcomes.len() - failing.len(), suite.outcomes.len(), failing);
}

fn main() {
    // `cargo test -- --list` and filters: this target has no sub-tests.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let results = [
        criterion(1, 60, theta_transforms),
        criterion(2, 120, integral_equation),
        criterion(3, 60, bessel_identities),
        criterion(4, 600, bougerol),
        criterion(5, 120, cauchy),
        criterion(6, 300, dufresne),
        criterion(7, 300, moments),
        criterion(8, 600, densities),
        criterion(9, 180, sampler_fits),
        criterion(10, 600, calibration_and_power),
        criterion(11, 1200, determinism),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed} of {} criteria pass", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
