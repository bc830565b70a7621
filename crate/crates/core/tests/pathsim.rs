use expfun_core::pathsim::*;
use expfun_core::quad::{self, Tolerance};
use expfun_core::samplers::{sample_gamma, zmu_cdf, CdfTable, Dist, RngStream};
use expfun_core::specfun::{bessel_k1_over_k0, normal_cdf};
use expfun_core::stats::*;
use proptest::prelude::*;

const SEEDS: [u64; 3] = [101, 202, 303];

fn majority(run: impl Fn(u64) -> TestReport) -> TestReport {
    let runs: Vec<TestReport> = SEEDS.iter().map(|&s| run(s)).collect();
    aggregate_seeds(&runs).unwrap()
}

fn paths(n: usize, cfg: &PathConfig, seed: u64, stream: u64) -> Vec<FunctionalSample> {
    let mut rng = RngStream::new(seed, stream);
    (0..n).map(|_| simulate_functionals(cfg, &mut rng)).collect()
}

#[test]
fn short_horizon_functional_is_time() {
    let mut rng = RngStream::new(1, 0);
    for &t in &[1e-3, 1e-4, 1e-5] {
        let s = simulate_functionals(&PathConfig::standard(t).unwrap(), &mut rng);
        assert!((s.a_t / t - 1.0).abs() < 20.0 * t.sqrt(), "t={t}: {}", s.a_t / t);
    }
}

#[test]
fn mean_of_a1() {
    let cfg = PathConfig::standard(1.0).unwrap();
    let xs: Vec<f64> = paths(100_000, &cfg, 2, 0).iter().map(|s| s.a_t).collect();
    let target = (1f64.exp().powi(2) - 1.0) / 2.0;
    let r = mean_vs_target(&xs, target, 4.0).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn mean_of_inverse_sqrt_a1() {
    // Coarser grid than the acceptance run; the allowance covers the
    // first-order discretization error.
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let xs: Vec<f64> = paths(200_000, &cfg, 3, 0).iter().map(|s| 1.0 / s.a_t.sqrt()).collect();
    let r = mean_vs_target_with_allowance(&xs, 1.0, 4.0, 1.0 / f64::from(cfg.steps_per_unit())).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn grid_refinement_moves_mean_less_than_one_se() {
    let coarse = PathConfig::new(1.0, 1 << 9, 0.0).unwrap();
    let fine = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let a: Vec<f64> = paths(100_000, &coarse, 4, 0).iter().map(|s| s.a_t).collect();
    let b: Vec<f64> = paths(100_000, &fine, 4, 0).iter().map(|s| s.a_t).collect();
    let n = a.len() as f64;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / n;
    let (ma, mb) = (mean(&a), mean(&b));
    let var = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((ma - mb).abs() < (var / n).sqrt(), "{ma} vs {mb}");
}

#[test]
fn nested_runs_share_the_path() {
    let cfg = PathConfig::new(1.0, 256, 0.0).unwrap();
    let mut a = RngStream::new(5, 0);
    let mut b = RngStream::new(5, 0);
    let short = simulate_functionals(&cfg.with_t_end(0.5).unwrap(), &mut a);
    let at = simulate_functionals_at(&[0.5, 1.0], &cfg, &mut b).unwrap();
    assert_eq!(short, at[0]);
    assert!(at[1].a_t > at[0].a_t);
}

#[test]
fn z_hitting_time() {
    let cfg = PathConfig::new(50.0, 1 << 10, 0.0).unwrap();
    let mut rng = RngStream::new(6, 0);
    let mut caps = 0;
    for i in 0..10_000u64 {
        let before = rng.clone();
        match simulate_until_z_hits(1.0, &cfg, &mut rng) {
            Ok(s) => {
                let tau = s.tau.unwrap();
                assert!(s.z_t >= 1.0);
                if i % 100 == 0 && tau > cfg.dt() * 1.5 {
                    // One grid step earlier on the same path the level was not reached.
                    let mut replay = before;
                    let prev = simulate_functionals(&cfg.with_t_end(tau - cfg.dt()).unwrap(), &mut replay);
                    assert!(prev.z_t < 1.0, "{prev:?} vs {s:?}");
                }
            }
            Err(PathError::CapHit { .. }) => caps += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(caps < 10, "cap hits {caps}");
    let tiny = simulate_until_z_hits(1e-9, &cfg, &mut rng).unwrap();
    assert_eq!(tiny.tau, Some(cfg.dt()));
}

#[test]
fn dufresne_identity() {
    let cfg = PathConfig::new(1.0, 1 << 8, 0.0).unwrap();
    let report = majority(|s| {
        let mut rng = RngStream::new(s, 0);
        let lhs: Vec<f64> = (0..20_000).map(|_| simulate_drifted_a(1.0, default_horizon(1.0), &cfg, &mut rng).unwrap()).collect();
        let rhs: Vec<f64> = (0..20_000).map(|_| 0.5 / sample_gamma(1.0, &mut rng).unwrap()).collect();
        ks_two_sample(&lhs, &rhs).unwrap()
    });
    assert!(report.passed(), "{report:?}");
}

#[test]
fn drifted_functional_grows_with_horizon() {
    let cfg = PathConfig::new(1.0, 1 << 8, 0.0).unwrap();
    let horizons = [2.0, 5.0, 10.0, 20.0];
    let mut means = Vec::new();
    for &h in &horizons {
        let base = RngStream::new(7, 0);
        let xs: Vec<f64> = (0..5000).map(|i| simulate_drifted_a(1.0, h, &cfg, &mut base.split(i)).unwrap()).collect();
        means.push(xs.iter().sum::<f64>() / 5000.0);
    }
    for w in means.windows(2) {
        assert!(w[1] >= w[0]);
    }
    let gaps: Vec<f64> = means.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps[2] < gaps[0], "{means:?}");
}

#[test]
fn z_drift_positive_and_ratio_limit() {
    for k in -20..=20 {
        let z = 2f64.powi(k);
        assert!(z_drift(z).unwrap() > 0.0);
    }
    assert!((bessel_k1_over_k0(50.0).unwrap() - 1.0).abs() < 0.02);
}

#[test]
fn z_diffusion_matches_pathwise_z() {
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let report = majority(|s| {
        let mut rng = RngStream::new(s, 1);
        let sde: Vec<f64> = (0..10_000)
            .map(|_| simulate_z_diffusion(1e-12, 1.0, &cfg, &mut rng).unwrap().z)
            .collect();
        let pathwise: Vec<f64> = paths(10_000, &cfg, s, 2).iter().map(|p| p.z_t).collect();
        ks_two_sample(&sde, &pathwise).unwrap()
    });
    assert!(report.p_value.unwrap() > 0.001, "{report:?}");
}

#[test]
fn inverse_z_marginal() {
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let table = CdfTable::new(&Dist::InverseZMarginal { t: 1.0 }).unwrap();
    let report = majority(|s| {
        let xs: Vec<f64> = paths(50_000, &cfg, s, 3).iter().map(|p| 1.0 / p.z_t).collect();
        ks_vs_cdf(&xs, |x| table.cdf(x)).unwrap()
    });
    assert!(report.passed(), "{report:?}");
}

#[test]
fn joint_density_is_normalized() {
    // In logarithmic coordinates over a box holding all but ~1e-10 of the mass.
    let tol = Tolerance { abs_tol: 1e-13, rel_tol: 1e-10 };
    let total = quad::integrate_finite_with(
        |x: f64| {
            quad::integrate_finite_with(|y: f64| joint_density(x.exp(), y.exp(), 1.0).unwrap() * (x + y).exp(), -10.0, 12.0, tol)
                .or_else(|e| e.accept_within(Tolerance::relative(1e-7)))
                .unwrap()
                .value
        },
        -9.0,
        9.0,
        tol,
    )
    .or_else(|e| e.accept_within(Tolerance::relative(1e-7)))
    .unwrap();
    assert!((total.value - 1.0).abs() < 1e-8, "{total:?}");
}

#[test]
fn joint_law_chi_square() {
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    // e^{B_1} deciles of the central 90%, A_1 deciles from an independent pilot.
    let u_edges: Vec<f64> = (0..=10).map(|k| normal_quantile(0.05 + 0.09 * k as f64).exp()).collect();
    let mut pilot: Vec<f64> = paths(20_000, &cfg, 9, 0).iter().map(|p| p.a_t).collect();
    pilot.sort_by(f64::total_cmp);
    let v_edges: Vec<f64> = (0..=10).map(|k| pilot[(1000.0 + 1800.0 * k as f64) as usize]).collect();
    let masses = joint_cell_masses(&u_edges, &v_edges, 1.0).unwrap();
    let inside: f64 = masses.iter().sum();
    let report = majority(|s| {
        let n = 50_000;
        let mut counts = vec![0.0; 101];
        for p in paths(n, &cfg, s, 4) {
            let u = p.b_t.exp();
            let i = u_edges.partition_point(|&e| e <= u);
            let j = v_edges.partition_point(|&e| e <= p.a_t);
            let bin = if (1..=10).contains(&i) && (1..=10).contains(&j) { (i - 1) * 10 + (j - 1) } else { 100 };
            counts[bin] += 1.0;
        }
        let mut expected: Vec<f64> = masses.iter().map(|m| m * n as f64).collect();
        expected.push((1.0 - inside) * n as f64);
        chi_square_binned(&counts, &expected, 0).unwrap()
    });
    assert!(report.p_value.unwrap() > 0.001, "{report:?}");
}

/// Inverse of the standard normal CDF by bisection.
fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn conditional_law_given_inverse_z() {
    // Given 1/Z_1 = μ, B_1 has the law of z_μ; the probability integral
    // transform with each sample's own μ is uniform.
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let report = majority(|s| {
        let pits: Vec<f64> = paths(60_000, &cfg, s, 5)
            .iter()
            .filter_map(|p| {
                let mu = 1.0 / p.z_t;
                ((mu - 1.0).abs() <= 0.05).then(|| zmu_cdf(mu, p.b_t).unwrap())
            })
            .collect();
        ks_vs_cdf(&pits, |x| x.clamp(0.0, 1.0)).unwrap()
    });
    assert!(report.p_value.unwrap() > 0.001, "{report:?}");
}

#[test]
fn time_reversal_in_two_dimensions() {
    let cfg = PathConfig::new(1.0, 1 << 10, 0.0).unwrap();
    let report = majority(|s| {
        let lhs: Vec<Vec<f64>> = paths(2000, &cfg, s, 6)
            .iter()
            .map(|p| vec![(-p.b_t).exp(), (-2.0 * p.b_t).exp() * p.a_t])
            .collect();
        let rhs: Vec<Vec<f64>> = paths(2000, &cfg, s, 7).iter().map(|p| vec![p.b_t.exp(), p.a_t]).collect();
        let mut rng = RngStream::new(s, 8);
        energy_distance_test(&lhs, &rhs, 200, &mut rng).unwrap()
    });
    assert!(report.passed(), "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn z_matches_definition(seed in any::<u64>(), t in 0.01f64..3.0, drift in -2.0f64..2.0) {
        let cfg = PathConfig::new(t, 64, drift).unwrap();
        let s = simulate_functionals(&cfg, &mut RngStream::new(seed, 0));
        prop_assert!(s.a_t > 0.0);
        prop_assert!((s.z_t - (-s.b_t).exp() * s.a_t).abs() <= 1e-15 * s.z_t);
    }

    #[test]
    fn functional_is_monotone_along_a_path(seed in any::<u64>(), t1 in 0.05f64..1.0, extra in 0.05f64..1.0) {
        let cfg = PathConfig::new(1.0, 128, 0.0).unwrap();
        let at = simulate_functionals_at(&[t1, t1 + extra], &cfg, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(at[1].a_t > at[0].a_t);
    }
}
