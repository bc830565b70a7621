
use expfun_core::samplers::{sample_cauchy, RngStream};
use expfun_core::stats::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn normals(n: usize, shift: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| rng.normal() + shift).collect()
}

fn points(n: usize, dim: usize, shift: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|k| rng.normal() + if k == 0 { shift } else { 0.0 }).collect())
        .collect()
}

#[test]
fn ks_same_sample_has_zero_statistic() {
    let mut rng = RngStream::new(0, 0);
    let xs = normals(500, 0.0, &mut rng);
    let r = ks_two_sample(&xs, &xs).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!(r.passed());
    assert!(r.is_well_formed());
}

#[test]
fn ks_rejects_small_samples_and_nan() {
    let xs = vec![0.0; 99];
    let ys = vec![0.0; 200];
    assert!(matches!(ks_two_sample(&xs, &ys), Err(StatsError::TooFewSamples { .. })));
    let mut bad = vec![0.0; 200];
    bad[3] = f64::NAN;
    assert_eq!(ks_two_sample(&bad, &ys), Err(StatsError::NonFinite));
}

#[test]
fn ks_two_sample_power() {
    let mut rng = RngStream::new(1, 0);
    let xs = normals(10_000, 0.0, &mut rng);
    let ys = normals(10_000, 0.5, &mut rng);
    let r = ks_two_sample(&xs, &ys).unwrap();
    assert!(r.p_value.unwrap() < 1e-6, "{r:?}");
}

#[test]
fn ks_two_sample_calibration() {
    let rate = null_rejection_rate(500, |rep| {
        let mut rng = RngStream::new(2, rep);
        let xs = normals(10_000, 0.0, &mut rng);
        let ys = normals(10_000, 0.0, &mut rng);
        ks_two_sample(&xs, &ys).unwrap()
    });
    assert!((rate - 0.01).abs() <= 0.015, "rate {rate}");
}

#[test]
fn ks_one_sample_uniform_and_exponential() {
    let rate_u = null_rejection_rate(300, |rep| {
        let mut rng = RngStream::new(3, rep);
        let xs: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
        ks_vs_cdf(&xs, |x| x.clamp(0.0, 1.0)).unwrap()
    });
    let rate_e = null_rejection_rate(300, |rep| {
        let mut rng = RngStream::new(4, rep);
        let xs: Vec<f64> = (0..1000).map(|_| rng.exponential()).collect();
        ks_vs_cdf(&xs, |x| 1.0 - (-x).exp()).unwrap()
    });
    assert!(rate_u <= 0.035 && rate_e <= 0.035, "{rate_u} {rate_e}");
    let mut rng = RngStream::new(5, 0);
    let xs: Vec<f64> = (0..1000).map(|_| rng.exponential()).collect();
    assert!(!ks_vs_cdf(&xs, |x| 1.0 - (-x / 1.3).exp()).unwrap().passed());
}

#[test]
fn kolmogorov_tail_reference_values() {
    // Classical critical values of the Kolmogorov distribution.
    assert!((kolmogorov_sf(1.2238) - 0.10).abs() < 1e-3);
    assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    assert_eq!(kolmogorov_sf(0.0), 1.0);
}

#[test]
fn energy_identical_samples() {
    let mut rng = RngStream::new(6, 0);
    let xs = points(600, 2, 0.0, &mut rng);
    let r = energy_distance_test(&xs, &xs, 200, &mut rng).unwrap();
    assert!(r.statistic.abs() < 1e-10, "{r:?}");
    assert!(r.p_value.unwrap() > 0.9);
}

#[test]
fn energy_power_against_shift() {
    let mut rng = RngStream::new(7, 0);
    let xs = points(2000, 3, 0.0, &mut rng);
    let ys = points(2000, 3, 0.3, &mut rng);
    let r = energy_distance_test(&xs, &ys, 200, &mut rng).unwrap();
    assert!(!r.passed(), "{r:?}");
}

#[test]
fn energy_null_is_not_rejected_often() {
    // The full 500-replication calibration runs in the acceptance suite.
    let rate = null_rejection_rate(40, |rep| {
        let mut rng = RngStream::new(8, rep);
        let xs = points(500, 3, 0.0, &mut rng);
        let ys = points(500, 3, 0.0, &mut rng);
        energy_distance_test(&xs, &ys, 200, &mut rng).unwrap()
    });
    assert!(rate <= 0.1, "rate {rate}");
}

#[test]
fn energy_argument_checks() {
    let mut rng = RngStream::new(9, 0);
    let xs = points(500, 2, 0.0, &mut rng);
    let ys = points(500, 3, 0.0, &mut rng);
    assert_eq!(energy_distance_test(&xs, &ys, 200, &mut rng), Err(StatsError::Dimension));
    assert!(energy_distance_test(&xs, &xs, 10, &mut rng).is_err());
    assert!(energy_distance_test(&xs[..100], &xs, 200, &mut rng).is_err());
}

fn xi_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.25).collect()
}

#[test]
fn ecf_gaussian_and_cauchy() {
    let mut rng = RngStream::new(10, 0);
    let xs = normals(100_000, 0.0, &mut rng);
    let r = ecf_compare(&xs, |x| Complex64::new((-x * x / 2.0).exp(), 0.0), &xi_grid()).unwrap();
    assert!(r.passed(), "{r:?}");
    let cs: Vec<f64> = (0..100_000).map(|_| sample_cauchy(&mut rng)).collect();
    let ok = ecf_compare(&cs, |x| Complex64::new((-x.abs()).exp(), 0.0), &xi_grid()).unwrap();
    assert!(ok.passed(), "{ok:?}");
    let bad = ecf_compare(&cs, |x| Complex64::new((-x * x / 2.0).exp(), 0.0), &xi_grid()).unwrap();
    assert!(!bad.passed(), "{bad:?}");
}

#[test]
fn ecf_threshold_calibration() {
    let rate = null_rejection_rate(100, |rep| {
        let mut rng = RngStream::new(11, rep);
        let xs = normals(10_000, 0.0, &mut rng);
        ecf_compare(&xs, |x| Complex64::new((-x * x / 2.0).exp(), 0.0), &xi_grid()).unwrap()
    });
    assert!(rate <= 0.03, "rate {rate}");
}

#[test]
fn ecf_grid_checks() {
    let xs = vec![0.0; 10_000];
    assert!(ecf_compare(&xs, |_| Complex64::new(1.0, 0.0), &[6.0]).is_err());
    assert!(ecf_compare(&xs, |_| Complex64::new(1.0, 0.0), &[]).is_err());
    assert!(ecf_compare(&xs[..100], |_| Complex64::new(1.0, 0.0), &[1.0]).is_err());
}

#[test]
fn mean_checks() {
    let constant = vec![2.5; 1000];
    assert!(mean_vs_target(&constant, 2.5, 4.0).unwrap().passed());
    assert!(!mean_vs_target(&constant, 2.6, 4.0).unwrap().passed());
    let mut rng = RngStream::new(12, 0);
    let xs = normals(10_000, 1.5, &mut rng);
    assert!(!mean_vs_target(&xs, 1.0, 4.0).unwrap().passed());
    let ok = normals(10_000, 1.0, &mut rng);
    assert!(mean_vs_target(&ok, 1.0, 4.0).unwrap().passed());
    // An allowance widens the acceptance band by exactly its size.
    assert!(mean_vs_target_with_allowance(&constant, 2.6, 4.0, 0.1 + 1e-12).unwrap().passed());
}

#[test]
fn mean_calibration_at_two_sigma() {
    // k = 2.5758 is the two-sided 1% point.
    let rate = null_rejection_rate(500, |rep| {
        let mut rng = RngStream::new(13, rep);
        mean_vs_target(&normals(1000, 1.0, &mut rng), 1.0, 2.5758).unwrap()
    });
    assert!((rate - 0.01).abs() <= 0.015, "rate {rate}");
}

#[test]
fn chi_square_against_uniform_bins() {
    let rate = null_rejection_rate(300, |rep| {
        let mut rng = RngStream::new(14, rep);
        let mut counts = vec![0.0; 10];
        for _ in 0..5000 {
            counts[(rng.uniform() * 10.0) as usize] += 1.0;
        }
        chi_square_binned(&counts, &[500.0; 10], 0).unwrap()
    });
    assert!(rate <= 0.035, "rate {rate}");
    let skewed: Vec<f64> = (0..10).map(|k| 400.0 + 20.0 * k as f64).collect();
    assert!(!chi_square_binned(&skewed, &[490.0; 10], 0).unwrap().passed());
}

#[test]
fn reports_round_trip_through_json() {
    let r = TestReport::statistical("ks_two_sample", 0.01, 0.4, 100, 200).with_identity("x", 7);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"verdict\":\"pass\""));
    let back: TestReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    let lp = TestReport::residual(1.0, 1e-6, true);
    assert_eq!(lp.verdict, Verdict::LowPrecision);
    assert_eq!(serde_json::to_string(&lp.verdict).unwrap(), "\"low-precision\"");
    assert!(lp.is_well_formed());
}

#[test]
fn reports_are_deterministic() {
    let run = || {
        let mut rng = RngStream::new(15, 0);
        let xs = points(500, 2, 0.0, &mut rng);
        let ys = points(500, 2, 0.0, &mut rng);
        energy_distance_test(&xs, &ys, 200, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ks_statistic_is_symmetric_and_bounded(seed in any::<u64>(), shift in -1.0f64..1.0) {
        let mut rng = RngStream::new(seed, 0);
        let xs = normals(150, 0.0, &mut rng);
        let ys = normals(170, shift, &mut rng);
        let a = ks_two_sample(&xs, &ys).unwrap();
        let b = ks_two_sample(&ys, &xs).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&a.statistic));
        prop_assert!(a.is_well_formed());
    }

    #[test]
    fn energy_statistic_is_non_negative(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 1);
        let xs = points(500, 1, 0.0, &mut rng);
        let ys = points(500, 1, 0.2, &mut rng);
        let r = energy_distance_test(&xs, &ys, 200, &mut rng).unwrap();
        prop_assert!(r.statistic >= 0.0);
        let p = r.p_value.unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn kolmogorov_sf_is_monotone(a in 0.0f64..3.0, d in 0.0f64..1.0) {
        prop_assert!(kolmogorov_sf(a + d) <= kolmogorov_sf(a) + 1e-12);
    }

    #[test]
    fn ecf_of_symmetric_sample_is_real(seed in any::<u64>(), xi in -5.0f64..5.0) {
        let mut rng = RngStream::new(seed, 2);
        let half: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let xs: Vec<f64> = half.iter().flat_map(|&x| [x, -x]).collect();
        prop_assert!(empirical_cf(&xs, xi).im.abs() < 1e-12);
        prop_assert!((empirical_cf(&xs, 0.0).re - 1.0).abs() < 1e-15);
    }
}
