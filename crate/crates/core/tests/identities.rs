use expfun_core::identities::*;
use expfun_core::stats::{aggregate_seeds, Verdict};
use proptest::prelude::*;

/// Identities the registry must cover, beyond its own residual checks and
/// negative controls.
const REQUIRED: [&str; 39] = [
    "bougerol_basic",
    "bougerol_shifted",
    "time_reversal",
    "tm1_fixed_time",
    "tm1_hitting_time",
    "tm1_prime",
    "tm2_fixed_time",
    "tm2_mean",
    "rstop_half_inverse",
    "rstop_sqrt",
    "invcauchy",
    "tm3_i",
    "tm3_ii",
    "pcauchy_i",
    "pcauchy_ii",
    "pkey_1",
    "pkey_2",
    "pkey_3",
    "zmu_gig",
    "rpkey_clt",
    "dufresne",
    "pduf_finite_t",
    "eqdufd",
    "ppar_1",
    "ppar_2",
    "pjlt_cos",
    "pjlt_cosh",
    "jlt_theta_crosscheck",
    "psym_density",
    "psym_swap",
    "grel",
    "pden_gaussian",
    "z_marginal",
    "joint_law",
    "pparti_conditional",
    "gig_eigenfunction",
    "z_diffusion_consistency",
    "agi",
    "phinge",
];

fn over(pairs: &[(&str, f64)]) -> Overrides {
    let mut o = Overrides::new();
    for &(k, v) in pairs {
        o.set(k, v).unwrap();
    }
    o
}

fn majority(id: &str, o: &Overrides) -> expfun_core::stats::TestReport {
    let runs: Vec<_> = DEFAULT_SEEDS.iter().map(|&s| run_identity(id, o, s).unwrap()).collect();
    aggregate_seeds(&runs).unwrap()
}

#[test]
fn registry_is_complete() {
    let ids: Vec<&str> = list_identities().iter().map(|s| s.id).collect();
    for id in REQUIRED.iter().chain(&["cauchy_subordination", "theta_integral_equation"]) {
        assert!(ids.contains(id), "missing {id}");
    }
    assert!(ids.len() >= 30);
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "not sorted by id");
}

#[test]
fn scenarios_serialize_with_their_metadata() {
    let v = serde_json::to_value(list_identities()).unwrap();
    let first = &v[0];
    for key in ["id", "description", "formula", "tags", "dimension", "test_kind", "defaults", "alpha"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn bougerol_basic_passes_at_larger_n() {
    let r = majority("bougerol_basic", &over(&[("t", 1.0), ("n", 200_000.0)]));
    assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    assert_eq!(r.n_lhs, 200_000);
}

#[test]
fn tm3_i_matches_closed_form_cf() {
    let r = majority("tm3_i", &over(&[("a", 2.0), ("theta", 0.5), ("n", 1e6)]));
    assert!(r.passed(), "{r:?}");
}

#[test]
fn negative_controls_fail() {
    for sc in list_identities().iter().filter(|s| s.negative) {
        let r = run_identity(sc.id, &Overrides::new(), 1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail, "{}: {r:?}", sc.id);
    }
}

#[test]
fn residual_checks_pass() {
    for sc in select("residual").unwrap() {
        let r = run_identity(sc.id, &Overrides::new(), 0).unwrap();
        assert!(r.passed(), "{}: {r:?}", sc.id);
        assert!(r.is_well_formed());
    }
}

#[test]
fn reports_are_reproducible() {
    let a = run_identity("pkey_2", &Overrides::new(), 7).unwrap();
    let b = run_identity("pkey_2", &Overrides::new(), 7).unwrap();
    let c = run_identity("pkey_2", &Overrides::new(), 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.statistic, c.statistic);
    assert_eq!((a.identity_id.as_str(), a.seed), ("pkey_2", 7));
}

#[test]
fn suite_does_not_depend_on_selection() {
    let o = Overrides::new();
    let both = run_suite("phinge | zmu_gig", &[4, 5], &o).unwrap();
    let one = run_suite("zmu_gig", &[4, 5], &o).unwrap();
    assert_eq!(both.outcomes.len(), 2);
    assert_eq!(both.outcomes[1].runs, one.outcomes[0].runs);
}

#[test]
fn theta_filter_is_residual_only() {
    let sel = select("theta").unwrap();
    assert!(sel.len() >= 5);
    assert!(sel.iter().all(|s| s.test_kind == TestKind::Residual));
}

#[test]
fn suite_skips_unused_overrides_but_single_runs_reject_them() {
    let o = over(&[("mu", 2.0)]);
    assert!(run_suite("pcauchy_i", &[1], &o).unwrap().outcomes[0].error.is_none());
    assert!(matches!(run_identity("pcauchy_i", &o, 1), Err(IdentityError::UnusedParameter { .. })));
}

#[test]
fn override_errors() {
    let mut o = Overrides::new();
    assert!(matches!(o.set("zeta", 1.0), Err(IdentityError::UnknownParameter(_))));
    assert!(matches!(o.set("t", -1.0), Err(IdentityError::InvalidOverride { .. })));
    assert!(matches!(o.set("n", 10.5), Err(IdentityError::InvalidOverride { .. })));
    assert!(matches!(o.set("alpha", 0.7), Err(IdentityError::InvalidOverride { .. })));
    assert!(o.is_empty());
    let r = run_identity("tm3_i", &over(&[("a", 0.5)]), 1);
    assert!(matches!(r, Err(IdentityError::InvalidOverride { .. })), "{r:?}");
    assert!(matches!(run_suite("a &", &[1], &Overrides::new()), Err(IdentityError::InvalidFilter { .. })));
}

#[test]
fn alpha_override_redecides_verdicts() {
    let loose = run_identity("pcauchy_i", &over(&[("alpha", 0.49)]), 1).unwrap();
    let p = loose.p_value.unwrap();
    assert_eq!(loose.passed(), p >= 0.49);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn single_runs_are_well_formed_and_reproducible(seed in 0u64..1_000_000) {
        let o = over(&[("n", 5_000.0)]);
        let r = run_identity("cauchy_subordination", &o, seed).unwrap();
        prop_assert!(r.is_well_formed());
        prop_assert_eq!(r.seed, seed);
        prop_assert_eq!(r, run_identity("cauchy_subordination", &o, seed).unwrap());
    }

    #[test]
    fn filters_never_select_negatives_unless_asked(words in proptest::collection::vec("[a-z_]{1,8}", 1..4)) {
        let filter = words.join(" | ");
        let sel = select(&filter).unwrap();
        let asked = words.iter().any(|w| w == "negative" || w.starts_with("neg_"));
        prop_assert!(asked || sel.iter().all(|s| !s.negative));
    }
}
