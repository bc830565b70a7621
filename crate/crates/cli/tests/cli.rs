use std::process::Command;

use expfun_cli::{render_report, run, Format, CSV_COLUMNS, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use expfun_core::stats::{TestReport, Verdict};
use proptest::prelude::*;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str], env_seed: Option<&str>) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("expfun").chain(args.iter().copied()), env_seed, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn report(json: &str) -> TestReport {
    serde_json::from_str(json).unwrap()
}

fn pass_report() -> TestReport {
    TestReport::statistical("ks_two_sample", 0.01, 0.5, 100, 100).with_identity("demo", 3)
}

#[test]
fn list_has_every_scenario() {
    let r = cli(&["list"], None);
    assert_eq!(r.code, EXIT_PASS);
    assert!(r.stdout.lines().count() >= 30);
    assert!(r.stdout.lines().any(|l| l.starts_with("bougerol_basic ")));
    let j = cli(&["list", "--format", "json"], None);
    let v: serde_json::Value = serde_json::from_str(&j.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 30);
}

#[test]
fn verify_bougerol_passes() {
    let r = cli(&["verify", "bougerol_basic", "--seed", "0", "--n", "200000"], None);
    assert_eq!(r.code, EXIT_PASS, "{}", r.stderr);
    let rep = report(&r.stdout);
    assert_eq!(rep.identity_id, "bougerol_basic");
    assert_eq!(rep.verdict, Verdict::Pass);
    assert_eq!(rep.n_lhs, 200_000);
}

#[test]
fn eval_theta_prints_value_and_error() {
    let r = cli(&["eval", "theta", "--r", "1", "--t", "1"], None);
    assert_eq!(r.code, EXIT_PASS);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["err_est"].as_f64().unwrap() < 1e-9);
    assert_eq!(cli(&["eval", "theta", "--r", "1"], None).code, EXIT_USAGE);
}

#[test]
fn csv_layout() {
    let header = CSV_COLUMNS.join(",");
    assert_eq!(render_report(&[], Format::Csv), format!("{header}\n"));
    let csv = render_report(&[pass_report()], Format::Csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, [header.as_str(), "demo,ks_two_sample,0.01,0.5,,100,100,3,pass"]);
    let res = TestReport::residual(1e-12, 1e-6, false).with_identity("r", 0);
    let row = render_report(&[res], Format::Csv).lines().nth(1).unwrap().to_owned();
    assert_eq!(row, "r,relative_residual,1e-12,,1e-12,0,0,0,pass");
}

#[test]
fn json_round_trip() {
    let reps = vec![pass_report(), TestReport::residual(2.0, 1.0, true).with_identity("x", u64::MAX)];
    let back: Vec<TestReport> = serde_json::from_str(&render_report(&reps, Format::Json)).unwrap();
    assert_eq!(back, reps);
}

#[test]
fn seed_precedence_flag_config_env() {
    let dir = std::env::temp_dir().join(format!("expfun-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "seed = 5\nn = 2000\ny = 0.5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let base = ["verify", "pcauchy_i", "--seeds", "1", "--config", cfg];

    assert_eq!(report(&cli(&base, Some("9")).stdout).seed, 5);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "7", "--n", "3000"]);
    let r = report(&cli(&with_flag, Some("9")).stdout);
    assert_eq!((r.seed, r.n_lhs), (7, 3000));
    let r = report(&cli(&["verify", "pcauchy_i", "--seeds", "1", "--n", "2000"], Some("9")).stdout);
    assert_eq!(r.seed, 9);
    assert_eq!(report(&cli(&["verify", "pcauchy_i", "--seeds", "1", "--n", "2000"], None).stdout).seed, 0);
    assert_eq!(cli(&["verify", "pcauchy_i"], Some("nine")).code, EXIT_USAGE);

    std::fs::write(dir.join("bad.conf"), "zeta = 1\n").unwrap();
    let bad = dir.join("bad.conf");
    assert_eq!(cli(&["list", "--config", bad.to_str().unwrap()], None).code, EXIT_USAGE);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn out_flag_writes_file_only() {
    let path = std::env::temp_dir().join(format!("expfun-out-{}.csv", std::process::id()));
    let r = cli(&["suite", "bessel", "--format", "csv", "--out", path.to_str().unwrap()], None);
    assert_eq!(r.code, EXIT_PASS);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("passed"));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(&CSV_COLUMNS.join(",")));
    assert_eq!(text.lines().count(), 3);
    std::fs::remove_file(path).unwrap();
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["verify"],
        &["verify", "no_such_identity"],
        &["verify", "bougerol_basic", "--mu", "2"],
        &["verify", "bougerol_basic", "--alpha", "0.7"],
        &["verify", "bougerol_basic", "--t", "-1"],
        &["suite", "a &"],
        &["sample", "gig", "--nu", "0"],
    ] {
        let r = cli(args, None);
        assert_eq!(r.code, EXIT_USAGE, "{args:?}: {}", r.stderr);
        assert!(r.stdout.is_empty());
        assert!(!r.stderr.is_empty());
    }
    assert_eq!(cli(&["--help"], None).code, EXIT_PASS);
}

#[test]
fn binary_output_is_byte_identical() {
    let go = || {
        Command::new(env!("CARGO_BIN_EXE_expfun"))
            .args(["suite", "cauchy & ks2", "--seed", "4", "--n", "5000", "--format", "csv"])
            .env_remove("EXPFUN_SEED")
            .output()
            .unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.status.code(), Some(EXIT_PASS), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sample_outputs() {
    let r = cli(&["sample", "functionals", "--t", "1", "--n", "4", "--format", "csv", "--seed", "1"], None);
    assert_eq!(r.code, EXIT_PASS);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "b_t,a_t,z_t");
    assert_eq!(lines.len(), 5);
    let j = cli(&["sample", "gig", "--nu", "0", "--a", "1", "--b", "1", "--n", "3"], None);
    let v: Vec<serde_json::Value> = serde_json::from_str(&j.stdout).unwrap();
    assert!(v.iter().all(|o| o["value"].as_f64().unwrap() > 0.0));
}

const CHEAP_NEGATIVES: [&str; 3] = ["neg_bougerol_time", "neg_psym_wrong_v", "neg_gig_eigenfunction"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn negative_controls_exit_one(k in 0usize..CHEAP_NEGATIVES.len(), seed in 0u64..10_000, fmt in prop::sample::select(vec!["csv", "json"])) {
        let seed = seed.to_string();
        let r = cli(&["verify", CHEAP_NEGATIVES[k], "--seed", &seed, "--format", fmt], None);
        prop_assert_eq!(r.code, EXIT_FAIL);
        prop_assert!(r.stdout.contains("fail"));
    }

    #[test]
    fn passing_checks_exit_zero(seed in 0u64..10_000) {
        let seed = seed.to_string();
        let r = cli(&["verify", "bessel_k_sinh", "--seed", &seed], None);
        prop_assert_eq!(r.code, EXIT_PASS);
    }

    #[test]
    fn unknown_parameters_exit_two(key in "[a-z]{2,6}") {
        prop_assume!(!["seed", "seeds", "format", "out", "config", "help", "version", "mu", "nu", "theta",
            "level", "lambda", "alpha", "steps"].contains(&key.as_str()));
        let flag = format!("--{key}");
        let r = cli(&["verify", "bougerol_basic", &flag, "1"], None);
        prop_assert_eq!(r.code, EXIT_USAGE);
    }
}
