//! Command-line front end: argument handling, config files and report
//! rendering. The binary only forwards its arguments to [`run`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use expfun_core::identities::{self, list_identities, IdentityError, Overrides, Param};
use expfun_core::pathsim::{simulate_functionals, PathConfig};
use expfun_core::samplers::{
    sample_cauchy, sample_gamma, sample_hitting_time_bm, sample_hitting_time_drifted, zmu_cdf, GigParams, GigSampler,
    RngStream, ZmuSampler,
};
use expfun_core::specfun::{bessel_i, bessel_k, ln_bessel_k, normal_cdf, theta_hw};
use expfun_core::stats::{aggregate_seeds, TestReport};

/// Exit status when every requested verdict passes.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a verdict fails or a computation errors.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for malformed invocations.
pub const EXIT_USAGE: i32 = 2;

/// Environment variable consulted for the seed when neither a flag nor
/// the config file sets one.
pub const SEED_ENV: &str = "EXPFUN_SEED";

/// Column order of CSV reports.
pub const CSV_COLUMNS: [&str; 9] =
    ["identity_id", "statistic_name", "statistic", "p_value", "residual", "n_lhs", "n_rhs", "seed", "verdict"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "expfun", version, about = "Monte Carlo and quadrature checks of identities for exponential functionals of Brownian motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed (default: $EXPFUN_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample size.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// File of `key = value` lines with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the registered identities.
    List,
    /// Check one identity under the seed policy.
    Verify {
        id: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        policy: SeedPolicy,
    },
    /// Check every identity selected by a tag expression.
    Suite {
        /// Tag expression, e.g. `path & !energy`; empty selects all.
        #[arg(default_value = "")]
        filter: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        policy: SeedPolicy,
    },
    /// Draw samples from a law.
    Sample {
        #[arg(value_enum)]
        law: Law,
        #[command(flatten)]
        args: NumArgs,
    },
    /// Evaluate a special function.
    Eval {
        #[arg(value_enum)]
        function: Function,
        #[command(flatten)]
        args: NumArgs,
    },
}

/// Overrides of scenario parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub y: Option<f64>,
    /// Path grid steps per unit time.
    #[arg(long)]
    pub steps: Option<f64>,
    /// Significance level of p-value based verdicts.
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl ParamArgs {
    fn pairs(&self) -> [(&'static str, Option<f64>); 13] {
        [
            ("t", self.t),
            ("mu", self.mu),
            ("x", self.x),
            ("nu", self.nu),
            ("theta", self.theta),
            ("a", self.a),
            ("level", self.level),
            ("lambda", self.lambda),
            ("xi", self.xi),
            ("v", self.v),
            ("y", self.y),
            ("steps", self.steps),
            ("alpha", self.alpha),
        ]
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeedPolicy {
    /// Number of consecutive seeds, starting at --seed, aggregated by the
    /// two-thirds rule.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Also report every per-seed run.
    #[arg(long)]
    pub all_runs: bool,
}

/// Arguments of `sample` and `eval`; each law or function reads a subset.
#[derive(Debug, Clone, Default, Args)]
pub struct NumArgs {
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub steps: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Law {
    /// GIG(nu; a, b): needs --nu --a --b.
    Gig,
    /// Gamma(nu): needs --nu.
    Gamma,
    /// z_mu: needs --mu.
    Zmu,
    Cauchy,
    /// Brownian hitting time of a: needs --a.
    HittingBm,
    /// Hitting time of a with drift mu: needs --a --mu.
    HittingDrifted,
    /// (B_t, A_t, Z_t): needs --t, optional --steps.
    Functionals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Function {
    /// Hartman-Watson density: needs --r --t.
    Theta,
    /// K_nu(z): needs --nu --z.
    BesselK,
    /// ln K_nu(z): needs --nu --z.
    LnBesselK,
    /// I_nu(z): needs --nu --z.
    BesselI,
    /// Distribution function of z_mu: needs --mu --x.
    ZmuCdf,
    /// Standard normal distribution function: needs --x.
    NormalCdf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("{0}")]
    Compute(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Identity(e) => match e {
                IdentityError::UnknownId(_)
                | IdentityError::UnknownParameter(_)
                | IdentityError::InvalidOverride { .. }
                | IdentityError::UnusedParameter { .. }
                | IdentityError::InvalidFilter { .. } => EXIT_USAGE,
                _ => EXIT_FAIL,
            },
            CliError::Compute(_) | CliError::Io { .. } => EXIT_FAIL,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

/// Renders reports as CSV (header plus one row each) or as a JSON array.
pub fn render_report(reports: &[TestReport], format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = CSV_COLUMNS.join(",");
            s.push('\n');
            for r in reports {
                let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
                let row = [
                    csv_field(&r.identity_id),
                    csv_field(&r.statistic_name),
                    num(r.statistic),
                    opt(r.p_value),
                    opt(r.residual),
                    r.n_lhs.to_string(),
                    r.n_rhs.to_string(),
                    r.seed.to_string(),
                    r.verdict.to_string(),
                ];
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
    }
}

/// Shortest round-trip form, switching to an exponent for tiny or huge values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Settings read from a config file.
#[derive(Debug, Default)]
struct FileConfig {
    seed: Option<u64>,
    n: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    params: BTreeMap<String, f64>,
}

fn parse_config(text: &str, origin: &Path) -> Result<FileConfig, CliError> {
    let mut cfg = FileConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", origin.display(), lineno + 1);
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| usage(format!("{}: expected `key = value`", at())))?;
        let bad = |what: &str| usage(format!("{}: invalid {what} `{value}`", at()));
        match key {
            "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "n" => cfg.n = Some(value.parse().map_err(|_| bad("n"))?),
            "format" => cfg.format = Some(Format::from_str(value, true).map_err(|_| bad("format"))?),
            "out" => cfg.out = Some(PathBuf::from(value)),
            k if k == "alpha" || k.parse::<Param>().is_ok() => {
                cfg.params.insert(k.to_owned(), value.parse().map_err(|_| bad(k))?);
            }
            _ => return Err(usage(format!("{}: unknown key `{key}`", at()))),
        }
    }
    Ok(cfg)
}

/// Options after merging flags, config file and environment.
struct Resolved {
    seed: u64,
    n: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    file_params: BTreeMap<String, f64>,
}

fn resolve(cli: &Cli, env_seed: Option<&str>) -> Result<Resolved, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text, path)?
        }
        None => FileConfig::default(),
    };
    let env_seed = env_seed
        .map(|s| s.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_ENV}: invalid seed `{s}`"))))
        .transpose()?;
    Ok(Resolved {
        seed: cli.seed.or(file.seed).or(env_seed).unwrap_or(0),
        n: cli.n.or(file.n),
        format: cli.format.or(file.format),
        out: cli.out.clone().or(file.out),
        file_params: file.params,
    })
}

fn overrides(res: &Resolved, flags: &ParamArgs) -> Result<Overrides, CliError> {
    let mut o = Overrides::new();
    for (k, &v) in &res.file_params {
        o.set(k, v)?;
    }
    if let Some(n) = res.n {
        o.set("n", n as f64)?;
    }
    for (k, v) in flags.pairs() {
        if let Some(v) = v {
            o.set(k, v)?;
        }
    }
    Ok(o)
}

fn seeds(base: u64, policy: &SeedPolicy) -> Result<Vec<u64>, CliError> {
    if policy.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    Ok((0..policy.seeds).map(|k| base.wrapping_add(k)).collect())
}

/// Output of one invocation: report text and whether every verdict passed.
struct Output {
    text: String,
    passed: bool,
}

fn list(format: Option<Format>) -> Output {
    let text = match format {
        Some(Format::Json) => {
            let mut s = serde_json::to_string_pretty(list_identities()).expect("registry serializes");
            s.push('\n');
            s
        }
        Some(Format::Csv) => {
            let mut s = String::from("id,test_kind,dimension,tags,description\n");
            for sc in list_identities() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    sc.id,
                    sc.test_kind.as_str(),
                    sc.dimension,
                    sc.tags.join(" "),
                    csv_field(sc.description)
                );
            }
            s
        }
        None => {
            let mut s = String::new();
            for sc in list_identities() {
                let _ = writeln!(s, "{:<26} {:<10} {}", sc.id, sc.test_kind.as_str(), sc.description);
            }
            s
        }
    };
    Output { text, passed: true }
}

fn verify(id: &str, o: &Overrides, seeds: &[u64], all_runs: bool, format: Format) -> Result<Output, CliError> {
    let runs = seeds
        .iter()
        .map(|&s| identities::run_identity(id, o, s))
        .collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate_seeds(&runs).expect("at least one seed");
    let passed = agg.passed();
    let text = match (format, all_runs) {
        (Format::Json, false) => {
            let mut s = serde_json::to_string_pretty(&agg).expect("report serializes");
            s.push('\n');
            s
        }
        (_, false) => render_report(std::slice::from_ref(&agg), format),
        (_, true) => {
            let mut all = runs;
            all.push(agg);
            render_report(&all, format)
        }
    };
    Ok(Output { text, passed })
}

fn suite(filter: &str, o: &Overrides, seeds: &[u64], all_runs: bool, format: Format, log: &mut dyn Write) -> Result<Output, CliError> {
    let report = identities::run_suite(filter, seeds, o)?;
    let mut rows = Vec::new();
    for out in &report.outcomes {
        if let Some(e) = &out.error {
            let _ = writeln!(log, "{}: error: {e}", out.id);
        }
        if all_runs {
            rows.extend(out.runs.iter().cloned());
        }
        rows.extend(out.aggregate.iter().cloned());
    }
    let passed = report.passed();
    let _ = writeln!(
        log,
        "{} of {} scenarios passed",
        report.outcomes.iter().filter(|o| o.passed()).count(),
        report.outcomes.len()
    );
    Ok(Output {
        text: render_report(&rows, format),
        passed,
    })
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| usage(format!("missing --{flag}")))
}

fn sample(law: Law, args: &NumArgs, n: u64, seed: u64, format: Format) -> Result<Output, CliError> {
    let mut rng = RngStream::new(seed, 0);
    let n = n as usize;
    let rows: Vec<Vec<f64>> = match law {
        Law::Gig => {
            let p = GigParams::new(need(args.nu, "nu")?, need(args.a, "a")?, need(args.b, "b")?)
                .map_err(|e| usage(e.to_string()))?;
            let s = GigSampler::new(p);
            (0..n).map(|_| vec![s.sample(&mut rng)]).collect()
        }
        Law::Gamma => {
            let nu = need(args.nu, "nu")?;
            (0..n)
                .map(|_| sample_gamma(nu, &mut rng).map(|v| vec![v]))
                .collect::<Result<_, _>>()
                .map_err(|e| usage(e.to_string()))?
        }
        Law::Zmu => {
            let s = ZmuSampler::new(need(args.mu, "mu")?).map_err(|e| usage(e.to_string()))?;
            (0..n).map(|_| vec![s.sample(&mut rng)]).collect()
        }
        Law::Cauchy => (0..n).map(|_| vec![sample_cauchy(&mut rng)]).collect(),
        Law::HittingBm => {
            let a = need(args.a, "a")?;
            (0..n)
                .map(|_| sample_hitting_time_bm(a, &mut rng).map(|v| vec![v]))
                .collect::<Result<_, _>>()
                .map_err(|e| usage(e.to_string()))?
        }
        Law::HittingDrifted => {
            let (a, mu) = (need(args.a, "a")?, need(args.mu, "mu")?);
            (0..n)
                .map(|_| sample_hitting_time_drifted(a, mu, &mut rng).map(|v| vec![v]))
                .collect::<Result<_, _>>()
                .map_err(|e| usage(e.to_string()))?
        }
        Law::Functionals => {
            let cfg = PathConfig::new(need(args.t, "t")?, args.steps.unwrap_or(1 << 10), 0.0)
                .map_err(|e| usage(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let s = simulate_functionals(&cfg, &mut rng);
                    vec![s.b_t, s.a_t, s.z_t]
                })
                .collect()
        }
    };
    let columns: &[&str] = if law == Law::Functionals { &["b_t", "a_t", "z_t"] } else { &["value"] };
    let text = match format {
        Format::Csv => {
            let mut s = columns.join(",");
            s.push('\n');
            for row in &rows {
                let cells: Vec<String> = row.iter().copied().map(num).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let objs: Vec<BTreeMap<&str, f64>> =
                rows.iter().map(|row| columns.iter().copied().zip(row.iter().copied()).collect()).collect();
            let mut s = serde_json::to_string_pretty(&objs).expect("samples serialize");
            s.push('\n');
            s
        }
    };
    Ok(Output { text, passed: true })
}

#[derive(Debug, Serialize)]
struct Evaluation {
    function: &'static str,
    args: BTreeMap<&'static str, f64>,
    value: f64,
    err_est: Option<f64>,
    low_precision: bool,
}

fn eval(function: Function, args: &NumArgs, format: Format) -> Result<Output, CliError> {
    let nu_z = || -> Result<(f64, f64), CliError> { Ok((need(args.nu, "nu")?, need(args.z, "z")?)) };
    let (name, inputs, value, err_est, low_precision) = match function {
        Function::Theta => {
            let (r, t) = (need(args.r, "r")?, need(args.t, "t")?);
            let p = theta_hw(r, t).map_err(compute)?;
            ("theta", vec![("r", r), ("t", t)], p.value, Some(p.err_est), p.low_precision)
        }
        Function::BesselK => {
            let (nu, z) = nu_z()?;
            ("bessel_k", vec![("nu", nu), ("z", z)], bessel_k(nu, z).map_err(compute)?, None, false)
        }
        Function::LnBesselK => {
            let (nu, z) = nu_z()?;
            ("ln_bessel_k", vec![("nu", nu), ("z", z)], ln_bessel_k(nu, z).map_err(compute)?, None, false)
        }
        Function::BesselI => {
            let (nu, z) = nu_z()?;
            ("bessel_i", vec![("nu", nu), ("z", z)], bessel_i(nu, z).map_err(compute)?, None, false)
        }
        Function::ZmuCdf => {
            let (mu, x) = (need(args.mu, "mu")?, need(args.x, "x")?);
            ("zmu_cdf", vec![("mu", mu), ("x", x)], zmu_cdf(mu, x).map_err(compute)?, None, false)
        }
        Function::NormalCdf => {
            let x = need(args.x, "x")?;
            ("normal_cdf", vec![("x", x)], normal_cdf(x), None, false)
        }
    };
    let e = Evaluation {
        function: name,
        args: inputs.into_iter().collect(),
        value,
        err_est,
        low_precision,
    };
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&e).expect("evaluation serializes");
            s.push('\n');
            s
        }
        Format::Csv => format!(
            "function,value,err_est,low_precision\n{},{},{},{}\n",
            e.function,
            num(e.value),
            e.err_est.map(num).unwrap_or_default(),
            e.low_precision
        ),
    };
    Ok(Output { text, passed: true })
}

fn execute(cli: &Cli, env_seed: Option<&str>, log: &mut dyn Write) -> Result<(Output, Option<PathBuf>), CliError> {
    let res = resolve(cli, env_seed)?;
    let format = res.format.unwrap_or(Format::Json);
    let out = match &cli.command {
        Command::List => list(res.format),
        Command::Verify { id, params, policy } => {
            let o = overrides(&res, params)?;
            verify(id, &o, &seeds(res.seed, policy)?, policy.all_runs, format)?
        }
        Command::Suite { filter, params, policy } => {
            let o = overrides(&res, params)?;
            let s = seeds(res.seed, policy)?;
            let _ = writeln!(log, "running suite `{filter}` with seeds {s:?}");
            suite(filter, &o, &s, policy.all_runs, format, log)?
        }
        Command::Sample { law, args } => {
            if !res.file_params.is_empty() {
                return Err(usage("scenario parameters in the config file do not apply to `sample`"));
            }
            sample(*law, args, res.n.unwrap_or(1000), res.seed, format)?
        }
        Command::Eval { function, args } => eval(*function, args, format)?,
    };
    Ok((out, res.out))
}

/// Runs the command line `args` (program name first) and returns the exit
/// status. Reports go to `stdout` or the `--out` file, messages to `stderr`.
pub fn run<I, T>(args: I, env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = execute(&cli, env_seed, stderr).and_then(|(out, path)| {
        match path {
            Some(p) => std::fs::write(&p, &out.text).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?,
            None => stdout.write_all(out.text.as_bytes()).map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            })?,
        }
        Ok(out.passed)
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.exit_code() == EXIT_USAGE {
                let _ = writeln!(stderr, "usage: expfun [--seed S] [--n N] [--format csv|json] [--out PATH] [--config FILE] <list|verify|suite|sample|eval> ...");
            }
            e.exit_code()
        }
    }
}
