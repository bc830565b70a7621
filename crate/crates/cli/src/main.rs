fn main() {
    let env_seed = std::env::var(expfun_cli::SEED_ENV).ok();
    let code = expfun_cli::run(std::env::args_os(), env_seed.as_deref(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    std::process::exit(code);
}
