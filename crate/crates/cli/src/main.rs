use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match kdsense_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { kdsense_cli::EXIT_USER } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = kdsense_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(kdsense_cli::exit_code(&e));
    }
}
