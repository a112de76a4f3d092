use clap::Parser;

use reclab::cli::{self, Cli, Command};
use reclab::config::RunConfig;

fn main() {
    let cli = Cli::parse();

    if matches!(cli.command, Command::ExampleConfig) {
        print!("{}", reclab::config::example_config());
        return;
    }

    let cfg = match RunConfig::load(&cli.config, &cli::overrides_from(&cli)) {
        Ok(cfg) => cfg,
        Err(err) => fail(&err),
    };

    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .ok();
    }

    match cli::run(&cli.command, &cfg) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!("{}: ok", cli.command.name());
        }
        Err(err) => fail(&err),
    }
}

fn fail(err: &reclab::LabError) -> ! {
    eprintln!(
        "{}",
        serde_json::json!({ "error": err.kind(), "message": err.to_string() })
    );
    std::process::exit(err.exit_code());
}
