mod args;
mod commands;
mod error;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use args::{merge, read_config, Cli, Command};
use commands::{config_value, manifest_dir, write_manifest, Report};
use error::CliResult;

fn run(cli: &Cli) -> CliResult<Report> {
    let config = cli.config.as_deref().map(read_config).transpose()?;
    let config = config.as_ref();
    let (report, merged) = match &cli.command {
        Command::Ground(a) => {
            let a = merge(a, config)?;
            (commands::ground(&a)?, config_value(&a))
        }
        Command::Spectrum(a) => {
            let a = merge(a, config)?;
            (commands::spectrum(&a)?, config_value(&a))
        }
        Command::Continue(a) => {
            let a = merge(a, config)?;
            (commands::continuation(&a)?, config_value(&a))
        }
        Command::Evolve(a) => {
            let a = merge(a, config)?;
            (commands::evolution(&a)?, config_value(&a))
        }
        Command::Plot(a) => {
            let a = merge(a, config)?;
            (commands::plot(&a)?, config_value(&a))
        }
    };
    write_manifest(&manifest_dir(&report.outputs), cli.command.name(), merged, &report.outputs)?;
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("summary serializes"));
            } else {
                println!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
