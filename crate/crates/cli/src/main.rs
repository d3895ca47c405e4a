use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weakkam_cli::{run, Command, RunConfig};

/// Numerical weak KAM solver on periodic grids.
#[derive(Parser, Debug)]
#[command(name = "weakkam", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; built-in defaults (pendulum, 256 points) when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override such as `grid.dims.0=1024`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match RunConfig::load(args.config.as_deref(), &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(args.command, &config) {
        Ok(summary) => {
            let results = &summary["results"];
            println!("{}", serde_json::to_string_pretty(results).expect("summary serializes"));
            println!("wrote {}", config.output_dir.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
