use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mwfpi_core::runner::{run, Scenario, ScenarioConfig};

/// Matter-wave Fabry-Perot cavity scenarios.
#[derive(Parser, Debug)]
#[command(name = "mwfpi", version)]
struct Cli {
    /// spectrum | transmit | sweep | resonances | asymmetric | bragg-table
    scenario: String,
    /// JSON configuration; omitted fields take the reference defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's output_dir, then ./out/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MWFPI_WORKERS")]
    workers: Option<usize>,
    /// Dotted key=value applied to the config, e.g. grid.n_points=8192.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let setup = || -> mwfpi_core::Result<(Scenario, ScenarioConfig)> {
        let scenario: Scenario = cli.scenario.parse()?;
        let text = std::fs::read_to_string(&cli.config)
            .map_err(|e| mwfpi_core::Error::Config(format!("{}: {e}", cli.config.display())))?;
        let config = ScenarioConfig::from_json(&text, &cli.overrides)?;
        config.validate(scenario)?;
        Ok((scenario, config))
    };
    let (scenario, config) = match setup() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("mwfpi: {e}");
            return ExitCode::from(1);
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match run(&config, scenario, &out, workers) {
        Ok(manifest) => {
            eprintln!(
                "mwfpi: {} done in {:.1}s, {} points, {} failed, output in {}",
                scenario.name(),
                manifest.wall_time_s,
                manifest.points.len(),
                manifest.failures,
                out.display()
            );
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("mwfpi: {e}");
            ExitCode::from(1)
        }
    }
}
