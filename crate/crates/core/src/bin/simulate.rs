use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use precplan_core::satisfaction::Strategy;
use precplan_core::sim::{emit_report, run_experiment, ExperimentConfig, Planner};

/// Run a seeded population experiment and write report.json and metrics.csv.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// JSON experiment config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// personalized | unified | energy_priority
    #[arg(long)]
    planner: Option<Planner>,
    /// fedavg | class_equal | majority_centric
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(args: &Args) -> Result<ExperimentConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(p) = args.planner {
        config.planner = p;
    }
    if let Some(s) = args.strategy {
        config.strategy = s;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|config| {
        let report = run_experiment(&config).map_err(|e| e.to_string())?;
        emit_report(&report, &args.out).map_err(|e| e.to_string())?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            println!(
                "{} / {} seed {}: satisfaction {:.4}, relative energy {:.4}",
                report.planner, report.strategy, report.seed, report.mean_satisfaction, report.mean_relative_energy
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("simulate: {e}");
            ExitCode::FAILURE
        }
    }
}
