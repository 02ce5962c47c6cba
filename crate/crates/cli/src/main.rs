use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedtopic::checkpoint::Checkpoint;
use fedtopic_cli::experiment::{load_data, run_experiment_with};
use fedtopic_cli::format::sig9;
use fedtopic_cli::{inspect, parse_config, ExperimentSpec, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "fedtopic", version, about = "Federated topic-model pruning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every run in a config and write results.
    Run { config: PathBuf },
    /// Check a config and its corpus files without training.
    Validate { config: PathBuf },
    /// Print shapes, density and top words of a checkpoint.
    Inspect { checkpoint: PathBuf },
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, String> {
    let mut spec = parse_config(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        spec.output_dir = PathBuf::from(dir);
    }
    Ok(spec)
}

fn run(config: &Path) -> Result<ExitCode, String> {
    let spec = load_spec(config)?;
    let outcome = run_experiment_with(&spec, |run, r| {
        if let Some(m) = &r.metrics {
            let acc = m.accuracy.map(sig9).unwrap_or_else(|| "n/a".into());
            eprintln!(
                "[{}] round {:>5}  loss {:>10}  density {:<8}  time {:>10}s  acc {acc}  npmi {}  div {}",
                run.label,
                r.round,
                sig9(r.mean_loss),
                sig9(r.density),
                sig9(r.cum_time_s),
                sig9(m.coherence),
                sig9(m.diversity),
            );
        }
    })
    .map_err(|e| e.to_string())?;
    for o in &outcome.runs {
        if let Some(err) = &o.error {
            eprintln!("[{}] failed: {err}", o.run.label);
        }
    }
    println!("results written to {}", spec.output_dir.display());
    Ok(if outcome.failures() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn validate(config: &Path) -> Result<ExitCode, String> {
    let spec = load_spec(config)?;
    let (train, test) = load_data(&spec).map_err(|e| e.to_string())?;
    println!(
        "ok: {} train docs, {} test docs, {} tokens, {} runs of {} rounds",
        train.len(),
        test.len(),
        train.vocab().len(),
        spec.runs.len(),
        spec.federation.rounds
    );
    Ok(ExitCode::SUCCESS)
}

fn inspect_checkpoint(path: &Path) -> Result<ExitCode, String> {
    let ck = Checkpoint::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    print!("{}", inspect::describe(&ck).map_err(|e| e.to_string())?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::Validate { config } => validate(config),
        Command::Inspect { checkpoint } => inspect_checkpoint(checkpoint),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
