use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koopman_mpc::experiment::{
    parse_override, run_ablate, run_control, run_evaluate, run_plot, run_predict, run_simulate, run_train, Case,
    ExperimentConfig, StageOutcome,
};
use koopman_mpc::{Error, Result};

#[derive(Parser)]
#[command(name = "koopman-mpc", version, about = "Simulate, learn and control seizure-like neural-mass dynamics")]
struct Cli {
    /// Experiment config (TOML); `include = [...]` pulls in base files.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// single or double.
    #[arg(long, global = true)]
    case: Option<String>,
    /// Override any config value, e.g. `--set koopman.epochs=50`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the EEG trace used for training and evaluation.
    Simulate {
        /// Excitatory gain of the single column (mV).
        #[arg(long = "A")]
        gain: Option<f64>,
    },
    /// Train the Koopman model and the GRU baseline.
    Train,
    /// Predict the held-out segment with both models.
    Predict,
    /// Run the closed-loop suppression experiment.
    Control,
    /// Score predictions (and control, if run) and render figures.
    Evaluate,
    /// Loss ablations and GRU over several seeds, with a comparison table.
    Ablate {
        /// Runs per model (defaults to `ablation.seeds`).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Render figures for every completed stage.
    Plot,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    let mut push = |k: &str, v: toml::Value| overrides.push((k.to_owned(), v));
    if let Some(case) = &cli.case {
        let case: Case = case.parse()?;
        push("case", toml::Value::String(case.name().into()));
    }
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed).map_err(|_| Error::Config("seed too large".into()))?;
        push("seed", toml::Value::Integer(seed));
    }
    if let Some(out) = &cli.out {
        push("out", toml::Value::String(out.to_string_lossy().into_owned()));
    }
    match &cli.command {
        Command::Simulate { gain: Some(a) } => push("single.excitatory_gain", toml::Value::Float(*a)),
        Command::Ablate { seeds: Some(n) } => push("ablation.seeds", toml::Value::Integer(*n as i64)),
        _ => {}
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    if matches!(cli.command, Command::Simulate { gain: Some(_) }) && cfg.case == Case::Double {
        return Err(Error::Config("--A applies to the single column; use --set double.first.excitatory_gain=...".into()));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<StageOutcome> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Simulate { .. } => run_simulate(&cfg),
        Command::Train => run_train(&cfg),
        Command::Predict => run_predict(&cfg),
        Command::Control => run_control(&cfg),
        Command::Evaluate => run_evaluate(&cfg),
        Command::Ablate { .. } => run_ablate(&cfg),
        Command::Plot => run_plot(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    match run(&cli) {
        Ok(o) => {
            println!("{}: {} ({})", o.stage, o.dir.display(), if o.reused { "reused" } else { "written" });
            println!("{}", o.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
