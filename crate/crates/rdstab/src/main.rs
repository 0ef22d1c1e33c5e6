use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdstab::run::{rerun, run, Command, ExitStatus, Outcome, RunConfig, ToleranceConfig};

#[derive(Parser)]
#[command(name = "rdstab", version, about = "Stability certificates for Markov-driven random dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Kelly strategy and check K1/K2.
    SolveKelly(RunArgs),
    /// Simulate rival relative wealth paths.
    Simulate(RunArgs),
    /// Birkhoff estimate of the Lyapunov exponent.
    EstimateRate(RunArgs),
    /// Contracting neighbourhood and basin radius.
    Basin(RunArgs),
    /// Evolutionary stability certificate over a seed suite.
    Certify(RunArgs),
    /// Hoelder check and rate transfer for the M-step cocycle.
    Holder(RunArgs),
    /// Furstenberg-Kesten ladder of the linearisation.
    FkLadder(RunArgs),
    /// Repeat the run echoed in a report.json.
    Rerun {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    horizon: usize,
    /// Comma-separated; defaults to the model's "seed".
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sup_samples: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
}

fn config(command: Command, args: RunArgs) -> Result<RunConfig, String> {
    let mut seeds = args.seeds;
    if seeds.is_empty() {
        let text = std::fs::read_to_string(&args.model).map_err(|e| format!("cannot read {}: {e}", args.model.display()))?;
        let seed = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get("seed").and_then(|s| s.as_u64()))
            .unwrap_or(0);
        seeds.push(seed);
    }
    let mut tolerances = ToleranceConfig::default();
    if let Some(n) = args.sup_samples {
        tolerances.sup_samples = n;
    }
    if let Some(m) = args.margin {
        tolerances.margin = m;
    }
    Ok(RunConfig {
        command,
        model_path: args.model,
        horizon: args.horizon,
        seeds,
        output_dir: args.out,
        tolerances,
    })
}

fn init_threads() {
    if let Some(n) = std::env::var("RDS_STAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not cap the thread pool: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    init_threads();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::SolveKelly(a) => (Command::SolveKelly, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::EstimateRate(a) => (Command::EstimateRate, a),
        Cmd::Basin(a) => (Command::Basin, a),
        Cmd::Certify(a) => (Command::Certify, a),
        Cmd::Holder(a) => (Command::Holder, a),
        Cmd::FkLadder(a) => (Command::FkLadder, a),
        Cmd::Rerun { report, out } => return finish(rerun(&report, &out)),
    };
    match config(command, args) {
        Ok(cfg) => finish(run(&cfg)),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(ExitStatus::Validation as u8)
        }
    }
}

fn finish(result: Result<Outcome, rdstab::run::Failure>) -> ExitCode {
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            ExitCode::from(o.status as u8)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
