use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_capnet::experiments::{AxisValue, MethodSummary, Pipeline, Run, RunManifest, SweepAxis, SweepSpec};
use ris_capnet::Result;

#[derive(Parser)]
#[command(version, about = "Surface phase design from received pilots")]
struct Cli {
    /// Run manifest (TOML). Without it the `--preset` manifest is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given: small or paper-shape.
    #[arg(long, global = true, default_value = "small")]
    preset: String,
    /// Replaces the master seed and re-derives every stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the manifest's `outputs.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the datasets the pipeline needs.
    GenData {
        #[arg(long)]
        pipeline: Option<String>,
    },
    /// Train the phase network against the true rate (known channels).
    TrainPhaseNet,
    /// Train the Capacity-Net surrogate.
    TrainCapnet,
    /// Train the phase network through the frozen surrogate.
    TrainCapnetUnsup,
    /// Evaluate a baseline (dsm, random, exhaustive) on the held-out set.
    Baseline {
        #[arg(long, default_value = "dsm")]
        method: String,
    },
    /// Sweep one axis: pilot-length, ris-elements or transmit-power.
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. 2,4,8,16 or 2x2,3x3 or 120,150.
        #[arg(long)]
        values: String,
        /// Comma-separated methods; empty writes only the header.
        #[arg(long, default_value = "")]
        methods: String,
    },
    /// Evaluate every saved model and all baselines on the held-out set.
    Evaluate,
    /// Print the effective manifest.
    ShowConfig,
}

fn manifest(cli: &Cli, pipeline: Option<Pipeline>) -> Result<RunManifest> {
    let mut m = match &cli.config {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest::preset(&cli.preset, pipeline.unwrap_or(Pipeline::Dsm))?,
    };
    if let Some(p) = pipeline {
        m.pipeline = p;
    }
    if let Some(seed) = cli.seed {
        m.reseed(seed);
    }
    if let Some(out) = &cli.out {
        m.outputs.dir = out.display().to_string();
    }
    Ok(m)
}

fn print_summaries(summaries: &[MethodSummary]) {
    for s in summaries {
        println!("{:<13} mean {:.6} ± {:.6} (n = {})", s.method, s.mean, s.std_err, s.n_eval);
    }
}

fn list<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let pipeline = match &cli.command {
        Command::GenData { pipeline } => pipeline.as_deref().map(str::parse).transpose()?,
        Command::TrainPhaseNet => Some(Pipeline::UnsupCsi),
        Command::TrainCapnet => Some(Pipeline::Capnet),
        Command::TrainCapnetUnsup => Some(Pipeline::CapnetUnsup),
        Command::Baseline { method } => Some(method.parse()?),
        Command::Sweep { .. } | Command::Evaluate | Command::ShowConfig => None,
    };
    let m = manifest(cli, pipeline)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", m.to_toml()?);
        return Ok(());
    }
    let dir = m.outputs.dir.clone();
    let run = Run::create(m, dir)?;
    match &cli.command {
        Command::GenData { .. } => {
            for p in run.gen_data()? {
                println!("wrote {}", p.display());
            }
        }
        Command::TrainPhaseNet => {
            let (_, report) = run.train_phase_net()?;
            for (e, r) in report.epoch_mean_rate.iter().enumerate() {
                println!("epoch {e:>3} mean rate {r:.6}");
            }
        }
        Command::TrainCapnet => {
            let (_, report) = run.train_capnet()?;
            for (e, (t, h)) in report.train_mse.iter().zip(&report.heldout_mse).enumerate() {
                println!("epoch {e:>3} train mse {t:.6} held-out mse {h:.6}");
            }
        }
        Command::TrainCapnetUnsup => {
            let (_, report) = run.train_capnet_unsup()?;
            for (e, r) in report.epoch_mean_surrogate_rate.iter().enumerate() {
                println!("epoch {e:>3} mean surrogate rate {r:.6}");
            }
        }
        Command::Baseline { .. } => print_summaries(&[run.baseline()?]),
        Command::Sweep { axis, values, methods } => {
            let parsed: SweepAxis = axis.parse()?;
            let spec = SweepSpec {
                axis: parsed,
                values: list(values, |v| AxisValue::parse(parsed, v))?,
                methods: list(methods, str::parse)?,
            };
            let outcome = run.sweep(&spec, axis)?;
            print!("{}", outcome.to_csv());
            for (point, err) in &outcome.errors {
                eprintln!("point {point} failed: {err}");
            }
        }
        Command::Evaluate => print_summaries(&run.evaluate_all()?),
        Command::ShowConfig => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
