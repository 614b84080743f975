use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fpx::error::FpxError;
use fpx::experiment::{self, ExperimentSpec};

#[derive(Parser)]
#[command(name = "fpx", version, about = "Transition-density approximations for mean-reverting diffusions")]
struct Cli {
    /// Output directory (defaults to the run's `output` field or runs/<name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to FPX_THREADS, then to all cores.
    #[arg(long, global = true, env = "FPX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML spec file.
    Run { spec: PathBuf },
    /// Run a built-in figure preset.
    Preset {
        /// One of the preset names; `list` prints them.
        name: String,
        /// Print the preset's TOML spec instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Print the theta matrix of a model.
    Theta {
        model: String,
        /// Model parameter as key=value, where the value is TOML (e.g. alpha=[2,-2]).
        #[arg(long = "param", short = 'p')]
        params: Vec<String>,
    },
    /// Mode-doubling convergence study for the solver settings of a spec.
    Converge {
        /// Spec file, or a preset name.
        spec: String,
    },
}

fn parse_params(raw: &[String]) -> Result<toml::Table, FpxError> {
    let mut table = toml::Table::new();
    for p in raw {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| FpxError::config(format!("--param {p}"), "expected key=value"))?;
        let parsed: toml::Table = toml::from_str(&format!("v = {v}"))
            .map_err(|e| FpxError::config(format!("params.{k}"), e.message().to_string()))?;
        table.insert(k.trim().to_string(), parsed["v"].clone());
    }
    Ok(table)
}

fn load(spec: &str) -> Result<ExperimentSpec, FpxError> {
    let path = PathBuf::from(spec);
    if path.exists() {
        ExperimentSpec::from_file(&path)
    } else {
        experiment::preset(spec)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Run { spec } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let (dir, summary) = experiment::run_experiment(&spec, cli.out.as_deref(), threads)?;
            report(&dir, &summary);
        }
        Command::Preset { name, print } => {
            if name == "list" {
                for p in experiment::PRESETS {
                    println!("{p}");
                }
                return Ok(());
            }
            let spec = experiment::preset(&name)?;
            if print {
                print!("{}", spec.to_toml());
                return Ok(());
            }
            let (dir, summary) = experiment::run_experiment(&spec, cli.out.as_deref(), threads)?;
            report(&dir, &summary);
        }
        Command::Theta { model, params } => {
            let r = experiment::theta_report(&model, &parse_params(&params)?)?;
            println!("{}", serde_json::to_string_pretty(&r).context("serializing theta report")?);
        }
        Command::Converge { spec } => {
            let spec = load(&spec)?;
            for (tau, rep) in experiment::converge(&spec, threads)? {
                let diffs = rep
                    .differences
                    .iter()
                    .map(|d| format!("{d:.3e}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("tau={tau} modes={:?} l1_differences=[{diffs}] accepted={}", rep.modes, rep.accepted);
            }
        }
    }
    Ok(())
}

fn report(dir: &std::path::Path, summary: &experiment::RunSummary) {
    for r in &summary.results {
        let l1 = r.l1_vs_reference.map(|e| format!(" l1={e:.3e}")).unwrap_or_default();
        let mass = r.mass.map(|m| format!(" mass={m:.6}")).unwrap_or_default();
        println!("{:<12} tau={:<6}{mass}{l1}", r.method, r.tau);
    }
    println!("wrote {}", dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<FpxError>() {
                Some(fe) if fe.is_spec_error() => ExitCode::from(2),
                Some(FpxError::Io(_)) => ExitCode::from(2),
                Some(_) => ExitCode::from(3),
                None => ExitCode::from(2),
            }
        }
    }
}
