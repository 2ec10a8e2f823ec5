use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbspec_core::harness::{run_experiment, write_artifacts, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(
    name = "sbspec",
    version,
    about = "Spectra of fourth-order operators with squeezed potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides output.dir; default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Resonant set of Ψ in the configured α-window
    ResonantSet(Common),
    /// Eigenvalues of S_ε for each ε
    PerturbedSpectrum(Common),
    /// Spectrum of the limit operator
    LimitSpectrum(Common),
    /// λ₁, λ₂ and the assembled quasimodes
    Correctors(Common),
    /// Convergence rates over the ε-sequence, with verdict
    Converge(Common),
    /// Negative eigenvalues ~ -cε⁻⁴, with verdict
    DivergenceProbe(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::ResonantSet(c) => (Mode::ResonantSet, c),
        Command::PerturbedSpectrum(c) => (Mode::Perturbed, c),
        Command::LimitSpectrum(c) => (Mode::Limit, c),
        Command::Correctors(c) => (Mode::Correctors, c),
        Command::Converge(c) => (Mode::Converge, c),
        Command::DivergenceProbe(c) => (Mode::DivergenceProbe, c),
    };
    let run = || -> sbspec_core::Result<i32> {
        let cfg = ExperimentConfig::load(&common.config)?;
        let mode = cfg.resolve_mode(Some(mode))?;
        let outcome = run_experiment(&cfg, mode)?;
        let dir = common
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        for path in write_artifacts(&dir, &outcome.artifacts)? {
            println!("wrote {}", path.display());
        }
        println!("{}: {} [{:?}]", mode.name(), outcome.summary, outcome.verdict);
        Ok(outcome.exit_code())
    };
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
