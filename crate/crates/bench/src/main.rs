use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdl_bench::commands;
use sdl_bench::config::{Command, Overrides, RunConfig, Solver};
use sdl_core::loss::Mode;
use sdl_core::{Result, SdlError};

#[derive(Parser)]
#[command(name = "sdl-bench", version, about = "Supervised dictionary learning: training, simulation and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model and write its factors, trace and training metrics.
    Train(Flags),
    /// Score data with a trained model.
    Predict(Flags),
    /// Draw a dataset from one of the generative models.
    Simulate(Flags),
    /// Reconstruction/accuracy table over methods and ξ.
    BenchPareto(Flags),
    /// Training loss against time for each solver.
    BenchCurves(Flags),
    /// Estimation error against sample size.
    Consistency(Flags),
    /// Print the lifted-problem conditioning constants as JSON.
    CheckConditioning(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Filter,
    Feature,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    ConvFilt,
    ConvFeat,
    BcdFilt,
    BcdFeat,
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// p×n data matrix.
    #[arg(long)]
    data: Option<PathBuf>,
    /// q×n auxiliary covariates.
    #[arg(long)]
    aux: Option<PathBuf>,
    /// One integer label per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            xi: self.xi,
            nu: self.nu,
            tau: self.tau,
            rank: self.rank,
            iters: self.iters,
            mode: self.mode.map(|m| match m {
                ModeArg::Filter => Mode::Filter,
                ModeArg::Feature => Mode::Feature,
            }),
            solver: self.solver.map(|s| match s {
                SolverArg::ConvFilt => Solver::ConvFilt,
                SolverArg::ConvFeat => Solver::ConvFeat,
                SolverArg::BcdFilt => Solver::BcdFilt,
                SolverArg::BcdFeat => Solver::BcdFeat,
            }),
            data: self.data.clone(),
            aux: self.aux.clone(),
            labels: self.labels.clone(),
            model: self.model.clone(),
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    let (cmd, flags) = match cli.command {
        Cmd::Train(f) => (Command::Train, f),
        Cmd::Predict(f) => (Command::Predict, f),
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::BenchPareto(f) => (Command::BenchPareto, f),
        Cmd::BenchCurves(f) => (Command::BenchCurves, f),
        Cmd::Consistency(f) => (Command::Consistency, f),
        Cmd::CheckConditioning(f) => (Command::CheckConditioning, f),
    };
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&flags.overrides());
    cfg.command = Some(cmd);
    commands::run(cmd, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sdl-bench: {e}");
            match e {
                SdlError::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
