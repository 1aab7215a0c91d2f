//! `sbe`: backward errors of three-by-three block saddle point systems from the command line.

mod commands;
mod problem;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbe_core::StructureCase;

use crate::settings::{CriterionName, Settings, SparsityMode};

#[derive(Parser, Debug)]
#[command(name = "sbe", version, about = "Structured backward errors for 3x3 block saddle point systems")]
struct Cli {
    /// TOML file with defaults for any flag (keys are flag names); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Built-in problem: example1..example6, example4-unit, identity.
    #[arg(long)]
    builtin: Option<String>,
    /// JSON manifest listing MatrixMarket block files.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Grid parameter of example4/example6.
    #[arg(long)]
    r: Option<usize>,
    /// Size parameter of example5 (n = 2k, m = p = k).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Structure case I, II or III (default: the problem's own).
    #[arg(long)]
    case: Option<StructureCase>,
    /// unit | normalized | explicit:t1,...,t10
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComputeBeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Approximate solution w = (x, y, z) as a MatrixMarket column.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// reference | exact | gep | gmres, used when no --solution is given.
    #[arg(long)]
    solver: Option<String>,
    /// Stopping tolerance when --solver gmres.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    sparsity: Option<SparsityMode>,
    /// Also write the minimal perturbations as MatrixMarket files.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    write_perturbation: Option<bool>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// gmres | gep
    #[arg(long)]
    solver: Option<String>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionName>,
    #[arg(long)]
    tol: Option<f64>,
    /// With --criterion seta: on uses the sparsity-preserving error.
    #[arg(long, value_enum)]
    sparsity: Option<SparsityMode>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// GMRES restart length (default: none).
    #[arg(long)]
    restart: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    solver: Option<String>,
    /// Directory holding dA.mtx ... dh.mtx and perturbation.json.
    #[arg(long)]
    perturbation: Option<PathBuf>,
    /// Defect tolerance relative to ‖𝒜‖_F‖w‖ + ‖d‖ (default 1e-12).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// r values of the example4-unit grid run; pass the flag with no value for none.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    grid: Option<Vec<usize>>,
    /// k values of the example5 sweep; pass the flag with no value for none.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sweep: Option<Vec<usize>>,
    /// Compare the term1/term2/seta stopping tests on example6 (default true).
    #[arg(long)]
    criteria: Option<bool>,
    /// Scaling of the Laplacian in the grid problems: unit | mesh.
    #[arg(long)]
    laplacian: Option<String>,
    /// Weight preset for the structured errors (default normalized).
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Backward errors of an approximate solution; writes report.json.
    ComputeBe(ComputeBeArgs),
    /// Run a solver with a chosen stopping test; writes history.csv and solution.mtx.
    Solve(SolveArgs),
    /// Check a perturbation against a system and solution.
    Verify(VerifyArgs),
    /// Regenerate the grid, example5 sweep and stopping-criteria comparison data as CSV.
    Reproduce(ReproduceArgs),
}

impl ProblemArgs {
    fn into_settings(self) -> Settings {
        Settings {
            builtin: self.builtin,
            manifest: self.manifest,
            r: self.r,
            k: self.k,
            seed: self.seed,
            case: self.case,
            weights: self.weights,
            out: self.out,
            ..Default::default()
        }
    }
}

impl Command {
    fn settings(self) -> Settings {
        match self {
            Command::ComputeBe(a) => Settings {
                solution: a.solution,
                solver: a.solver,
                tol: a.tol,
                sparsity: a.sparsity,
                write_perturbation: a.write_perturbation,
                ..a.problem.into_settings()
            },
            Command::Solve(a) => Settings {
                solver: a.solver,
                criterion: a.criterion,
                tol: a.tol,
                sparsity: a.sparsity,
                max_iter: a.max_iter,
                restart: a.restart,
                ..a.problem.into_settings()
            },
            Command::Verify(a) => Settings {
                solution: a.solution,
                solver: a.solver,
                perturbation: a.perturbation,
                tol: a.tol,
                ..a.problem.into_settings()
            },
            Command::Reproduce(a) => Settings {
                grid: a.grid,
                sweep: a.sweep,
                criteria: a.criteria,
                laplacian: a.laplacian,
                weights: a.weights,
                seed: a.seed,
                out: a.out,
                ..Default::default()
            },
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let which = match cli.command {
        Command::ComputeBe(_) => commands::compute_be,
        Command::Solve(_) => commands::solve,
        Command::Verify(_) => commands::verify,
        Command::Reproduce(_) => commands::reproduce,
    };
    let settings = cli.command.settings().with_fallback(&file);
    log::debug!("{settings:?}");
    which(&settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SBE_LOG", "off")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
