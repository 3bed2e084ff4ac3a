//! Command-line front end: `solve`, `verify` and `plotdata`.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 solver did not
//! converge (the partial trajectory is still written), 3 verification failed.

pub mod plotdata;
pub mod problem;
pub mod trajectory_file;
pub mod verify;

use std::path::{Path, PathBuf};

use bundle_interp::error::Error as CoreError;
use bundle_interp::interpolator::{solution_report, solve};
use clap::{Args, Parser, Subcommand};

use problem::{FormName, ModeName, SolverSection};
use trajectory_file::TrajectoryFile;
use verify::VerifyOptions;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Core(CoreError),
}

impl CliError {
    pub fn core(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "bundle-interp", version, about = "Minimum covariant-acceleration interpolation on trivial principal bundles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and write the trajectory CSV.
    Solve {
        problem: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Audit a trajectory against its problem; prints a JSON report.
    Verify {
        trajectory: Option<PathBuf>,
        problem: Option<PathBuf>,
        /// Also run the algebraic identity suite (alone when no files are given).
        #[arg(long)]
        identities: bool,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = VerifyOptions::default().variations)]
        variations: usize,
        #[arg(long, default_value_t = VerifyOptions::default().epsilon)]
        epsilon: f64,
        /// Tolerance on max |xi + A(x) xdot|.
        #[arg(long, default_value_t = VerifyOptions::default().defect_tol)]
        defect_tol: f64,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Export plot-ready columns (including position + quaternion poses).
    Plotdata { trajectory: PathBuf, output: PathBuf },
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// Collocation nodes per segment.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Newton residual tolerance (∞-norm).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub group_waypoints: Option<ModeName>,
    #[arg(long)]
    pub soft_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub form: Option<FormName>,
}

impl SolverFlags {
    fn section(&self) -> SolverSection {
        SolverSection {
            nodes: self.nodes,
            tol: self.tol,
            max_iters: self.max_iters,
            group_waypoints: self.group_waypoints,
            soft_weight: self.soft_weight,
            form: self.form,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_solve(problem: &Path, output: &Path, flags: &SolverFlags) -> Result<u8, CliError> {
    let loaded = problem::load(problem, &flags.section())?;
    let (trajectory, code) = match solve(&loaded.problem, &loaded.config) {
        Ok(t) => (t, EXIT_OK),
        Err(CoreError::Convergence { trajectory, iterations, residual, .. }) => {
            eprintln!("not converged after {iterations} iterations, residual {residual:.3e}; partial trajectory written");
            (*trajectory, EXIT_NOT_CONVERGED)
        }
        Err(e) => return Err(CliError::Core(e)),
    };
    write(output, &trajectory_file::write(&trajectory)?)?;
    if let Ok(report) = solution_report(&trajectory, &loaded.problem) {
        eprintln!(
            "J = {:.10e}, residual {:.3e}, {} iterations, constraint defect {:.3e}",
            report.cost, report.residual_norm, report.iterations, report.constraint_defect
        );
    }
    Ok(code)
}

fn cmd_verify(
    trajectory: Option<&Path>,
    problem: Option<&Path>,
    identities: bool,
    opts: &VerifyOptions,
    flags: &SolverFlags,
) -> Result<u8, CliError> {
    let (checks, ids) = match (trajectory, problem) {
        (Some(t), Some(p)) => {
            let file = TrajectoryFile::parse(&read(t)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", t.display())))?;
            let loaded = problem::load(p, &flags.section())?;
            let ids = if identities {
                vec![verify::identities_for(loaded.problem.bundle(), opts.seed)]
            } else {
                Vec::new()
            };
            (verify::verify(&file, &loaded, opts)?, ids)
        }
        (None, None) if identities => (
            Vec::new(),
            verify::default_identity_bundles()
                .iter()
                .map(|b| verify::identities_for(b, opts.seed))
                .collect(),
        ),
        _ => {
            return Err(CliError::Input(
                "verify needs TRAJECTORY and PROBLEM (or --identities alone)".into(),
            ))
        }
    };
    let report = verify::finish(checks, ids);
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    println!("{json}");
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_plotdata(trajectory: &Path, output: &Path) -> Result<u8, CliError> {
    let file = TrajectoryFile::parse(&read(trajectory)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", trajectory.display())))?;
    write(output, &plotdata::plotdata(&file)?)?;
    Ok(EXIT_OK)
}

/// Runs one command; returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Solve { problem, output, solver } => cmd_solve(problem, output, solver),
        Command::Verify {
            trajectory,
            problem,
            identities,
            seed,
            variations,
            epsilon,
            defect_tol,
            solver,
        } => {
            let opts = VerifyOptions {
                seed: *seed,
                variations: *variations,
                epsilon: *epsilon,
                defect_tol: *defect_tol,
                ..VerifyOptions::default()
            };
            cmd_verify(trajectory.as_deref(), problem.as_deref(), *identities, &opts, solver)
        }
        Command::Plotdata { trajectory, output } => cmd_plotdata(trajectory, output),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_INPUT
    })
}
