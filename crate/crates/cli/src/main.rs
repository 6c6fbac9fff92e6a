//! `seqrand`: command-line driver for sequential CHSH randomness
//! certification.
//!
//! Simulates the two-round weak-measurement protocol, checks the boundary of
//! the sequential quantum set, and certifies device-independent min-entropy
//! through semidefinite relaxations. Grid subcommands emit plot-ready CSV;
//! report subcommands emit JSON. Every run with the same configuration
//! produces byte-identical output.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3 solver
//! failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqrand_core::npa::{DEFAULT_EPSILON, GuessingConstraintMode};
use seqrand_core::sdp::SolveOptions;

#[derive(Parser)]
#[command(
    name = "seqrand",
    about = "Sequential CHSH protocol simulation and randomness certification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for grid subcommands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default: csv for grids, json for reports).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Constrain the full outcome table of the kept branch plus the
    /// first-round marginals of the discarded branch.
    FullTable,
    /// Constrain only the one- and two-point correlators.
    Summary,
}

impl ModeArg {
    fn to_mode(self, epsilon: f64) -> GuessingConstraintMode {
        match self {
            ModeArg::FullTable => GuessingConstraintMode::FullTable { epsilon },
            ModeArg::Summary => GuessingConstraintMode::Summary { epsilon },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bell functionals of the ideal protocol across a θ grid (boundary
    /// cross-section).
    Boundary {
        /// Comma-separated θ values; default: a uniform grid over [0, π/4].
        #[arg(long)]
        theta: Option<String>,
        /// Number of grid points when --theta is not given.
        #[arg(long, default_value_t = 33)]
        points: usize,
    },
    /// Certified min-entropy across a θ grid, one curve per depolarization
    /// value.
    ScanTheta {
        /// Comma-separated θ values; default: a uniform grid over [0, π/4].
        #[arg(long)]
        theta: Option<String>,
        /// Number of θ points when --theta is not given.
        #[arg(long, default_value_t = 33)]
        points: usize,
        /// Comma-separated depolarization values.
        #[arg(long, default_value = "0,0.005,0.01,0.02")]
        p: String,
        /// Decoherence parameter, fixed across the scan.
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::FullTable)]
        mode: ModeArg,
        /// Verification margin for the behavior constraints.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Best min-entropy over θ per noise level, against CHSH-based bounds.
    ScanNoise {
        /// Comma-separated depolarization values; default: a uniform grid
        /// over [0, 0.1].
        #[arg(long)]
        p: Option<String>,
        /// Number of p points when --p is not given.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Decoherence parameter, fixed across the scan.
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::FullTable)]
        mode: ModeArg,
        /// Verification margin for the behavior constraints.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Model report for the three reference experiment parameter sets.
    Tables {
        /// Verification margin for the behavior constraints.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// No-signaling and sequentiality checks on a behavior JSON file.
    Validate {
        /// Path to the behavior table (JSON).
        file: PathBuf,
    },
    /// One certified min-entropy bound, from parameters or a behavior file.
    Minentropy {
        /// Measurement strength θ (simulated input).
        #[arg(long, conflicts_with = "table")]
        theta: Option<f64>,
        /// Depolarization (simulated input).
        #[arg(long, default_value_t = 0.0, conflicts_with = "table")]
        p: f64,
        /// Decoherence (simulated input).
        #[arg(long, default_value_t = 0.0, conflicts_with = "table")]
        c: f64,
        /// Certify an observed behavior table (JSON file) instead.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::FullTable)]
        mode: ModeArg,
        /// Verification margin for the behavior constraints.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Write the SDP in JSON triplet form to this path before solving.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
    },
}

/// Failure channels, each with its contractual exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable/invalid inputs, IO problems: exit 2.
    Input(String),
    /// A behavior failed validation: exit 1.
    Validation,
    /// The SDP did not produce a certifiable solution: exit 3.
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation => 1,
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<seqrand_core::npa::NpaError> for CliError {
    fn from(e: seqrand_core::npa::NpaError) -> Self {
        use seqrand_core::npa::NpaError;
        match e {
            NpaError::Solver(m) => CliError::Solver(m),
            NpaError::Layout(m) => CliError::Solver(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Solver settings, honoring the `SEQRAND_SOLVER_TOL` override.
fn solve_options() -> Result<SolveOptions, CliError> {
    let mut options = SolveOptions::default();
    if let Ok(raw) = std::env::var("SEQRAND_SOLVER_TOL") {
        let tol: f64 = raw
            .parse()
            .map_err(|_| CliError::Input(format!("SEQRAND_SOLVER_TOL={raw} is not a number")))?;
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Input(format!(
                "SEQRAND_SOLVER_TOL={raw} outside (0, 1)"
            )));
        }
        options.tol = tol;
    }
    Ok(options)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Input("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Input(format!("worker pool: {e}")))?;
    }
    let options = solve_options()?;
    let format = cli.format;

    let rendered = match cli.command {
        Command::Boundary { theta, points } => {
            commands::boundary(theta.as_deref(), points, format.unwrap_or(Format::Csv))?
        }
        Command::ScanTheta { theta, points, p, c, mode, epsilon } => commands::scan_theta(
            theta.as_deref(),
            points,
            &p,
            c,
            mode.to_mode(epsilon),
            &options,
            format.unwrap_or(Format::Csv),
        )?,
        Command::ScanNoise { p, points, c, mode, epsilon } => commands::scan_noise(
            p.as_deref(),
            points,
            c,
            mode.to_mode(epsilon),
            &options,
            format.unwrap_or(Format::Csv),
        )?,
        Command::Tables { epsilon } => {
            commands::tables(epsilon, &options, format.unwrap_or(Format::Json))?
        }
        Command::Validate { file } => {
            // The report is written even on failure; only the exit code
            // differs.
            let (rendered, pass) = commands::validate(&file, format.unwrap_or(Format::Json))?;
            output::write_out(cli.out.as_deref(), &rendered)?;
            return if pass { Ok(()) } else { Err(CliError::Validation) };
        }
        Command::Minentropy { theta, p, c, table, mode, epsilon, dump_sdp } => {
            commands::minentropy(
                theta,
                p,
                c,
                table.as_deref(),
                mode.to_mode(epsilon),
                dump_sdp.as_deref(),
                &options,
                format.unwrap_or(Format::Json),
            )?
        }
    };

    output::write_out(cli.out.as_deref(), &rendered)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation => eprintln!("validation failed"),
                CliError::Input(m) => eprintln!("input error: {m}"),
                CliError::Solver(m) => eprintln!("solver failure: {m}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
