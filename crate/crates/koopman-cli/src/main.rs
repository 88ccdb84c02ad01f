//! `koopman` — spectral stability analysis for polynomial vector fields.
//!
//! Exit codes: 0 when the analysis produced a certified result, 2 when it
//! completed without certification, 1 on any error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use koopman_cli::commands::{
    self, CliError, FpRequest, GlobalOpts, GridRequest, LcRequest, VerifyRequest,
};
use koopman_cli::parse::Method;

#[derive(Parser)]
#[command(
    name = "koopman",
    version,
    about = "Koopman eigenfunctions, Lyapunov functions, and basins for polynomial systems"
)]
struct Cli {
    /// Seed for verification sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on linear-algebra threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Taylor,
    Bernstein,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Taylor => Method::Taylor,
            MethodArg::Bernstein => Method::Bernstein,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a stable fixed point: spectrum, eigenfunctions, Lyapunov
    /// candidate, basin estimate, verifications.
    AnalyzeFp {
        /// System definition file.
        system: PathBuf,
        /// Eigenfunction representation (default: taylor).
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Taylor truncation order.
        #[arg(long)]
        order: Option<u32>,
        /// Bernstein degree per axis.
        #[arg(long)]
        degree: Option<usize>,
        /// Region of interest: lo hi per axis (overrides the file's `box`).
        #[arg(long = "box", num_args = 2.., allow_negative_numbers = true, value_name = "LO HI")]
        region: Option<Vec<f64>>,
        /// Lyapunov exponent p in V = Σ|φ|^(p).
        #[arg(long)]
        p: Option<u32>,
        /// Lattice points per axis for the basin estimate and grid.
        #[arg(long)]
        resolution: Option<usize>,
        /// Verification sample points.
        #[arg(long)]
        samples: Option<usize>,
        /// Verification horizon (time units).
        #[arg(long)]
        horizon: Option<f64>,
        /// Fixed-point search start (default: origin).
        #[arg(long, num_args = 1.., allow_negative_numbers = true, value_name = "X")]
        guess: Option<Vec<f64>>,
        /// Report output path.
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Grid CSV output path (default: report stem + `_grid.csv`).
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Skip the grid artifact.
        #[arg(long)]
        no_grid: bool,
    },
    /// Analyze a stable limit cycle: Floquet exponent, annulus
    /// eigenfunction, verifications.
    AnalyzeLc {
        /// System definition file.
        system: PathBuf,
        /// Fourier truncation (harmonics −n̄..n̄).
        #[arg(long)]
        nbar: Option<usize>,
        /// Radial Bernstein degree.
        #[arg(long)]
        degree: Option<usize>,
        /// Radial degree used to represent the vector field (default: auto).
        #[arg(long)]
        field_degree: Option<usize>,
        /// Keep every k-th harmonic (symmetry-aware thinning).
        #[arg(long)]
        stride: Option<usize>,
        /// Inner collar width of the annulus chart.
        #[arg(long)]
        delta: Option<f64>,
        /// Transverse leg normalization |e_r|.
        #[arg(long)]
        e_r_norm: Option<f64>,
        /// Points per chart axis for the annulus log|φ| grid.
        #[arg(long)]
        resolution: Option<usize>,
        /// Verification sample points.
        #[arg(long)]
        samples: Option<usize>,
        /// Verification horizon (default: half the period).
        #[arg(long)]
        horizon: Option<f64>,
        /// Cycle search start (default: 2 0).
        #[arg(long, num_args = 1.., allow_negative_numbers = true, value_name = "X")]
        guess: Option<Vec<f64>>,
        /// Report output path.
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Grid CSV output path (default: report stem + `_grid.csv`).
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Skip the grid artifact.
        #[arg(long)]
        no_grid: bool,
    },
    /// Re-render the contour grid of a saved report.
    EmitGrid {
        /// Report produced by analyze-fp or analyze-lc.
        report: PathBuf,
        /// Lattice points per axis.
        #[arg(long, default_value_t = commands::DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Grid bounds: lo hi per axis (default: the report's region).
        #[arg(long = "box", num_args = 2.., allow_negative_numbers = true, value_name = "LO HI")]
        region: Option<Vec<f64>>,
        /// CSV output path.
        #[arg(long, default_value = "grid.csv")]
        out: PathBuf,
    },
    /// Recheck a saved report's certificates from scratch.
    Verify {
        /// Report produced by analyze-fp or analyze-lc.
        report: PathBuf,
        /// Verification sample points (default: the report's).
        #[arg(long)]
        samples: Option<usize>,
        /// Verification horizon (default: the report's).
        #[arg(long)]
        horizon: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Cap BLAS parallelism before the first linear-algebra call spins up
    // thread pools.
    std::env::set_var("OPENBLAS_NUM_THREADS", cli.threads.to_string());
    std::env::set_var("OMP_NUM_THREADS", cli.threads.to_string());
    let g = GlobalOpts {
        seed: cli.seed,
        threads: cli.threads,
    };
    match run(cli.command, &g) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("koopman: error: {e}");
            ExitCode::from(1)
        }
    }
}

fn exit_for(certified: bool) -> ExitCode {
    if certified {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(command: Command, g: &GlobalOpts) -> Result<ExitCode, CliError> {
    match command {
        Command::AnalyzeFp {
            system,
            method,
            order,
            degree,
            region,
            p,
            resolution,
            samples,
            horizon,
            guess,
            report,
            grid,
            no_grid,
        } => {
            let req = FpRequest {
                system_path: system,
                method: method.map(Into::into),
                order,
                degree,
                region,
                p,
                resolution,
                samples,
                horizon,
                guess,
                report_path: report,
                grid_path: grid,
                no_grid,
            };
            let report = commands::analyze_fp(&req, g)?;
            Ok(exit_for(report.certified))
        }
        Command::AnalyzeLc {
            system,
            nbar,
            degree,
            field_degree,
            stride,
            delta,
            e_r_norm,
            resolution,
            samples,
            horizon,
            guess,
            report,
            grid,
            no_grid,
        } => {
            let req = LcRequest {
                system_path: system,
                n_bar: nbar,
                degree,
                field_degree,
                stride,
                delta,
                e_r_norm,
                resolution,
                samples,
                horizon,
                guess,
                report_path: report,
                grid_path: grid,
                no_grid,
            };
            let report = commands::analyze_lc(&req, g)?;
            Ok(exit_for(report.certified))
        }
        Command::EmitGrid {
            report,
            resolution,
            region,
            out,
        } => {
            let req = GridRequest {
                report_path: report,
                resolution,
                region,
                out_path: out,
            };
            commands::emit_grid(&req)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            report,
            samples,
            horizon,
        } => {
            let req = VerifyRequest {
                report_path: report,
                samples,
                horizon,
            };
            let summary = commands::verify(&req, g)?;
            for line in &summary.lines {
                println!("{line}");
            }
            Ok(exit_for(summary.certified))
        }
    }
}
