//! `plate-vem`: mesh generation, eigenvalue solves and convergence studies
//! for the C1 virtual element plate vibration problem.

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use plate_vem::assembly::BoundaryAssignment;
use plate_vem::eigensolve::SolverMode;
use plate_vem::element::{SigmaRule, StabilizationOptions, StiffnessScaling};
use plate_vem::mesh::{Domain, MeshFamily};
use plate_vem::VemError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_QUALITY: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "plate-vem",
    version,
    about = "C1 virtual elements for Kirchhoff plate vibration"
)]
struct Cli {
    /// Base directory for outputs; each run writes into a stamped subdirectory.
    #[arg(long, global = true, env = "PLATE_VEM_OUT_DIR", default_value = "runs")]
    out_dir: PathBuf,

    /// Fixed subdirectory name instead of a timestamp (reused if present).
    #[arg(long, global = true)]
    run_name: Option<String>,

    /// Worker thread cap for assembly and study levels.
    #[arg(long, global = true, env = "PLATE_VEM_THREADS")]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a mesh, write it and print the shape-regularity report.
    Mesh(MeshCmd),
    /// Assemble and solve one eigenproblem.
    Solve(SolveCmd),
    /// Run convergence studies from a config file or flags.
    Study(StudyCmd),
    /// Validate config, rules and mesh files without solving.
    Check(CheckCmd),
}

#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    /// Mesh family: rect, hex, hex3, trap, tri (or t1..t4).
    #[arg(long)]
    pub family: Option<MeshFamily>,

    /// Plate domain: unit_square or lshape.
    #[arg(long, default_value = "unit_square")]
    pub domain: Domain,

    /// Refinement parameter (elements per edge).
    #[arg(long)]
    pub n: Option<usize>,

    /// Seed for the randomized families.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MeshCmd {
    #[command(flatten)]
    pub gen: GeneratorArgs,

    /// Output file name inside the run directory.
    #[arg(long, default_value = "mesh.txt")]
    pub output: String,

    /// Shape-regularity constant for the edge and star-shapedness checks.
    #[arg(long, default_value_t = plate_vem::analysis::QUALITY_CONSTANT)]
    pub c_t: f64,

    /// Exit with status 3 when a cell fails the quality checks.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    Trace,
    TraceExcludingKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Consistent,
    Literal,
}

#[derive(Debug, Clone, Args)]
pub struct StabilizationArgs {
    /// Rule for the stabilization constant.
    #[arg(long, value_enum, default_value = "trace")]
    pub sigma_rule: SigmaArg,

    /// Scaling of the stiffness stabilization weights.
    #[arg(long, value_enum, default_value = "consistent")]
    pub stiffness_scaling: ScalingArg,
}

impl StabilizationArgs {
    pub fn options(&self) -> StabilizationOptions {
        stabilization(self.sigma_rule, self.stiffness_scaling)
    }
}

pub fn stabilization(sigma_rule: SigmaArg, scaling: ScalingArg) -> StabilizationOptions {
    StabilizationOptions {
        sigma_rule: match sigma_rule {
            SigmaArg::Trace => SigmaRule::Trace,
            SigmaArg::TraceExcludingKernel => SigmaRule::TraceExcludingKernel,
        },
        stiffness_scaling: match scaling {
            ScalingArg::Consistent => StiffnessScaling::Consistent,
            ScalingArg::Literal => StiffnessScaling::Literal,
        },
    }
}

#[derive(Debug, Args)]
pub struct SolveCmd {
    #[command(flatten)]
    pub gen: GeneratorArgs,

    /// Read the mesh from a file instead of generating it.
    #[arg(long, conflicts_with_all = ["family", "n"])]
    pub mesh: Option<PathBuf>,

    /// Boundary: clamped, simply_supported, free, from_mesh or lshape_default.
    /// Defaults to from_mesh with --mesh and clamped otherwise.
    #[arg(long)]
    pub boundary: Option<BoundaryAssignment>,

    /// Per-edge rule file (overrides --boundary).
    #[arg(long)]
    pub rules_file: Option<PathBuf>,

    /// Number of eigenvalues.
    #[arg(short = 'k', long, default_value_t = 4)]
    pub eigenvalues: usize,

    /// Solver: dense, shift_invert or auto.
    #[arg(long, default_value = "auto")]
    pub solver: SolverMode,

    #[command(flatten)]
    pub stabilization: StabilizationArgs,

    /// Also print ω = √λ.
    #[arg(long)]
    pub omega: bool,

    /// Write the first M eigenfunctions as VTK files.
    #[arg(long, default_value_t = 0)]
    pub export_modes: usize,

    /// Write K and M in symmetric coordinate format.
    #[arg(long)]
    pub export_coo: bool,

    /// Write every cell's local matrices as text.
    #[arg(long)]
    pub dump_element_matrices: bool,

    /// Exit with status 3 when a cell fails the quality checks.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct StudyCmd {
    /// Study config file with [[study]] tables.
    pub config: Option<PathBuf>,

    /// Run only the named studies from the config.
    #[arg(long, value_delimiter = ',', requires = "config")]
    pub only: Vec<String>,

    /// Use refinement levels 32, 64, 128 (slow).
    #[arg(long)]
    pub paper_scale: bool,

    /// Add ω = √λ columns to the tables.
    #[arg(long)]
    pub omega: bool,

    /// Study name when no config is given.
    #[arg(long, default_value = "study", conflicts_with = "config")]
    pub name: String,

    /// Mesh family: rect, hex, hex3, trap, tri (or t1..t4).
    #[arg(long, conflicts_with = "config")]
    pub family: Option<MeshFamily>,

    /// Plate domain: unit_square or lshape.
    #[arg(long, default_value = "unit_square", conflicts_with = "config")]
    pub domain: Domain,

    /// Refinement levels, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    pub levels: Vec<usize>,

    /// Boundary: clamped, simply_supported, free or lshape_default.
    #[arg(long, conflicts_with = "config")]
    pub boundary: Option<BoundaryAssignment>,

    /// Per-edge rule file (overrides --boundary).
    #[arg(long, conflicts_with = "config")]
    pub rules_file: Option<PathBuf>,

    /// Number of eigenvalues.
    #[arg(short = 'k', long, default_value_t = 4, conflicts_with = "config")]
    pub eigenvalues: usize,

    /// Solver: dense, shift_invert or auto.
    #[arg(long, default_value = "auto", conflicts_with = "config")]
    pub solver: SolverMode,

    /// Seed for the randomized families.
    #[arg(long, default_value_t = 0, conflicts_with = "config")]
    pub seed: u64,

    /// Reference eigenvalues, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    pub reference: Vec<f64>,

    /// Write the first M eigenfunctions of every level as VTK files.
    #[arg(long, conflicts_with = "config")]
    pub export_modes: Option<usize>,

    /// Rule for the stabilization constant.
    #[arg(long, value_enum, default_value = "trace", conflicts_with = "config")]
    pub sigma_rule: SigmaArg,

    /// Scaling of the stiffness stabilization weights.
    #[arg(long, value_enum, default_value = "consistent", conflicts_with = "config")]
    pub stiffness_scaling: ScalingArg,
}

#[derive(Debug, Args)]
pub struct CheckCmd {
    /// Study config file to parse and validate.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Per-edge rule file to parse.
    #[arg(long)]
    pub rules_file: Option<PathBuf>,

    /// Mesh file to read and check.
    #[arg(long, conflicts_with_all = ["family", "n"])]
    pub mesh: Option<PathBuf>,

    #[command(flatten)]
    pub gen: GeneratorArgs,

    /// Shape-regularity constant for the edge and star-shapedness checks.
    #[arg(long, default_value_t = plate_vem::analysis::QUALITY_CONSTANT)]
    pub c_t: f64,

    /// Exit with status 3 when a cell fails the quality checks.
    #[arg(long)]
    pub strict: bool,
}

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<VemError> for Failure {
    fn from(e: VemError) -> Self {
        let code = match e.root() {
            VemError::NoConvergence { .. } | VemError::MassNotPositiveDefinite => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let ctx = commands::Context {
        out_dir: cli.out_dir,
        run_name: cli.run_name,
        threads: cli.threads,
    };
    let result = match &cli.command {
        Command::Mesh(args) => commands::mesh(&ctx, args),
        Command::Solve(args) => commands::solve(&ctx, args),
        Command::Study(args) => commands::study(&ctx, args),
        Command::Check(args) => commands::check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
