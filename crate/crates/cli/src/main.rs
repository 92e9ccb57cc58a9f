use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nodal_core::error::Error;
use nodal_core::harness::{replay, run, Experiment, RunConfig};
use nodal_core::lattice::Boundary;

#[derive(Parser)]
#[command(
    name = "nodal",
    version,
    about = "Monte Carlo nodal-domain counts for random spherical harmonics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Loop-count constant per degree, dispersion and tails.
    Estimate(RunArgs),
    /// Tail table and log-linear fits (same records as `estimate`).
    Tails(RunArgs),
    /// Planar random-wave density.
    Rwm(RunArgs),
    /// Crossing-lattice loop density.
    Bs(RunArgs),
    /// Barrier constant and barrier event rate.
    Barrier(RunArgs),
    /// Unstable-disk census.
    Stability(RunArgs),
    /// Conditioned near-zonal trials.
    Sharpness(RunArgs),
    /// Integral-geometry sandwich.
    IgCheck(RunArgs),
    /// Re-run every record of a trial file and compare.
    Replay { trial_file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Free,
    Periodic,
}

#[derive(Args)]
struct RunArgs {
    /// Degrees, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    oversample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for records and summaries.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    barrier_rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Stability disk radius in units of 1/n.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Plane waves per field.
    #[arg(long)]
    waves: Option<usize>,
    #[arg(long)]
    plane_radius: Option<f64>,
    #[arg(long)]
    plane_margin: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    lattice_side: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, value_delimiter = ',')]
    ig_scales: Option<Vec<f64>>,
    #[arg(long)]
    ig_centers: Option<usize>,
    #[arg(long)]
    calibration_trials: Option<usize>,
    #[arg(long)]
    diameters: bool,
}

impl RunArgs {
    fn config(self, experiment: Experiment) -> RunConfig {
        let mut c = RunConfig::new(experiment);
        if let Some(d) = self.degrees {
            c.degrees = d;
        }
        c.trials = self.trials.unwrap_or(c.trials);
        c.oversample = self.oversample.unwrap_or(c.oversample);
        c.seed = self.seed.unwrap_or(c.seed);
        c.workers = self.workers;
        c.out = self.out;
        let p = &mut c.params;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(
            rho,
            barrier_rho,
            alpha,
            beta,
            radius,
            delta,
            waves,
            plane_radius,
            plane_margin,
            spacing,
            lattice_side
        );
        set!(ig_scales, ig_centers, calibration_trials);
        if let Some(e) = self.eps {
            p.eps_grid = e;
        }
        if let Some(b) = self.boundary {
            p.boundary = match b {
                BoundaryArg::Free => Boundary::Free,
                BoundaryArg::Periodic => Boundary::Periodic,
            };
        }
        p.diameters |= self.diameters;
        c
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_io() => 3,
        Error::InvalidParameter(_)
        | Error::InsufficientSamples { .. }
        | Error::DegreeOverflow { .. }
        | Error::Domain { .. }
        | Error::CellBudget { .. }
        | Error::DegreeMismatch { .. }
        | Error::Json(_)
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay { trial_file } => {
            replay(&trial_file).and_then(|r| Ok(serde_json::to_string_pretty(&r)?))
        }
        cmd => {
            let (experiment, args) = match cmd {
                Command::Estimate(a) => (Experiment::Estimate, a),
                Command::Tails(a) => (Experiment::Tails, a),
                Command::Rwm(a) => (Experiment::Rwm, a),
                Command::Bs(a) => (Experiment::Bs, a),
                Command::Barrier(a) => (Experiment::Barrier, a),
                Command::Stability(a) => (Experiment::Stability, a),
                Command::Sharpness(a) => (Experiment::Sharpness, a),
                Command::IgCheck(a) => (Experiment::IgCheck, a),
                Command::Replay { .. } => unreachable!(),
            };
            run(&args.config(experiment))
        }
    };
    match result {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
