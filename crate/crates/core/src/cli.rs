//! Command-line front end.
//!
//! Every command reads a problem file, writes one CSV (to `--output` or
//! standard output) and prints a short summary on standard error.
//! Exit status: 0 on success, 1 for usage and schema errors, 2 when the
//! numerics fail.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::Vector2;

use crate::config::{parse_config, ConfigError, ProblemConfig};
use crate::degree::{
    attainable_set, degree_sweep, normal_ray_solutions, uniform_deviation, winding_number,
    DegreeError,
};
use crate::export;
use crate::integrator::{integrate_cauchy, Problem};
use crate::shooting::{enumerate_solutions, shoot, solve_in_range, ShootingError, ShotResult};

/// Environment variable capping the worker pool; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "BILLIARD_BVP_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const DEFAULT_SHOOT_GRID: usize = 200;
const DEFAULT_SOLVE_GRID: usize = 2000;
const DEFAULT_MAX_COUNT: usize = 5;
const DEFAULT_SHELL_SAMPLES: usize = 64;
const DEFAULT_DEVIATION_DIRS: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "billiard-bvp",
    version,
    about = "Dirichlet problems in billiard tables"
)]
pub struct Cli {
    /// Problem file (TOML).
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory from the origin.
    Simulate {
        /// Initial velocity, comma-separated components.
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            required = true
        )]
        v: Vec<f64>,
        /// Also write the impact list to this file.
        #[arg(long)]
        impacts: Option<PathBuf>,
    },
    /// Sample the endpoint map on `grid + 1` equally spaced velocities.
    Shoot {
        #[arg(long, allow_negative_numbers = true)]
        v_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        v_max: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Find solutions: in `v-min <= |v| <= v-max` when both are given,
    /// otherwise the first `max-count` along the ray of `direction`.
    Solve {
        #[arg(long)]
        max_count: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        direction: Option<f64>,
        #[arg(long)]
        v_min: Option<f64>,
        #[arg(long)]
        v_max: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Endpoints of all shots with speed `d`.
    Attainable {
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Winding number of the attainable curve around the origin.
    Winding {
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Winding numbers over an increasing list of speeds.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        d_grid: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Straight solutions of the force-free problem.
    NormalRays,
    /// Distance of forced motion from uniform and force-free motion.
    Deviation {
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        dirs: Option<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Io(io::Error),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Config(err) => write!(f, "invalid problem file:\n{err}"),
            CliError::Io(err) => write!(f, "i/o error: {err}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Io(err)
    }
}

impl From<ShootingError> for CliError {
    fn from(err: ShootingError) -> Self {
        match err {
            ShootingError::NotOneDimensional(_) | ShootingError::BadRange(..) => {
                CliError::Usage(err.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<DegreeError> for CliError {
    fn from(err: DegreeError) -> Self {
        match err {
            DegreeError::NotTwoDimensional(_)
            | DegreeError::TooFewSamples(_)
            | DegreeError::BadSpeed(_)
            | DegreeError::NonZeroForce
            | DegreeError::NotABall
            | DegreeError::ZeroForce => CliError::Usage(err.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            EXIT_OK
        }
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`]. Has no effect once
/// the pool exists.
pub fn configure_threads() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Runs the parsed command; on success returns the summary line.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <FILE> is required".into()))?;
    let config = parse_config(path).map_err(CliError::Config)?;
    let (csv, summary) = run(&cli.command, &config)?;
    match &cli.output {
        Some(path) => File::create(path)?.write_all(&csv)?,
        None => io::stdout().lock().write_all(&csv)?,
    }
    Ok(summary)
}

fn pick<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (flag or problem file)")))
}

/// Runs `command` on `config`, returning the CSV bytes and a summary line.
pub fn run(command: &Command, config: &ProblemConfig) -> Result<(Vec<u8>, String), CliError> {
    let problem = config.problem();
    let defaults = &config.commands;
    let mut csv = Vec::new();
    let summary = match command {
        Command::Simulate { v, impacts } => simulate(&problem, v, impacts.as_ref(), &mut csv)?,
        Command::Shoot { v_min, v_max, grid } => {
            let lo = pick(*v_min, defaults.shoot_v_min, "v-min")?;
            let hi = pick(*v_max, defaults.shoot_v_max, "v-max")?;
            let grid = grid.or(defaults.shoot_grid).unwrap_or(DEFAULT_SHOOT_GRID);
            shoot_grid(&problem, lo, hi, grid, &mut csv)?
        }
        Command::Solve {
            max_count,
            direction,
            v_min,
            v_max,
            grid,
        } => {
            let range = (
                v_min.or(defaults.solve_v_min),
                v_max.or(defaults.solve_v_max),
            );
            let max_count = max_count.or(defaults.solve_max_count);
            let enumeration = match range {
                (Some(lo), Some(hi)) => {
                    let grid = grid.or(defaults.solve_grid).unwrap_or(DEFAULT_SOLVE_GRID);
                    let mut e = solve_in_range(&problem, lo, hi, grid, &config.solver)?;
                    if let Some(n) = max_count {
                        e.solutions.truncate(n);
                    }
                    e
                }
                (None, None) => {
                    let direction = direction.or(defaults.solve_direction).unwrap_or(-1.0);
                    let n = max_count.unwrap_or(DEFAULT_MAX_COUNT);
                    enumerate_solutions(&problem, direction, n, &config.solver)?
                }
                _ => {
                    return Err(CliError::Usage(
                        "give both --v-min and --v-max or neither".into(),
                    ))
                }
            };
            for line in &enumeration.diagnostics {
                eprintln!("note: {line}");
            }
            export::write_solutions(&mut csv, &enumeration.solutions)?;
            let lost = enumeration
                .diagnostics
                .iter()
                .any(|d| d.starts_with("bracket"));
            if enumeration.solutions.is_empty() && lost {
                return Err(CliError::Numerical("every bracket was lost".into()));
            }
            format!("{} solution(s)", enumeration.solutions.len())
        }
        Command::Attainable { d, samples } => {
            let d = pick(*d, defaults.attainable_d, "d")?;
            let n = samples
                .or(defaults.attainable_samples)
                .unwrap_or(DEFAULT_SHELL_SAMPLES);
            let set = attainable_set(&problem, d, n)?;
            export::write_attainable(&mut csv, &set)?;
            let done = set.iter().filter(|s| s.status.is_completed()).count();
            format!("{done}/{} shots completed", set.len())
        }
        Command::Winding { d, samples } => {
            let d = pick(*d, defaults.winding_d, "d")?;
            let n = samples
                .or(defaults.winding_samples)
                .unwrap_or(DEFAULT_SHELL_SAMPLES);
            let w = winding_number(&problem, &attainable_set(&problem, d, n)?)?;
            export::write_winding(&mut csv, &w)?;
            format!("winding {} at d = {d}", w.winding)
        }
        Command::Sweep { d_grid, samples } => {
            let grid = pick(d_grid.clone(), defaults.sweep_d_grid.clone(), "d-grid")?;
            let n = samples
                .or(defaults.sweep_samples)
                .unwrap_or(DEFAULT_SHELL_SAMPLES);
            let entries = degree_sweep(&problem, &grid, n)?;
            export::write_sweep(&mut csv, &entries)?;
            let flagged = entries.iter().filter(|e| !e.flags.is_empty()).count();
            format!("{} speed(s), {flagged} flagged", entries.len())
        }
        Command::NormalRays => {
            let rays = normal_ray_solutions(&problem)?;
            for (theta, why) in &rays.rejected {
                eprintln!("note: candidate at theta = {theta} rejected: {why}");
            }
            export::write_normal_rays(&mut csv, &rays.solutions)?;
            if rays.continuum {
                "every direction is a solution; one representative written".to_string()
            } else {
                format!("{} solution(s)", rays.solutions.len())
            }
        }
        Command::Deviation { d, dirs } => {
            let d = pick(*d, defaults.deviation_d, "d")?;
            let n = dirs
                .or(defaults.deviation_dirs)
                .unwrap_or(DEFAULT_DEVIATION_DIRS);
            let report = uniform_deviation(&problem, d, n)?;
            export::write_deviation(&mut csv, &report)?;
            format!(
                "max deviation {} before first impact, {} over the horizon",
                export::num(report.max_until_first_impact),
                export::num(report.max_full_horizon)
            )
        }
    };
    Ok((csv, summary))
}

fn simulate(
    problem: &Problem,
    v: &[f64],
    impacts: Option<&PathBuf>,
    csv: &mut Vec<u8>,
) -> Result<String, CliError> {
    if v.len() != problem.dim() {
        return Err(CliError::Usage(format!(
            "--v needs {} component(s), got {}",
            problem.dim(),
            v.len()
        )));
    }
    let v = Vector2::new(v[0], v.get(1).copied().unwrap_or(0.0));
    let traj = integrate_cauchy(problem, Vector2::zeros(), v)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    export::write_trajectory(csv, &traj)?;
    if let Some(path) = impacts {
        let mut file = File::create(path)?;
        export::write_impacts(&mut file, &traj)?;
    }
    if let Some(err) = traj.status.into_error() {
        return Err(CliError::Numerical(err.to_string()));
    }
    let x = traj.end_position();
    Ok(format!(
        "{} impact(s), x(T) = ({}, {})",
        traj.impacts.len(),
        export::num(x.x),
        export::num(x.y)
    ))
}

fn shoot_grid(
    problem: &Problem,
    lo: f64,
    hi: f64,
    grid: usize,
    csv: &mut Vec<u8>,
) -> Result<String, CliError> {
    if problem.dim() != 1 {
        return Err(ShootingError::NotOneDimensional(problem.dim()).into());
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi || grid == 0 {
        return Err(ShootingError::BadRange(lo, hi).into());
    }
    use rayon::prelude::*;
    let shots: Vec<ShotResult> = (0..=grid)
        .into_par_iter()
        .map(|k| {
            let v = if k == grid {
                hi
            } else {
                lo + (hi - lo) * k as f64 / grid as f64
            };
            shoot(problem, v)
        })
        .collect();
    export::write_shots(csv, &shots)?;
    let failed = shots.iter().filter(|s| !s.completed()).count();
    Ok(format!("{} shot(s), {failed} failed", shots.len()))
}
