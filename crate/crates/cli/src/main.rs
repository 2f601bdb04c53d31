//! `boomclimb`: limit surfaces, footstep and trajectory plans, grasp-site
//! perception and finger reachability from a TOML scenario.
//!
//! Exit codes: 0 ok, 2 bad input (schema, parse, missing file), 3 compute
//! failure, 4 no footstep path, 5 trajectory optimization did not converge
//! (best iterates are still written).

mod commands;
mod manifest;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use manifest::{record_file, FileRecord, Outputs, RunManifest};
use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Schema(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("no path: {0}")]
    NoPath(String),
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 3,
            CliError::NoPath(_) => 4,
            CliError::NotConverged(_) => 5,
        }
    }
}

#[derive(Parser)]
#[command(name = "boomclimb", version, about = "Grasp analysis and motion planning for a boom-propelled climbing robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scenario (schema_version = 1).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "BOOMCLIMB_OUT", default_value = "boomclimb-out")]
    out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Caps worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo pull-force limit surface and cross-sections.
    LimitSurface(Common),
    /// Footstep plan and per-phase trajectories.
    Plan(Common),
    /// Sphere candidates, contact-angle map and ranked grasp sites.
    Perceive {
        #[command(flatten)]
        common: Common,
        /// Point cloud (.ply or .csv); defaults to the scenario's.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Reachable-face areas for the five finger designs.
    Reach {
        #[command(flatten)]
        common: Common,
        /// Mesh (.obj or .stl); defaults to the scenario's.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_scenario(common: &Common) -> Result<(Scenario, Option<FileRecord>), CliError> {
    match &common.scenario {
        None => Ok((Scenario::empty(), None)),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            let scn = Scenario::load(path, &text)?;
            let mut rec = record_file(path)?;
            rec.path = absolute(path).display().to_string();
            Ok((scn, Some(rec)))
        }
    }
}

/// An input named on the command line, else in the scenario.
fn input_path(flag: &Option<PathBuf>, scn: &Scenario, from_scenario: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let p = match (flag, from_scenario) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => scn.resolve(p),
        (None, None) => return Err(CliError::Schema(format!("no {what} given (flag or scenario)"))),
    };
    if !p.is_file() {
        return Err(CliError::Schema(format!("{} does not exist", p.display())));
    }
    Ok(absolute(&p))
}

fn run(cmd: Command) -> Result<(), (CliError, Option<Outputs>)> {
    let started = Instant::now();
    let (name, common) = match &cmd {
        Command::LimitSurface(c) => ("limit-surface", c.clone()),
        Command::Plan(c) => ("plan", c.clone()),
        Command::Perceive { common, .. } => ("perceive", common.clone()),
        Command::Reach { common, .. } => ("reach", common.clone()),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err((CliError::Schema("--threads must be positive".into()), None));
        }
        // fails only if the pool was already built, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut out = Outputs::create(&common.out).map_err(|e| (e, None))?;

    let mut manifest = RunManifest {
        tool: "boomclimb".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        replay: vec![name.into()],
        scenario: None,
        inputs: Vec::new(),
        seed: 0,
        threads: rayon::current_num_threads(),
        wall_time_s: 0.0,
        exit_code: 0,
        error: None,
        outputs: Vec::new(),
    };

    let result = (|| -> Result<(), CliError> {
        let (scn, rec) = load_scenario(&common)?;
        let seed = common.seed.unwrap_or(scn.seed);
        manifest.seed = seed;
        if let Some(r) = &rec {
            manifest.replay.extend(["--scenario".into(), r.path.clone()]);
        }
        manifest.scenario = rec;
        manifest.replay.extend(["--seed".into(), seed.to_string()]);
        match &cmd {
            Command::LimitSurface(_) => commands::limit_surface(&scn, seed, &mut out),
            Command::Plan(_) => commands::plan(&scn, seed, &mut out),
            Command::Perceive { cloud, .. } => {
                let path = input_path(cloud, &scn, &scn.perception.cloud, "point cloud")?;
                manifest.inputs.push(record_file(&path)?);
                manifest.replay.extend(["--cloud".into(), path.display().to_string()]);
                commands::perceive(&scn, &path, seed, &mut out)
            }
            Command::Reach { mesh, .. } => {
                let path = input_path(mesh, &scn, &scn.reach.mesh, "mesh")?;
                manifest.inputs.push(record_file(&path)?);
                manifest.replay.extend(["--mesh".into(), path.display().to_string()]);
                commands::reach(&scn, &path, &mut out)
            }
        }
    })();

    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.outputs = out.files.clone();
    if let Err(e) = &result {
        manifest.exit_code = e.exit_code().into();
        manifest.error = Some(e.to_string());
    }
    let written = out.finish(&manifest);
    match (result, written) {
        (Err(e), _) => Err((e, Some(out))),
        (Ok(()), Err(e)) => Err((e, Some(out))),
        (Ok(()), Ok(())) => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, _)) => {
            eprintln!("boomclimb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
