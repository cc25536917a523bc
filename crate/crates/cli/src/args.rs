use std::path::{Path, PathBuf};

use cglwaves::params::{DomainKind, ProblemParams};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Environment variable overriding the default number of grid points.
pub const GRID_ENV: &str = "CGLWAVES_DEFAULT_GRID";
pub const DEFAULT_GRID: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "cglwaves", version, about = "Ground states, spectra, continuation and time evolution of radial CGL standing waves")]
pub struct Cli {
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// JSON object of flag values; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the positive radial ground state U.
    Ground(GroundArgs),
    /// Spectra of K and L+, kernel diagnostics and identity residuals for a ground state.
    Spectrum(SpectrumArgs),
    /// Follow the standing-wave branch from gamma = theta.
    Continue(ContinueArgs),
    /// Evolve a field or a path point in time.
    #[command(alias = "verify")]
    Evolve(EvolveArgs),
    /// Render a path, trajectory or field file to SVG.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ground(_) => "ground",
            Command::Spectrum(_) => "spectrum",
            Command::Continue(_) => "continue",
            Command::Evolve(_) => "evolve",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemArgs {
    /// `whole` or `ball`.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Number of grid points M.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Outer radius (whole space only).
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Permit alpha < 1.
    #[arg(long)]
    pub allow_small_alpha: bool,
}

impl ProblemArgs {
    pub fn params(&self, theta: f64) -> CliResult<ProblemParams> {
        let domain: DomainKind = self.domain.as_deref().unwrap_or("whole").parse()?;
        let p = ProblemParams {
            domain,
            dim: self.dim.unwrap_or(1),
            alpha: self.alpha.unwrap_or(2.0),
            rho: self.rho.unwrap_or(1.0),
            theta,
            allow_small_alpha: self.allow_small_alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn points(&self) -> CliResult<usize> {
        if let Some(m) = self.grid {
            return Ok(m);
        }
        match std::env::var(GRID_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{GRID_ENV}={v} is not a grid size"))),
            Err(_) => Ok(DEFAULT_GRID),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Output field file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solve for each of these rho values instead, writing `<out>_rho<value>.csv`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sweep_rho: Option<Vec<f64>>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumArgs {
    /// Ground-state field file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of eigenvalues per operator.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also measure the differential identities on a ladder of grids.
    #[arg(long)]
    pub check_identities: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinueArgs {
    /// Ground-state field file; without it U is solved from the problem flags.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_to: Option<f64>,
    /// Initial step in gamma.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every point as `<out stem>_NNNN.csv`.
    #[arg(long)]
    pub dump_fields: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveArgs {
    /// Path point `STEM:K` (reads `STEM_000K.csv`) or a field file written by `continue`.
    #[arg(long)]
    pub point: Option<String>,
    /// Initial field file, used with `--gamma`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Run the defocusing equation (nonlinear phase gamma + pi).
    #[arg(long)]
    pub defocus: bool,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Final field file.
    #[arg(long)]
    pub final_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotArgs {
    /// `path.csv`, `traj.csv` or a field file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn read_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
        Err(source) => Err(CliError::Json {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Overlays the flags that were actually given on top of `config`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Map<String, Value>>) -> CliResult<T> {
    let Value::Object(given) = serde_json::to_value(flags).expect("argument structs serialize") else {
        unreachable!("argument structs serialize to objects");
    };
    let mut merged = Map::new();
    if let Some(config) = config {
        for (k, v) in config {
            if !given.contains_key(k) {
                return Err(CliError::Usage(format!("unknown config key `{k}`")));
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    for (k, v) in given {
        if !(v.is_null() || v == Value::Bool(false)) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn to_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("argument structs serialize")
}
