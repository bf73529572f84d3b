//! Command-line flags, the optional TOML config file and their merge into a
//! single `RunConfig`. Precedence is flags, then config file, then defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecap::{MveConfig, SubsetBudget, Tolerances};
use serde::Deserialize;

use crate::error::CliError;

const PRECEDENCE: &str = "\
Settings are resolved as: command-line flags, then the --config TOML file, then built-in defaults.

Exit codes: 0 success or condition holds, 1 analysis completed but the condition is violated \
(or a selftest check failed), 2 operational error.";

#[derive(Debug, Parser)]
#[command(name = "phasecap", version, about = "Robust covariance ellipsoids, symplectic capacities and uncertainty criteria", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate the minimum volume ellipsoid of a cloud.
    Estimate,
    /// Evaluate the uncertainty criteria for a cloud or a given covariance.
    Analyze,
    /// Propagate a cloud under a quadratic Hamiltonian and track the criteria.
    Flow,
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Point cloud, CSV with columns x1..xn,p1..pn or JSON {"n", "points"}.
    #[arg(long, global = true, value_name = "PATH")]
    pub cloud: Option<PathBuf>,
    /// Symplectic form, JSON {"n", "A", "B", "C"}. Defaults to the standard form.
    #[arg(long, global = true, value_name = "PATH")]
    pub omega: Option<PathBuf>,
    /// Covariance given directly, JSON {"sigma", "m0"?, "center"?}.
    #[arg(long = "sigma-json", global = true, value_name = "PATH")]
    pub sigma_json: Option<PathBuf>,
    /// Coverage count of the estimator.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Chi-square calibration level.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Number of random subsets, or "exhaustive".
    #[arg(long, global = true, value_name = "INT|exhaustive")]
    pub subsets: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated time points for `flow`.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub times: Option<String>,
    /// harmonic-oscillator, free-particle or coupled-oscillators.
    #[arg(long, global = true, value_name = "NAME")]
    pub hamiltonian: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long = "psd-tol", global = true)]
    pub psd_tol: Option<f64>,
    #[arg(long = "eig-tol", global = true)]
    pub eig_tol: Option<f64>,
    #[arg(long = "quantile-tol", global = true)]
    pub quantile_tol: Option<f64>,
    /// TOML file with any of the settings above (snake_case keys).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Raise log verbosity on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SubsetsValue {
    Count(usize),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    cloud: Option<PathBuf>,
    omega: Option<PathBuf>,
    sigma_json: Option<PathBuf>,
    k: Option<usize>,
    alpha: Option<f64>,
    subsets: Option<SubsetsValue>,
    seed: Option<u64>,
    times: Option<Vec<f64>>,
    hamiltonian: Option<String>,
    output: Option<OutputFormat>,
    out: Option<PathBuf>,
    psd_tol: Option<f64>,
    eig_tol: Option<f64>,
    quantile_tol: Option<f64>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub cloud_path: Option<PathBuf>,
    pub omega_path: Option<PathBuf>,
    pub sigma_json: Option<PathBuf>,
    pub mve: MveConfig,
    /// True when the subset budget was set explicitly.
    pub subsets_given: bool,
    pub tol: Tolerances,
    pub times: Option<Vec<f64>>,
    pub hamiltonian: Option<String>,
    pub output: OutputFormat,
    pub out_path: Option<PathBuf>,
}

fn parse_subsets(s: &str) -> Result<SubsetBudget, CliError> {
    if s.eq_ignore_ascii_case("exhaustive") {
        return Ok(SubsetBudget::Exhaustive);
    }
    s.trim()
        .parse::<usize>()
        .map(SubsetBudget::Resample)
        .map_err(|_| CliError::Usage(format!("--subsets expects an integer or \"exhaustive\", got '{s}'")))
}

fn parse_times(s: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--times: cannot parse '{}' as a number", t.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let o = cli.opts;
        let file = match &o.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let subsets = match (o.subsets.as_deref(), file.subsets) {
            (Some(s), _) => Some(parse_subsets(s)?),
            (None, Some(SubsetsValue::Count(c))) => Some(SubsetBudget::Resample(c)),
            (None, Some(SubsetsValue::Word(w))) => Some(parse_subsets(&w)?),
            (None, None) => None,
        };
        let times = match o.times.as_deref() {
            Some(s) => Some(parse_times(s)?),
            None => file.times,
        };

        let defaults = MveConfig::default();
        let mve = MveConfig {
            k: o.k.or(file.k),
            m_alpha: o.alpha.or(file.alpha),
            subsets: subsets.unwrap_or(defaults.subsets),
            seed: o.seed.or(file.seed).unwrap_or(defaults.seed),
        };
        let dt = Tolerances::default();
        let tol = Tolerances {
            psd_tol: o.psd_tol.or(file.psd_tol).unwrap_or(dt.psd_tol),
            eig_tol: o.eig_tol.or(file.eig_tol).unwrap_or(dt.eig_tol),
            quantile_tol: o.quantile_tol.or(file.quantile_tol).unwrap_or(dt.quantile_tol),
        };
        tol.validate()?;

        Ok(Self {
            command: cli.command,
            cloud_path: o.cloud.or(file.cloud),
            omega_path: o.omega.or(file.omega),
            sigma_json: o.sigma_json.or(file.sigma_json),
            mve,
            subsets_given: subsets.is_some(),
            tol,
            times,
            hamiltonian: o.hamiltonian.or(file.hamiltonian),
            output: o.output.or(file.output).unwrap_or(OutputFormat::Json),
            out_path: o.out.or(file.out),
        })
    }
}
