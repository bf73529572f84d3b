//! The `estimate`, `analyze` and `flow` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use phasecap::{
    analyze, coverage_count, invariance_experiment, load_cloud, mve_estimate, EllipsoidEstimate,
    PhaseVector, PointCloud, QuadraticHamiltonian, SubsetBudget, SymMatrix, SymplecticFormSpec, UncertaintyReport,
};
use serde::Deserialize;

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

/// Completed, condition holds.
pub const EXIT_OK: i32 = 0;
/// Completed, condition violated.
pub const EXIT_VIOLATED: i32 = 1;
/// Operational failure.
pub const EXIT_ERROR: i32 = 2;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OmegaFile {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaFile {
    sigma: Vec<Vec<f64>>,
    m0: Option<f64>,
    center: Option<Vec<f64>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

fn load_omega(cfg: &RunConfig, n: usize) -> Result<SymplecticFormSpec, CliError> {
    let Some(path) = &cfg.omega_path else {
        return Ok(SymplecticFormSpec::standard(n)?);
    };
    let file: OmegaFile = read_json(path)?;
    let spec = SymplecticFormSpec::from_block_rows(&file.a, &file.b, &file.c)?;
    if spec.n() != file.n {
        return Err(CliError::Usage(format!("{}: \"n\" is {} but the blocks are {}x{}", path.display(), file.n, spec.n(), spec.n())));
    }
    if spec.n() != n {
        return Err(CliError::Usage(format!("form has n = {} but the data has n = {n}", spec.n())));
    }
    Ok(spec)
}

fn load_sigma(path: &Path) -> Result<EllipsoidEstimate, CliError> {
    let file: SigmaFile = read_json(path)?;
    let sigma = SymMatrix::from_rows(&file.sigma)?;
    if sigma.dim() == 0 || sigma.dim() % 2 != 0 {
        return Err(CliError::Usage(format!("{}: Σ must have positive even size", path.display())));
    }
    let n = sigma.dim() / 2;
    let center = PhaseVector::new(n, file.center.unwrap_or_else(|| vec![0.0; 2 * n]))?;
    Ok(EllipsoidEstimate::from_covariance(center, sigma, file.m0.unwrap_or(1.0))?)
}

fn require_cloud(cfg: &RunConfig) -> Result<PointCloud, CliError> {
    let path = cfg.cloud_path.as_ref().ok_or_else(|| CliError::Usage("--cloud is required".into()))?;
    if !path.exists() {
        return Err(CliError::Io { path: path.display().to_string(), message: "file not found".into() });
    }
    Ok(load_cloud(path)?)
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out_path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn row_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{:>13}", sig6(*x))).collect::<Vec<_>>().join(" ")
}

fn matrix_text(out: &mut String, label: &str, m: &SymMatrix) {
    for (i, row) in m.to_rows().iter().enumerate() {
        let head = if i == 0 { label } else { "" };
        let _ = writeln!(out, "{head:<14}{}", row_text(row));
    }
}

fn estimate_table(est: &EllipsoidEstimate, coverage: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14}{}", "center", row_text(est.center.coords()));
    matrix_text(&mut out, "sigma", &est.sigma);
    let _ = writeln!(out, "{:<14}{}", "m0", sig6(est.m0));
    let _ = writeln!(out, "{:<14}{}", "raw_m2", sig6(est.raw_m2));
    let subset: Vec<String> = est.subset.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(out, "{:<14}{}", "subset", subset.join(" "));
    let _ = writeln!(out, "{:<14}{}", "volume_proxy", sig6(est.volume_proxy));
    let _ = writeln!(out, "{:<14}{coverage}", "coverage");
    out
}

fn report_table(r: &UncertaintyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14}{}", "n", r.n());
    matrix_text(&mut out, "sigma", &r.sigma);
    let _ = writeln!(out, "{:<14}{}", "min_eig", sig6(r.min_eig));
    let _ = writeln!(out, "{:<14}{}", "psd_ok", r.psd_ok);
    let _ = writeln!(
        out,
        "{:<14}{} (threshold {}, ok {})",
        "capacity",
        sig6(r.capacity.value),
        sig6(r.capacity.threshold),
        r.capacity.ok
    );
    let _ = writeln!(out, "{:<14}{}", "spectrum", row_text(&r.spectrum));
    let _ = writeln!(out, "{:<6}{:>3}{:>3}{:>14}{:>14}{:>14}  holds", "pair", "j", "k", "lhs", "rhs", "slack");
    for p in &r.pairs {
        let kind = serde_json::to_value(p.kind).expect("pair kind serializes");
        let _ = writeln!(
            out,
            "{:<6}{:>3}{:>3}{:>14}{:>14}{:>14}  {}",
            kind.as_str().unwrap_or_default(),
            p.j,
            p.k,
            sig6(p.lhs),
            sig6(p.rhs),
            sig6(p.slack),
            p.holds
        );
    }
    out
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<i32, CliError> {
    let cloud = require_cloud(cfg)?;
    log::info!("estimating from {} points, n = {}", cloud.len(), cloud.n());
    let est = mve_estimate(&cloud, &cfg.mve)?;
    let text = match cfg.output {
        OutputFormat::Json => to_json(&est),
        OutputFormat::Table => estimate_table(&est, coverage_count(&cloud, &est)),
    };
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<i32, CliError> {
    let est = match (&cfg.sigma_json, &cfg.cloud_path) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --cloud or --sigma-json, not both".into())),
        (Some(path), None) => load_sigma(path)?,
        (None, _) => {
            let cloud = require_cloud(cfg)?;
            mve_estimate(&cloud, &cfg.mve)?
        }
    };
    let spec = load_omega(cfg, est.n())?;
    let report = analyze(&est, &spec, &cfg.tol)?;
    log::info!("min_eig {:e}, psd_ok {}", report.min_eig, report.psd_ok);
    let text = match cfg.output {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Table => report_table(&report),
    };
    emit(cfg, &text)?;
    Ok(if report.psd_ok { EXIT_OK } else { EXIT_VIOLATED })
}

pub fn cmd_flow(cfg: &RunConfig) -> Result<i32, CliError> {
    let times = cfg.times.as_ref().ok_or_else(|| CliError::Usage("--times is required".into()))?;
    if times.is_empty() {
        return Err(CliError::Usage("--times is empty".into()));
    }
    let name = cfg.hamiltonian.as_ref().ok_or_else(|| CliError::Usage("--hamiltonian is required".into()))?;
    let cloud = require_cloud(cfg)?;
    let h = QuadraticHamiltonian::by_name(name, cloud.n())?;
    let spec = load_omega(cfg, cloud.n())?;
    let mut mve = cfg.mve.clone();
    if !cfg.subsets_given {
        mve.subsets = SubsetBudget::Exhaustive;
    }
    let rows = invariance_experiment(&cloud, &h, times, &spec, &mve, &cfg.tol)?;

    let mut out = String::new();
    match cfg.output {
        OutputFormat::Json => {
            for row in &rows {
                out.push_str(&serde_json::to_string(row).expect("rows serialize"));
                out.push('\n');
            }
        }
        OutputFormat::Table => {
            let _ = writeln!(out, "{:>13} {:>13}  {:<7} capacity_ok", "t", "capacity", "psd_ok");
            for row in &rows {
                let _ = writeln!(
                    out,
                    "{:>13} {:>13}  {:<7} {}",
                    sig6(row.t),
                    sig6(row.capacity),
                    row.psd_ok,
                    row.capacity_ok
                );
            }
        }
    }
    emit(cfg, &out)?;
    Ok(EXIT_OK)
}
