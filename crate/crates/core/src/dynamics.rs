//! Linear Hamiltonian flows. A quadratic Hamiltonian `H(z) = ½ zᵀHz` generates
//! `ż = JHz`, whose time-`t` map `S_t = exp(tJH)` is a linear symplectomorphism.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mve::{cov_matrix, mve_estimate, MveConfig, SubsetBudget};
use crate::numerics::{SymMatrix, Tolerances};
use crate::phase_space::{standard_j, PointCloud, SymplecticFormSpec};
use crate::uncertainty::analyze;

/// Canned systems selectable by name.
pub const CANNED_HAMILTONIANS: [&str; 3] = ["harmonic-oscillator", "free-particle", "coupled-oscillators"];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    pub h: SymMatrix,
    pub label: Option<String>,
}

impl QuadraticHamiltonian {
    pub fn new(h: SymMatrix) -> Result<Self> {
        if h.dim() % 2 != 0 {
            return Err(Error::invalid("Hamiltonian matrix must have even size"));
        }
        Ok(Self { h, label: None })
    }

    pub fn n(&self) -> usize {
        self.h.dim() / 2
    }

    /// `H = I`: independent unit-frequency oscillators.
    pub fn harmonic_oscillator(n: usize) -> Self {
        Self { h: SymMatrix::identity(2 * n), label: Some("harmonic-oscillator".into()) }
    }

    /// `H = diag(0, I)`: `ẋ = p`, `ṗ = 0`.
    pub fn free_particle(n: usize) -> Self {
        let diag: Vec<f64> = (0..2 * n).map(|i| if i < n { 0.0 } else { 1.0 }).collect();
        Self {
            h: SymMatrix::from_diagonal(&diag).expect("finite diagonal"),
            label: Some("free-particle".into()),
        }
    }

    /// Unit masses on a chain with unit springs and fixed ends:
    /// potential block `K = tridiag(−1, 2, −1)`.
    pub fn coupled_oscillators(n: usize) -> Self {
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            h[(i, i)] = 2.0;
            if i + 1 < n {
                h[(i, i + 1)] = -1.0;
                h[(i + 1, i)] = -1.0;
            }
            h[(n + i, n + i)] = 1.0;
        }
        Self {
            h: SymMatrix::new(h).expect("finite matrix"),
            label: Some("coupled-oscillators".into()),
        }
    }

    pub fn by_name(name: &str, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("degrees of freedom must be positive"));
        }
        match name {
            "harmonic-oscillator" | "oscillator" => Ok(Self::harmonic_oscillator(n)),
            "free-particle" | "shear" => Ok(Self::free_particle(n)),
            "coupled-oscillators" => Ok(Self::coupled_oscillators(n)),
            other => Err(Error::invalid(format!(
                "unknown Hamiltonian '{other}'; expected one of {}",
                CANNED_HAMILTONIANS.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub s: DMatrix<f64>,
    pub t: f64,
}

impl FlowMap {
    /// `‖SᵀJS − J‖_max`.
    pub fn symplecticity_residual(&self) -> f64 {
        let j = standard_j(self.s.nrows() / 2);
        (self.s.transpose() * &j * &self.s - j).amax()
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a truncated Taylor
/// series. The argument is scaled to 1-norm ≤ ½ and the series runs until the
/// next term is below `1e-17` of the partial sum.
pub(crate) fn expm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = a.nrows();
    let norm = norm1(a);
    if !norm.is_finite() {
        return None;
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    if squarings > 1000 {
        return None;
    }
    let b = a / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for i in 1..=40 {
        term = &term * &b / i as f64;
        sum += &term;
        if norm1(&term) <= 1e-17 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
        if sum.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(sum)
}

/// `S_t = exp(t·J·H)`.
pub fn flow_map(h: &QuadraticHamiltonian, t: f64) -> Result<FlowMap> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite, got {t}")));
    }
    let generator = standard_j(h.n()) * h.h.as_matrix() * t;
    let s = expm(&generator).ok_or(Error::FlowOverflow { t })?;
    Ok(FlowMap { s, t })
}

/// Applies `z ↦ S_t z` to every point.
pub fn propagate(cloud: &PointCloud, map: &FlowMap) -> Result<PointCloud> {
    cloud.map_affine(&map.s, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub t: f64,
    pub capacity: f64,
    pub psd_ok: bool,
    pub capacity_ok: bool,
    /// Calibrated covariance of the propagated cloud.
    pub sigma: SymMatrix,
}

/// Propagates the cloud to each time, re-estimates the MVE and evaluates the
/// criteria. Requires the exhaustive estimator so that estimation commutes
/// exactly with the flow.
pub fn invariance_experiment(
    cloud: &PointCloud,
    h: &QuadraticHamiltonian,
    times: &[f64],
    spec: &SymplecticFormSpec,
    config: &MveConfig,
    tol: &Tolerances,
) -> Result<Vec<ExperimentRow>> {
    if times.is_empty() {
        return Err(Error::invalid("no time points given"));
    }
    if config.subsets != SubsetBudget::Exhaustive {
        return Err(Error::invalid("invariance experiments need the exhaustive estimator"));
    }
    if h.n() != cloud.n() || spec.n() != cloud.n() {
        return Err(Error::invalid("cloud, Hamiltonian and form must share n"));
    }
    times
        .iter()
        .map(|&t| {
            let map = flow_map(h, t)?;
            let moved = propagate(cloud, &map)?;
            let est = mve_estimate(&moved, config)?;
            let report = analyze(&est, spec, tol)?;
            Ok(ExperimentRow {
                t,
                capacity: report.capacity.value,
                psd_ok: report.psd_ok,
                capacity_ok: report.capacity.ok,
                sigma: cov_matrix(&est).0,
            })
        })
        .collect()
}
