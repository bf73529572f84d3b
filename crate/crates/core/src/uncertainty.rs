//! Uncertainty criteria on a covariance matrix `Σ` relative to a form `Ω`:
//! the Hermitian condition `Σ + iΩ ⪰ 0`, the pairwise inequalities it
//! implies, and the capacity bound on the covariance ellipsoid.
//!
//! The pairwise inequalities are necessary but not sufficient for
//! `Σ + iΩ ⪰ 0` once `n > 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mve::{cov_matrix, EllipsoidEstimate};
use crate::numerics::{psd_verdict, require_positive_definite, HermMatrix, SymMatrix, Tolerances};
use crate::phase_space::{PhaseVector, SymplecticFormSpec};
use crate::spectrum::{
    capacity, omega_spectrum_psd, pullback_shape, smallest_sigma_eigenvalue_psd, Ellipsoid, FormRef,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    /// `Δxⱼ² Δxₖ² ≥ Δ(xⱼ,xₖ)² + aⱼₖ²`
    Xx,
    /// `Δpⱼ² Δpₖ² ≥ Δ(pⱼ,pₖ)² + cⱼₖ²`
    Pp,
    /// `Δxⱼ² Δpₖ² ≥ Δ(xⱼ,pₖ)² + bⱼₖ²`
    Xp,
}

/// One pairwise inequality. `j` and `k` are 1-based degree-of-freedom indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInequality {
    pub kind: PairKind,
    pub j: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityCriterion {
    pub value: f64,
    pub threshold: f64,
    pub ok: bool,
}

fn check_dims(sigma: &SymMatrix, spec: &SymplecticFormSpec) -> Result<usize> {
    if sigma.dim() != 2 * spec.n() {
        return Err(Error::invalid(format!(
            "Σ is {}x{}, form has n = {}",
            sigma.dim(),
            sigma.dim(),
            spec.n()
        )));
    }
    Ok(spec.n())
}

/// `Σ + iΩ` as a Hermitian matrix.
pub fn sigma_plus_i_omega(sigma: &SymMatrix, spec: &SymplecticFormSpec) -> Result<HermMatrix> {
    check_dims(sigma, spec)?;
    HermMatrix::from_parts(sigma, spec.omega())
}

/// Smallest eigenvalue of `Σ + iΩ` and the PSD verdict.
pub fn hermitian_condition(sigma: &SymMatrix, spec: &SymplecticFormSpec, tol: &Tolerances) -> Result<(f64, bool)> {
    let h = sigma_plus_i_omega(sigma, spec)?;
    let v = psd_verdict(&h, tol)?;
    Ok((v.min_eig, v.psd))
}

/// All `n(n−1)/2` xx pairs, `n(n−1)/2` pp pairs and `n²` xp pairs.
pub fn pair_inequalities(sigma: &SymMatrix, spec: &SymplecticFormSpec, tol: &Tolerances) -> Result<Vec<PairInequality>> {
    let n = check_dims(sigma, spec)?;
    let make = |kind, j: usize, k: usize, row: usize, col: usize, entry: f64| {
        let lhs = sigma[(row, row)] * sigma[(col, col)];
        let cov = sigma[(row, col)];
        let rhs = cov * cov + entry * entry;
        let slack = lhs - rhs;
        PairInequality {
            kind,
            j: j + 1,
            k: k + 1,
            lhs,
            rhs,
            slack,
            holds: slack >= -tol.psd_tol * lhs.abs().max(1.0),
        }
    };
    let mut out = Vec::with_capacity(n * (2 * n - 1));
    for j in 0..n {
        for k in (j + 1)..n {
            out.push(make(PairKind::Xx, j, k, j, k, spec.a()[(j, k)]));
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            out.push(make(PairKind::Pp, j, k, n + j, n + k, spec.c()[(j, k)]));
        }
    }
    for j in 0..n {
        for k in 0..n {
            out.push(make(PairKind::Xp, j, k, j, n + k, spec.b()[(j, k)]));
        }
    }
    Ok(out)
}

/// Capacity of the covariance ellipsoid `(z − z̄)ᵀ Σ⁻¹ (z − z̄) ≤ m₀²` under `ω`
/// compared with `π m₀²`.
///
/// With `Ω = FᵀJF` the capacity equals `π m₀² λ_{σ,n}(F⁻ᵀ Σ F⁻¹)`, and
/// `Σ + iΩ ⪰ 0` holds exactly when `λ_{σ,n}(F⁻ᵀ Σ F⁻¹) ≥ 1`, so `π m₀²` is
/// the threshold that makes the bound equivalent to the Hermitian condition.
pub fn capacity_criterion(est: &EllipsoidEstimate, spec: &SymplecticFormSpec, tol: &Tolerances) -> Result<CapacityCriterion> {
    let (sigma, m0) = cov_matrix(est);
    check_dims(&sigma, spec)?;
    let m0_sq = m0 * m0;
    let value = if require_positive_definite(&sigma).is_ok() {
        let ellipsoid = Ellipsoid::new(est.center.clone(), sigma.clone(), m0_sq)?;
        capacity(&ellipsoid, FormRef::General(spec))?
    } else {
        // flat ellipsoid: limit of the capacities of its thickenings
        PI * m0_sq * smallest_sigma_eigenvalue_psd(&pullback_shape(&sigma, spec)?)?
    };
    let threshold = PI * m0_sq;
    if log::log_enabled!(log::Level::Debug) {
        let largest = omega_spectrum_psd(&sigma, &SymplecticFormSpec::standard(spec.n())?)?[0];
        log::debug!(
            "capacity {value:.6e}; threshold π·m0² = {threshold:.6e}; \
             reading with the largest σ-eigenvalue of Σ: π·m0²·λ₁ = {:.6e}",
            threshold * largest
        );
    }
    Ok(CapacityCriterion {
        value,
        threshold,
        ok: value >= threshold * (1.0 - tol.psd_tol),
    })
}

/// Full report for one covariance estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ReportJson", try_from = "ReportJson")]
pub struct UncertaintyReport {
    pub sigma: SymMatrix,
    pub omega_spec: SymplecticFormSpec,
    pub min_eig: f64,
    pub psd_ok: bool,
    pub pairs: Vec<PairInequality>,
    pub capacity: CapacityCriterion,
    /// ω-spectrum of `Σ`, descending.
    pub spectrum: Vec<f64>,
}

impl UncertaintyReport {
    pub fn n(&self) -> usize {
        self.omega_spec.n()
    }

    pub fn all_pairs_hold(&self) -> bool {
        self.pairs.iter().all(|p| p.holds)
    }
}

#[derive(Serialize, Deserialize)]
struct OmegaJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    n: usize,
    sigma: SymMatrix,
    omega: OmegaJson,
    min_eig: f64,
    psd_ok: bool,
    pairs: Vec<PairInequality>,
    capacity: CapacityCriterion,
    spectrum: Vec<f64>,
}

impl From<UncertaintyReport> for ReportJson {
    fn from(r: UncertaintyReport) -> Self {
        let (a, b, c) = r.omega_spec.block_rows();
        Self {
            n: r.omega_spec.n(),
            sigma: r.sigma,
            omega: OmegaJson { a, b, c },
            min_eig: r.min_eig,
            psd_ok: r.psd_ok,
            pairs: r.pairs,
            capacity: r.capacity,
            spectrum: r.spectrum,
        }
    }
}

impl TryFrom<ReportJson> for UncertaintyReport {
    type Error = Error;
    fn try_from(j: ReportJson) -> Result<Self> {
        let omega_spec = SymplecticFormSpec::from_block_rows(&j.omega.a, &j.omega.b, &j.omega.c)?;
        if omega_spec.n() != j.n || j.sigma.dim() != 2 * j.n {
            return Err(Error::invalid("report dimensions disagree"));
        }
        Ok(Self {
            sigma: j.sigma,
            omega_spec,
            min_eig: j.min_eig,
            psd_ok: j.psd_ok,
            pairs: j.pairs,
            capacity: j.capacity,
            spectrum: j.spectrum,
        })
    }
}

/// Runs every criterion on the calibrated covariance of `est`.
pub fn analyze(est: &EllipsoidEstimate, spec: &SymplecticFormSpec, tol: &Tolerances) -> Result<UncertaintyReport> {
    tol.validate()?;
    let (sigma, _) = cov_matrix(est);
    let (min_eig, psd_ok) = hermitian_condition(&sigma, spec, tol)?;
    let pairs = pair_inequalities(&sigma, spec, tol)?;
    let capacity = capacity_criterion(est, spec, tol)?;
    let spectrum = omega_spectrum_psd(&sigma, spec)?;
    if psd_ok && !capacity.ok {
        log::warn!("Σ + iΩ ⪰ 0 but the capacity bound fails ({} < {})", capacity.value, capacity.threshold);
    }
    if !psd_ok && capacity.ok {
        log::warn!("capacity bound holds but Σ + iΩ is indefinite (min eigenvalue {min_eig:e})");
    }
    Ok(UncertaintyReport {
        sigma,
        omega_spec: spec.clone(),
        min_eig,
        psd_ok,
        pairs,
        capacity,
        spectrum,
    })
}

/// `analyze` for a covariance given directly, centered at the origin.
pub fn analyze_covariance(sigma: &SymMatrix, m0: f64, spec: &SymplecticFormSpec, tol: &Tolerances) -> Result<UncertaintyReport> {
    let dim = sigma.dim();
    if dim % 2 != 0 {
        return Err(Error::invalid("Σ must have even size"));
    }
    let center = PhaseVector::new(dim / 2, vec![0.0; dim])?;
    let est = EllipsoidEstimate::from_covariance(center, sigma.clone(), m0)?;
    analyze(&est, spec, tol)
}
