//! Symplectic spectra, Williamson's normal form and symplectic capacities of
//! ellipsoids.
//!
//! For positive definite `M` the products `JM` and `ΩM` have purely imaginary
//! eigenvalues `±iλⱼ`. They are obtained here from the Hermitian matrix
//! `i·M^{1/2} K M^{1/2}` (`K = J` or `Ω`), which is similar to `iKM`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    eig_herm_values, inv_sqrtm_pd, require_positive_definite, skew_canonical, sqrtm_psd, HermMatrix,
    SymMatrix, Tolerances,
};
use crate::phase_space::{standard_j, PhaseVector, SymplecticFormSpec};

/// Relative tolerance when pairing `+λ` with `−λ`.
const PAIRING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormTag {
    Standard,
    General,
}

/// `λ₁ ≥ … ≥ λₙ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub lambdas: Vec<f64>,
    pub form_tag: FormTag,
}

impl SymplecticSpectrum {
    pub fn largest(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.lambdas.last().expect("spectrum is non-empty")
    }
}

/// Which symplectic structure a capacity is measured in.
#[derive(Debug, Clone, Copy)]
pub enum FormRef<'a> {
    Standard,
    General(&'a SymplecticFormSpec),
}

fn check_even(m: &SymMatrix) -> Result<usize> {
    if m.dim() % 2 != 0 {
        return Err(Error::invalid(format!("phase-space matrices have even size, got {}", m.dim())));
    }
    Ok(m.dim() / 2)
}

/// Positive halves of the spectrum of `i·R K R` with `R = M^{1/2}`,
/// descending. Positive semidefinite `M` is accepted and may give zeros.
fn paired_spectrum_psd(m: &SymMatrix, k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = check_even(m)?;
    let r = sqrtm_psd(m, &Tolerances::default())?;
    let skew = r.as_matrix() * k * r.as_matrix();
    let skew = (&skew - skew.transpose()) * 0.5;
    let zero = SymMatrix::new(DMatrix::zeros(2 * n, 2 * n))?;
    let vals = eig_herm_values(&HermMatrix::from_parts(&zero, &skew)?)?;
    let top = vals[2 * n - 1].abs().max(vals[0].abs());
    let mut lambdas = Vec::with_capacity(n);
    for j in 0..n {
        let pos = vals[2 * n - 1 - j];
        let neg = vals[j];
        if (pos + neg).abs() > PAIRING_TOL * top.max(1.0) {
            return Err(Error::invalid(format!("eigenvalues {pos} and {neg} do not pair")));
        }
        lambdas.push((0.5 * (pos - neg)).max(0.0));
    }
    Ok(lambdas)
}

fn paired_spectrum(m: &SymMatrix, k: &DMatrix<f64>) -> Result<Vec<f64>> {
    require_positive_definite(m)?;
    let lambdas = paired_spectrum_psd(m, k)?;
    if !(lambdas[lambdas.len() - 1] > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(lambdas)
}

/// ω-spectrum extended by continuity to positive semidefinite `M`.
pub(crate) fn omega_spectrum_psd(m: &SymMatrix, spec: &SymplecticFormSpec) -> Result<Vec<f64>> {
    if m.dim() != 2 * spec.n() {
        return Err(Error::invalid(format!("form has n = {}, matrix is {}x{}", spec.n(), m.dim(), m.dim())));
    }
    paired_spectrum_psd(m, spec.omega())
}

/// Shape `F⁻ᵀ Q F⁻¹` of an ellipsoid pulled back from `ω` to `σ`.
pub(crate) fn pullback_shape(shape: &SymMatrix, spec: &SymplecticFormSpec) -> Result<SymMatrix> {
    if 2 * spec.n() != shape.dim() {
        return Err(Error::invalid("form and ellipsoid dimensions disagree"));
    }
    let f_inv = spec
        .darboux_f()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateForm("Darboux factor is singular".into()))?;
    Ok(shape.congruence(&f_inv))
}

/// Smallest σ-eigenvalue of a positive semidefinite matrix, zero when singular.
pub(crate) fn smallest_sigma_eigenvalue_psd(m: &SymMatrix) -> Result<f64> {
    let n = check_even(m)?;
    Ok(paired_spectrum_psd(m, &standard_j(n))?[n - 1])
}

/// σ-spectrum of a positive definite matrix.
pub fn sigma_spectrum(m: &SymMatrix) -> Result<SymplecticSpectrum> {
    let n = check_even(m)?;
    Ok(SymplecticSpectrum {
        lambdas: paired_spectrum(m, &standard_j(n))?,
        form_tag: FormTag::Standard,
    })
}

/// ω-spectrum: moduli of the eigenvalue pairs of `ΩM`.
pub fn omega_spectrum(m: &SymMatrix, spec: &SymplecticFormSpec) -> Result<SymplecticSpectrum> {
    let n = check_even(m)?;
    if spec.n() != n {
        return Err(Error::invalid(format!("form has n = {}, matrix has n = {n}", spec.n())));
    }
    let form_tag = if spec.standard_multiple() == Some(1.0) { FormTag::Standard } else { FormTag::General };
    Ok(SymplecticSpectrum { lambdas: paired_spectrum(m, spec.omega())?, form_tag })
}

/// `S` symplectic with `SᵀMS = diag(Λ, Λ)`, `Λ` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsonDecomposition {
    pub s: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

impl WilliamsonDecomposition {
    /// `‖SᵀJS − J‖_max` and `‖SᵀMS − diag(Λ,Λ)‖_max`.
    pub fn residuals(&self, m: &SymMatrix) -> (f64, f64) {
        let n = self.lambda.len();
        let j = standard_j(n);
        let sympl = (self.s.transpose() * &j * &self.s - &j).amax();
        let diag: Vec<f64> = self.lambda.iter().chain(&self.lambda).copied().collect();
        let d = DMatrix::from_diagonal(&DVector::from_vec(diag));
        let normal = (self.s.transpose() * m.as_matrix() * &self.s - d).amax();
        (sympl, normal)
    }
}

/// Williamson normal form.
///
/// With `K = M^{−1/2} J M^{−1/2}` in canonical form `Qᵀ K Q = D̂ J D̂`
/// (`D̂ = diag(√d, √d)`), `S = M^{−1/2} Q D̂⁻¹` is symplectic and
/// `SᵀMS = diag(1/d, 1/d)`.
pub fn williamson(m: &SymMatrix) -> Result<WilliamsonDecomposition> {
    let n = check_even(m)?;
    require_positive_definite(m)?;
    let w = inv_sqrtm_pd(m)?;
    let k = w.as_matrix() * standard_j(n) * w.as_matrix();
    let k = (&k - k.transpose()) * 0.5;
    let (q, d) = skew_canonical(&k).map_err(|_| Error::NotPositiveDefinite)?;
    let wq = w.as_matrix() * q;

    let mut s = DMatrix::zeros(2 * n, 2 * n);
    let mut lambda = Vec::with_capacity(n);
    // d is descending, so walk it backwards to get Λ = 1/d descending
    for (j, o) in (0..n).rev().enumerate() {
        let scale = 1.0 / d[o].sqrt();
        s.set_column(j, &(wq.column(o) * scale));
        s.set_column(n + j, &(wq.column(n + o) * scale));
        lambda.push(1.0 / d[o]);
    }
    Ok(WilliamsonDecomposition { s, lambda })
}

/// One decoupled mode `λⱼ (xⱼ² + pⱼ²)` of the normal form, with the phase
/// space directions that `S` maps the `xⱼ` and `pⱼ` axes to.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMode {
    pub lambda: f64,
    pub x_axis: DVector<f64>,
    pub p_axis: DVector<f64>,
}

/// Normal form of `{z : zᵀMz ≤ 1}` after pulling back by `S`:
/// `Σⱼ λⱼ (xⱼ² + pⱼ²) ≤ 1`.
pub fn normal_form_ellipsoid(m: &SymMatrix) -> Result<Vec<NormalMode>> {
    let wd = williamson(m)?;
    let n = wd.lambda.len();
    Ok(wd
        .lambda
        .iter()
        .enumerate()
        .map(|(j, &lambda)| NormalMode {
            lambda,
            x_axis: wd.s.column(j).into_owned(),
            p_axis: wd.s.column(n + j).into_owned(),
        })
        .collect())
}

/// `{z : (z − c)ᵀ Q⁻¹ (z − c) ≤ r²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: PhaseVector,
    pub shape: SymMatrix,
    pub radius_sq: f64,
}

impl Ellipsoid {
    pub fn new(center: PhaseVector, shape: SymMatrix, radius_sq: f64) -> Result<Self> {
        if center.coords().len() != shape.dim() {
            return Err(Error::invalid("center and shape dimensions disagree"));
        }
        if !(radius_sq.is_finite() && radius_sq > 0.0) {
            return Err(Error::invalid(format!("radius² must be positive, got {radius_sq}")));
        }
        require_positive_definite(&shape)?;
        Ok(Self { center, shape, radius_sq })
    }

    /// Centered at the origin.
    pub fn centered(shape: SymMatrix, radius_sq: f64) -> Result<Self> {
        let dim = shape.dim();
        if dim % 2 != 0 {
            return Err(Error::invalid("phase-space matrices have even size"));
        }
        Self::new(PhaseVector::new(dim / 2, vec![0.0; dim])?, shape, radius_sq)
    }

    /// Ball of radius `r` in `ℝ²ⁿ`.
    pub fn ball(n: usize, r: f64) -> Result<Self> {
        Self::centered(SymMatrix::identity(2 * n), r * r)
    }

    /// Matrix `M` with the ellipsoid written as `(z − c)ᵀ M (z − c) ≤ 1`.
    pub fn defining_matrix(&self) -> Result<SymMatrix> {
        let inv = self
            .shape
            .as_matrix()
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite)?;
        SymMatrix::new(inv / self.radius_sq)
    }
}

/// Symplectic capacity of an ellipsoid. The center is irrelevant.
///
/// Standard form: `π r² λ_{σ,n}(Q)`, the same as `π / λ_{σ,1}(M)` with
/// `M = Q⁻¹ / r²`. General `ω`: the standard capacity of the pulled-back
/// ellipsoid `(Fᵀ)⁻¹ e`, whose shape is `F⁻ᵀ Q F⁻¹`.
pub fn capacity(e: &Ellipsoid, form: FormRef<'_>) -> Result<f64> {
    let shape = match form {
        FormRef::Standard => e.shape.clone(),
        FormRef::General(spec) => pullback_shape(&e.shape, spec)?,
    };
    Ok(PI * e.radius_sq * sigma_spectrum(&shape)?.smallest())
}

/// `true` iff `λ_{σ,j}(M) ≤ λ_{σ,j}(M') + 1e-9` for all `j`; requires `M ≤ M'`.
pub fn spectrum_monotonic_check(m: &SymMatrix, m_prime: &SymMatrix) -> Result<bool> {
    if m.dim() != m_prime.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    require_positive_definite(m).map_err(|_| Error::invalid("M is not positive definite"))?;
    require_positive_definite(m_prime).map_err(|_| Error::invalid("M' is not positive definite"))?;
    let diff = SymMatrix::new(m_prime.as_matrix() - m.as_matrix())?;
    if !crate::numerics::is_psd(&HermMatrix::from_real(&diff), &Tolerances::default())? {
        return Err(Error::invalid("M' − M is not positive semidefinite"));
    }
    let a = sigma_spectrum(m)?;
    let b = sigma_spectrum(m_prime)?;
    Ok(a.lambdas.iter().zip(&b.lambdas).all(|(x, y)| *x <= y + 1e-9))
}
