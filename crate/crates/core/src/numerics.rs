//! Shared numerical kernels: symmetric and Hermitian eigensolvers, the PSD
//! square root, the chi-square quantile and the tolerance policy.
//!
//! Dense linear algebra is delegated to `nalgebra`. Everything in this module
//! is a pure function of its inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Real symmetric matrix. Construction symmetrizes, so `m[(i, j)] == m[(j, i)]`
/// holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, replacing it by `(m + mᵀ) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    /// Builds from row-major nested vectors, rejecting input that is not
    /// symmetric to within `1e-8` relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows_to_matrix(rows)?;
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-8 * scale {
            return Err(Error::invalid("matrix is not symmetric"));
        }
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// Congruence `Tᵀ · self · T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Self {
        Self::symmetrized(t.transpose() * &self.0 * t)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(DMatrix<Complex64>);

impl HermMatrix {
    /// Wraps a square complex matrix, replacing it by `(h + hᴴ) / 2`.
    pub fn new(h: DMatrix<Complex64>) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::invalid("expected a non-empty square matrix"));
        }
        if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let a = h.adjoint();
        Ok(Self((h + a).map(|v| v * 0.5)))
    }

    /// `re + i·im` for symmetric `re` and antisymmetric `im`.
    pub fn from_parts(re: &SymMatrix, im: &DMatrix<f64>) -> Result<Self> {
        if im.shape() != re.as_matrix().shape() {
            return Err(Error::invalid(format!(
                "dimension mismatch: real part {}x{}, imaginary part {}x{}",
                re.dim(),
                re.dim(),
                im.nrows(),
                im.ncols()
            )));
        }
        let h = DMatrix::from_fn(re.dim(), re.dim(), |i, j| {
            Complex64::new(re[(i, j)], im[(i, j)])
        });
        Self::new(h)
    }

    /// A real symmetric matrix viewed as Hermitian.
    pub fn from_real(m: &SymMatrix) -> Self {
        Self(m.as_matrix().map(|v| Complex64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// Determinant (real for Hermitian input; the imaginary residue is dropped).
    pub fn determinant(&self) -> f64 {
        self.0.clone().determinant().re
    }
}

/// Numerical thresholds used for verdicts and convergence checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative threshold for positive-semidefinite verdicts.
    pub psd_tol: f64,
    /// Bound on eigen-residuals.
    pub eig_tol: f64,
    /// Target accuracy of the chi-square inversion.
    pub quantile_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_tol: 1e-9,
            eig_tol: 1e-10,
            quantile_tol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("psd_tol", self.psd_tol),
            ("eig_tol", self.eig_tol),
            ("quantile_tol", self.quantile_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn pairs(&self) -> impl Iterator<Item = (f64, DVector<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, self.vectors.column(i).into_owned()))
    }
}

pub fn eig_sym(m: &SymMatrix) -> Result<SymEigen> {
    if m.as_matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.dim(), m.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// All eigenvalues of a Hermitian matrix, ascending.
pub fn eig_herm_values(h: &HermMatrix) -> Result<Vec<f64>> {
    check_finite_herm(h)?;
    let mut vals: Vec<f64> = h.as_matrix().clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn eig_herm_min(h: &HermMatrix) -> Result<f64> {
    Ok(eig_herm_values(h)?[0])
}

fn check_finite_herm(h: &HermMatrix) -> Result<()> {
    if h.as_matrix().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

/// PSD verdict together with the numbers it was based on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdVerdict {
    pub min_eig: f64,
    /// Spectral norm of the tested matrix.
    pub norm: f64,
    pub psd: bool,
}

pub fn psd_verdict(h: &HermMatrix, tol: &Tolerances) -> Result<PsdVerdict> {
    let vals = eig_herm_values(h)?;
    let min_eig = vals[0];
    let norm = vals[0].abs().max(vals[vals.len() - 1].abs());
    Ok(PsdVerdict {
        min_eig,
        norm,
        psd: min_eig >= -tol.psd_tol * norm.max(1.0),
    })
}

/// `true` iff the smallest eigenvalue is at least `-psd_tol · max(1, ‖h‖₂)`.
pub fn is_psd(h: &HermMatrix, tol: &Tolerances) -> Result<bool> {
    Ok(psd_verdict(h, tol)?.psd)
}

/// Symmetric PSD square root.
pub fn sqrtm_psd(m: &SymMatrix, tol: &Tolerances) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    let top = eig.values[0].abs().max(eig.values[eig.values.len() - 1].abs());
    let min = eig.values[eig.values.len() - 1];
    if min < -tol.psd_tol * top.max(1.0) {
        return Err(Error::NotPositiveSemidefinite { min_eig: min });
    }
    Ok(spectral_function(&eig, |v| v.max(0.0).sqrt()))
}

/// `m^{-1/2}` for positive definite `m`.
pub fn inv_sqrtm_pd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    let min = eig.values[eig.values.len() - 1];
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(spectral_function(&eig, |v| 1.0 / v.sqrt()))
}

fn spectral_function(eig: &SymEigen, f: impl Fn(f64) -> f64) -> SymMatrix {
    let v = &eig.vectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * f(eig.values[c]));
    SymMatrix::symmetrized(scaled * v.transpose())
}

/// Fails with `NotPositiveDefinite` unless a Cholesky factorization exists.
pub fn require_positive_definite(m: &SymMatrix) -> Result<()> {
    nalgebra::Cholesky::new(m.as_matrix().clone())
        .map(|_| ())
        .ok_or(Error::NotPositiveDefinite)
}

/// Canonical form of a real antisymmetric nonsingular matrix `K`.
///
/// Returns an orthogonal `Q` and `d₁ ≥ … ≥ dₙ > 0` with
/// `Qᵀ K Q = [[0, D], [−D, 0]]`, `D = diag(d)`.
///
/// Built from the Hermitian matrix `iK`: an eigenvector `v = a + ib` for the
/// eigenvalue `d > 0` satisfies `K a = d b`, `K b = −d a`, and the vectors
/// `√2·b`, `√2·a` over the positive half of the spectrum form an orthonormal
/// basis.
pub(crate) fn skew_canonical(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let dim = k.nrows();
    if dim % 2 != 0 || dim == 0 {
        return Err(Error::invalid(format!("antisymmetric matrix must have even size, got {dim}")));
    }
    let n = dim / 2;
    let ik = k.map(|v| Complex64::new(0.0, v));
    let h = HermMatrix::new(ik)?;
    let eig = SymmetricEigen::new(h.0);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].abs().max(eig.eigenvalues[order[dim - 1]].abs());
    let d: Vec<f64> = order[..n].iter().map(|&i| eig.eigenvalues[i]).collect();
    if !(top > 0.0) || d[n - 1] <= 1e-12 * top {
        return Err(Error::DegenerateForm(format!(
            "singular values range from {:e} to {:e}",
            d[n - 1].max(0.0),
            top
        )));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut q = DMatrix::zeros(dim, dim);
    for (j, &idx) in order[..n].iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        for r in 0..dim {
            q[(r, j)] = sqrt2 * v[r].im;
            q[(r, n + j)] = sqrt2 * v[r].re;
        }
    }
    Ok((q, d))
}

/// Chi-square CDF, `P(dof/2, q/2)`.
pub fn chi2_cdf(dof: u32, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    gamma_lr(f64::from(dof) / 2.0, q / 2.0)
}

/// Chi-square density.
pub fn chi2_pdf(dof: u32, q: f64) -> f64 {
    if q <= 0.0 {
        return if dof == 2 { 0.5 } else { 0.0 };
    }
    let k = f64::from(dof) / 2.0;
    ((k - 1.0) * q.ln() - q / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Quantile of the chi-square distribution at the default tolerance.
pub fn chi2_quantile(dof: u32, alpha: f64) -> Result<f64> {
    chi2_quantile_with_tol(dof, alpha, Tolerances::default().quantile_tol)
}

/// Inverts the regularized lower incomplete gamma function with a bracketed
/// Newton iteration; steps leaving the bracket fall back to bisection.
pub fn chi2_quantile_with_tol(dof: u32, alpha: f64, tol: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("chi-square degrees of freedom must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("quantile tolerance must be positive"));
    }
    let k = f64::from(dof);
    let mut lo = 0.0_f64;
    let mut hi = k + 10.0 * k.sqrt() + 50.0;
    while chi2_cdf(dof, hi) < alpha {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::invalid("chi-square quantile bracket diverged"));
        }
    }

    let mut x = k.max(0.5).min(0.5 * (lo + hi));
    for _ in 0..300 {
        let f = chi2_cdf(dof, x) - alpha;
        if f.abs() <= tol {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x);
        }
        let pdf = chi2_pdf(dof, x);
        let newton = x - f / pdf;
        x = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::invalid(format!(
            "ragged matrix: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
