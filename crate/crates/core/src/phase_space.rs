//! Phase-space data model: sample vectors ordered `(x₁,…,xₙ,p₁,…,pₙ)`, point
//! clouds, the standard symplectic matrix `J` and general antisymmetric forms
//! `Ω = [[A, B], [−B, C]]` together with a Darboux factor `F`, `FᵀJF = Ω`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_to_rows, rows_to_matrix, skew_canonical};

/// A point `z = (x, p)` of `ℝ²ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    n: usize,
    coords: Vec<f64>,
}

impl PhaseVector {
    pub fn new(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("degrees of freedom must be positive"));
        }
        if coords.len() != 2 * n {
            return Err(Error::invalid(format!(
                "phase vector needs {} coordinates, got {}",
                2 * n,
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Self { n, coords })
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::invalid("phase vector length must be even"));
        }
        Self::new(v.len() / 2, v.iter().copied().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn positions(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn momenta(&self) -> &[f64] {
        &self.coords[self.n..]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

/// Measurement units attached to a cloud. Purely descriptive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Units {
    #[serde(default)]
    pub position: String,
    #[serde(default)]
    pub momentum: String,
}

/// `N` phase-space samples sharing the same number of degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    points: Vec<PhaseVector>,
    pub units: Units,
}

impl PointCloud {
    pub fn new(n: usize, points: Vec<PhaseVector>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("degrees of freedom must be positive"));
        }
        if points.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        if let Some(i) = points.iter().position(|p| p.n != n) {
            return Err(Error::invalid(format!(
                "point {i} has {} degrees of freedom, cloud has {n}",
                points[i].n
            )));
        }
        Ok(Self { n, points, units: Units::default() })
    }

    /// Builds a cloud from raw rows of `2n` coordinates.
    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| PhaseVector::new(n, r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, points)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PhaseVector] {
        &self.points
    }

    /// Smallest cloud size accepted for estimation, `2n + 2`.
    pub fn min_estimation_size(n: usize) -> usize {
        2 * n + 2
    }

    /// Cloud as an `N × 2n` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim(), |i, j| self.points[i].coords[j])
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.coords.clone()).collect()
    }

    /// Applies `z ↦ T z + shift` to every point.
    pub fn map_affine(&self, t: &DMatrix<f64>, shift: Option<&DVector<f64>>) -> Result<Self> {
        if t.nrows() != self.dim() || t.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "map is {}x{}, cloud dimension is {}",
                t.nrows(),
                t.ncols(),
                self.dim()
            )));
        }
        if let Some(b) = shift {
            if b.len() != self.dim() {
                return Err(Error::invalid("shift has wrong dimension"));
            }
        }
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut z = t * p.to_vector();
                if let Some(b) = shift {
                    z += b;
                }
                PhaseVector::from_vector(&z)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n: self.n, points, units: self.units.clone() })
    }
}

/// The standard symplectic matrix `J = [[0, I], [−I, 0]]` of size `2n`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `σ(z, z') = z'ᵀ J z`.
pub fn sigma_form(z: &[f64], zp: &[f64]) -> Result<f64> {
    if z.len() != zp.len() || z.len() % 2 != 0 {
        return Err(Error::invalid("vectors must have equal even length"));
    }
    let n = z.len() / 2;
    Ok((0..n).map(|i| zp[i] * z[n + i] - zp[n + i] * z[i]).sum())
}

/// An antisymmetric invertible `Ω = [[A, B], [−B, C]]` with a cached Darboux
/// factor `F` satisfying `FᵀJF = Ω`.
///
/// The associated symplectic form is `ω(z, z') = −z'ᵀ Ω⁻¹ z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticFormSpec {
    n: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    omega: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    darboux_f: DMatrix<f64>,
}

const BLOCK_SYMMETRY_TOL: f64 = 1e-12;

impl SymplecticFormSpec {
    /// `Ω = J` (`A = C = 0`, `B = I`).
    pub fn standard(n: usize) -> Result<Self> {
        build_form(DMatrix::zeros(n, n), DMatrix::identity(n, n), DMatrix::zeros(n, n))
    }

    /// `Ω = εJ`.
    pub fn scaled_standard(n: usize, eps: f64) -> Result<Self> {
        build_form(DMatrix::zeros(n, n), DMatrix::identity(n, n) * eps, DMatrix::zeros(n, n))
    }

    /// Splits a full `2n × 2n` antisymmetric matrix into its blocks.
    pub fn from_omega(omega: &DMatrix<f64>) -> Result<Self> {
        if !omega.is_square() || omega.nrows() % 2 != 0 || omega.nrows() == 0 {
            return Err(Error::InvalidBlocks("Ω must be square with even size".into()));
        }
        let n = omega.nrows() / 2;
        let scale = omega.amax().max(f64::MIN_POSITIVE);
        if (omega + omega.transpose()).amax() > BLOCK_SYMMETRY_TOL * scale {
            return Err(Error::InvalidBlocks("Ω is not antisymmetric".into()));
        }
        // tolerances are relative to the whole of Ω, then blocks are cleaned
        let omega = (omega - omega.transpose()) * 0.5;
        let a = omega.view((0, 0), (n, n)).into_owned();
        let b = omega.view((0, n), (n, n)).into_owned();
        let c = omega.view((n, n), (n, n)).into_owned();
        if (&b - b.transpose()).amax() > BLOCK_SYMMETRY_TOL * scale {
            return Err(Error::InvalidBlocks("lower-left block must equal −B with B symmetric".into()));
        }
        let b = (&b + b.transpose()) * 0.5;
        build_form(a, b, c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn omega_inverse(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }

    pub fn darboux_f(&self) -> &DMatrix<f64> {
        &self.darboux_f
    }

    /// `true` when `Ω` is a positive multiple of `J`; returns that multiple.
    pub fn standard_multiple(&self) -> Option<f64> {
        let eps = self.b[(0, 0)];
        let j = standard_j(self.n) * eps;
        (eps > 0.0 && self.omega == j).then_some(eps)
    }

    /// Blocks as nested rows, `(A, B, C)`.
    pub fn block_rows(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (matrix_to_rows(&self.a), matrix_to_rows(&self.b), matrix_to_rows(&self.c))
    }

    pub fn from_block_rows(a: &[Vec<f64>], b: &[Vec<f64>], c: &[Vec<f64>]) -> Result<Self> {
        build_form(
            rows_to_matrix(a).map_err(|e| Error::InvalidBlocks(e.to_string()))?,
            rows_to_matrix(b).map_err(|e| Error::InvalidBlocks(e.to_string()))?,
            rows_to_matrix(c).map_err(|e| Error::InvalidBlocks(e.to_string()))?,
        )
    }
}

fn check_block(name: &str, m: &DMatrix<f64>, n: usize, sign: f64) -> Result<DMatrix<f64>> {
    if m.shape() != (n, n) {
        return Err(Error::InvalidBlocks(format!(
            "block {name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBlocks(format!("block {name} has non-finite entries")));
    }
    // sign = +1 for symmetric, −1 for antisymmetric
    let mt = m.transpose() * sign;
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - &mt).amax() > BLOCK_SYMMETRY_TOL * scale {
        let kind = if sign > 0.0 { "symmetric" } else { "antisymmetric" };
        return Err(Error::InvalidBlocks(format!("block {name} must be {kind}")));
    }
    Ok((m + mt) * 0.5)
}

/// Assembles `Ω = [[A, B], [−B, C]]`, checks invertibility and caches `F`.
pub fn build_form(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<SymplecticFormSpec> {
    let n = b.nrows();
    if n == 0 {
        return Err(Error::InvalidBlocks("blocks must be non-empty".into()));
    }
    let a = check_block("A", &a, n, -1.0)?;
    let b = check_block("B", &b, n, 1.0)?;
    let c = check_block("C", &c, n, -1.0)?;

    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    omega.view_mut((0, 0), (n, n)).copy_from(&a);
    omega.view_mut((0, n), (n, n)).copy_from(&b);
    omega.view_mut((n, 0), (n, n)).copy_from(&(-&b));
    omega.view_mut((n, n), (n, n)).copy_from(&c);

    let darboux_f = darboux_factor(&omega)?;
    let inv = omega
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateForm("Ω is not invertible".into()))?;
    let omega_inv = (&inv - inv.transpose()) * 0.5;

    Ok(SymplecticFormSpec { n, a, b, c, omega, omega_inv, darboux_f })
}

/// Returns an invertible `F` with `FᵀJF = Ω`.
///
/// `Ω` is brought to the canonical form `Qᵀ Ω Q = D̂ J D̂` with `Q` orthogonal
/// and `D̂ = diag(√d, √d)`; then `F = D̂ Qᵀ`. `F` is not unique: any `S F`
/// with `S` symplectic works as well.
pub fn darboux_factor(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !omega.is_square() || omega.nrows() % 2 != 0 || omega.nrows() == 0 {
        return Err(Error::invalid("Ω must be square with even size"));
    }
    let scale = omega.amax();
    if !(scale > 0.0) {
        return Err(Error::DegenerateForm("Ω is zero".into()));
    }
    if (omega + omega.transpose()).amax() > BLOCK_SYMMETRY_TOL * scale {
        return Err(Error::invalid("Ω is not antisymmetric"));
    }
    let n = omega.nrows() / 2;
    let (q, d) = skew_canonical(omega)?;
    let mut f = q.transpose();
    for (j, dj) in d.iter().enumerate() {
        let s = dj.sqrt();
        f.row_mut(j).scale_mut(s);
        f.row_mut(n + j).scale_mut(s);
    }
    Ok(f)
}

/// `ω(z, z') = −z'ᵀ Ω⁻¹ z`, evaluated so that antisymmetry holds exactly.
pub fn eval_form(spec: &SymplecticFormSpec, z: &[f64], zp: &[f64]) -> Result<f64> {
    let dim = 2 * spec.n;
    if z.len() != dim || zp.len() != dim {
        return Err(Error::invalid(format!(
            "vectors have lengths {} and {}, form dimension is {dim}",
            z.len(),
            zp.len()
        )));
    }
    let inv = &spec.omega_inv;
    let mut acc = 0.0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            acc += inv[(i, j)] * (zp[i] * z[j] - zp[j] * z[i]);
        }
    }
    Ok(-acc)
}
