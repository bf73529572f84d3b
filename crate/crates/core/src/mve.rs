//! Minimum Volume Ellipsoid estimator of multivariate location and scatter.
//!
//! Candidates are elemental subsets of `2n + 1` points. Each subset gives a
//! mean `z̄ₛ` and covariance `Cₛ`; the ellipsoid is then inflated until it
//! covers `k` points of the whole cloud, i.e. to the `k`-th smallest squared
//! Mahalanobis distance `m²ₛ`. The candidate with the smallest volume proxy
//! `det(Cₛ)^{1/2} · (m²ₛ)ⁿ` wins.
//!
//! Candidates whose objective lies within a relative `1e-10` of the minimum
//! are considered tied, and the tie goes to the subset whose points, sorted
//! lexicographically by coordinates, compare smallest. This keeps the result
//! independent of row order and of evaluation order.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{chi2_quantile, sqrtm_psd, SymMatrix, Tolerances};
use crate::phase_space::{PhaseVector, PointCloud};

/// Relative band inside which two objective values count as tied.
pub const TIE_BAND: f64 = 1e-10;

/// Largest enumeration `brute_force_mve` accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Largest enumeration the exhaustive mode of `mve_estimate` accepts.
pub const EXHAUSTIVE_LIMIT: u128 = 20_000_000;

/// How candidate subsets are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetBudget {
    /// Draw this many pseudo-random subsets.
    Resample(usize),
    /// Enumerate every subset.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MveConfig {
    /// Coverage count; defaults to `⌊(N + 2n + 1) / 2⌋`.
    pub k: Option<usize>,
    /// Calibration level for `m₀² = χ²_{2n}(m_alpha)`; defaults to `k / N`.
    pub m_alpha: Option<f64>,
    pub subsets: SubsetBudget,
    pub seed: u64,
}

impl Default for MveConfig {
    fn default() -> Self {
        Self {
            k: None,
            m_alpha: None,
            subsets: SubsetBudget::Resample(5000),
            seed: 0,
        }
    }
}

impl MveConfig {
    pub fn exhaustive() -> Self {
        Self { subsets: SubsetBudget::Exhaustive, ..Self::default() }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Resolves `(k, m_alpha)` for a cloud of `n_points` samples with `n`
    /// degrees of freedom and validates them.
    pub fn resolve(&self, n_points: usize, n: usize) -> Result<(usize, f64)> {
        let k = self.k.unwrap_or((n_points + 2 * n + 1) / 2);
        let lo = n_points / 2 + 1;
        if k < lo || k > n_points {
            return Err(Error::invalid(format!("k = {k} outside [{lo}, {n_points}]")));
        }
        let alpha = self.m_alpha.unwrap_or(k as f64 / n_points as f64);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!(
                "calibration level must lie in (0, 1), got {alpha}; set m_alpha explicitly when k = N"
            )));
        }
        if let SubsetBudget::Resample(0) = self.subsets {
            return Err(Error::invalid("subset budget must be at least 1"));
        }
        Ok((k, alpha))
    }
}

/// Output of the estimator.
///
/// `sigma` is the shape matrix `Cₛ` of the winning subset; `cov_matrix`
/// turns it into the calibrated covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EstimateJson", try_from = "EstimateJson")]
pub struct EllipsoidEstimate {
    pub center: PhaseVector,
    pub sigma: SymMatrix,
    pub m0: f64,
    pub raw_m2: f64,
    pub subset: Vec<usize>,
    pub volume_proxy: f64,
}

#[derive(Serialize, Deserialize)]
struct EstimateJson {
    center: Vec<f64>,
    sigma: SymMatrix,
    m0: f64,
    raw_m2: f64,
    subset: Vec<usize>,
    volume_proxy: f64,
}

impl From<EllipsoidEstimate> for EstimateJson {
    fn from(e: EllipsoidEstimate) -> Self {
        Self {
            center: e.center.coords().to_vec(),
            sigma: e.sigma,
            m0: e.m0,
            raw_m2: e.raw_m2,
            subset: e.subset,
            volume_proxy: e.volume_proxy,
        }
    }
}

impl TryFrom<EstimateJson> for EllipsoidEstimate {
    type Error = Error;
    fn try_from(j: EstimateJson) -> Result<Self> {
        if j.center.len() != j.sigma.dim() || j.center.len() % 2 != 0 {
            return Err(Error::invalid("center and sigma dimensions disagree"));
        }
        Ok(Self {
            center: PhaseVector::new(j.center.len() / 2, j.center)?,
            sigma: j.sigma,
            m0: j.m0,
            raw_m2: j.raw_m2,
            subset: j.subset,
            volume_proxy: j.volume_proxy,
        })
    }
}

impl EllipsoidEstimate {
    /// Wraps an already-calibrated covariance `Σ` and radius `m₀`, so that
    /// `cov_matrix` returns `Σ` unchanged. A singular positive semidefinite
    /// `Σ` is accepted and gets a zero volume proxy.
    pub fn from_covariance(center: PhaseVector, sigma: SymMatrix, m0: f64) -> Result<Self> {
        if center.coords().len() != sigma.dim() {
            return Err(Error::invalid("center and sigma dimensions disagree"));
        }
        if !(m0.is_finite() && m0 > 0.0) {
            return Err(Error::invalid(format!("m0 must be positive, got {m0}")));
        }
        let n = center.n();
        let det = match Cholesky::new(sigma.as_matrix().clone()) {
            Some(chol) => chol_det(&chol),
            None => {
                sqrtm_psd(&sigma, &Tolerances::default())?;
                0.0
            }
        };
        Ok(Self {
            center,
            sigma,
            m0,
            raw_m2: m0 * m0,
            subset: Vec::new(),
            volume_proxy: det.sqrt() * m0.powi(2 * n as i32),
        })
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }
}

fn chol_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|v| v * v).product()
}

/// `(z − z̄)ᵀ Σ⁻¹ (z − z̄)` through a Cholesky solve.
pub fn mahalanobis_sq(z: &[f64], center: &[f64], sigma: &SymMatrix) -> Result<f64> {
    if z.len() != sigma.dim() || center.len() != sigma.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    let chol = Cholesky::new(sigma.as_matrix().clone()).ok_or(Error::DegenerateScatter)?;
    let diff = DVector::from_iterator(z.len(), z.iter().zip(center).map(|(a, b)| a - b));
    Ok(whitened_norm_sq(&chol, diff))
}

fn whitened_norm_sq(chol: &Cholesky<f64, Dyn>, diff: DVector<f64>) -> f64 {
    let y = chol
        .l_dirty()
        .solve_lower_triangular(&diff)
        .expect("Cholesky factor has a positive diagonal");
    y.norm_squared()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Subset points sorted lexicographically: the tie-break key.
fn canonical_points(data: &DMatrix<f64>, subset: &[usize]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = subset.iter().map(|&i| data.row(i).iter().copied().collect()).collect();
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts
}

fn key_cmp(a: &[Vec<f64>], b: &[Vec<f64>]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| lex_cmp(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean and covariance (denominator `h − 1`) of the given points, accumulated
/// in the given order.
fn subset_moments(points: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = points[0].len();
    let h = points.len() as f64;
    let mut mean = DVector::zeros(d);
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean /= h;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = DVector::from_iterator(d, p.iter().zip(mean.iter()).map(|(a, b)| a - b));
        cov += &c * c.transpose();
    }
    cov /= h - 1.0;
    (mean, cov)
}

/// `det(C) < 1e-12 · (tr C / d)^d` marks points that are not in general
/// position.
fn is_degenerate(det: f64, trace: f64, d: usize) -> bool {
    !(trace > 0.0) || !(det > 0.0) || det < 1e-12 * (trace / d as f64).powi(d as i32)
}

struct Scored {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    raw_m2: f64,
    log_objective: f64,
}

fn score_subset(data: &DMatrix<f64>, subset: &[usize], n: usize, k: usize) -> Option<Scored> {
    let pts = canonical_points(data, subset);
    let (mean, cov) = subset_moments(&pts);
    let d = 2 * n;
    let chol = Cholesky::new(cov.clone())?;
    let det = chol_det(&chol);
    if is_degenerate(det, cov.trace(), d) {
        return None;
    }
    let mut dist: Vec<f64> = data
        .row_iter()
        .map(|r| whitened_norm_sq(&chol, r.transpose() - &mean))
        .collect();
    let (_, kth, _) = dist.select_nth_unstable_by(k - 1, f64::total_cmp);
    let raw_m2 = *kth;
    if !(raw_m2 > 0.0) {
        return None;
    }
    Some(Scored {
        mean,
        cov,
        raw_m2,
        log_objective: 0.5 * det.ln() + n as f64 * raw_m2.ln(),
    })
}

pub(crate) fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The `rank`-th `r`-subset of `0..n` in lexicographic order.
fn unrank_combination(mut rank: u128, n: usize, r: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(r);
    let mut next = 0;
    for slot in 0..r {
        let mut c = next;
        loop {
            let count = binomial(n - c - 1, r - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

/// Subset `index` of a resampling run: a ChaCha stream keyed by
/// `(seed, index)`, so the candidate list does not depend on thread count.
fn random_subset(seed: u64, index: u64, n_points: usize, h: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut idx = rand::seq::index::sample(&mut rng, n_points, h).into_vec();
    idx.sort_unstable();
    idx
}

enum Candidates {
    Exhaustive { n_points: usize, h: usize, count: u128 },
    Random { seed: u64, n_points: usize, h: usize, count: usize },
}

impl Candidates {
    fn len(&self) -> usize {
        match self {
            Candidates::Exhaustive { count, .. } => *count as usize,
            Candidates::Random { count, .. } => *count,
        }
    }

    fn get(&self, i: usize) -> Vec<usize> {
        match *self {
            Candidates::Exhaustive { n_points, h, .. } => unrank_combination(i as u128, n_points, h),
            Candidates::Random { seed, n_points, h, .. } => random_subset(seed, i as u64, n_points, h),
        }
    }
}

fn check_cloud(cloud: &PointCloud) -> Result<()> {
    let min = PointCloud::min_estimation_size(cloud.n());
    if cloud.len() < min {
        return Err(Error::invalid(format!(
            "{} points with n = {}; at least 2n+2 = {min} are required",
            cloud.len(),
            cloud.n()
        )));
    }
    Ok(())
}

/// MVE estimate of location and scatter.
///
/// With `SubsetBudget::Exhaustive`, or when the resampling budget covers every
/// subset, all `C(N, 2n+1)` subsets are scored.
pub fn mve_estimate(cloud: &PointCloud, config: &MveConfig) -> Result<EllipsoidEstimate> {
    check_cloud(cloud)?;
    let n = cloud.n();
    let n_points = cloud.len();
    let (k, alpha) = config.resolve(n_points, n)?;
    let h = 2 * n + 1;
    let total = binomial(n_points, h);

    let candidates = match config.subsets {
        SubsetBudget::Resample(budget) if (budget as u128) < total => Candidates::Random {
            seed: config.seed,
            n_points,
            h,
            count: budget,
        },
        _ => {
            if total > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLarge { count: total, limit: EXHAUSTIVE_LIMIT });
            }
            Candidates::Exhaustive { n_points, h, count: total }
        }
    };

    let data = cloud.to_matrix();
    let objectives: Vec<f64> = (0..candidates.len())
        .into_par_iter()
        .map(|i| score_subset(&data, &candidates.get(i), n, k).map_or(f64::NAN, |s| s.log_objective))
        .collect();

    let best = objectives
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .min_by(f64::total_cmp)
        .ok_or(Error::GeneralPositionFailure)?;
    // log-space band: ln(1 + TIE_BAND) ≈ TIE_BAND
    let winner = objectives
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan() && **v <= best + TIE_BAND)
        .map(|(i, _)| {
            let subset = candidates.get(i);
            let key = canonical_points(&data, &subset);
            (subset, key)
        })
        .min_by(|a, b| key_cmp(&a.1, &b.1))
        .map(|(s, _)| s)
        .expect("at least the minimizer is in the band");

    let scored = score_subset(&data, &winner, n, k).expect("winner was scored before");
    let m0 = chi2_quantile(2 * n as u32, alpha)?.sqrt();
    Ok(EllipsoidEstimate {
        center: PhaseVector::from_vector(&scored.mean)?,
        sigma: SymMatrix::new(scored.cov)?,
        m0,
        raw_m2: scored.raw_m2,
        subset: winner,
        volume_proxy: scored.log_objective.exp(),
    })
}

/// Exhaustive enumeration of every `(2n+1)`-subset, written independently of
/// `mve_estimate`: explicit determinants and inverses, full sorts, and the
/// objective in linear scale. Serves as the reference for the exhaustive mode.
pub fn brute_force_mve(cloud: &PointCloud, config: &MveConfig) -> Result<EllipsoidEstimate> {
    use itertools::Itertools;

    check_cloud(cloud)?;
    let n = cloud.n();
    let d = 2 * n;
    let n_points = cloud.len();
    let (k, alpha) = config.resolve(n_points, n)?;
    let total = binomial(n_points, d + 1);
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { count: total, limit: BRUTE_FORCE_LIMIT });
    }
    let pts: Vec<DVector<f64>> = cloud.points().iter().map(PhaseVector::to_vector).collect();

    let mut scored = Vec::new();
    for subset in (0..n_points).combinations(d + 1) {
        let h = subset.len() as f64;
        let mean = subset.iter().fold(DVector::zeros(d), |acc, &i| acc + &pts[i]) / h;
        let cov = subset.iter().fold(DMatrix::zeros(d, d), |acc, &i| {
            let c = &pts[i] - &mean;
            acc + &c * c.transpose()
        }) / (h - 1.0);
        let det = cov.determinant();
        if is_degenerate(det, cov.trace(), d) {
            continue;
        }
        let Some(inv) = cov.clone().try_inverse() else { continue };
        let mut dist: Vec<f64> = pts
            .iter()
            .map(|z| {
                let c = z - &mean;
                c.dot(&(&inv * &c))
            })
            .collect();
        dist.sort_by(f64::total_cmp);
        let m2 = dist[k - 1];
        if !(m2 > 0.0) {
            continue;
        }
        let objective = det.sqrt() * m2.powi(n as i32);
        scored.push((objective, subset, mean, cov, m2));
    }

    let best = scored
        .iter()
        .map(|s| s.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::GeneralPositionFailure)?;
    let data = cloud.to_matrix();
    let (objective, subset, mean, cov, m2) = scored
        .into_iter()
        .filter(|s| s.0 <= best * (1.0 + TIE_BAND))
        .min_by(|a, b| key_cmp(&canonical_points(&data, &a.1), &canonical_points(&data, &b.1)))
        .expect("minimizer is in the band");

    Ok(EllipsoidEstimate {
        center: PhaseVector::from_vector(&mean)?,
        sigma: SymMatrix::new(cov)?,
        m0: chi2_quantile(d as u32, alpha)?.sqrt(),
        raw_m2: m2,
        subset,
        volume_proxy: objective,
    })
}

/// Calibrated covariance `Σ = (raw_m2 / m₀²) · Cₛ` and radius `m₀`: the
/// ellipsoid `(z − z̄)ᵀ Σ⁻¹ (z − z̄) ≤ m₀²` is the minimum volume ellipsoid.
pub fn cov_matrix(est: &EllipsoidEstimate) -> (SymMatrix, f64) {
    let m0_sq = est.m0 * est.m0;
    if est.raw_m2 == m0_sq {
        return (est.sigma.clone(), est.m0);
    }
    (est.sigma.scaled(est.raw_m2 / m0_sq), est.m0)
}

/// Number of cloud points inside the estimate's ellipsoid at radius `raw_m2`.
pub fn coverage_count(cloud: &PointCloud, est: &EllipsoidEstimate) -> usize {
    let Some(chol) = Cholesky::new(est.sigma.as_matrix().clone()) else {
        return 0;
    };
    let center = est.center.to_vector();
    let limit = est.raw_m2 * (1.0 + 1e-12);
    cloud
        .points()
        .iter()
        .filter(|p| whitened_norm_sq(&chol, p.to_vector() - &center) <= limit)
        .count()
}
