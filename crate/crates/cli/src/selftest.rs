//! Built-in consistency checks run by `phasecap selftest`.

use std::fmt::Write as _;

use phasecap::{
    analyze_covariance, chi2_cdf, chi2_quantile, sigma_plus_i_omega, williamson, SymMatrix, SymplecticFormSpec,
    Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{sig6, EXIT_OK, EXIT_VIOLATED};
use crate::error::CliError;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_pd(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
    let g: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (0..dim).map(|l| g[i][l] * g[j][l]).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
                .collect()
        })
        .collect();
    SymMatrix::from_rows(&rows).expect("Gram matrix is symmetric")
}

fn counterexample(tol: &Tolerances) -> Result<Check, CliError> {
    let sigma = SymMatrix::from_rows(&[
        vec![1.0, -1.0, 0.0, 0.0],
        vec![-1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])?;
    let spec = SymplecticFormSpec::standard(2)?;
    let det = sigma_plus_i_omega(&sigma, &spec)?.determinant();
    let report = analyze_covariance(&sigma, 1.0, &spec, tol)?;
    let all_hold = report.all_pairs_hold();
    let passed = (det + 1.0).abs() <= 1e-9 && !report.psd_ok && all_hold && !report.capacity.ok;
    Ok(Check {
        name: "counterexample",
        passed,
        detail: format!("det {}, min_eig {}, pairs hold {all_hold}", sig6(det), sig6(report.min_eig)),
    })
}

fn n1_equivalence(tol: &Tolerances) -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut disagreements) = (0, 0);
    for _ in 0..500 {
        let sigma = random_pd(&mut rng, 2);
        let a: f64 = rng.random_range(0.01..2.0);
        let m = sigma.as_matrix();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(0, 1)];
        let trace = m[(0, 0)] + m[(1, 1)];
        if (det - a * a).abs() <= 1e-6 * trace * trace {
            continue;
        }
        let spec = SymplecticFormSpec::scaled_standard(1, a)?;
        let (_, psd_ok) = phasecap::hermitian_condition(&sigma, &spec, tol)?;
        checked += 1;
        if psd_ok != (det >= a * a) {
            disagreements += 1;
        }
    }
    Ok(Check {
        name: "n=1 equivalence",
        passed: disagreements == 0,
        detail: format!("{disagreements} disagreements in {checked} samples"),
    })
}

fn williamson_residuals() -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for dim in [2, 4, 6, 8] {
        for _ in 0..25 {
            let m = random_pd(&mut rng, dim);
            let (a, b) = williamson(&m)?.residuals(&m);
            worst = worst.max(a).max(b);
        }
    }
    Ok(Check {
        name: "williamson residuals",
        passed: worst <= 1e-9,
        detail: format!("max residual {}", sig6(worst)),
    })
}

fn chi2_round_trip() -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for dof in [2, 4, 8] {
        for alpha in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99] {
            let q = chi2_quantile(dof, alpha)?;
            worst = worst.max((chi2_cdf(dof, q) - alpha).abs());
        }
    }
    Ok(Check {
        name: "chi-square round trip",
        passed: worst <= 1e-10,
        detail: format!("max error {}", sig6(worst)),
    })
}

pub fn run_checks(tol: &Tolerances) -> Result<Vec<Check>, CliError> {
    tol.validate()?;
    Ok(vec![counterexample(tol)?, n1_equivalence(tol)?, williamson_residuals()?, chi2_round_trip()?])
}

pub fn cmd_selftest(tol: &Tolerances) -> Result<i32, CliError> {
    let checks = run_checks(tol)?;
    let mut out = String::new();
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{verdict}  {:<24}{}", c.name, c.detail);
    }
    print!("{out}");
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VIOLATED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_by_default() {
        for c in run_checks(&Tolerances::default()).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn zero_psd_tol_is_invalid() {
        let tol = Tolerances { psd_tol: 0.0, ..Tolerances::default() };
        assert!(matches!(run_checks(&tol), Err(CliError::Core(phasecap::Error::InvalidInput(_)))));
    }
}
