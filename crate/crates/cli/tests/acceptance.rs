//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Complex, DMatrix};
use phasecap::{
    analyze_covariance, brute_force_mve, capacity, chi2_cdf, chi2_quantile, flow_map, hermitian_condition,
    invariance_experiment, mve_estimate, omega_spectrum, pair_inequalities, sigma_plus_i_omega, sigma_spectrum,
    standard_j, williamson, Ellipsoid, FormRef, MveConfig, PointCloud, QuadraticHamiltonian, SymMatrix,
    SymplecticFormSpec, Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_pd(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| gauss(rng));
    SymMatrix::new(&g * g.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.2).unwrap()
}

/// Product of elementary symplectic factors: symmetric shears in either
/// direction and block-diagonal `diag(L, L⁻ᵀ)`.
fn random_symplectic(rng: &mut ChaCha8Rng, n: usize, factors: usize) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for i in 0..factors {
        let mut e = DMatrix::identity(2 * n, 2 * n);
        match i % 3 {
            0 | 1 => {
                let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let a = (&a + a.transpose()) * 0.5;
                let at = if i % 3 == 0 { (0, n) } else { (n, 0) };
                e.view_mut(at, (n, n)).copy_from(&a);
            }
            _ => {
                let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5)) + DMatrix::identity(n, n);
                let l_inv_t = l.clone().try_inverse().unwrap().transpose();
                e.view_mut((0, 0), (n, n)).copy_from(&l);
                e.view_mut((n, n), (n, n)).copy_from(&l_inv_t);
            }
        }
        s = s * e;
    }
    s
}

/// Random `G` with `GᵀJG` in block form `[[A, B], [−B, C]]`, `B` symmetric.
fn random_form_factor(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut r = |_: usize, _: usize| rng.random_range(-1.0..1.0);
    let g11 = DMatrix::from_fn(n, n, &mut r) + DMatrix::identity(n, n) * 2.0;
    let g12 = DMatrix::from_fn(n, n, &mut r);
    let g21 = DMatrix::from_fn(n, n, &mut r);
    let b = DMatrix::from_fn(n, n, &mut r);
    let b = &b + b.transpose() + DMatrix::identity(n, n) * 3.0;
    let g22 = g11.transpose().try_inverse().unwrap() * (b + g21.transpose() * &g12);
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&g11);
    g.view_mut((0, n), (n, n)).copy_from(&g12);
    g.view_mut((n, 0), (n, n)).copy_from(&g21);
    g.view_mut((n, n), (n, n)).copy_from(&g22);
    g
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

/// Cofactor expansion over complex entries.
fn complex_det(m: &[Vec<Complex<f64>>]) -> Complex<f64> {
    if m.len() == 1 {
        return m[0][0];
    }
    let mut acc = Complex::new(0.0, 0.0);
    for col in 0..m.len() {
        let minor: Vec<Vec<Complex<f64>>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, v)| *v).collect())
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        acc += m[0][col] * complex_det(&minor) * sign;
    }
    acc
}

fn counterexample_regression() -> Outcome {
    let rows = vec![
        vec![1.0, -1.0, 0.0, 0.0],
        vec![-1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let sigma = SymMatrix::from_rows(&rows).unwrap();
    let j = SymplecticFormSpec::standard(2).unwrap();
    let tol = Tolerances::default();
    let jm = standard_j(2);
    let h: Vec<Vec<Complex<f64>>> = (0..4)
        .map(|r| (0..4).map(|c| Complex::new(rows[r][c], jm[(r, c)])).collect())
        .collect();
    let det_oracle = complex_det(&h);
    let det = sigma_plus_i_omega(&sigma, &j).unwrap().determinant();
    let (min_eig, psd_ok) = hermitian_condition(&sigma, &j, &tol).unwrap();
    let pairs = pair_inequalities(&sigma, &j, &tol).unwrap();
    let all_hold = pairs.len() == 6 && pairs.iter().all(|p| p.holds);
    let slack_zero = pairs.iter().all(|p| p.slack.abs() <= 1e-12);
    let slacks: Vec<String> = pairs
        .iter()
        .map(|p| format!("{:?}{}{}={}", p.kind, p.j, p.k, p.slack).to_lowercase())
        .collect();
    let det_ok = (det + 1.0).abs() <= 1e-9 && (det_oracle.re + 1.0).abs() <= 1e-9;
    outcome(
        all_hold && slack_zero && det_ok && !psd_ok,
        format!(
            "pairs hold {all_hold}, all slack 0 {slack_zero} [{}], det {det:.12} (oracle {:.12}), min_eig {min_eig:.6}, psd_ok {psd_ok}",
            slacks.join(" "),
            det_oracle.re
        ),
    )
}

fn n1_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tol = Tolerances::default();
    let (mut checked, mut banded, mut disagreements) = (0usize, 0usize, 0usize);
    for _ in 0..10_000 {
        let sigma = random_pd(&mut rng, 2).scaled(rng.random_range(0.2..3.0));
        let a: f64 = rng.random_range(0.0..=2.0);
        let (sxx, spp, sxp) = (sigma[(0, 0)], sigma[(1, 1)], sigma[(0, 1)]);
        // eigenvalues of [[sxx, sxp + ia], [sxp − ia, spp]] in closed form
        let half_tr = 0.5 * (sxx + spp);
        let rad = (0.25 * (sxx - spp).powi(2) + sxp * sxp + a * a).sqrt();
        let (lo, hi) = (half_tr - rad, half_tr + rad);
        if lo.abs() <= tol.psd_tol * hi.max(1.0) {
            banded += 1;
            continue;
        }
        let spec = SymplecticFormSpec::scaled_standard(1, a).unwrap();
        let (_, psd_ok) = hermitian_condition(&sigma, &spec, &tol).unwrap();
        let inequality = sxx * spp >= sxp * sxp + a * a;
        checked += 1;
        if psd_ok != inequality {
            disagreements += 1;
        }
    }
    outcome(disagreements == 0, format!("{disagreements} disagreements in {checked} trials ({banded} in boundary band)"))
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, len: usize) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|i| {
            let spread = if i % 5 == 4 { 6.0 } else { 1.0 };
            (0..2 * n).map(|_| gauss(rng) * spread).collect()
        })
        .collect();
    PointCloud::from_rows(n, &rows).unwrap()
}

fn mve_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = MveConfig::exhaustive();
    let mut mismatches = Vec::new();
    let mut cases = Vec::new();
    for _ in 0..200 {
        let len = rng.random_range(8..=12);
        cases.push(random_cloud(&mut rng, 1, len));
    }
    for _ in 0..20 {
        cases.push(random_cloud(&mut rng, 2, 10));
    }
    for (i, cloud) in cases.iter().enumerate() {
        let fast = mve_estimate(cloud, &config).unwrap();
        let slow = brute_force_mve(cloud, &config).unwrap();
        let rel = (fast.volume_proxy - slow.volume_proxy).abs() / slow.volume_proxy.abs();
        if fast.subset != slow.subset || rel > 1e-9 {
            mismatches.push(i);
        }
    }
    outcome(mismatches.is_empty(), format!("{} clouds, mismatches {mismatches:?}", cases.len()))
}

fn williamson_spectrum_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_residual, mut minv_fail, mut mono_fail, mut spec_fail) = (0f64, 0, 0, 0);
    for i in 0..1000 {
        let n = 1 + i % 4;
        let m = random_pd(&mut rng, 2 * n);
        let wd = williamson(&m).unwrap();
        let (a, b) = wd.residuals(&m);
        worst_residual = worst_residual.max(a).max(b);

        let lam = sigma_spectrum(&m).unwrap().lambdas;
        let inv = SymMatrix::new(m.as_matrix().clone().try_inverse().unwrap()).unwrap();
        let lam_inv = sigma_spectrum(&inv).unwrap().lambdas;
        let expect: Vec<f64> = lam.iter().rev().map(|l| 1.0 / l).collect();
        if !rel_close(&lam_inv, &expect, 1e-8) {
            minv_fail += 1;
        }

        let bump = random_pd(&mut rng, 2 * n).scaled(rng.random_range(0.0..1.0));
        let bigger = SymMatrix::new(m.as_matrix() + bump.as_matrix()).unwrap();
        let lam_big = sigma_spectrum(&bigger).unwrap().lambdas;
        if lam.iter().zip(&lam_big).any(|(x, y)| *x > y + 1e-8 * y.max(1.0)) {
            mono_fail += 1;
        }
    }
    for i in 0..200 {
        let n = 1 + i % 4;
        let m = random_pd(&mut rng, 2 * n);
        let g = random_form_factor(&mut rng, n);
        let spec = SymplecticFormSpec::from_omega(&(g.transpose() * standard_j(n) * &g)).unwrap();
        let lhs = omega_spectrum(&m, &spec).unwrap().lambdas;
        let rhs = sigma_spectrum(&m.congruence(&g.transpose())).unwrap().lambdas;
        if !rel_close(&lhs, &rhs, 1e-8) {
            spec_fail += 1;
        }
    }
    outcome(
        worst_residual <= 1e-9 && minv_fail == 0 && mono_fail == 0 && spec_fail == 0,
        format!(
            "max residual {worst_residual:.3e}, inversion failures {minv_fail}, monotonicity failures {mono_fail}, \
             form-pullback failures {spec_fail}"
        ),
    )
}

fn capacity_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut spec_fail, mut cap_fail, mut area_fail) = (0, 0, 0);
    let mut worst_area = 0f64;
    for i in 0..500 {
        let n = 1 + i % 3;
        let s = random_symplectic(&mut rng, n, 6);
        let q = random_pd(&mut rng, 2 * n);
        let r2 = rng.random_range(0.1..4.0);
        let moved = q.congruence(&s);
        let a = sigma_spectrum(&q).unwrap().lambdas;
        let b = sigma_spectrum(&moved).unwrap().lambdas;
        if !rel_close(&a, &b, 1e-8) {
            spec_fail += 1;
        }
        let c0 = capacity(&Ellipsoid::centered(q.clone(), r2).unwrap(), FormRef::Standard).unwrap();
        let c1 = capacity(&Ellipsoid::centered(moved, r2).unwrap(), FormRef::Standard).unwrap();
        if (c0 - c1).abs() > 1e-8 * c0 {
            cap_fail += 1;
        }
        if n == 1 {
            // semi-axes² of {zᵀQ⁻¹z ≤ r²} are r²·eig(Q), area π√(ab)
            let (qa, qb, qc) = (q[(0, 0)], q[(1, 1)], q[(0, 1)]);
            let mid = 0.5 * (qa + qb);
            let rad = (0.25 * (qa - qb).powi(2) + qc * qc).sqrt();
            let area = PI * ((mid + rad) * r2 * (mid - rad) * r2).sqrt();
            let err = (c0 - area).abs() / area;
            worst_area = worst_area.max(err);
            if err > 1e-9 {
                area_fail += 1;
            }
        }
    }
    outcome(
        spec_fail == 0 && cap_fail == 0 && area_fail == 0,
        format!(
            "spectrum failures {spec_fail}, capacity failures {cap_fail}, area failures {area_fail} (max rel err {worst_area:.2e})"
        ),
    )
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 50)
}

fn quadrature_quantile_dof4(alpha: f64) -> f64 {
    let density = |x: f64| 0.25 * x * (-0.5 * x).exp();
    let cdf = |q: f64| simpson(&density, 0.0, q, 1e-15);
    let (mut lo, mut hi) = (0.0, 100.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn chi2_calibration() -> Outcome {
    let mut worst_round = 0f64;
    for dof in [2, 4, 8] {
        for k in 1..100 {
            let alpha = k as f64 / 100.0;
            let q = chi2_quantile(dof, alpha).unwrap();
            worst_round = worst_round.max((chi2_cdf(dof, q) - alpha).abs());
        }
    }
    let median = (chi2_quantile(2, 0.5).unwrap() - 2.0 * 2f64.ln()).abs();
    let upper = (chi2_quantile(2, 0.95).unwrap() + 2.0 * 0.05f64.ln()).abs();
    let mut worst_quad = 0f64;
    for alpha in [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99] {
        worst_quad = worst_quad.max((chi2_quantile(4, alpha).unwrap() - quadrature_quantile_dof4(alpha)).abs());
    }
    outcome(
        worst_round <= 1e-10 && median <= 1e-10 && upper <= 1e-10 && worst_quad <= 1e-8,
        format!(
            "round trip {worst_round:.2e}, 2ln2 err {median:.2e}, −2ln0.05 err {upper:.2e}, quadrature err {worst_quad:.2e}"
        ),
    )
}

fn capacity_matches_hermitian_condition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = Tolerances::default();
    let (mut checked, mut banded, mut disagreements, mut holds) = (0, 0, 0, 0);
    for i in 0..1000 {
        let n = 1 + i % 3;
        let eps = 2.0 * (1.0 - rng.random_range(0.0..1.0));
        let sigma = random_pd(&mut rng, 2 * n).scaled(eps * rng.random_range(0.3..4.0));
        let spec = SymplecticFormSpec::scaled_standard(n, eps).unwrap();
        let r = analyze_covariance(&sigma, 1.0, &spec, &tol).unwrap();
        let norm = sigma.as_matrix().norm() + eps;
        let near_psd = r.min_eig.abs() <= tol.psd_tol * norm.max(1.0);
        let near_cap = (r.capacity.value - r.capacity.threshold).abs() <= tol.psd_tol * r.capacity.threshold;
        if near_psd || near_cap {
            banded += 1;
            continue;
        }
        checked += 1;
        holds += r.psd_ok as usize;
        if r.capacity.ok != r.psd_ok {
            disagreements += 1;
        }
    }
    let (mut worst_eig, mut worst_cap) = (0f64, 0f64);
    for i in 0..100 {
        let n = 1 + i % 3;
        let eps = 2.0 * (1.0 - rng.random_range(0.0..1.0));
        let s = random_symplectic(&mut rng, n, 3);
        let sigma = SymMatrix::new(s.transpose() * &s * eps).unwrap();
        let spec = SymplecticFormSpec::scaled_standard(n, eps).unwrap();
        let r = analyze_covariance(&sigma, 1.0, &spec, &tol).unwrap();
        worst_eig = worst_eig.max(r.min_eig.abs());
        worst_cap = worst_cap.max((r.capacity.value - r.capacity.threshold).abs());
    }
    outcome(
        disagreements == 0 && worst_eig <= 1e-8 && worst_cap <= 1e-8,
        format!(
            "{disagreements} disagreements in {checked} ({holds} psd, {banded} banded); boundary |min_eig| {worst_eig:.2e}, \
             |capacity − threshold| {worst_cap:.2e}"
        ),
    )
}

fn dynamics_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![gauss(&mut rng) * 1.4, gauss(&mut rng) * 0.6]).collect();
    let cloud = PointCloud::from_rows(1, &rows).unwrap();
    let spec = SymplecticFormSpec::standard(1).unwrap();
    let times = [0.0, 0.3, 1.0, 2.2, 4.5, 7.0];
    let mut details = Vec::new();
    let mut passed = true;
    for name in ["harmonic-oscillator", "free-particle"] {
        let h = QuadraticHamiltonian::by_name(name, 1).unwrap();
        let rows =
            invariance_experiment(&cloud, &h, &times, &spec, &MveConfig::exhaustive(), &Tolerances::default()).unwrap();
        let c0 = rows[0].capacity;
        let drift = rows.iter().map(|r| (r.capacity - c0).abs() / c0).fold(0.0, f64::max);
        let verdicts = rows.iter().all(|r| r.psd_ok == rows[0].psd_ok && r.capacity_ok == rows[0].capacity_ok);
        let residual = times.iter().map(|&t| flow_map(&h, t).unwrap().symplecticity_residual()).fold(0.0, f64::max);
        passed &= drift <= 1e-7 && verdicts && residual <= 1e-9;
        details.push(format!("{name}: drift {drift:.2e}, verdicts constant {verdicts}, residual {residual:.2e}"));
    }
    outcome(passed, details.join("; "))
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_phasecap")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn end_to_end(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut csv = String::from("x1,p1\n");
    for _ in 0..25 {
        csv.push_str(&format!("{},{}\n", gauss(&mut rng), gauss(&mut rng)));
    }
    let cloud = dir.join("cloud.csv");
    let bad = dir.join("bad.csv");
    let ce = dir.join("ce.json");
    let id = dir.join("id.json");
    std::fs::write(&cloud, csv).unwrap();
    std::fs::write(&bad, "x1,p1\n1,2\n3,x\n").unwrap();
    std::fs::write(&ce, r#"{"sigma": [[1,-1,0,0],[-1,1,0,0],[0,0,1,0],[0,0,0,1]], "m0": 1.0}"#).unwrap();
    std::fs::write(&id, r#"{"sigma": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]], "m0": 1.0}"#).unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_owned();

    let est = ["estimate", "--cloud", &p(&cloud), "--subsets", "500", "--seed", "3"];
    let ana = ["analyze", "--cloud", &p(&cloud), "--subsets", "exhaustive"];
    let (e1, e2) = (cli(&est), cli(&est));
    let (a1, a2) = (cli(&ana), cli(&ana));
    let identical = e1 == e2 && a1 == a2 && e1.0 == 0 && a1.0 <= 1;

    let codes = [
        cli(&["analyze", "--sigma-json", &p(&id)]).0,
        cli(&["analyze", "--sigma-json", &p(&ce)]).0,
        cli(&["estimate", "--cloud", &p(&bad)]).0,
        cli(&["analyze", "--sigma-json", &p(&id), "--omega", &p(&dir.join("missing.json"))]).0,
        cli(&["selftest"]).0,
    ];
    outcome(
        identical && codes == [0, 1, 2, 2, 0],
        format!("byte-identical {identical}, exit codes {codes:?} (expected [0, 1, 2, 2, 0])"),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("counterexample regression", Duration::from_secs(1), Box::new(counterexample_regression)),
        ("n=1 equivalence", Duration::from_secs(10), Box::new(n1_equivalence)),
        ("MVE oracle equivalence", Duration::from_secs(60), Box::new(mve_oracle_equivalence)),
        ("Williamson and spectrum suite", Duration::from_secs(60), Box::new(williamson_spectrum_suite)),
        ("capacity invariance", Duration::from_secs(30), Box::new(capacity_invariance)),
        ("chi-square calibration", Duration::from_secs(5), Box::new(chi2_calibration)),
        ("capacity vs Hermitian condition", Duration::from_secs(30), Box::new(capacity_matches_hermitian_condition)),
        ("dynamics equivariance", Duration::from_secs(30), Box::new(dynamics_equivariance)),
        ("end-to-end determinism", Duration::from_secs(10), Box::new(|| end_to_end(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let ok = result.passed && in_time;
        failed += !ok as usize;
        println!(
            "{} {:>2} {name:<32} {:>8.3}s (limit {}s{}) {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" },
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
