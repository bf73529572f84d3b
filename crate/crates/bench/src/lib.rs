//! Seeded fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use phasecap::{PointCloud, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian-ish cloud with every fifth point spread wider.
pub fn cloud(n: usize, len: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|i| {
            let spread = if i % 5 == 4 { 5.0 } else { 1.0 };
            // sum of uniforms is close enough to normal for timing
            (0..2 * n).map(|_| spread * (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>()).collect()
        })
        .collect();
    PointCloud::from_rows(n, &rows).expect("finite rows")
}

/// Random positive definite `dim × dim` matrix.
pub fn positive_definite(dim: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::new(&g * g.transpose() + DMatrix::identity(dim, dim) * 0.5).expect("finite matrix")
}
