use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phasecap::{analyze_covariance, flow_map, sigma_spectrum, williamson, QuadraticHamiltonian, SymplecticFormSpec, Tolerances};
use phasecap_bench::positive_definite;

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("sigma_spectrum");
    for dim in [2, 4, 8, 16] {
        let m = positive_definite(dim, dim as u64);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| sigma_spectrum(m).unwrap()));
    }
    group.finish();

    let mut group = c.benchmark_group("williamson");
    for dim in [2, 4, 8, 16] {
        let m = positive_definite(dim, 100 + dim as u64);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| williamson(m).unwrap()));
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let sigma = positive_definite(6, 5);
    let spec = SymplecticFormSpec::scaled_standard(3, 0.5).unwrap();
    let tol = Tolerances::default();
    c.bench_function("analyze_n3", |b| b.iter(|| analyze_covariance(&sigma, 1.0, &spec, &tol).unwrap()));
}

fn flows(c: &mut Criterion) {
    let h = QuadraticHamiltonian::coupled_oscillators(4);
    c.bench_function("flow_map_coupled_4", |b| b.iter(|| flow_map(&h, 3.7).unwrap()));
}

criterion_group!(benches, spectra, analysis, flows);
criterion_main!(benches);
