use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levyflow::hermite_basis::{BasisSpec, CoeffVector};
use levyflow::levy_sde::{derive_seed, sample_noise_path, simulate_affine, LevyModel};
use levyflow::par::{map_range, map_range_sequential};
use levyflow::spde_solver::{InitialDatum, SpdeSolver};

const SEED: u64 = 7;

fn flow_paths(c: &mut Criterion) {
    let model = LevyModel::affine(1.0, -0.5, 0.2).unwrap();
    let job = |i: usize| {
        let path = sample_noise_path(&model, 1.0, 1.0 / 512.0, derive_seed(SEED, i as u64)).unwrap();
        simulate_affine(&model, 1.0, &path).unwrap().terminal()
    };
    let mut g = c.benchmark_group("affine_flow");
    for n in [64usize, 256] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| map_range(n, job)));
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| b.iter(|| map_range_sequential(n, job)));
    }
    g.finish();
}

fn weak_residuals(c: &mut Criterion) {
    let model = LevyModel::affine(1.0, -0.5, 0.0).unwrap();
    let spec = BasisSpec::new(32, 8).unwrap();
    let solver = SpdeSolver::new(&model, &spec).unwrap();
    let psi = InitialDatum::gaussian(0.0, 1.0, 1.0).unwrap();
    let phis = [CoeffVector::unit(spec, 0).unwrap(), CoeffVector::unit(spec, 3).unwrap()];
    let job = |i: usize| {
        let path = sample_noise_path(&model, 1.0, 1.0 / 64.0, derive_seed(SEED, i as u64)).unwrap();
        solver.weak_residuals(&psi, &phis, &path).unwrap()
    };
    let n = 32;
    let mut g = c.benchmark_group("weak_residual");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| map_range(n, job)));
    g.bench_function("sequential", |b| b.iter(|| map_range_sequential(n, job)));
    g.finish();
}

criterion_group!(benches, flow_paths, weak_residuals);
criterion_main!(benches);
