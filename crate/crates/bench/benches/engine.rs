use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mobo_bench::history;
use mobo_core::pareto::{default_reference, pareto_front_with_reference};
use mobo_core::{box_decomposition, hypervolume, suggest_next, AcquisitionConfig, FitOptions, SurrogateModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mutually non-dominated points on the positive orthant of the unit sphere,
/// shifted into `[-1, 1]^d`.
fn sphere_front(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.0f64)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| 2.0 * x / norm - 1.0).collect()
        })
        .collect()
}

fn pareto(c: &mut Criterion) {
    let mut g = c.benchmark_group("pareto");
    for (n, d) in [(10, 7), (20, 7), (40, 5)] {
        let pts = sphere_front(n, d, 7);
        let front = pareto_front_with_reference(&pts, default_reference(d)).unwrap();
        g.bench_with_input(BenchmarkId::new("hypervolume", format!("n{n}_d{d}")), &front, |b, f| {
            b.iter(|| hypervolume(f).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("box_decomposition", format!("n{n}_d{d}")), &front, |b, f| {
            b.iter(|| box_decomposition(f).unwrap())
        });
    }
    g.finish();
}

fn surrogate(c: &mut Criterion) {
    let mut g = c.benchmark_group("surrogate");
    g.sample_size(10);
    for n in [5, 12, 19] {
        let h = history(n, 3);
        g.bench_with_input(BenchmarkId::new("fit_7_objectives", n), &h, |b, h| {
            b.iter(|| SurrogateModel::fit(h, &FitOptions::default(), 1).unwrap())
        });
    }
    g.finish();
}

fn acquisition(c: &mut Criterion) {
    let mut g = c.benchmark_group("acquisition");
    g.sample_size(10);
    let h = history(12, 5);
    let model = SurrogateModel::fit(&h, &FitOptions::default(), 1).unwrap();
    let points: Vec<Vec<f64>> = h.iter().map(|(_, y)| y.to_array().to_vec()).collect();
    let front = pareto_front_with_reference(&points, default_reference(7)).unwrap();
    let incumbents: Vec<_> = front.indices().into_iter().map(|i| h[i].0).collect();
    let config = AcquisitionConfig::default();
    g.bench_function("suggest_next_default", |b| {
        b.iter(|| suggest_next(&model, &front, &incumbents, &config, 9).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pareto, surrogate, acquisition);
criterion_main!(benches);
