//! Parallel (rayon pool) versus sequential execution of the data-parallel
//! kernels: greedy node scoring and the two Lipschitz estimators.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gnatrom::bounds::{certified_lipschitz_a, estimate_lipschitz_a};
use gnatrom::model::{Burgers, FullOrderModel, ParameterPoint};
use gnatrom::par;
use gnatrom::sampling::{greedy_select, GreedyConfig};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn modes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi_r = random_matrix(&mut rng, 2000, 40);
    let phi_j = random_matrix(&mut rng, 2000, 30);
    let config = GreedyConfig {
        target_nodes: 40,
        working_columns: 30,
        seed_nodes: vec![0],
        unknowns_per_node: 1,
    };
    let model = Burgers::benchmark();
    let mu = ParameterPoint::new(4.5, 0.038);
    let base = model.initial_condition(&mu);
    let probes: Vec<Vec<f64>> = (0..12)
        .map(|_| base.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect())
        .collect();

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for mode in ["parallel", "sequential"] {
        let run = |f: &mut (dyn FnMut() + Send)| {
            if mode == "parallel" {
                f()
            } else {
                par::sequential(f)
            }
        };
        group.bench_function(BenchmarkId::new("greedy_select", mode), |b| {
            b.iter(|| {
                run(&mut || {
                    black_box(greedy_select(phi_r.as_ref(), phi_j.as_ref(), &config).unwrap());
                })
            })
        });
        group.bench_function(BenchmarkId::new("sampled_lipschitz", mode), |b| {
            b.iter(|| {
                run(&mut || {
                    black_box(estimate_lipschitz_a(&model, &mu, &probes, &[1]).unwrap());
                })
            })
        });
        group.bench_function(BenchmarkId::new("certified_lipschitz", mode), |b| {
            let toy = Burgers::new(
                gnatrom::model::Grid1D::new(64, 100.0).unwrap(),
                gnatrom::model::TimeDiscretization::new(0.001, 5).unwrap(),
            );
            b.iter(|| {
                run(&mut || {
                    black_box(certified_lipschitz_a(&toy, 5.0, 401).unwrap());
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, modes);
criterion_main!(benches);
