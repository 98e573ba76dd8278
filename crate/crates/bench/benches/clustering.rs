use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ffcm_core::datagen::{build_case3, gen_g2};
use ffcm_core::rng::seeded_rng;
use ffcm_core::*;
use ndarray::Array2;
use rand::Rng;

fn membership(c: &mut Criterion) {
    let mut g = c.benchmark_group("membership_update");
    for dim in [2, 64, 1024] {
        let (data, truth) = gen_g2(dim, 30.0, 0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| fcm_membership_update(&data, &truth, 2.0, MembershipFormula::SquaredRatio).unwrap())
        });
    }
    g.finish();
}

fn fit(c: &mut Criterion) {
    let data = build_case3([1000, 1000, 1000], 0).unwrap().gathered();
    let cfg = FcmConfig::default();
    c.bench_function("fcm_fit/case3", |b| b.iter(|| fcm_fit(black_box(&data), 4, &cfg).unwrap()));
    let clients = build_case3([1000, 1000, 1000], 0).unwrap().clients();
    for avg in [AvgMethod::Avg1, AvgMethod::Avg2] {
        let mut fed = FedConfig::new(4);
        fed.avg_method = avg;
        fed.local_epochs = 20;
        c.bench_function(&format!("run_federated/case3/{avg:?}"), |b| {
            b.iter(|| run_federated(&clients, &fed, &mut seeded_rng(0, 1)).unwrap())
        });
    }
}

fn aggregation(c: &mut Criterion) {
    let mut rng = seeded_rng(0, 0);
    let updates: Vec<ClientUpdate> = (0..10)
        .map(|client_id| ClientUpdate {
            client_id,
            local_centers: Centers::new(Array2::from_shape_fn((8, 16), |_| rng.random_range(0.0..100.0)))
                .unwrap(),
            weights: vec![1.0; 8],
        })
        .collect();
    let inner = KmeansConfig::default();
    c.bench_function("server_avg2/10x8x16", |b| {
        b.iter(|| server_avg2(&updates, 8, &inner, Avg2Seeding::KmeansPlusPlus, None).unwrap())
    });
}

fn gap(c: &mut Criterion) {
    let mut g = c.benchmark_group("knowledge_gap");
    let mut rng = seeded_rng(1, 0);
    for k in [4, 8, 32] {
        let mut centers =
            || Centers::new(Array2::from_shape_fn((k, 8), |_| rng.random_range(0.0..10.0))).unwrap();
        let (a, b) = (centers(), centers());
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |bench, _| {
            bench.iter(|| knowledge_gap(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, membership, fit, aggregation, gap);
criterion_main!(benches);
