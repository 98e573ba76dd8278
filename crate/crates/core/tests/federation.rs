use ffcm_core::datagen::{build_case1, partition_uniform, Case1Variant};
use ffcm_core::federation::{run_federated_from, run_federated_traced};
use ffcm_core::matching::align_centers;
use ffcm_core::rng::seeded_rng;
use ffcm_core::*;
use ndarray::Array2;
use rand::Rng;

fn random_clients(seed: u64) -> (Dataset, Vec<ClientState>, Centers) {
    let mut rng = seeded_rng(seed, 0);
    let n = rng.random_range(10..=500);
    let d = rng.random_range(1..=5);
    let k = rng.random_range(1..=4);
    let p = rng.random_range(1..=5);
    let data = Dataset::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-20.0..20.0))).unwrap();
    let shards = partition_uniform(&data, p, seed).unwrap();
    let gathered = Dataset::concat(&shards.iter().collect::<Vec<_>>()).unwrap();
    let clients =
        shards.into_iter().enumerate().map(|(client_id, data)| ClientState { client_id, data }).collect();
    let centers = Centers::new(Array2::from_shape_fn((k, d), |_| rng.random_range(-20.0..20.0))).unwrap();
    (gathered, clients, centers)
}

#[test]
fn avg1_round_equals_central_center_update() {
    for seed in 0..50 {
        let (gathered, clients, global) = random_clients(seed);
        let cfg = FedConfig::new(global.k());
        let updates: Vec<_> =
            clients.iter().map(|c| client_local_update(c, &global, &cfg).unwrap()).collect();
        let fed = server_avg1(&updates, Some(&global)).unwrap();
        let u = fcm_membership_update(&gathered, &global, cfg.fcm.m, cfg.fcm.membership_formula).unwrap();
        let central = fcm_center_update(&gathered, &u, cfg.fcm.m).unwrap();
        for (a, b) in fed.view().iter().zip(central.view().iter()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn aggregation_ignores_client_order() {
    for seed in 0..20 {
        let (_, clients, global) = random_clients(seed);
        let cfg = FedConfig::new(global.k());
        let mut updates: Vec<_> =
            clients.iter().map(|c| client_local_update(c, &global, &cfg).unwrap()).collect();
        let a1 = server_avg1(&updates, Some(&global)).unwrap();
        let a2 = server_avg2(&updates, cfg.k, &cfg.inner_kmeans, Avg2Seeding::KmeansPlusPlus, None).unwrap();
        updates.reverse();
        let b1 = server_avg1(&updates, Some(&global)).unwrap();
        let b2 = server_avg2(&updates, cfg.k, &cfg.inner_kmeans, Avg2Seeding::KmeansPlusPlus, None).unwrap();
        for (x, y) in a1.view().iter().zip(b1.view().iter()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        // Same set of centers up to matching; k-means objective ties aside.
        let (_, matched) = align_centers(&a2, &b2).unwrap();
        let pooled: Vec<Vec<f64>> = updates.iter().flat_map(|u| u.local_centers.to_rows()).collect();
        let scale = pooled.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(matched <= 1e-9 * scale || cfg.k == 1, "seed {seed}: avg2 drift {matched}");
    }
}

#[test]
fn avg1_is_a_convex_combination() {
    for seed in 0..20 {
        let (_, clients, global) = random_clients(seed);
        let cfg = FedConfig::new(global.k());
        let updates: Vec<_> =
            clients.iter().map(|c| client_local_update(c, &global, &cfg).unwrap()).collect();
        let out = server_avg1(&updates, Some(&global)).unwrap();
        for j in 0..out.k() {
            for d in 0..out.dim() {
                let vals: Vec<f64> = updates.iter().map(|u| u.local_centers.center(j)[d]).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let v = out.center(j)[d];
                assert!(v >= lo - 1e-12 * lo.abs().max(1.0) && v <= hi + 1e-12 * hi.abs().max(1.0));
            }
        }
    }
}

#[test]
fn identical_shards_make_avg1_and_avg2_agree() {
    let mut rng = seeded_rng(21, 0);
    let shard =
        Dataset::new(Array2::from_shape_fn((60, 2), |(i, _)| (i % 3) as f64 * 10.0 + rng.random::<f64>()))
            .unwrap();
    let clients: Vec<_> = (0..3).map(|id| ClientState { client_id: id, data: shard.clone() }).collect();
    let init = Centers::from_rows(&[vec![1.0, 1.0], vec![9.0, 9.0], vec![18.0, 18.0]]).unwrap();
    let mut cfg = FedConfig::new(3);
    cfg.max_rounds = 40;
    let a = run_federated_from(&clients, &cfg, init.clone(), |_| {}).unwrap();
    cfg.avg_method = AvgMethod::Avg2;
    let b = run_federated_from(&clients, &cfg, init, |_| {}).unwrap();
    let (order, _) = align_centers(&a.global_centers, &b.global_centers).unwrap();
    let b = b.global_centers.permuted(&order);
    for (x, y) in a.global_centers.view().iter().zip(b.view().iter()) {
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn single_client_avg1_follows_central_trajectory() {
    let fd = build_case1(Case1Variant::Equal, 4).unwrap();
    let data = fd.gathered();
    let clients = vec![ClientState { client_id: 0, data: data.clone() }];
    let init = Centers::from_rows(&[vec![-1.0, 0.5], vec![0.2, 0.1], vec![1.5, -0.5]]).unwrap();
    let mut cfg = FedConfig::new(3);
    cfg.round_epsilon = 1e-300;
    for rounds in 1..=15 {
        cfg.max_rounds = rounds;
        cfg.fcm.max_iter = rounds;
        cfg.fcm.epsilon = 1e-300;
        let fed = run_federated_from(&clients, &cfg, init.clone(), |_| {}).unwrap();
        let central = fcm_fit_from_centers(&data, &init, &cfg.fcm).unwrap();
        assert_eq!(fed.rounds_used, rounds);
        for (x, y) in fed.global_centers.view().iter().zip(central.centers.view().iter()) {
            assert!((x - y).abs() <= 1e-6, "round {rounds}: {x} vs {y}");
        }
    }
}

#[test]
fn drift_history_is_finite_and_bounded() {
    for seed in 0..10 {
        let (_, clients, global) = random_clients(seed);
        for avg in [AvgMethod::Avg1, AvgMethod::Avg2] {
            let mut cfg = FedConfig::new(global.k());
            cfg.avg_method = avg;
            cfg.max_rounds = 25;
            cfg.round_epsilon = 1e-12;
            let res = run_federated(&clients, &cfg, &mut seeded_rng(seed, 9)).unwrap();
            assert!(res.rounds_used <= 25);
            assert_eq!(res.center_drift_history.len(), res.rounds_used);
            assert!(res.center_drift_history.iter().all(|d| d.is_finite() && *d >= 0.0));
        }
    }
}

fn per_center_errors(found: &Centers, truth: &Centers) -> Vec<f64> {
    let (order, _) = align_centers(truth, found).unwrap();
    let aligned = found.permuted(&order);
    (0..truth.k()).map(|j| ffcm_core::types::dist(aligned.center(j), truth.center(j))).collect()
}

#[test]
fn case1_equal_split_finds_the_three_means() {
    for seed in 0..3 {
        let fd = build_case1(Case1Variant::Equal, seed).unwrap();
        for avg in [AvgMethod::Avg1, AvgMethod::Avg2] {
            let mut cfg = FedConfig::new(3);
            cfg.avg_method = avg;
            cfg.inner_kmeans.rng_seed = seed;
            let res = run_federated(&fd.clients(), &cfg, &mut seeded_rng(seed, 1)).unwrap();
            let errs = per_center_errors(&res.global_centers, &fd.ground_truth_centers);
            assert!(errs.iter().all(|&e| e < 0.3), "seed {seed} {avg:?}: {errs:?}");
        }
    }
}

#[test]
fn case1_unequal_avg2_with_local_iterations() {
    let fd = build_case1(Case1Variant::Unequal, 0).unwrap();
    let mut cfg = FedConfig::new(3);
    cfg.avg_method = AvgMethod::Avg2;
    cfg.local_epochs = 20;
    let res = run_federated(&fd.clients(), &cfg, &mut seeded_rng(0, 1)).unwrap();
    let errs = per_center_errors(&res.global_centers, &fd.ground_truth_centers);
    assert!(errs.iter().all(|&e| e < 0.3), "{errs:?}");
}

#[test]
fn round_trace_matches_golden() {
    let clients = vec![
        ClientState {
            client_id: 0,
            data: Dataset::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.0], vec![4.0, 4.0]]).unwrap(),
        },
        ClientState {
            client_id: 1,
            data: Dataset::from_rows(&[vec![0.0, 1.0], vec![4.5, 4.0], vec![4.0, 5.0]]).unwrap(),
        },
    ];
    let mut cfg = FedConfig::new(2);
    cfg.max_rounds = 6;
    let mut lines = String::new();
    run_federated_traced(&clients, &cfg, &mut seeded_rng(42, 0), |r| {
        lines.push_str(&r.to_string());
        lines.push('\n');
    })
    .unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/round_trace.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &lines).unwrap();
    }
    assert_eq!(lines, std::fs::read_to_string(path).unwrap());
}

#[test]
fn seeded_runs_repeat_exactly() {
    let fd = build_case1(Case1Variant::Unequal, 8).unwrap();
    let mut cfg = FedConfig::new(3);
    cfg.avg_method = AvgMethod::Avg2;
    let a = run_federated(&fd.clients(), &cfg, &mut seeded_rng(8, 0)).unwrap();
    let b = run_federated(&fd.clients(), &cfg, &mut seeded_rng(8, 0)).unwrap();
    assert_eq!(a, b);
}
