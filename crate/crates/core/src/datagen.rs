//! Seeded synthetic datasets: isotropic Gaussian mixtures, the four
//! experiment cases, G2 sets and uniform client partitions.
//!
//! Sampling is `mean + sigma * z` with `z` drawn coordinate by coordinate
//! from `rand_distr::StandardNormal` on a ChaCha8 stream, components in
//! declaration order. A given `(parameters, seed)` therefore always yields
//! the same bytes.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::ClientState;
use crate::rng::seeded_rng;
use crate::types::{Centers, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub count: usize,
}

impl MixtureComponent {
    pub fn new(mean: &[f64], sigma: f64, count: usize) -> Self {
        Self { mean: mean.to_vec(), sigma, count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    pub rng_seed: u64,
}

/// Points of every component, concatenated in component order.
pub fn gen_gaussian_shard(spec: &MixtureSpec) -> Result<Dataset> {
    let first = spec.components.first().ok_or(Error::Empty("mixture has no components"))?;
    let dim = first.mean.len();
    for c in &spec.components {
        if c.mean.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: c.mean.len() });
        }
        if !(c.sigma > 0.0) || c.count == 0 {
            return Err(Error::InvalidConfig(format!("component needs sigma > 0 and count >= 1, got {c:?}")));
        }
    }
    let n: usize = spec.components.iter().map(|c| c.count).sum();
    let mut rng = seeded_rng(spec.rng_seed, 0);
    let mut points = Array2::<f64>::zeros((n, dim));
    let mut rows = points.rows_mut().into_iter();
    for c in &spec.components {
        for _ in 0..c.count {
            let mut row = rows.next().expect("row count matches");
            for (v, mu) in row.iter_mut().zip(&c.mean) {
                let z: f64 = rng.sample(StandardNormal);
                *v = mu + c.sigma * z;
            }
        }
    }
    Dataset::new(points)
}

/// Client shards plus the generating means.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub shards: Vec<(usize, Dataset)>,
    pub ground_truth_centers: Centers,
}

impl FederatedDataset {
    pub fn new(shards: Vec<(usize, Dataset)>, ground_truth_centers: Centers) -> Result<Self> {
        let dim = shards.first().ok_or(Error::Empty("no shards"))?.1.dim();
        for (_, s) in &shards {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
        }
        ground_truth_centers.check_dim(dim)?;
        Ok(Self { shards, ground_truth_centers })
    }

    /// Union of all shards in client order.
    pub fn gathered(&self) -> Dataset {
        let parts: Vec<&Dataset> = self.shards.iter().map(|(_, d)| d).collect();
        Dataset::concat(&parts).expect("shards validated on construction")
    }

    pub fn clients(&self) -> Vec<ClientState> {
        self.shards.iter().map(|(id, d)| ClientState { client_id: *id, data: d.clone() }).collect()
    }

    pub fn dim(&self) -> usize {
        self.ground_truth_centers.dim()
    }
}

fn client_seed(seed: u64, client: usize) -> u64 {
    crate::rng::derive_seed(seed, client as u64 + 1)
}

fn build(seed: u64, means: &[&[f64]], sigma: f64, counts: &[Vec<usize>]) -> Result<FederatedDataset> {
    let shards = counts
        .iter()
        .enumerate()
        .map(|(client, per_mean)| {
            let components = per_mean
                .iter()
                .zip(means)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, mu)| MixtureComponent::new(mu, sigma, n))
                .collect();
            let shard = gen_gaussian_shard(&MixtureSpec { components, rng_seed: client_seed(seed, client) })?;
            Ok((client, shard))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = Centers::from_rows(&means.iter().map(|m| m.to_vec()).collect::<Vec<_>>())?;
    FederatedDataset::new(shards, truth)
}

pub const CASE1_MEANS: [[f64; 2]; 3] = [[-2.0, -2.0], [0.0, 0.0], [2.0, 2.0]];
/// Spread of the case-1 Gaussians; chosen so the gathered clustering has a
/// within-cluster index near 0.31.
pub const CASE1_SIGMA: f64 = 0.5;
pub const CASE2_MEANS: [[f64; 2]; 3] = [[5.0, 0.0], [5.0, 10.0], [10.0, 10.0]];
pub const CASE2_SIGMA: f64 = 1.1;
pub const CASE3_MEANS: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 10.0], [10.0, 10.0], [10.0, 0.0]];
pub const CASE3_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case1Variant {
    /// Three clients, 333 points from each Gaussian.
    Equal,
    /// Third client holds 500 + 500 points from the first two Gaussians only.
    Unequal,
}

pub fn build_case1(variant: Case1Variant, rng_seed: u64) -> Result<FederatedDataset> {
    let means: Vec<&[f64]> = CASE1_MEANS.iter().map(|m| m.as_slice()).collect();
    let third = match variant {
        Case1Variant::Equal => vec![333, 333, 333],
        Case1Variant::Unequal => vec![500, 500, 0],
    };
    build(rng_seed, &means, CASE1_SIGMA, &[vec![333, 333, 333], vec![333, 333, 333], third])
}

/// Two clients whose union reveals a third cluster neither sees clearly.
pub fn build_case2(rng_seed: u64) -> Result<FederatedDataset> {
    let means: Vec<&[f64]> = CASE2_MEANS.iter().map(|m| m.as_slice()).collect();
    build(rng_seed, &means, CASE2_SIGMA, &[vec![900, 50, 50], vec![50, 900, 50]])
}

/// Three clients, each holding two of four clusters in equal halves:
/// client 1 the first and second, client 2 the second and third, client 3
/// the third and fourth.
pub fn build_case3(points_per_client: [usize; 3], rng_seed: u64) -> Result<FederatedDataset> {
    if let Some(n) = points_per_client.iter().find(|&&n| n % 2 != 0 || n == 0) {
        return Err(Error::InvalidConfig(format!("client sizes must be positive and even, got {n}")));
    }
    let means: Vec<&[f64]> = CASE3_MEANS.iter().map(|m| m.as_slice()).collect();
    let [a, b, c] = points_per_client.map(|n| n / 2);
    build(rng_seed, &means, CASE3_SIGMA, &[vec![a, a, 0, 0], vec![0, b, b, 0], vec![0, 0, c, c]])
}

pub const G2_POINTS_PER_CLUSTER: usize = 1024;
pub const G2_DIMS: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];
pub const G2_SIGMAS: [f64; 10] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

/// True when `(dim, sigma)` belongs to the published G2 grid.
pub fn is_g2_family(dim: usize, sigma: f64) -> bool {
    G2_DIMS.contains(&dim) && G2_SIGMAS.contains(&sigma)
}

/// 1024 points around `(500, ..)` followed by 1024 around `(600, ..)`.
/// Parameters outside the published grid are accepted.
pub fn gen_g2(dim: usize, sigma: f64, rng_seed: u64) -> Result<(Dataset, Centers)> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    let (lo, hi) = (vec![500.0; dim], vec![600.0; dim]);
    let spec = MixtureSpec {
        components: vec![
            MixtureComponent::new(&lo, sigma, G2_POINTS_PER_CLUSTER),
            MixtureComponent::new(&hi, sigma, G2_POINTS_PER_CLUSTER),
        ],
        rng_seed,
    };
    Ok((gen_gaussian_shard(&spec)?, Centers::from_rows(&[lo, hi])?))
}

/// Random permutation cut into `n_clients` contiguous shards whose sizes
/// differ by at most one (larger shards first).
pub fn partition_uniform(data: &Dataset, n_clients: usize, rng_seed: u64) -> Result<Vec<Dataset>> {
    let n = data.n_points();
    if n_clients == 0 {
        return Err(Error::InvalidConfig("need at least one client".into()));
    }
    if n < n_clients {
        return Err(Error::TooFewPoints { n, k: n_clients });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(rng_seed, 0));
    let (base, extra) = (n / n_clients, n % n_clients);
    let mut start = 0;
    (0..n_clients)
        .map(|c| {
            let len = base + usize::from(c < extra);
            let idx = &order[start..start + len];
            start += len;
            Dataset::new(data.points().select(ndarray::Axis(0), idx))
        })
        .collect()
}
