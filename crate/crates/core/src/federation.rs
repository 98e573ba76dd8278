//! Simulated federated fuzzy c-means.
//!
//! Each round the server broadcasts global centers, every client runs local
//! fuzzy c-means passes on its private shard and reports local centers plus
//! per-cluster weights `W_j = sum_i u_ij^m`, and the server aggregates them
//! either by weighted averaging ([`server_avg1`]) or by k-means over the
//! pooled local centers ([`server_avg2`]). Clients never send raw points,
//! except under [`InitStrategy::ClientSample`], which trades that away for a
//! data-driven start.

use std::fmt;

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcm::{fcm_membership_update, finish_centers, weighted_sums, FcmConfig};
use crate::kmeans::{kmeans_fit, kmeans_fit_from, kmeanspp_init, KmeansConfig};
use crate::matching::align_centers;
use crate::rng::derive_seed;
use crate::types::{dist, Centers, Dataset, MembershipMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: usize,
    pub data: Dataset,
}

/// What a client sends back each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub local_centers: Centers,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AvgMethod {
    /// Weight-proportional mean of local centers.
    #[default]
    Avg1,
    /// k-means over all reported local centers, weights ignored.
    Avg2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Uniform draws inside the union of the clients' bounding boxes.
    #[default]
    BoundingBoxUniform,
    /// Clients send `k` sampled points each; the server seeds by D^2 sampling.
    /// Reveals raw points to the server.
    ClientSample,
}

/// Seeding of the server-side k-means in [`AvgMethod::Avg2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Avg2Seeding {
    #[default]
    KmeansPlusPlus,
    /// Single Lloyd run starting at the previous global centers.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub k: usize,
    pub fcm: FcmConfig,
    pub avg_method: AvgMethod,
    pub local_epochs: usize,
    pub max_rounds: usize,
    pub round_epsilon: f64,
    pub init_strategy: InitStrategy,
    pub inner_kmeans: KmeansConfig,
    pub avg2_seeding: Avg2Seeding,
}

impl FedConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            fcm: FcmConfig::default(),
            avg_method: AvgMethod::default(),
            local_epochs: 1,
            max_rounds: 300,
            round_epsilon: 1e-4,
            init_strategy: InitStrategy::default(),
            inner_kmeans: KmeansConfig::default(),
            avg2_seeding: Avg2Seeding::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.local_epochs == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidConfig("local_epochs and max_rounds must be >= 1".into()));
        }
        if !(self.round_epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "round_epsilon must be > 0, got {}",
                self.round_epsilon
            )));
        }
        self.fcm.validate()?;
        self.inner_kmeans.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedResult {
    pub global_centers: Centers,
    pub rounds_used: usize,
    pub converged: bool,
    /// `sum_k ||c_k(t) - c_k(t+1)||` for every executed round.
    pub center_drift_history: Vec<f64>,
}

/// One line of the optional round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub drift: f64,
    pub centers: Centers,
}

impl fmt::Display for RoundRecord {
    /// `round=<r> drift=<v> centers=<c00>,<c01>;<c10>,<c11>` with shortest
    /// round-trip float formatting.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round={} drift={} centers=", self.round, self.drift)?;
        for (j, row) in self.centers.view().rows().into_iter().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
        }
        Ok(())
    }
}

fn check_clients(clients: &[ClientState]) -> Result<usize> {
    let first = clients.first().ok_or(Error::Empty("no clients"))?;
    let dim = first.data.dim();
    for c in clients {
        if c.data.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: c.data.dim() });
        }
    }
    Ok(dim)
}

/// Initial global centers.
pub fn server_init_centers<R: Rng + ?Sized>(
    clients: &[ClientState],
    k: usize,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<Centers> {
    let dim = check_clients(clients)?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    match strategy {
        InitStrategy::BoundingBoxUniform => {
            let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
            for c in clients {
                for (b, (lo, hi)) in bounds.iter_mut().zip(c.data.bounds()) {
                    b.0 = b.0.min(lo);
                    b.1 = b.1.max(hi);
                }
            }
            let centers = Array2::from_shape_fn((k, dim), |(_, d)| {
                let (lo, hi) = bounds[d];
                lo + (hi - lo) * rng.random::<f64>()
            });
            Centers::new(centers)
        }
        InitStrategy::ClientSample => {
            let mut rows = Vec::with_capacity(clients.len() * k);
            for c in clients {
                let n = c.data.n_points();
                if n >= k {
                    for i in sample(rng, n, k).into_iter() {
                        rows.push(c.data.point(i));
                    }
                } else {
                    for _ in 0..k {
                        rows.push(c.data.point(rng.random_range(0..n)));
                    }
                }
            }
            let pool = Dataset::new(ndarray::stack(Axis(0), &rows).expect("equal dims"))?;
            kmeanspp_init(&pool, k, rng)
        }
    }
}

/// Up to `local_epochs` fuzzy c-means passes on one client's shard, starting
/// from the global centers and stopping early once the local memberships
/// move by at most `fcm.epsilon`.
///
/// Cluster `j` of the result always refers to global cluster `j`. A cluster
/// with no local support keeps the global center and reports weight 0.
pub fn client_local_update(
    client: &ClientState,
    global: &Centers,
    config: &FedConfig,
) -> Result<ClientUpdate> {
    global.check_dim(client.data.dim())?;
    let fcm = &config.fcm;
    let mut centers = global.clone();
    let mut weights = vec![0.0; global.k()];
    let mut prev_u: Option<MembershipMatrix> = None;
    for _ in 0..config.local_epochs {
        let u = fcm_membership_update(&client.data, &centers, fcm.m, fcm.membership_formula)?;
        if prev_u.as_ref().is_some_and(|p| p.distance(&u) <= fcm.epsilon) {
            break;
        }
        let (num, den) = weighted_sums(&client.data, &u, fcm.m)?;
        centers = finish_centers(num, &den, &centers)?;
        weights = den;
        prev_u = Some(u);
    }
    Ok(ClientUpdate { client_id: client.client_id, local_centers: centers, weights })
}

fn check_updates(updates: &[ClientUpdate]) -> Result<(usize, usize)> {
    let first = updates.first().ok_or(Error::Empty("no client updates"))?;
    let (k, dim) = (first.local_centers.k(), first.local_centers.dim());
    for u in updates {
        if u.local_centers.k() != k || u.weights.len() != k {
            return Err(Error::ShapeMismatch(format!("client {} reports a different k", u.client_id)));
        }
        u.local_centers.check_dim(dim)?;
        if u.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::NonFinite("client weight"));
        }
    }
    Ok((k, dim))
}

/// Weighted mean of local centers: `c_j = sum_l W_j^l c_j^l / sum_l W_j^l`.
///
/// A cluster with zero total weight keeps its `previous` center, or is
/// reported as degenerate when there is none.
pub fn server_avg1(updates: &[ClientUpdate], previous: Option<&Centers>) -> Result<Centers> {
    let (k, dim) = check_updates(updates)?;
    let mut num = Array2::<f64>::zeros((k, dim));
    let mut den = vec![0.0; k];
    for u in updates {
        for (j, (dj, &w)) in den.iter_mut().zip(&u.weights).enumerate() {
            *dj += w;
            num.row_mut(j).scaled_add(w, &u.local_centers.center(j));
        }
    }
    for (j, &w) in den.iter().enumerate() {
        if w > 0.0 {
            let mut row = num.row_mut(j);
            row /= w;
        } else {
            let prev = previous.ok_or(Error::DegenerateCluster(j))?;
            prev.check_dim(dim)?;
            num.row_mut(j).assign(&prev.center(j));
        }
    }
    Centers::new(num)
}

/// k-means over the pooled local centers, each counted once.
///
/// With `previous` the output is reordered to line up with it by
/// minimum-cost matching, so drift is measured between corresponding centers.
pub fn server_avg2(
    updates: &[ClientUpdate],
    k: usize,
    inner: &KmeansConfig,
    seeding: Avg2Seeding,
    previous: Option<&Centers>,
) -> Result<Centers> {
    check_updates(updates)?;
    let rows: Vec<_> = updates
        .iter()
        .flat_map(|u| (0..u.local_centers.k()).map(move |j| u.local_centers.center(j)))
        .collect();
    if rows.len() < k {
        return Err(Error::TooFewPoints { n: rows.len(), k });
    }
    let pool = Dataset::new(ndarray::stack(Axis(0), &rows).expect("equal dims"))?;
    let fit = match (seeding, previous) {
        (Avg2Seeding::WarmStart, Some(prev)) if prev.k() == k => kmeans_fit_from(&pool, prev.clone(), inner)?,
        _ => kmeans_fit(&pool, k, inner)?,
    };
    match previous {
        Some(prev) if prev.k() == k => {
            let (order, _) = align_centers(prev, &fit.centers)?;
            Ok(fit.centers.permuted(&order))
        }
        _ => Ok(fit.centers),
    }
}

/// `sum_k ||prev_k - next_k||`.
pub fn center_drift(prev: &Centers, next: &Centers) -> Result<f64> {
    if prev.k() != next.k() {
        return Err(Error::ShapeMismatch(format!("{} vs {} centers", prev.k(), next.k())));
    }
    next.check_dim(prev.dim())?;
    Ok((0..prev.k()).map(|j| dist(prev.center(j), next.center(j))).sum())
}

pub fn server_round_converged(prev: &Centers, next: &Centers, round_epsilon: f64) -> Result<bool> {
    Ok(center_drift(prev, next)? <= round_epsilon)
}

/// Runs the protocol until the global centers stop moving or `max_rounds`.
pub fn run_federated<R: Rng + ?Sized>(
    clients: &[ClientState],
    config: &FedConfig,
    rng: &mut R,
) -> Result<FedResult> {
    run_federated_traced(clients, config, rng, |_| {})
}

/// [`run_federated`] that hands every round's record to `trace`.
pub fn run_federated_traced<R, F>(
    clients: &[ClientState],
    config: &FedConfig,
    rng: &mut R,
    trace: F,
) -> Result<FedResult>
where
    R: Rng + ?Sized,
    F: FnMut(&RoundRecord),
{
    let init = server_init_centers(clients, config.k, config.init_strategy, rng)?;
    run_federated_from(clients, config, init, trace)
}

/// Protocol loop from explicit initial centers.
pub fn run_federated_from<F>(
    clients: &[ClientState],
    config: &FedConfig,
    init: Centers,
    mut trace: F,
) -> Result<FedResult>
where
    F: FnMut(&RoundRecord),
{
    config.validate()?;
    let dim = check_clients(clients)?;
    init.check_dim(dim)?;
    if init.k() != config.k {
        return Err(Error::ShapeMismatch(format!("{} initial centers for k={}", init.k(), config.k)));
    }

    let mut global = init;
    let mut drifts = Vec::new();
    let mut converged = false;
    for round in 0..config.max_rounds {
        let updates =
            clients.iter().map(|c| client_local_update(c, &global, config)).collect::<Result<Vec<_>>>()?;
        let next = match config.avg_method {
            AvgMethod::Avg1 => server_avg1(&updates, Some(&global))?,
            AvgMethod::Avg2 => {
                let inner = KmeansConfig {
                    rng_seed: derive_seed(config.inner_kmeans.rng_seed, round as u64),
                    ..config.inner_kmeans
                };
                server_avg2(&updates, config.k, &inner, config.avg2_seeding, Some(&global))?
            }
        };
        let drift = center_drift(&global, &next)?;
        drifts.push(drift);
        trace(&RoundRecord { round, drift, centers: next.clone() });
        global = next;
        if drift <= config.round_epsilon {
            converged = true;
            break;
        }
    }
    Ok(FedResult {
        global_centers: global,
        rounds_used: drifts.len(),
        converged,
        center_drift_history: drifts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcm::{fcm_center_update, MembershipFormula};
    use crate::rng::seeded_rng;
    use approx::assert_abs_diff_eq;

    fn d1(vals: &[f64]) -> Dataset {
        Dataset::from_rows(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn c1(vals: &[f64]) -> Centers {
        Centers::from_rows(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn update(id: usize, centers: &[f64], weights: &[f64]) -> ClientUpdate {
        ClientUpdate { client_id: id, local_centers: c1(centers), weights: weights.to_vec() }
    }

    #[test]
    fn bounding_box_init_stays_inside() {
        let clients: Vec<_> = (0..3)
            .map(|id| {
                let mut rng = seeded_rng(id as u64, 0);
                let rows: Vec<Vec<f64>> =
                    (0..20).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
                ClientState { client_id: id, data: Dataset::from_rows(&rows).unwrap() }
            })
            .collect();
        let c = server_init_centers(&clients, 5, InitStrategy::BoundingBoxUniform, &mut seeded_rng(1, 0))
            .unwrap();
        assert!(c.view().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = server_init_centers(&clients, 5, InitStrategy::BoundingBoxUniform, &mut seeded_rng(1, 0))
            .unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn client_sample_single_point() {
        let clients = vec![ClientState { client_id: 0, data: d1(&[4.5]) }];
        let c = server_init_centers(&clients, 1, InitStrategy::ClientSample, &mut seeded_rng(0, 0)).unwrap();
        assert_eq!(c, c1(&[4.5]));
        assert!(server_init_centers(&[], 1, InitStrategy::ClientSample, &mut seeded_rng(0, 0)).is_err());
    }

    #[test]
    fn client_holding_the_centers() {
        let global = Centers::from_rows(&[vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0]]).unwrap();
        let client = ClientState { client_id: 0, data: Dataset::new(global.view().to_owned()).unwrap() };
        let up = client_local_update(&client, &global, &FedConfig::new(3)).unwrap();
        assert_eq!(up.local_centers, global);
        assert_eq!(up.weights, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn client_update_hand_values() {
        // x = {0, 2}, centers {0.5, 1.5}, m = 2, squared-ratio formula.
        // x=0: d2 = (0.25, 2.25) -> u = (81/82, 1/82); x=2 mirrors it.
        let client = ClientState { client_id: 0, data: d1(&[0.0, 2.0]) };
        let mut cfg = FedConfig::new(2);
        cfg.fcm.membership_formula = MembershipFormula::SquaredRatio;
        let up = client_local_update(&client, &c1(&[0.5, 1.5]), &cfg).unwrap();
        let (a, b) = (81.0f64 / 82.0, 1.0f64 / 82.0);
        let w = a * a + b * b;
        assert_abs_diff_eq!(up.weights[0], w, epsilon = 1e-15);
        assert_abs_diff_eq!(up.weights[1], w, epsilon = 1e-15);
        assert_abs_diff_eq!(up.local_centers.center(0)[0], 2.0 * b * b / w, epsilon = 1e-15);
        assert_abs_diff_eq!(up.local_centers.center(1)[0], 2.0 * a * a / w, epsilon = 1e-15);
    }

    #[test]
    fn client_update_equals_one_central_pass() {
        let data =
            Dataset::from_rows(&[vec![0.0, 1.0], vec![2.0, 2.0], vec![5.0, -1.0], vec![6.0, 0.5]]).unwrap();
        let global = Centers::from_rows(&[vec![1.0, 1.0], vec![5.0, 0.0]]).unwrap();
        let cfg = FedConfig::new(2);
        let up =
            client_local_update(&ClientState { client_id: 0, data: data.clone() }, &global, &cfg).unwrap();
        let u = fcm_membership_update(&data, &global, 2.0, cfg.fcm.membership_formula).unwrap();
        assert_eq!(up.local_centers, fcm_center_update(&data, &u, 2.0).unwrap());
    }

    #[test]
    fn avg1_examples() {
        let one = update(0, &[1.5, 7.0], &[2.0, 3.0]);
        assert_eq!(server_avg1(std::slice::from_ref(&one), None).unwrap(), c1(&[1.5, 7.0]));
        let ups = [update(0, &[0.0], &[1.0]), update(1, &[2.0], &[1.0])];
        assert_eq!(server_avg1(&ups, None).unwrap(), c1(&[1.0]));
        let ups = [update(0, &[0.0], &[3.0]), update(1, &[4.0], &[1.0])];
        assert_eq!(server_avg1(&ups, None).unwrap(), c1(&[1.0]));
    }

    #[test]
    fn avg1_degenerate_keeps_previous() {
        let ups = [update(0, &[0.0, 9.0], &[1.0, 0.0]), update(1, &[2.0, 9.0], &[1.0, 0.0])];
        assert_eq!(server_avg1(&ups, None), Err(Error::DegenerateCluster(1)));
        assert_eq!(server_avg1(&ups, Some(&c1(&[5.0, 4.0]))).unwrap(), c1(&[1.0, 4.0]));
    }

    #[test]
    fn avg2_examples() {
        let inner = KmeansConfig::default();
        let ups = [update(0, &[0.0, 5.0, 9.0], &[1.0; 3])];
        let mut got: Vec<f64> = server_avg2(&ups, 3, &inner, Avg2Seeding::KmeansPlusPlus, None)
            .unwrap()
            .to_rows()
            .into_iter()
            .map(|r| r[0])
            .collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 5.0, 9.0]);

        let prev = c1(&[9.0, 0.0, 5.0]);
        let ups = [update(0, &[0.0, 5.0, 9.0], &[1.0; 3]), update(1, &[0.0, 5.0, 9.0], &[0.0; 3])];
        let got = server_avg2(&ups, 3, &inner, Avg2Seeding::KmeansPlusPlus, Some(&prev)).unwrap();
        assert_eq!(got, prev);
        let got = server_avg2(&ups, 3, &inner, Avg2Seeding::WarmStart, Some(&prev)).unwrap();
        assert_eq!(got, prev);

        assert!(matches!(
            server_avg2(&[update(0, &[1.0], &[1.0])], 2, &inner, Avg2Seeding::KmeansPlusPlus, None),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn convergence_check_examples() {
        let c = c1(&[1.0, 2.0]);
        assert!(server_round_converged(&c, &c, 1e-12).unwrap());
        assert!(!server_round_converged(&c1(&[0.0]), &c1(&[0.5]), 0.1).unwrap());
        let prev = Centers::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let next = Centers::from_rows(&[vec![0.3, 0.0], vec![1.0, 1.4]]).unwrap();
        assert_abs_diff_eq!(center_drift(&prev, &next).unwrap(), 0.7, epsilon = 1e-12);
        assert!(server_round_converged(&prev, &next, 0.71).unwrap());
        assert!(server_round_converged(&prev, &c, 1.0).is_err());
    }

    #[test]
    fn trace_line_format() {
        let rec = RoundRecord {
            round: 3,
            drift: 0.25,
            centers: Centers::from_rows(&[vec![1.0, -2.5], vec![0.1, 3.0]]).unwrap(),
        };
        assert_eq!(rec.to_string(), "round=3 drift=0.25 centers=1,-2.5;0.1,3");
    }

    #[test]
    fn run_records_one_drift_per_round() {
        let clients = vec![
            ClientState { client_id: 0, data: d1(&[0.0, 0.2, 10.0]) },
            ClientState { client_id: 1, data: d1(&[0.1, 9.8, 10.1]) },
        ];
        let mut cfg = FedConfig::new(2);
        cfg.max_rounds = 50;
        let mut lines = Vec::new();
        let res = run_federated_traced(&clients, &cfg, &mut seeded_rng(2, 0), |r| lines.push(r.to_string()))
            .unwrap();
        assert_eq!(res.center_drift_history.len(), res.rounds_used);
        assert_eq!(lines.len(), res.rounds_used);
        assert!(res.converged);
    }
}
