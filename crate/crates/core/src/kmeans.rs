//! Lloyd's k-means with k-means++ seeding and restarts.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::types::{sq_dist, Centers, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    /// Stop once `||A_prev - A||_F^2 < epsilon` for the one-hot assignment matrices.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Number of k-means++ restarts; the lowest objective wins.
    pub n_init: usize,
    pub rng_seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_iter: 300, n_init: 10, rng_seed: 0 }
    }
}

impl KmeansConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("k-means epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.n_init == 0 || self.max_iter == 0 {
            return Err(Error::InvalidConfig("k-means n_init and max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub centers: Centers,
    pub labels: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each assign/update step of the winning restart.
    pub history: Vec<f64>,
}

/// Nearest-center labels; ties go to the lowest index.
pub fn kmeans_assign(data: &Dataset, centers: &Centers) -> Result<Vec<usize>> {
    centers.check_dim(data.dim())?;
    Ok((0..data.n_points()).map(|i| nearest(data, i, centers).0).collect())
}

fn nearest(data: &Dataset, i: usize, centers: &Centers) -> (usize, f64) {
    let x = data.point(i);
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.k() {
        let d = sq_dist(x, centers.center(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Per-cluster means. An empty cluster is moved onto the point lying
/// farthest from its own cluster's mean; each such point is used once.
pub fn kmeans_center_update(data: &Dataset, labels: &[usize], k: usize) -> Result<Centers> {
    if labels.len() != data.n_points() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} points", labels.len(), data.n_points())));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let d = data.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::ShapeMismatch(format!("label {l} out of range for k={k}")));
        }
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += &data.point(i);
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let mut row = sums.row_mut(j);
            row /= c as f64;
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if !empty.is_empty() {
        let mut spread: Vec<(usize, f64)> =
            labels.iter().enumerate().map(|(i, &l)| (i, sq_dist(data.point(i), sums.row(l)))).collect();
        // Farthest first; equal distances keep the lower point index.
        spread.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (slot, j) in empty.into_iter().enumerate() {
            let donor = spread[slot % spread.len()].0;
            sums.row_mut(j).assign(&data.point(donor));
        }
    }
    Centers::new(sums)
}

/// k-means++ seeding: `k` distinct rows, each drawn with probability
/// proportional to its squared distance from the closest chosen center.
pub fn kmeanspp_init<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Centers> {
    let n = data.n_points();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.point(i), data.point(first))).collect();

    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| d2[i]).sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i]) {
                acc += d2[i];
                if d2[i] > 0.0 {
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Remaining points all coincide with chosen centers.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.point(i), data.point(next)));
        }
    }
    let rows: Vec<_> = chosen.iter().map(|&i| data.point(i)).collect();
    Centers::new(ndarray::stack(ndarray::Axis(0), &rows).expect("equal row lengths"))
}

/// Sum of squared distances from each point to its assigned center.
pub fn kmeans_objective(data: &Dataset, labels: &[usize], centers: &Centers) -> Result<f64> {
    centers.check_dim(data.dim())?;
    if labels.len() != data.n_points() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} points", labels.len(), data.n_points())));
    }
    labels.iter().enumerate().try_fold(0.0, |acc, (i, &l)| {
        if l >= centers.k() {
            return Err(Error::ShapeMismatch(format!("label {l} out of range")));
        }
        Ok(acc + sq_dist(data.point(i), centers.center(l)))
    })
}

/// Runs `n_init` seeded restarts and keeps the lowest objective (lowest
/// restart index on ties).
pub fn kmeans_fit(data: &Dataset, k: usize, config: &KmeansConfig) -> Result<KmeansFit> {
    config.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if data.n_points() < k {
        return Err(Error::TooFewPoints { n: data.n_points(), k });
    }
    let mut best: Option<KmeansFit> = None;
    for restart in 0..config.n_init {
        let mut rng = seeded_rng(config.rng_seed, restart as u64);
        let init = kmeanspp_init(data, k, &mut rng)?;
        let fit = lloyd(data, init, config)?;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Lloyd iterations from caller-supplied centers.
pub fn kmeans_fit_from(data: &Dataset, init: Centers, config: &KmeansConfig) -> Result<KmeansFit> {
    config.validate()?;
    init.check_dim(data.dim())?;
    lloyd(data, init, config)
}

fn lloyd(data: &Dataset, mut centers: Centers, config: &KmeansConfig) -> Result<KmeansFit> {
    let k = centers.k();
    let mut labels: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let next = kmeans_assign(data, &centers)?;
        centers = kmeans_center_update(data, &next, k)?;
        history.push(kmeans_objective(data, &next, &centers)?);
        // Each changed label flips two entries of the one-hot matrix.
        let change =
            labels.as_ref().map(|prev| 2.0 * prev.iter().zip(&next).filter(|(a, b)| a != b).count() as f64);
        labels = Some(next);
        if change.is_some_and(|c| c < config.epsilon) {
            break;
        }
    }
    let labels = labels.expect("max_iter >= 1");
    let objective = *history.last().expect("at least one iteration");
    Ok(KmeansFit { centers, labels, objective, iterations, history })
}
