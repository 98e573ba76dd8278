//! Fuzzy c-means: membership and center updates, the `J_m` objective and the
//! alternating fit loop.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::types::{sq_dist, Centers, Dataset, MembershipMatrix};

/// How memberships are derived from squared point-center distances.
///
/// Both share the form `u_ij = 1 / sum_k (d2_ij / d2_ik)^p`:
/// * `SquaredRatio` uses `p = 2 / (m - 1)`;
/// * `Bezdek` uses the classical `p = 1 / (m - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipFormula {
    #[default]
    SquaredRatio,
    Bezdek,
}

impl MembershipFormula {
    pub fn exponent(self, m: f64) -> f64 {
        match self {
            MembershipFormula::SquaredRatio => 2.0 / (m - 1.0),
            MembershipFormula::Bezdek => 1.0 / (m - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    /// Fuzziness exponent, `m > 1`.
    pub m: f64,
    /// Stop once the Frobenius norm of the membership change is `<= epsilon`.
    pub epsilon: f64,
    pub max_iter: usize,
    pub membership_formula: MembershipFormula,
    pub rng_seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            m: 2.0,
            epsilon: 1e-4,
            max_iter: 300,
            membership_formula: MembershipFormula::default(),
            rng_seed: 0,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 1.0) || !self.m.is_finite() {
            return Err(Error::InvalidConfig(format!("fuzziness m must be > 1, got {}", self.m)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmFit {
    pub centers: Centers,
    pub memberships: MembershipMatrix,
    /// `J_m(U, c)` after each center/membership pass.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `x^p` with exact fast paths for the exponents m = 2 produces.
#[inline]
pub(crate) fn pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

/// Membership update. Points coinciding with `q` centers get `1/q` on each of
/// them and zero elsewhere.
pub fn fcm_membership_update(
    data: &Dataset,
    centers: &Centers,
    m: f64,
    formula: MembershipFormula,
) -> Result<MembershipMatrix> {
    centers.check_dim(data.dim())?;
    if !(m > 1.0) {
        return Err(Error::InvalidConfig(format!("fuzziness m must be > 1, got {m}")));
    }
    let p = formula.exponent(m);
    let (n, k) = (data.n_points(), centers.k());
    let mut u = Array2::<f64>::zeros((n, k));
    let mut d2 = vec![0.0; k];
    for i in 0..n {
        let x = data.point(i);
        for (j, slot) in d2.iter_mut().enumerate() {
            *slot = sq_dist(x, centers.center(j));
        }
        let mut row = u.row_mut(i);
        let zeros = d2.iter().filter(|&&v| v == 0.0).count();
        if zeros > 0 {
            let share = 1.0 / zeros as f64;
            for (j, &v) in d2.iter().enumerate() {
                row[j] = if v == 0.0 { share } else { 0.0 };
            }
            continue;
        }
        // Scale by the smallest distance so every term lies in (0, 1];
        // keeps large exponents (small m) from overflowing.
        let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (j, &v) in d2.iter().enumerate() {
            let t = pow(dmin / v, p);
            row[j] = t;
            total += t;
        }
        row /= total;
    }
    Ok(MembershipMatrix::new_unchecked(u))
}

/// Per-cluster sums `sum_i u_ij^m x_i` and `sum_i u_ij^m`.
pub(crate) fn weighted_sums(data: &Dataset, u: &MembershipMatrix, m: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    if u.n_points() != data.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "membership has {} rows for {} points",
            u.n_points(),
            data.n_points()
        )));
    }
    let k = u.k();
    let mut num = Array2::<f64>::zeros((k, data.dim()));
    let mut den = vec![0.0; k];
    for i in 0..data.n_points() {
        let x = data.point(i);
        for (j, (&uij, dj)) in u.row(i).iter().zip(den.iter_mut()).enumerate() {
            let w = pow(uij, m);
            if w == 0.0 {
                continue;
            }
            *dj += w;
            num.row_mut(j).scaled_add(w, &x);
        }
    }
    Ok((num, den))
}

/// Center update `c_j = sum_i u_ij^m x_i / sum_i u_ij^m`.
pub fn fcm_center_update(data: &Dataset, u: &MembershipMatrix, m: f64) -> Result<Centers> {
    let (mut num, den) = weighted_sums(data, u, m)?;
    for (j, &w) in den.iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::DegenerateCluster(j));
        }
        let mut row = num.row_mut(j);
        row /= w;
    }
    Centers::new(num)
}

/// `J_m(U, c) = sum_i sum_j u_ij^m ||x_i - c_j||^2`.
pub fn fcm_objective(data: &Dataset, u: &MembershipMatrix, centers: &Centers, m: f64) -> Result<f64> {
    centers.check_dim(data.dim())?;
    if u.n_points() != data.n_points() || u.k() != centers.k() {
        return Err(Error::ShapeMismatch(format!(
            "membership {}x{} vs {} points and {} centers",
            u.n_points(),
            u.k(),
            data.n_points(),
            centers.k()
        )));
    }
    let mut total = 0.0;
    for i in 0..data.n_points() {
        for j in 0..centers.k() {
            let w = u.row(i)[j];
            if w > 0.0 {
                total += pow(w, m) * sq_dist(data.point(i), centers.center(j));
            }
        }
    }
    Ok(total)
}

/// Memberships drawn row-wise from a symmetric Dirichlet(1).
pub fn random_membership<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> MembershipMatrix {
    let mut u = Array2::<f64>::zeros((n, k));
    for mut row in u.rows_mut() {
        // Normalized unit exponentials; 1 - r lies in (0, 1] so ln is finite.
        for v in row.iter_mut() {
            *v = -(1.0 - rng.random::<f64>()).ln();
        }
        let s = row.sum();
        row /= s;
    }
    MembershipMatrix::new_unchecked(u)
}

/// Fuzzy c-means from a random initial membership matrix.
pub fn fcm_fit(data: &Dataset, k: usize, config: &FcmConfig) -> Result<FcmFit> {
    config.validate()?;
    check_k(data, k)?;
    let u0 = random_membership(data.n_points(), k, &mut seeded_rng(config.rng_seed, 0));
    iterate(data, u0, None, config)
}

/// Fuzzy c-means starting from given centers: the first membership matrix
/// is computed from `init`, then the usual alternation follows.
pub fn fcm_fit_from_centers(data: &Dataset, init: &Centers, config: &FcmConfig) -> Result<FcmFit> {
    config.validate()?;
    check_k(data, init.k())?;
    let u0 = fcm_membership_update(data, init, config.m, config.membership_formula)?;
    iterate(data, u0, Some(init.clone()), config)
}

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if data.n_points() < k {
        return Err(Error::TooFewPoints { n: data.n_points(), k });
    }
    Ok(())
}

fn iterate(
    data: &Dataset,
    mut u: MembershipMatrix,
    mut centers: Option<Centers>,
    config: &FcmConfig,
) -> Result<FcmFit> {
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let next_centers = match (fcm_center_update(data, &u, config.m), centers.as_ref()) {
            (Ok(c), _) => c,
            (Err(Error::DegenerateCluster(_)), Some(prev)) => keep_degenerate(data, &u, config.m, prev)?,
            (Err(e), _) => return Err(e),
        };
        let next_u = fcm_membership_update(data, &next_centers, config.m, config.membership_formula)?;
        history.push(fcm_objective(data, &next_u, &next_centers, config.m)?);
        let change = next_u.distance(&u);
        u = next_u;
        centers = Some(next_centers);
        if change <= config.epsilon {
            converged = true;
            break;
        }
    }
    Ok(FcmFit { centers: centers.expect("max_iter >= 1"), memberships: u, history, iterations, converged })
}

/// Center update that leaves zero-weight clusters at their previous position.
pub(crate) fn keep_degenerate(
    data: &Dataset,
    u: &MembershipMatrix,
    m: f64,
    prev: &Centers,
) -> Result<Centers> {
    let (num, den) = weighted_sums(data, u, m)?;
    finish_centers(num, &den, prev)
}

pub(crate) fn finish_centers(mut num: Array2<f64>, den: &[f64], prev: &Centers) -> Result<Centers> {
    for (j, &w) in den.iter().enumerate() {
        if w > 0.0 {
            let mut row = num.row_mut(j);
            row /= w;
        } else {
            num.row_mut(j).assign(&prev.center(j));
        }
    }
    Centers::new(num)
}
