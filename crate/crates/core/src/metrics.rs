//! Cluster cohesion/separation indices and ground-truth recovery metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::align_centers;
use crate::types::{dist, sq_dist, Centers, Dataset, MembershipMatrix};

/// Distance used inside the within/outside sums.
///
/// `Euclidean` sums plain distances `||x - c||`; `Squared` sums `||x - c||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SseNorm {
    #[default]
    Euclidean,
    Squared,
}

impl SseNorm {
    fn apply(self, a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
        match self {
            SseNorm::Euclidean => dist(a, b),
            SseNorm::Squared => sq_dist(a, b),
        }
    }
}

/// Argmax of each membership row; ties go to the lowest index.
pub fn hard_assign(u: &MembershipMatrix) -> Vec<usize> {
    (0..u.n_points())
        .map(|i| {
            let row = u.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn check(data: &Dataset, labels: &[usize], centers: &Centers) -> Result<()> {
    centers.check_dim(data.dim())?;
    if labels.len() != data.n_points() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} points", labels.len(), data.n_points())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= centers.k()) {
        return Err(Error::ShapeMismatch(format!("label {l} out of range for k={}", centers.k())));
    }
    Ok(())
}

/// Within-cluster sum, normalized by `N * d`.
pub fn wsse(data: &Dataset, labels: &[usize], centers: &Centers, norm: SseNorm) -> Result<f64> {
    check(data, labels, centers)?;
    let total: f64 =
        labels.iter().enumerate().map(|(i, &l)| norm.apply(data.point(i), centers.center(l))).sum();
    Ok(total / (data.n_points() * data.dim()) as f64)
}

/// Sum over every center a point is *not* assigned to, normalized by `N * d`.
pub fn osse(data: &Dataset, labels: &[usize], centers: &Centers, norm: SseNorm) -> Result<f64> {
    check(data, labels, centers)?;
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for j in (0..centers.k()).filter(|&j| j != l) {
            total += norm.apply(data.point(i), centers.center(j));
        }
    }
    Ok(total / (data.n_points() * data.dim()) as f64)
}

/// Sum of Euclidean distances between learned and true centers under the
/// cheapest one-to-one correspondence.
pub fn knowledge_gap(learned: &Centers, truth: &Centers) -> Result<f64> {
    Ok(align_centers(truth, learned)?.1)
}

/// Dimension-normalized gap, `gap / sqrt(d)`.
pub fn ngap(gap: f64, dim: usize) -> f64 {
    gap / (dim as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub wsse: f64,
    pub osse: f64,
    pub gap: Option<f64>,
    pub ngap: Option<f64>,
    pub n_points: usize,
    pub dim: usize,
    pub k: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "wsse,osse,gap,ngap,n_points,dim,k";

    /// Scores fuzzy memberships (hardened by argmax) against `centers`, and
    /// against `truth` when known.
    pub fn evaluate(
        data: &Dataset,
        u: &MembershipMatrix,
        centers: &Centers,
        truth: Option<&Centers>,
        norm: SseNorm,
    ) -> Result<Self> {
        let labels = hard_assign(u);
        let gap = truth.map(|t| knowledge_gap(centers, t)).transpose()?;
        Ok(Self {
            wsse: wsse(data, &labels, centers, norm)?,
            osse: osse(data, &labels, centers, norm)?,
            gap,
            ngap: gap.map(|g| ngap(g, data.dim())),
            n_points: data.n_points(),
            dim: data.dim(),
            k: centers.k(),
        })
    }

    /// One CSV row in `CSV_HEADER` order; missing values are empty fields.
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.wsse,
            self.osse,
            opt(self.gap),
            opt(self.ngap),
            self.n_points,
            self.dim,
            self.k
        )
    }
}
