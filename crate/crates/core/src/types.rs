//! Shared data containers: points, centers, memberships and hard labels.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N x d` matrix of finite points, one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Array2<f64>,
}

impl Dataset {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Empty("dataset has no points"));
        }
        if points.ncols() == 0 {
            return Err(Error::Empty("dataset has zero dimensions"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset contains a non-finite value"));
        }
        Ok(Self { points })
    }

    /// Builds a dataset from row vectors; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }

    /// Stacks several datasets row-wise, in order.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("no datasets to concatenate"))?;
        let dim = first.dim();
        for p in parts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.points.view()).collect();
        let points =
            ndarray::concatenate(Axis(0), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Self { points })
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.points
    }

    /// Per-dimension `(min, max)` over all points.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.points
            .columns()
            .into_iter()
            .map(|c| c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
            .collect()
    }
}

/// `K` cluster centers of dimension `d`, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centers {
    centers: Array2<f64>,
}

impl Centers {
    pub fn new(centers: Array2<f64>) -> Result<Self> {
        if centers.nrows() == 0 {
            return Err(Error::Empty("no centers"));
        }
        if centers.ncols() == 0 {
            return Err(Error::Empty("centers have zero dimensions"));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("center contains a non-finite value"));
        }
        Ok(Self { centers })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }

    pub fn k(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn center(&self, j: usize) -> ArrayView1<'_, f64> {
        self.centers.row(j)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.centers.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.centers
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.centers.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Returns the centers reordered so that row `j` of the result is row `order[j]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Centers {
        let rows: Vec<_> = order.iter().map(|&j| self.centers.row(j)).collect();
        Centers { centers: ndarray::stack(Axis(0), &rows).expect("rows share a length") }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.dim() });
        }
        Ok(())
    }
}

/// Fuzzy `N x K` memberships; rows sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    u: Array2<f64>,
}

impl MembershipMatrix {
    pub const ROW_SUM_TOL: f64 = 1e-9;

    /// Validates entries in `[0, 1]` and row sums of one.
    pub fn new(u: Array2<f64>) -> Result<Self> {
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(Error::Empty("membership matrix"));
        }
        for (i, row) in u.rows().into_iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::ShapeMismatch(format!("row {i} has an entry outside [0, 1]")));
            }
            let s = row.sum();
            if (s - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(Error::ShapeMismatch(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { u })
    }

    pub(crate) fn new_unchecked(u: Array2<f64>) -> Self {
        Self { u }
    }

    /// One-hot memberships from hard labels.
    pub fn one_hot(labels: &[usize], k: usize) -> Result<Self> {
        let mut u = Array2::zeros((labels.len(), k));
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::ShapeMismatch(format!("label {l} out of range for k={k}")));
            }
            u[[i, l]] = 1.0;
        }
        Self::new(u)
    }

    pub fn n_points(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.u.row(i)
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &MembershipMatrix) -> f64 {
        frobenius_diff(self.u.view(), other.u.view())
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn frobenius_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(n * d);
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: r.len() });
        }
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, d), flat).map_err(|e| Error::ShapeMismatch(e.to_string()))
}
