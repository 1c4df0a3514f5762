//! Centroid sets: k points in R^d plus the iteration counter they belong to.

use crate::error::{Result, SkmError};

/// A set of k centroids stored row-contiguously (`data[j*d .. (j+1)*d]` is
/// centroid `j`), tagged with the iteration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    d: usize,
    data: Vec<f64>,
    /// Iteration index this set belongs to (0 for an initialization).
    pub iteration: u32,
}

impl CentroidSet {
    /// Build from flat data: `data.len()` must be a positive multiple of `d`,
    /// every coordinate finite.
    pub fn new(d: usize, data: Vec<f64>, iteration: u32) -> Result<Self> {
        if d == 0 {
            return Err(SkmError::InvalidParams {
                reason: "centroid dimension must be positive".into(),
            });
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(SkmError::DimensionMismatch {
                expected: d,
                got: data.len(),
            });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(SkmError::NonFiniteCentroid { cluster: idx / d });
            }
        }
        Ok(Self { d, data, iteration })
    }

    /// Build from one row per centroid; all rows must share a positive length.
    pub fn from_rows(rows: &[Vec<f64>], iteration: u32) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if d == 0 {
            return Err(SkmError::InvalidParams {
                reason: "centroid set needs at least one nonempty row".into(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(SkmError::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(d, data, iteration)
    }

    /// Number of centroids.
    pub fn k(&self) -> usize {
        self.data.len() / self.d
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Centroid `j` as a slice.
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    /// Mutable centroid `j`.
    pub fn centroid_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.d..(j + 1) * self.d]
    }

    /// Iterate over centroids in index order.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Squared Euclidean norm of each centroid.
    pub fn sq_norms(&self) -> Vec<f64> {
        self.iter().map(|c| c.iter().map(|v| v * v).sum()).collect()
    }

    /// Copy out as one row per centroid (for reports).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(|c| c.to_vec()).collect()
    }

    /// Mean per-centroid Euclidean distance to `other` (same k and d).
    pub fn mean_shift(&self, other: &CentroidSet) -> Result<f64> {
        if self.d != other.d {
            return Err(SkmError::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        if self.k() != other.k() {
            return Err(SkmError::DimensionMismatch {
                expected: self.k(),
                got: other.k(),
            });
        }
        let total: f64 = self
            .iter()
            .zip(other.iter())
            .map(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        Ok(total / self.k() as f64)
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_accessors() {
        let c = CentroidSet::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]], 0).unwrap();
        assert_eq!(c.k(), 2);
        assert_eq!(c.d(), 2);
        assert_eq!(c.centroid(1), &[2.0, 3.0]);
        assert_eq!(c.sq_norms(), vec![1.0, 13.0]);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(CentroidSet::from_rows(&[vec![1.0], vec![1.0, 2.0]], 0).is_err());
        assert_eq!(
            CentroidSet::new(2, vec![0.0, 0.0, f64::INFINITY, 0.0], 0).unwrap_err(),
            SkmError::NonFiniteCentroid { cluster: 1 }
        );
        assert!(CentroidSet::new(2, vec![], 0).is_err());
    }

    #[test]
    fn mean_shift_is_average_of_row_distances() {
        let a = CentroidSet::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], 0).unwrap();
        let b = CentroidSet::from_rows(&[vec![3.0, 4.0], vec![0.0, 2.0]], 1).unwrap();
        assert_eq!(a.mean_shift(&b).unwrap(), (5.0 + 2.0) / 2.0);
    }
}
