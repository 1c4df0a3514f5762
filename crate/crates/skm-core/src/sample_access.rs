//! Sampling access to a d x n data matrix whose columns are the points.
//!
//! Beyond plain entry reads, the structure answers three kinds of weighted
//! draws in O(log(nd)) each, which is what makes sublinear iterations
//! possible:
//!
//! * a column index proportional to its Euclidean norm,
//! * a row index within one column proportional to the squared entry,
//! * a global (column, row) pair proportional to the absolute entry.
//!
//! Column norms and the aggregate norms are precomputed with compensated
//! summation at build time. Every entry read is counted in a relaxed atomic
//! so callers can audit how much of the matrix an algorithm actually touched;
//! norm lookups and sampler draws are support operations and are not counted
//! as entry reads.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cumtree::{kahan_sum, push_prefix, sample_prefix, CumulativeTree};
use crate::error::{Result, SkmError};
use crate::rng::{stream, SkmRng};

/// How the spectral upper bound in [`MatrixNorms`] is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum SpectralMode {
    /// Use the Frobenius norm, which always dominates the spectral norm.
    /// This is the default: free and safe, if pessimistic.
    #[default]
    FrobeniusUpper,
    /// Estimate the top singular value by power iteration on the d x d Gram
    /// matrix, converging to `tol` relative accuracy (at most `max_iters`
    /// matrix-vector products). Deterministic: the start vector comes from a
    /// fixed seed.
    PowerIteration { tol: f64, max_iters: usize },
}

/// Aggregate norms of the matrix, as used by sample-size and cost formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    /// Upper bound (or tight estimate, see `mode`) on the spectral norm.
    pub spectral_upper: f64,
    /// Frobenius norm.
    pub frobenius: f64,
    /// Sum of column Euclidean norms.
    pub norm_21: f64,
    /// Sum of absolute entries.
    pub norm_11: f64,
    /// Largest column Euclidean norm.
    pub norm_2inf: f64,
    /// How `spectral_upper` was computed.
    pub mode: SpectralMode,
}

/// Data matrix with sampling access. Columns are points.
#[derive(Debug)]
pub struct SampleAccessMatrix {
    d: usize,
    n: usize,
    /// Column-major entries: `values[i * d + l]` is row `l` of column `i`.
    values: Vec<f64>,
    /// Euclidean norm per column.
    col_norms: Vec<f64>,
    /// Squared Euclidean norm per column (cached; equals `col_norms[i]^2` up
    /// to the rounding of the compensated sum it came from).
    col_sq_norms: Vec<f64>,
    /// l1 norm per column.
    col_l1_norms: Vec<f64>,
    frobenius: f64,
    norm_21: f64,
    norm_11: f64,
    norm_2inf: f64,
    /// Column draws proportional to `col_norms`.
    tree_cols: CumulativeTree,
    /// Per-column prefix sums of squared entries, flattened column-major:
    /// `entry_prefix[i*d + l]` is the cumulative squared weight within column
    /// `i`. The per-column total is `col_sq_norms[i]`.
    entry_prefix: Vec<f64>,
    /// Global (column, row) draws proportional to absolute entries, over the
    /// flattened column-major index.
    tree_global: CumulativeTree,
    /// Entry reads performed so far (relaxed; exact under any schedule since
    /// increments are unconditional).
    reads: AtomicU64,
}

impl SampleAccessMatrix {
    /// Build from column-major values (`values[i*d + l]`, column `i`, row `l`).
    ///
    /// Validates shape and finiteness, then precomputes all norms and sampling
    /// indices in O(nd).
    pub fn from_columns(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(SkmError::EmptyMatrix);
        }
        if values.len() != d * n {
            return Err(SkmError::DimensionMismatch {
                expected: d * n,
                got: values.len(),
            });
        }
        for (flat, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SkmError::NonFiniteEntry {
                    col: flat / d,
                    row: flat % d,
                });
            }
        }

        let mut col_norms = Vec::with_capacity(n);
        let mut col_sq_norms = Vec::with_capacity(n);
        let mut col_l1_norms = Vec::with_capacity(n);
        let mut entry_prefix = Vec::with_capacity(d * n);
        for i in 0..n {
            let col = &values[i * d..(i + 1) * d];
            let sq = push_prefix_of_squares(col, &mut entry_prefix);
            col_sq_norms.push(sq);
            col_norms.push(sq.sqrt());
            col_l1_norms.push(kahan_sum(col.iter().map(|v| v.abs())));
        }

        let frobenius = kahan_sum(col_sq_norms.iter().copied()).sqrt();
        let norm_21 = kahan_sum(col_norms.iter().copied());
        let norm_11 = kahan_sum(col_l1_norms.iter().copied());
        let norm_2inf = col_norms.iter().cloned().fold(0.0, f64::max);

        let tree_cols = CumulativeTree::from_weights(&col_norms)?;
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let tree_global = CumulativeTree::from_weights(&abs)?;

        Ok(Self {
            d,
            n,
            values,
            col_norms,
            col_sq_norms,
            col_l1_norms,
            frobenius,
            norm_21,
            norm_11,
            norm_2inf,
            tree_cols,
            entry_prefix,
            tree_global,
            reads: AtomicU64::new(0),
        })
    }

    /// Number of points (columns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension (rows).
    pub fn d(&self) -> usize {
        self.d
    }

    /// Read one entry (column `i`, row `l`). Counts one entry read.
    pub fn entry(&self, i: usize, l: usize) -> Result<f64> {
        self.check_col(i)?;
        if l >= self.d {
            return Err(SkmError::RowOutOfRange { row: l, d: self.d });
        }
        self.reads.fetch_add(1, Ordering::Relaxed);
        Ok(self.values[i * self.d + l])
    }

    /// Read a whole column. Counts `d` entry reads.
    pub fn column(&self, i: usize) -> Result<&[f64]> {
        self.check_col(i)?;
        self.reads.fetch_add(self.d as u64, Ordering::Relaxed);
        Ok(&self.values[i * self.d..(i + 1) * self.d])
    }

    /// Euclidean norm of column `i` (support lookup, not an entry read).
    pub fn col_norm(&self, i: usize) -> Result<f64> {
        self.check_col(i)?;
        Ok(self.col_norms[i])
    }

    /// Squared Euclidean norm of column `i`.
    pub fn col_sq_norm(&self, i: usize) -> Result<f64> {
        self.check_col(i)?;
        Ok(self.col_sq_norms[i])
    }

    /// l1 norm of column `i`.
    pub fn col_l1_norm(&self, i: usize) -> Result<f64> {
        self.check_col(i)?;
        Ok(self.col_l1_norms[i])
    }

    /// Cumulative squared-entry prefix of column `i` (for the in-column
    /// sampler; exposed so batched callers can draw without re-validating).
    pub(crate) fn entry_prefix_of(&self, i: usize) -> &[f64] {
        &self.entry_prefix[i * self.d..(i + 1) * self.d]
    }

    /// Frobenius norm of the matrix.
    pub fn frobenius(&self) -> f64 {
        self.frobenius
    }

    /// Sum of Euclidean column norms.
    pub fn norm_21(&self) -> f64 {
        self.norm_21
    }

    /// Entrywise l1 norm.
    pub fn norm_11(&self) -> f64 {
        self.norm_11
    }

    /// Largest Euclidean column norm.
    pub fn norm_2inf(&self) -> f64 {
        self.norm_2inf
    }

    /// Aggregate norms, with the spectral bound computed per `mode`.
    pub fn norms(&self, mode: SpectralMode) -> Result<MatrixNorms> {
        let spectral_upper = match mode {
            SpectralMode::FrobeniusUpper => self.frobenius,
            SpectralMode::PowerIteration { tol, max_iters } => {
                self.power_iteration(tol, max_iters)?
            }
        };
        Ok(MatrixNorms {
            spectral_upper,
            frobenius: self.frobenius,
            norm_21: self.norm_21,
            norm_11: self.norm_11,
            norm_2inf: self.norm_2inf,
            mode,
        })
    }

    /// Draw a column index with probability `col_norm(i) / norm_21`.
    pub fn sample_column_by_norm<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.tree_cols
            .sample(rng)
            .map_err(|_| SkmError::DegenerateDistribution {
                what: "column-norm distribution of an all-zero matrix".into(),
            })
    }

    /// Draw a row index within column `i` with probability
    /// `entry^2 / col_sq_norm(i)`.
    pub fn sample_row_in_column<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        self.check_col(i)?;
        let total = self.col_sq_norms[i];
        if total <= 0.0 {
            return Err(SkmError::DegenerateDistribution {
                what: format!("squared-entry distribution of all-zero column {i}"),
            });
        }
        Ok(sample_prefix(self.entry_prefix_of(i), total, rng))
    }

    /// Draw a `(column, row)` pair with probability `|entry| / norm_11`.
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize)> {
        let flat = self
            .tree_global
            .sample(rng)
            .map_err(|_| SkmError::DegenerateDistribution {
                what: "absolute-entry distribution of an all-zero matrix".into(),
            })?;
        Ok((flat / self.d, flat % self.d))
    }

    /// Draw a column index uniformly.
    pub fn sample_column_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.n)
    }

    /// Entry reads performed so far.
    pub fn entry_reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// Reset the entry-read counter to zero.
    pub fn reset_entry_reads(&self) {
        self.reads.store(0, Ordering::Relaxed);
    }

    /// Bulk-account `k` entry reads. Used by batched access paths (e.g. the
    /// inner-product estimator) that read through a cached column slice
    /// instead of calling [`entry`](Self::entry) in a hot loop.
    pub fn add_entry_reads(&self, k: u64) {
        self.reads.fetch_add(k, Ordering::Relaxed);
    }

    fn check_col(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(SkmError::ColumnOutOfRange { col: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Top singular value via power iteration on the d x d Gram matrix
    /// `G = V V^T`, with a fixed seeded start vector.
    fn power_iteration(&self, tol: f64, max_iters: usize) -> Result<f64> {
        if !(tol > 0.0) || max_iters == 0 {
            return Err(SkmError::InvalidParams {
                reason: format!("power iteration needs tol > 0 and max_iters > 0, got tol={tol}, max_iters={max_iters}"),
            });
        }
        if self.frobenius == 0.0 {
            return Ok(0.0);
        }
        let d = self.d;
        // G = sum_i v_i v_i^T, built column by column.
        let mut gram = vec![0.0; d * d];
        for i in 0..self.n {
            let col = &self.values[i * d..(i + 1) * d];
            for (r, &vr) in col.iter().enumerate() {
                if vr == 0.0 {
                    continue;
                }
                let row = &mut gram[r * d..(r + 1) * d];
                for (c, &vc) in col.iter().enumerate() {
                    row[c] += vr * vc;
                }
            }
        }

        let mut rng: SkmRng = stream(0x5EED_5EED);
        let mut x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.1).collect();
        normalize(&mut x);
        let mut y = vec![0.0; d];
        let mut prev = 0.0f64;
        for _ in 0..max_iters {
            for r in 0..d {
                y[r] = gram[r * d..(r + 1) * d]
                    .iter()
                    .zip(x.iter())
                    .map(|(g, xi)| g * xi)
                    .sum();
            }
            // Rayleigh quotient for G (x is unit), i.e. the squared singular value.
            let lambda: f64 = y.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let sigma = lambda.max(0.0).sqrt();
            if (sigma - prev).abs() <= tol * 0.25 * sigma.max(f64::MIN_POSITIVE) {
                return Ok(sigma);
            }
            prev = sigma;
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                // Start vector fell in the null space; restart deterministically.
                x = (0..d).map(|_| rng.random::<f64>() + 0.1).collect();
                normalize(&mut x);
                continue;
            }
            for (xi, yi) in x.iter_mut().zip(y.iter()) {
                *xi = yi / norm;
            }
        }
        Err(SkmError::PowerIterationStall { iters: max_iters })
    }
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
}

/// Push compensated prefix sums of squares of `col` onto `out`; returns the
/// total (the squared Euclidean norm of the column).
fn push_prefix_of_squares(col: &[f64], out: &mut Vec<f64>) -> f64 {
    let squares: Vec<f64> = col.iter().map(|v| v * v).collect();
    // Entries were validated finite; squares are nonnegative, so this cannot fail.
    push_prefix(&squares, out).expect("finite entries produce valid square weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn matrix_2x2() -> SampleAccessMatrix {
        // Columns: v_0 = (3, 4), v_1 = (0, 2). Column-major values.
        SampleAccessMatrix::from_columns(2, 2, vec![3.0, 4.0, 0.0, 2.0]).unwrap()
    }

    #[test]
    fn entry_reads_and_range_errors() {
        let m = matrix_2x2();
        assert_eq!(m.entry(0, 1).unwrap(), 4.0);
        assert_eq!(m.entry(1, 0).unwrap(), 0.0);
        assert_eq!(m.entry_reads(), 2);
        assert_eq!(
            m.entry(2, 0).unwrap_err(),
            SkmError::ColumnOutOfRange { col: 2, n: 2 }
        );
        assert_eq!(
            m.entry(0, 2).unwrap_err(),
            SkmError::RowOutOfRange { row: 2, d: 2 }
        );
        m.reset_entry_reads();
        m.column(1).unwrap();
        assert_eq!(m.entry_reads(), 2);
    }

    #[test]
    fn norms_of_known_matrix() {
        let m = matrix_2x2();
        assert_eq!(m.col_norm(0).unwrap(), 5.0);
        assert_eq!(m.col_norm(1).unwrap(), 2.0);
        assert_eq!(m.col_l1_norm(0).unwrap(), 7.0);
        let norms = m.norms(SpectralMode::FrobeniusUpper).unwrap();
        assert_eq!(norms.norm_21, 7.0);
        assert_eq!(norms.norm_11, 9.0);
        assert_eq!(norms.norm_2inf, 5.0);
        assert!((norms.frobenius - 29.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(norms.spectral_upper, norms.frobenius);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            SampleAccessMatrix::from_columns(0, 2, vec![]).unwrap_err(),
            SkmError::EmptyMatrix
        );
        assert_eq!(
            SampleAccessMatrix::from_columns(2, 2, vec![1.0; 3]).unwrap_err(),
            SkmError::DimensionMismatch {
                expected: 4,
                got: 3
            }
        );
        assert_eq!(
            SampleAccessMatrix::from_columns(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]).unwrap_err(),
            SkmError::NonFiniteEntry { col: 0, row: 1 }
        );
    }

    #[test]
    fn zero_matrix_samplers_are_degenerate() {
        let m = SampleAccessMatrix::from_columns(2, 2, vec![0.0; 4]).unwrap();
        let mut rng = stream(1);
        assert!(matches!(
            m.sample_column_by_norm(&mut rng),
            Err(SkmError::DegenerateDistribution { .. })
        ));
        assert!(matches!(
            m.sample_entry(&mut rng),
            Err(SkmError::DegenerateDistribution { .. })
        ));
        assert!(matches!(
            m.sample_row_in_column(0, &mut rng),
            Err(SkmError::DegenerateDistribution { .. })
        ));
        // Uniform draws still work: they do not depend on weights.
        let i = m.sample_column_uniform(&mut rng);
        assert!(i < 2);
    }

    #[test]
    fn global_entry_sampler_decodes_column_major_flat_index() {
        // Single dominant entry: column 1, row 0.
        let m = SampleAccessMatrix::from_columns(2, 3, vec![0.0, 0.0, 5.0, 0.0, 0.0, 0.0]).unwrap();
        let mut rng = stream(2);
        for _ in 0..100 {
            assert_eq!(m.sample_entry(&mut rng).unwrap(), (1, 0));
        }
    }

    #[test]
    fn power_iteration_matches_rank_one_truth() {
        // Rank-one matrix: spectral norm = |a| * |b| for V = a b^T.
        let a = [2.0, -1.0];
        let b = [1.0, 2.0, 2.0];
        let mut values = Vec::new();
        for &bi in &b {
            values.extend(a.iter().map(|&ai| ai * bi));
        }
        let m = SampleAccessMatrix::from_columns(2, 3, values).unwrap();
        let norms = m
            .norms(SpectralMode::PowerIteration {
                tol: 1e-9,
                max_iters: 10_000,
            })
            .unwrap();
        let truth = (5.0f64).sqrt() * 3.0;
        assert!((norms.spectral_upper - truth).abs() <= 1e-6 * truth);
        // Frobenius equals spectral for rank one.
        assert!((norms.frobenius - truth).abs() <= 1e-12 * truth);
    }
}
