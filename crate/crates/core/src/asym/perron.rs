//! Power iteration for the Perron eigenpair of a nonnegative linear operator.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// A square linear map `y = M x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self { n, data: rows.concat() }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Compressed sparse row matrix, assembled from triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { n, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[p] != 0.0 {
                    cols.push(self.cols[p]);
                    vals.push(self.vals[p]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entry lookup by scan of the row; intended for tests and diagnostics.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&p| self.cols[p] == j)
            .map_or(0.0, |p| self.vals[p])
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = (self.row_ptr[r]..self.row_ptr[r + 1]).map(|p| self.vals[p] * x[self.cols[p]]).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronResult {
    /// Nonnegative eigenvector with unit L1 norm.
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    /// `||M v - lambda v||_1 / lambda` at `vector`.
    pub residual: f64,
    pub iterations: usize,
}

/// Perron eigenpair by power iteration from the uniform vector.
pub fn perron_vector<M: LinearOperator + ?Sized>(m: &M, tol: f64, max_iter: usize) -> Result<PerronResult> {
    let start = vec![1.0; m.dim()];
    perron_vector_from(m, &start, tol, max_iter)
}

/// Power iteration with L1 normalization from a nonnegative start vector. Entries that
/// are zero in `start` stay zero unless the operator fills them.
pub fn perron_vector_from<M: LinearOperator + ?Sized>(
    m: &M,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PerronResult> {
    let n = m.dim();
    if n == 0 || start.len() != n {
        return Err(Error::InvalidInput("power iteration needs a nonempty start vector of matching size".into()));
    }
    if start.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput("start vector must be nonnegative".into()));
    }
    let norm: f64 = start.iter().sum();
    if norm <= 0.0 {
        return Err(Error::InvalidInput("start vector is zero".into()));
    }
    let mut x: Vec<f64> = start.iter().map(|v| v / norm).collect();
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        m.apply(&x, &mut y);
        let lambda: f64 = y.iter().sum();
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonConvergence { iterations: iter, residual });
        }
        residual = y.iter().zip(&x).map(|(a, b)| (a - lambda * b).abs()).sum::<f64>() / lambda;
        if residual <= tol {
            return Ok(PerronResult { vector: x, eigenvalue: lambda, residual, iterations: iter });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / lambda;
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let r = perron_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.vector[0] - 0.5).abs() < 1e-12);
        assert!((r.eigenvalue - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_projection() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let r = perron_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.vector, vec![1.0, 0.0]);
        assert_eq!(r.eigenvalue, 1.0);
    }

    #[test]
    fn nilpotent_fails() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(perron_vector(&m, DEFAULT_TOL, 100), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn periodic_reports_residual() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let err = perron_vector_from(&m, &[1.0, 0.0], 1e-12, 50).unwrap_err();
        match err {
            Error::NonConvergence { iterations, residual } => {
                assert_eq!(iterations, 50);
                assert!((residual - 2.0).abs() < 1e-12);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = 12;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let m = DenseMatrix::from_rows(&rows);
            let r = perron_vector(&m, 1e-13, DEFAULT_MAX_ITER).unwrap();
            let mut y = vec![0.0; n];
            m.apply(&r.vector, &mut y);
            let res: f64 = y.iter().zip(&r.vector).map(|(a, b)| (a - r.eigenvalue * b).abs()).sum::<f64>() / r.eigenvalue;
            assert!(res <= 1e-10);
            let reference = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let rho = reference.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((r.eigenvalue - rho).abs() < 1e-8, "{} vs {rho}", r.eigenvalue);
        }
    }

    #[test]
    fn csr_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 15;
        let mut dense = DenseMatrix::zeros(n);
        let mut triplets = Vec::new();
        for _ in 0..60 {
            let (i, j, v) = (rng.random_range(0..n), rng.random_range(0..n), rng.random::<f64>());
            dense.set(i, j, dense.get(i, j) + v);
            triplets.push((i, j, v));
        }
        let csr = CsrMatrix::from_triplets(n, triplets);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        dense.apply(&x, &mut a);
        csr.apply(&x, &mut b);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        for i in 0..n {
            for j in 0..n {
                assert!((dense.get(i, j) - csr.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
