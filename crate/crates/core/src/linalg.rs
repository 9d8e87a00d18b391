//! Minimal sparse/dense linear algebra over [`Scalar`].
//!
//! The sparse matrices here are small CSR structures because the exact
//! rational backend needs non-`Copy` entries.

use crate::error::{LabError, Result};
use crate::scalar::Scalar;

/// Relative residual target for iterative solves.
pub const SOLVER_TOLERANCE: f64 = 1e-12;

/// Largest system handed to dense elimination after an iterative failure.
pub const DENSE_FALLBACK_LIMIT: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds an `n x n` matrix, summing duplicate entries and dropping exact zeros.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside a {n}x{n} matrix");
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                let last = values.last_mut().expect("non-empty");
                *last = last.clone() + v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((i, j), v) in rows.into_iter().zip(col_idx).zip(values) {
            if !v.is_zero() {
                keep_rows.push(i);
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for &i in &keep_rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    triplets.push((i, j, v.clone()));
                }
            }
        }
        Self::from_triplets(n, triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &T)> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(&self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k].clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .fold(T::zero(), |acc, (j, v)| acc + v.clone() * x[j].clone())
            })
            .collect()
    }

    /// `x^T A` (equal to `A x` for symmetric matrices).
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            if x[i].is_zero() {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] = out[j].clone() + x[i].clone() * v.clone();
            }
        }
        out
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (old_j, v) in self.row(old_i) {
                let new_j = position[old_j];
                if new_j != usize::MAX {
                    triplets.push((new_i, new_j, v.clone()));
                }
            }
        }
        Self::from_triplets(keep.len(), triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n]; self.n];
        for (i, j, v) in self.triplets() {
            out[i][j] = v.clone();
        }
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v.clone() - self.get(j, i)).abs().as_f64())
            .fold(0.0, f64::max)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Solves `A X = B` by Gaussian elimination; `b` holds the right-hand sides as columns.
///
/// Exact scalars pivot on the first nonzero entry, floating scalars on the
/// largest magnitude. A vanishing pivot is a structural error.
pub fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<Vec<T>>) -> Result<Vec<Vec<T>>> {
    let n = a.len();
    if b.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.abs().as_f64())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = if T::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())
        } else {
            (col..n)
                .max_by(|&r, &s| {
                    a[r][col]
                        .abs()
                        .partial_cmp(&a[s][col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .filter(|&r| a[r][col].abs().as_f64() > 1e-14 * scale)
        };
        let Some(p) = pivot else {
            return Err(LabError::Structural(format!(
                "singular system: no pivot in column {col} of {n}"
            )));
        };
        a.swap(col, p);
        b.swap(col, p);
        let inv = T::one() / a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() * inv.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            for k in 0..b[r].len() {
                let delta = factor.clone() * b[col][k].clone();
                b[r][k] = b[r][k].clone() - delta;
            }
        }
    }
    let m = b.first().map_or(0, Vec::len);
    let mut x = vec![vec![T::zero(); m]; n];
    for r in (0..n).rev() {
        for k in 0..m {
            let mut acc = b[r][k].clone();
            for c in r + 1..n {
                acc = acc - a[r][c].clone() * x[c][k].clone();
            }
            x[r][k] = acc / a[r][r].clone();
        }
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite system.
pub fn conjugate_gradient<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Vec<T>> {
    let n = a.dim();
    let b_norm = dot(b, b).as_f64().sqrt();
    let mut x = vec![T::zero(); n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| {
            if d.is_zero() {
                T::one()
            } else {
                T::one() / d
            }
        })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(r, d)| r.clone() * d.clone()).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 0..max_iterations {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap.as_f64() <= 0.0 {
            return Err(LabError::NonConvergence {
                solver: "conjugate gradient (matrix not positive definite)",
                residual,
                iterations: it,
            });
        }
        let alpha = rz.clone() / pap;
        for i in 0..n {
            x[i] = x[i].clone() + alpha.clone() * p[i].clone();
            r[i] = r[i].clone() - alpha.clone() * ap[i].clone();
        }
        residual = dot(&r, &r).as_f64().sqrt() / b_norm;
        if residual <= tolerance {
            // recompute the true residual to guard against drift
            let ax = a.mul_vec(&x);
            let true_res = ax
                .iter()
                .zip(b)
                .map(|(u, v)| (u.clone() - v.clone()).as_f64().powi(2))
                .sum::<f64>()
                .sqrt()
                / b_norm;
            if true_res <= tolerance * 10.0 {
                return Ok(x);
            }
            r = b.iter().zip(&ax).map(|(u, v)| u.clone() - v.clone()).collect();
        }
        z = r.iter().zip(&inv_diag).map(|(r, d)| r.clone() * d.clone()).collect();
        let rz_next = dot(&r, &z);
        let beta = rz_next.clone() / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i].clone() + beta.clone() * p[i].clone();
        }
    }
    Err(LabError::NonConvergence {
        solver: "conjugate gradient",
        residual,
        iterations: max_iterations,
    })
}

/// Solves a symmetric positive definite sparse system: direct elimination for
/// exact scalars and small systems, conjugate gradients otherwise with a
/// direct fallback.
pub fn solve_spd<T: Scalar>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.dim();
    if T::EXACT || n <= 256 {
        let rhs = b.iter().map(|v| vec![v.clone()]).collect();
        return Ok(solve_dense(a.to_dense(), rhs)?
            .into_iter()
            .map(|mut row| row.remove(0))
            .collect());
    }
    match conjugate_gradient(a, b, SOLVER_TOLERANCE, 50 * n + 1000) {
        Ok(x) => Ok(x),
        Err(LabError::NonConvergence { .. }) if n <= DENSE_FALLBACK_LIMIT => {
            let rhs = b.iter().map(|v| vec![v.clone()]).collect();
            Ok(solve_dense(a.to_dense(), rhs)?
                .into_iter()
                .map(|mut row| row.remove(0))
                .collect())
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn path_laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 0, -1.0), (1, 1, 4.0)],
        );
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn dense_exact_solve() {
        let a = vec![
            vec![BigRational::from_int(2), BigRational::from_int(1)],
            vec![BigRational::from_int(1), BigRational::from_int(3)],
        ];
        let b = vec![vec![BigRational::from_int(1)], vec![BigRational::from_int(2)]];
        let x = solve_dense(a, b).unwrap();
        assert_eq!(x[0][0], BigRational::ratio(1, 5));
        assert_eq!(x[1][0], BigRational::ratio(3, 5));
    }

    #[test]
    fn singular_dense_is_structural() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![vec![1.0], vec![1.0]];
        assert!(matches!(solve_dense(a, b), Err(LabError::Structural(_))));
    }

    #[test]
    fn cg_matches_dense() {
        let a = path_laplacian(400);
        let b: Vec<f64> = (0..400).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let x = conjugate_gradient(&a, &b, 1e-12, 10_000).unwrap();
        let y = solve_dense(a.to_dense(), b.iter().map(|v| vec![*v]).collect()).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v[0]).abs() < 1e-6 * v[0].abs().max(1.0));
        }
    }

    #[test]
    fn submatrix_and_vec_mul() {
        let a = path_laplacian(4);
        let s = a.submatrix(&[1, 2]);
        assert_eq!(s.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert_eq!(a.vec_mul(&[1.0, 0.0, 0.0, 0.0]), a.mul_vec(&[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(a.asymmetry(), 0.0);
    }
}
