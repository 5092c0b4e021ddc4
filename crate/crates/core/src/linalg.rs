//! Small dense and sparse complex linear algebra.
//!
//! The matrices in this crate are tiny (the mode count `J`) or moderately
//! sized (the truncated Fock dimension, at most a few thousand), so a plain
//! row-major `Vec` backs everything.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{re, Real, C};

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = re(T::one());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = re(d);
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must be a square.
    pub fn from_row_major(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C<T>] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<C<T>> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn real_diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(C::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + y * a;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// First `(row, col)` with `|A[r][c] - conj(A[c][r])| > tol`, scanning the
    /// upper triangle including the diagonal.
    pub fn hermiticity_violation(&self, tol: T) -> Option<(usize, usize)> {
        for r in 0..self.dim {
            for c in r..self.dim {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > tol {
                    return Some((r, c));
                }
            }
        }
        None
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// In-place projection onto the hermitian part, `(A + A^dagger) / 2`.
    pub fn hermitize(&mut self) {
        let half = T::lit(0.5);
        for r in 0..self.dim {
            let d = self[(r, r)].re;
            self[(r, r)] = re(d);
            for c in r + 1..self.dim {
                let avg = (self[(r, c)] + self[(c, r)].conj()) * half;
                self[(r, c)] = avg;
                self[(c, r)] = avg.conj();
            }
        }
    }

    /// Eigenvalues of a hermitian matrix in ascending order.
    ///
    /// Uses cyclic Jacobi on the real symmetric embedding `[[A, -B], [B, A]]`
    /// of `A + iB`, whose spectrum is that of the hermitian matrix with every
    /// eigenvalue doubled.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let m = 2 * n;
        let mut a = vec![T::zero(); m * m];
        for r in 0..n {
            for c in 0..n {
                let z = self[(r, c)];
                a[r * m + c] = z.re;
                a[(r + n) * m + (c + n)] = z.re;
                a[r * m + (c + n)] = -z.im;
                a[(r + n) * m + c] = z.im;
            }
        }
        let mut ev = jacobi_eigenvalues(&mut a, m);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev.into_iter().step_by(2).collect()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Positive semidefiniteness test via Cholesky of `A + tol * I`.
    ///
    /// Cheaper than a full eigendecomposition for the Fock-space matrices.
    pub fn is_psd(&self, tol: T) -> bool {
        let n = self.dim;
        let mut l = vec![C::<T>::zero(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)].re + tol;
            for k in 0..j {
                d = d - l[j * n + k].norm_sqr();
            }
            if !(d > T::zero()) {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = re(djj);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        true
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        &self.data[r * self.dim + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.dim + c]
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.is_zero() {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] = out.data[r * n + c] + a * rhs.data[k * n + c];
                }
            }
        }
        out
    }
}

fn jacobi_eigenvalues<T: Real>(a: &mut [T], n: usize) -> Vec<T> {
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for r in 0..n {
            for c in 0..n {
                let v = a[r * n + c] * a[r * n + c];
                total = total + v;
                if r != c {
                    off = off + v;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Solves the dense real system `a x = b` (row-major `a`, `n x n`) by Gaussian
/// elimination with partial pivoting.
pub fn solve_real<T: Real>(mut a: Vec<T>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: a.len(),
        });
    }
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = scale * T::epsilon() * T::count(n.max(1));
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= tiny {
            return Err(Error::SingularSystem {
                column: col,
                pivot: pmax.to_f64_lossy(),
            });
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s = s - a[r * n + k] * x[k];
        }
        x[r] = s / a[r * n + r];
    }
    Ok(x)
}

/// Row-compressed complex sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    rows: Vec<Vec<(usize, C<T>)>>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    /// Sums duplicate entries; drops exact zeros.
    pub fn from_triplets(dim: usize, entries: impl IntoIterator<Item = (usize, usize, C<T>)>) -> Self {
        let mut rows: Vec<Vec<(usize, C<T>)>> = vec![Vec::new(); dim];
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "sparse entry out of bounds");
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C<T>)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 = last.1 + v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|e| !e.1.is_zero());
            *row = merged;
        }
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, C<T>)] {
        &self.rows[r]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C<T> {
        self.rows[r]
            .iter()
            .find(|e| e.0 == c)
            .map(|e| e.1)
            .unwrap_or_else(C::zero)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(c, b) in &other.rows[k] {
                    out.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, out)
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = m[(r, c)] + v;
        }
        m
    }

    /// `self * m`
    pub fn mul_dense(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for (r, row) in self.rows.iter().enumerate() {
            let out_row = &mut dst[r * n..(r + 1) * n];
            for &(k, a) in row {
                let in_row = &src[k * n..(k + 1) * n];
                for (o, x) in out_row.iter_mut().zip(in_row) {
                    *o = *o + a * x;
                }
            }
        }
        out
    }

    /// `m * self`
    pub fn dense_mul(&self, m: &CMatrix<T>) -> CMatrix<T> {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for x in 0..n {
            let in_row = &src[x * n..(x + 1) * n];
            let out_row = &mut dst[x * n..(x + 1) * n];
            for (k, row) in self.rows.iter().enumerate() {
                let a = in_row[k];
                if a.is_zero() {
                    continue;
                }
                for &(c, v) in row {
                    out_row[c] = out_row[c] + a * v;
                }
            }
        }
        out
    }

    /// `Tr(self * m)`
    pub fn trace_with(&self, m: &CMatrix<T>) -> C<T> {
        let mut acc = C::zero();
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                acc = acc + v * m[(c, r)];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn eigenvalues_of_pauli_y_plus_identity() {
        let m = CMatrix::<f64>::from_row_major(
            2,
            vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)],
        )
        .unwrap();
        let ev = m.hermitian_eigenvalues();
        assert!((ev[0] - 0.0).abs() < 1e-14);
        assert!((ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn psd_detection() {
        let psd = CMatrix::from_real_diagonal(&[1.0, 0.0, 2.0]);
        assert!(psd.is_psd(1e-12));
        let not = CMatrix::from_real_diagonal(&[1.0, -1e-3, 2.0]);
        assert!(!not.is_psd(1e-8));
    }

    #[test]
    fn real_solve_with_pivoting() {
        let a = vec![0.0, 2.0, 1.0, 1.0];
        let x = solve_real::<f64>(a, vec![4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(matches!(
            solve_real(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn sparse_products_match_dense() {
        let s = SparseMatrix::from_triplets(
            3,
            vec![(0, 1, c(1.0, 0.5)), (2, 0, c(-2.0, 0.0)), (1, 1, c(0.0, 3.0))],
        );
        let m = CMatrix::from_fn(3, |r, k| c(r as f64 + 1.0, k as f64 - 1.0));
        let d = s.to_dense();
        assert!(s.mul_dense(&m).max_abs_diff(&(&d * &m)) < 1e-14);
        assert!(s.dense_mul(&m).max_abs_diff(&(&m * &d)) < 1e-14);
        assert!(s.adjoint().to_dense().max_abs_diff(&d.adjoint()) < 1e-15);
        assert!((s.trace_with(&m) - (&d * &m).trace()).norm() < 1e-14);
        assert!(s.matmul(&s).to_dense().max_abs_diff(&(&d * &d)) < 1e-14);
    }
}
