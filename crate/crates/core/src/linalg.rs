//! Dense complex matrices and an LU solver with partial pivoting.
//!
//! Factorisation is delegated to `faer`; singular-pivot detection, the
//! growth factor and the 1-norm condition estimate are computed here on
//! top of the factors.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not square ({rows} x {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular: zero pivot at index {pivot}")]
    Singular { pivot: usize },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseComplexMatrix { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `v* A v`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<Complex64, LinalgError> {
        let av = self.matvec(v)?;
        Ok(v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum())
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add_assign(&mut self, other: &DenseComplexMatrix) -> Result<(), LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Dimension {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for DenseComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// LU factors of a square matrix with row pivoting.
pub struct LuFactorization {
    lu: faer::linalg::solvers::PartialPivLu<Complex64>,
    n: usize,
    norm1: f64,
    growth: f64,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization")
            .field("n", &self.n)
            .field("norm1", &self.norm1)
            .field("growth", &self.growth)
            .finish()
    }
}

impl LuFactorization {
    pub fn new(a: &DenseComplexMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let lu = a.to_faer().partial_piv_lu();
        let u = lu.U();
        let mut max_u: f64 = 0.0;
        for j in 0..n {
            if u[(j, j)] == Complex64::new(0.0, 0.0) {
                return Err(LinalgError::Singular { pivot: j });
            }
            for i in 0..=j {
                max_u = max_u.max(u[(i, j)].norm());
            }
        }
        let max_a = a.max_abs();
        Ok(LuFactorization {
            lu,
            n,
            norm1: a.norm1(),
            growth: if max_a > 0.0 { max_u / max_a } else { 1.0 },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `max |U_ij| / max |A_ij|`.
    pub fn growth_factor(&self) -> f64 {
        self.growth
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        self.solve_with(rhs, false)
    }

    /// Solves `A* x = rhs`.
    pub fn solve_adjoint(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        self.solve_with(rhs, true)
    }

    fn solve_with(&self, rhs: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>, LinalgError> {
        if rhs.len() != self.n {
            return Err(LinalgError::Dimension {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let mut b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        if adjoint {
            self.lu.solve_adjoint_in_place(&mut b);
        } else {
            self.lu.solve_in_place(&mut b);
        }
        Ok((0..self.n).map(|i| b[(i, 0)]).collect())
    }

    /// Hager/Higham estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let one_norm = |v: &[Complex64]| v.iter().map(|z| z.norm()).sum::<f64>();
        let sign = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter()
                .map(|z| {
                    let m = z.norm();
                    if m > 0.0 {
                        z / m
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect()
        };
        let solve = |v: &[Complex64], adj: bool| self.solve_with(v, adj).expect("dimension checked");

        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut y = solve(&x, false);
        let mut est = one_norm(&y);
        if n > 1 {
            let mut z = solve(&sign(&y), true);
            let mut last_j = usize::MAX;
            for _ in 0..5 {
                let (j, zmax) = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i, v.norm()))
                    .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
                let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
                if zmax <= ztx || j == last_j {
                    break;
                }
                last_j = j;
                x = vec![Complex64::new(0.0, 0.0); n];
                x[j] = Complex64::new(1.0, 0.0);
                y = solve(&x, false);
                let new_est = one_norm(&y);
                if new_est <= est {
                    break;
                }
                est = new_est;
                z = solve(&sign(&y), true);
            }
            // alternating-sign probe guards against the rare stalls of the
            // greedy iteration
            let alt: Vec<Complex64> = (0..n)
                .map(|i| {
                    let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(s * (1.0 + i as f64 / (n - 1) as f64), 0.0)
                })
                .collect();
            let alt_est = 2.0 * one_norm(&solve(&alt, false)) / (3.0 * n as f64);
            est = est.max(alt_est);
        }
        (self.norm1 * est).max(1.0)
    }
}

/// Solves `A U = F` by LU with partial pivoting.
pub fn lu_solve(a: &DenseComplexMatrix, f: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    if f.len() != a.rows {
        return Err(LinalgError::Dimension {
            expected: a.rows,
            got: f.len(),
        });
    }
    LuFactorization::new(a)?.solve(f)
}

/// 1-norm condition estimate; `+inf` for a singular matrix.
pub fn condition_estimate(a: &DenseComplexMatrix) -> f64 {
    match LuFactorization::new(a) {
        Ok(lu) => lu.condition_estimate(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_solve_is_exact() {
        let f = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)];
        let u = lu_solve(&DenseComplexMatrix::identity(3), &f).unwrap();
        assert_eq!(u, f);
    }

    #[test]
    fn diagonal_solve() {
        let d = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let a = DenseComplexMatrix::from_diagonal(&d);
        let u = lu_solve(&a, &d).unwrap();
        for z in u {
            assert!((z - c(1.0, 0.0)).norm() <= 1e-14);
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let mut a = DenseComplexMatrix::identity(4);
        a[(2, 2)] = c(0.0, 0.0);
        match lu_solve(&a, &[c(1.0, 0.0); 4]) {
            Err(LinalgError::Singular { pivot }) => assert_eq!(pivot, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert_eq!(condition_estimate(&a), f64::INFINITY);
    }

    #[test]
    fn dimension_errors() {
        let a = DenseComplexMatrix::zeros(2, 3);
        assert!(matches!(LuFactorization::new(&a), Err(LinalgError::NotSquare { .. })));
        let b = DenseComplexMatrix::identity(3);
        assert!(matches!(lu_solve(&b, &[c(1.0, 0.0)]), Err(LinalgError::Dimension { .. })));
    }

    #[test]
    fn condition_of_simple_matrices() {
        assert!((condition_estimate(&DenseComplexMatrix::identity(5)) - 1.0).abs() <= 1e-12);
        let a = DenseComplexMatrix::from_diagonal(&[c(10.0, 0.0), c(0.1, 0.0)]);
        assert!((condition_estimate(&a) - 100.0).abs() <= 1e-8);
    }

    #[test]
    fn adjoint_and_quadratic_form() {
        let a = DenseComplexMatrix::from_fn(3, 3, |i, j| c(i as f64, j as f64 + 1.0));
        let aa = a.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(aa[(i, j)], a[(j, i)].conj());
            }
        }
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(1.0, -1.0)];
        let q = a.quadratic_form(&v).unwrap();
        let qa = aa.quadratic_form(&v).unwrap();
        assert!((q - qa.conj()).norm() < 1e-12);
    }
}
