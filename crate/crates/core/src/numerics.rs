//! Dense double-precision linear algebra for the small matrices used by the
//! controller (state dimension up to ~20, horizons up to ~64).
//!
//! Everything here is a pure function of its inputs. Storage is row-major.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Absolute tolerance on `|S - S^T|` accepted as "symmetric".
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Cholesky pivots at or below this fraction of `max|S|` are rejected.
const PIVOT_TOL: f64 = 1e-14;

/// Relative rank tolerance for least-squares solves.
const RANK_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries. Rejects wrong lengths and NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::dims(
                    format!("{n_cols} columns"),
                    format!("{} columns", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// A single-column matrix.
    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// `(S + S^T) / 2`.
    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }
        s
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `x^T self x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Submatrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                m[(i, jj)] = self[(i, j)];
            }
        }
        m
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        m
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "elementwise dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Euclidean norm, scaled so that tiny or huge entries do not under/overflow.
pub fn norm2(v: &[f64]) -> f64 {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return peak;
    }
    peak * v.iter().map(|x| (x / peak) * (x / peak)).sum::<f64>().sqrt()
}

fn require_square(m: &Matrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())))
    }
}

fn require_symmetric(m: &Matrix) -> Result<()> {
    require_square(m)?;
    let asymmetry = m.asymmetry();
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { asymmetry });
    }
    Ok(())
}

/// Lower-triangular `L` with `L L^T = S`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    require_symmetric(s)?;
    let n = s.rows();
    let floor = PIVOT_TOL * s.max_abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= floor || d <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(b.rows(), n);
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    require_symmetric(s)?;
    let n = s.rows();
    let mut a = s.symmetrize();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * (diag + off) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- J^T A J, rotation in the (p, q) plane.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let work = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let (rows, cols) = (work.rows(), work.cols());
    // Column-major copy so column rotations touch contiguous memory.
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| work.column(j)).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = norm_sq(&u[p]);
                let beta = norm_sq(&u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let up = u[p][i];
                    let uq = u[q][i];
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = u.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Least-squares solution of `M u ~ y` by Householder QR with column pivoting.
pub fn solve_least_squares(m: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (m.rows(), m.cols());
    if y.len() != rows {
        return Err(Error::dims(format!("{rows}-vector"), format!("{}-vector", y.len())));
    }
    if rows < cols {
        return Err(Error::RankDeficient { column: rows });
    }
    let mut a = m.clone();
    let mut b = y.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut lead = 0.0;

    for k in 0..cols {
        // Pivot: remaining column with the largest trailing norm.
        let trailing_norm = |a: &Matrix, j: usize| (k..rows).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>();
        let (pivot, pivot_norm_sq) = (k..cols)
            .map(|j| (j, trailing_norm(&a, j)))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot != k {
            for i in 0..rows {
                let tmp = a[(i, k)];
                a[(i, k)] = a[(i, pivot)];
                a[(i, pivot)] = tmp;
            }
            perm.swap(k, pivot);
        }
        let norm = pivot_norm_sq.sqrt();
        if k == 0 {
            lead = norm;
        }
        if norm == 0.0 || norm <= RANK_TOL * lead {
            return Err(Error::RankDeficient { column: perm[k] });
        }

        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vtv = norm_sq(&v);
        if vtv > 0.0 {
            for j in (k + 1)..cols {
                let proj = (k..rows).map(|i| v[i - k] * a[(i, j)]).sum::<f64>() * 2.0 / vtv;
                for i in k..rows {
                    a[(i, j)] -= proj * v[i - k];
                }
            }
            let proj = (k..rows).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vtv;
            for i in k..rows {
                b[i] -= proj * v[i - k];
            }
        }
        a[(k, k)] = alpha;
        for i in (k + 1)..rows {
            a[(i, k)] = 0.0;
        }
    }

    let mut z = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut v = b[k];
        for j in (k + 1)..cols {
            v -= a[(k, j)] * z[j];
        }
        z[k] = v / a[(k, k)];
    }
    let mut u = vec![0.0; cols];
    for (k, &p) in perm.iter().enumerate() {
        u[p] = z[k];
    }
    Ok(u)
}

/// Eigenvalues (ascending) of `M K^{-1}` for symmetric `M` and SPD `K`,
/// computed through the congruence `L^{-1} M L^{-T}` with `K = L L^T`.
pub fn congruence_eigenvalues(m: &Matrix, k: &Matrix) -> Result<Vec<f64>> {
    require_symmetric(m)?;
    if m.rows() != k.rows() {
        return Err(Error::dims(
            format!("{}x{}", k.rows(), k.cols()),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let l = cholesky(k)?;
    let x = solve_lower(&l, m);
    let y = solve_lower(&l, &x.transpose());
    sym_eigenvalues(&y.symmetrize())
}

/// `lambda_min(Q P^{-1})` for SPD `Q` and `P`.
pub fn general_eigen_min(q: &Matrix, p: &Matrix) -> Result<f64> {
    cholesky(q)?;
    let eig = congruence_eigenvalues(q, p)?;
    Ok(eig[0])
}

/// `lambda_max(M K^{-1})` for symmetric `M` and SPD `K`.
pub fn general_eigen_max(m: &Matrix, k: &Matrix) -> Result<f64> {
    let eig = congruence_eigenvalues(m, k)?;
    Ok(*eig.last().expect("nonempty spectrum"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let l = cholesky(&Matrix::from_rows(&[[4.0]]).unwrap()).unwrap();
        assert_eq!(l[(0, 0)], 2.0);

        let s = Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        let expected = Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap();
        assert!((&l - &expected).max_abs() < 1e-15);
        assert!((&(&l * &l.transpose()) - &s).max_abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_and_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { index: 1, .. })));
        let s = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&s), Err(Error::NonSymmetric { .. })));
        let s = Matrix::zeros(2, 2);
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn matrix_rejects_nan() {
        assert_eq!(Matrix::new(1, 2, vec![1.0, f64::NAN]), Err(Error::NonFinite));
        assert!(Matrix::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(sym_eigenvalues(&Matrix::identity(2)).unwrap(), vec![1.0, 1.0]);
        let d = Matrix::diagonal(&[3.0, 2.0]);
        assert_eq!(sym_eigenvalues(&d).unwrap(), vec![2.0, 3.0]);

        // Characteristic polynomial t^2 - 6t + 1.
        let s = Matrix::from_rows(&[[1.0, -2.0], [-2.0, 5.0]]).unwrap();
        let eig = sym_eigenvalues(&s).unwrap();
        let r = 2.0 * 2f64.sqrt();
        assert!(close(eig[0], 3.0 - r, 1e-14));
        assert!(close(eig[1], 3.0 + r, 1e-14));
    }

    #[test]
    fn eigenvalues_reject_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigenvalues(&s), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn least_squares_examples() {
        let u = solve_least_squares(&Matrix::identity(2), &[3.0, 7.0]).unwrap();
        assert_eq!(u, vec![3.0, 7.0]);

        let m = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let u = solve_least_squares(&m, &[-2.0, -4.0]).unwrap();
        assert!(close(u[0], -2.0, 1e-14));

        let m = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0]]).unwrap();
        let u = solve_least_squares(&m, &[-2.0, -4.0]).unwrap();
        assert!(close(u[0], -2.0, 1e-14));
        assert!(close(u[1], 0.0, 1e-14));
    }

    #[test]
    fn least_squares_rank_deficient() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            solve_least_squares(&m, &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient { .. })
        ));
        let wide = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(solve_least_squares(&wide, &[1.0]).is_err());
    }

    #[test]
    fn general_eigen_examples() {
        let p = Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap();
        assert!(close(general_eigen_min(&p, &p).unwrap(), 1.0, 1e-14));
        let half = general_eigen_min(&Matrix::identity(3), &Matrix::identity(3).scale(2.0)).unwrap();
        assert!(close(half, 0.5, 1e-15));
        let q = Matrix::diagonal(&[1.0, 2.0]);
        let p = Matrix::diagonal(&[2.0, 2.0]);
        assert!(close(general_eigen_min(&q, &p).unwrap(), 0.5, 1e-15));
        assert!(close(general_eigen_max(&q, &p).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn singular_values_of_diagonal_and_rank_one() {
        let sv = singular_values(&Matrix::diagonal(&[3.0, -4.0, 1.0]));
        assert!(close(sv[0], 4.0, 1e-14) && close(sv[1], 3.0, 1e-14) && close(sv[2], 1.0, 1e-14));
        let r1 = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let sv = singular_values(&r1);
        assert!(close(sv[0], 2.0, 1e-14));
        assert!(sv[1].abs() < 1e-14);
    }
}
