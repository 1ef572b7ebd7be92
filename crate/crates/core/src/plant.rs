//! Discrete-time single-input LTI plant `x(k+1) = A x(k) + B u(k)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{singular_values, Matrix};

/// Relative rank tolerance for the reachability matrix.
pub const REACHABILITY_TOL: f64 = 1e-10;

const POLE_PAIR_TOL: f64 = 1e-9;
const ROOT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
}

impl PlantModel {
    /// `a` must be n×n and `b` n×1 with at least one nonzero entry.
    ///
    /// Reachability is not enforced here (see [`PlantModel::is_reachable`]);
    /// synthesis rejects unreachable plants.
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        let n = a.rows();
        if n == 0 || !a.is_square() {
            return Err(Error::dims("nonempty square A", format!("{}x{}", a.rows(), a.cols())));
        }
        if b.rows() != n || b.cols() != 1 {
            return Err(Error::dims(format!("{n}x1 B"), format!("{}x{}", b.rows(), b.cols())));
        }
        if b.max_abs() == 0.0 {
            return Err(Error::ZeroInput);
        }
        Ok(Self { a, b })
    }

    /// Controllable canonical form for the monic polynomial with the given
    /// roots: `A` is the companion matrix (ones on the superdiagonal, negated
    /// coefficients in the last row) and `B = e_n`.
    pub fn from_poles(poles: &[Complex64]) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidParameter("pole list is empty".into()));
        }
        check_conjugate_pairs(poles)?;

        // Ascending coefficients of prod (z - p_i); leading coefficient 1.
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for &p in poles {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * p;
            }
            poly = next;
        }

        let n = poles.len();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -poly[j].re;
        }
        let mut b = Matrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// Input vector `B` as a slice.
    pub fn b_vec(&self) -> &[f64] {
        self.b.as_slice()
    }

    pub fn step(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dims(
                format!("{}-vector", self.dim()),
                format!("{}-vector", x.len()),
            ));
        }
        if !u.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut next = self.a.mul_vec(x);
        for (xi, bi) in next.iter_mut().zip(self.b_vec()) {
            *xi += bi * u;
        }
        Ok(next)
    }

    /// `[B, AB, ..., A^{n-1}B]`.
    pub fn reachability_matrix(&self) -> Matrix {
        let n = self.dim();
        let mut r = Matrix::zeros(n, n);
        let mut col = self.b_vec().to_vec();
        for j in 0..n {
            for i in 0..n {
                r[(i, j)] = col[i];
            }
            col = self.a.mul_vec(&col);
        }
        r
    }

    pub fn is_reachable(&self) -> bool {
        let sv = singular_values(&self.reachability_matrix());
        let largest = sv[0];
        let smallest = *sv.last().unwrap();
        largest > 0.0 && smallest > REACHABILITY_TOL * largest
    }

    /// Eigenvalues of `A` when `A` is in companion form (as built by
    /// [`PlantModel::from_poles`]); `None` otherwise.
    pub fn companion_poles(&self) -> Option<Vec<Complex64>> {
        let n = self.dim();
        for i in 0..n - 1 {
            for j in 0..n {
                let expected = if j == i + 1 { 1.0 } else { 0.0 };
                if self.a[(i, j)] != expected {
                    return None;
                }
            }
        }
        let coeffs: Vec<f64> = (0..n).map(|j| -self.a[(n - 1, j)]).collect();
        Some(monic_roots(&coeffs))
    }
}

fn check_conjugate_pairs(poles: &[Complex64]) -> Result<()> {
    let is_real = |p: &Complex64| p.im.abs() <= 1e-12 * (1.0 + p.norm());
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] || is_real(&poles[i]) {
            continue;
        }
        let target = poles[i].conj();
        let partner = (0..poles.len())
            .find(|&j| j != i && !used[j] && (poles[j] - target).norm() <= POLE_PAIR_TOL * (1.0 + target.norm()));
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(Error::NonConjugatePoles {
                    re: poles[i].re,
                    im: poles[i].im,
                })
            }
        }
    }
    Ok(())
}

/// Roots of `z^n + c[n-1] z^{n-1} + ... + c[0]` by Aberth-Ehrlich iteration.
pub fn monic_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };

    // Cauchy bound for the initial circle; offset angle avoids symmetric stalls.
    let radius = 1.0 + coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..ROOT_MAX_ITERS {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            if w.is_finite() {
                z[i] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step <= 1e-15 {
            break;
        }
    }
    z
}
