#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sppc_core::{Complex64, Matrix, PlantModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// `M^T M + I` for a random square M.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let m = random_matrix(rng, n, n, 1.0);
    &(&m.transpose() * &m) + &Matrix::identity(n)
}

/// Entries of `A` have variance `1/n`, which keeps the spectral radius near 1.
pub fn random_reachable_plant(rng: &mut impl Rng, n: usize) -> PlantModel {
    let scale = (3.0 / n as f64).sqrt();
    loop {
        let a = random_matrix(rng, n, n, scale);
        let b = random_matrix(rng, n, 1, 1.0);
        if let Ok(p) = PlantModel::new(a, b) {
            if p.is_reachable() {
                return p;
            }
        }
    }
}

pub fn reference_poles() -> Vec<Complex64> {
    vec![
        Complex64::new(-1.4396, 0.0),
        Complex64::new(1.0808, 0.6664),
        Complex64::new(1.0808, -0.6664),
        Complex64::new(0.0220, 0.0),
    ]
}

pub fn example_plant() -> PlantModel {
    PlantModel::from_poles(&reference_poles()).unwrap()
}

pub fn scalar_plant() -> PlantModel {
    PlantModel::new(Matrix::from_rows(&[[2.0]]).unwrap(), Matrix::identity(1)).unwrap()
}

/// `sum_{i=1}^{N-1} ||x_i||_Q^2 + ||x_N||_P^2` by stepping the plant.
pub fn simulated_cost(plant: &PlantModel, q: &Matrix, p: &Matrix, u: &[f64], x: &[f64]) -> f64 {
    let mut state = x.to_vec();
    let mut total = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        state = plant.step(&state, ui).unwrap();
        let weight = if i + 1 == u.len() { p } else { q };
        total += weight.quad_form(&state);
    }
    total
}

/// Gaussian elimination with partial pivoting, for square systems.
pub fn gauss_solve(m: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = m.to_rows();
    let mut b = y.to_vec();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Random orthogonal matrix by Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    let m = random_matrix(rng, n, n, 1.0);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut v = m.column(j);
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|a| a / norm).collect());
    }
    let mut q = Matrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            q[(i, j)] = *v;
        }
    }
    q
}
