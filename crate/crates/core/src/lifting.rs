//! Horizon lifting: the N-step prediction `[x_1; ...; x_N] = Phi u + Upsilon x`
//! and the weighted least-squares form `||G u - H x||^2` of the packet cost.

use crate::error::{Error, Result};
use crate::numerics::{cholesky, singular_values, Matrix};
use crate::plant::PlantModel;

#[derive(Debug, Clone)]
pub struct HorizonData {
    horizon: usize,
    state_dim: usize,
    /// nN×N, block lower-triangular with blocks `A^{i-j} B`.
    pub phi: Matrix,
    /// nN×n, stacks `A, A^2, ..., A^N`.
    pub upsilon: Matrix,
    /// `blockdiag{Q, ..., Q, P}` with N-1 copies of Q.
    pub qbar: Matrix,
    /// Blockwise upper-triangular factor `R` with `R^T R = Qbar`.
    pub qbar_sqrt: Matrix,
    /// `Qbar^{1/2} Phi`.
    pub g: Matrix,
    /// `-Qbar^{1/2} Upsilon`.
    pub h: Matrix,
    /// `G^T G = Phi^T Qbar Phi`.
    pub gram: Matrix,
    /// Largest and smallest singular values of `G`.
    pub g_sigma_max: f64,
    pub g_sigma_min: f64,
}

impl HorizonData {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// `H x`, the target the packet has to match.
    pub fn target(&self, x: &[f64]) -> Vec<f64> {
        self.h.mul_vec(x)
    }

    /// Stacked predicted states `Phi u + Upsilon x`.
    pub fn predict(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = self.phi.mul_vec(u);
        for (o, v) in out.iter_mut().zip(self.upsilon.mul_vec(x)) {
            *o += v;
        }
        out
    }

    /// `||G u - H x||_2^2`.
    pub fn stage_cost(&self, u: &[f64], x: &[f64]) -> Result<f64> {
        if u.len() != self.horizon {
            return Err(Error::dims(
                format!("{}-vector u", self.horizon),
                format!("{}-vector", u.len()),
            ));
        }
        if x.len() != self.state_dim {
            return Err(Error::dims(
                format!("{}-vector x", self.state_dim),
                format!("{}-vector", x.len()),
            ));
        }
        let gu = self.g.mul_vec(u);
        let hx = self.h.mul_vec(x);
        Ok(gu.iter().zip(&hx).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

pub fn build_horizon(plant: &PlantModel, q: &Matrix, p: &Matrix, horizon: usize) -> Result<HorizonData> {
    let n = plant.dim();
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    for (name, m) in [("Q", q), ("P", p)] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::dims(
                format!("{n}x{n} {name}"),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
    }
    let nn = n * horizon;

    // A^j B for j = 0..N-1 and A^j for j = 1..N.
    let mut impulse = Vec::with_capacity(horizon);
    let mut col = plant.b_vec().to_vec();
    for _ in 0..horizon {
        impulse.push(col.clone());
        col = plant.a().mul_vec(&col);
    }
    let mut phi = Matrix::zeros(nn, horizon);
    for i in 0..horizon {
        for j in 0..=i {
            for (r, v) in impulse[i - j].iter().enumerate() {
                phi[(i * n + r, j)] = *v;
            }
        }
    }
    let mut upsilon = Matrix::zeros(nn, n);
    let mut power = plant.a().clone();
    for i in 0..horizon {
        upsilon.set_block(i * n, 0, &power);
        power = &power * plant.a();
    }

    let q_root = cholesky(q)?.transpose();
    let p_root = cholesky(p)?.transpose();
    let mut qbar = Matrix::zeros(nn, nn);
    let mut qbar_sqrt = Matrix::zeros(nn, nn);
    for i in 0..horizon {
        let (block, root) = if i + 1 == horizon { (p, &p_root) } else { (q, &q_root) };
        qbar.set_block(i * n, i * n, block);
        qbar_sqrt.set_block(i * n, i * n, root);
    }

    let g = &qbar_sqrt * &phi;
    let h = -&(&qbar_sqrt * &upsilon);
    let gram = (&g.transpose() * &g).symmetrize();
    let sv = singular_values(&g);
    let g_sigma_max = sv[0];
    let g_sigma_min = *sv.last().unwrap();
    if g_sigma_min <= 1e-12 * g_sigma_max {
        return Err(Error::RankDeficient { column: horizon - 1 });
    }

    Ok(HorizonData {
        horizon,
        state_dim: n,
        phi,
        upsilon,
        qbar,
        qbar_sqrt,
        g,
        h,
        gram,
        g_sigma_max,
        g_sigma_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_plant() -> PlantModel {
        PlantModel::new(
            Matrix::from_rows(&[[2.0]]).unwrap(),
            Matrix::from_rows(&[[1.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_horizon_two() {
        let one = Matrix::identity(1);
        let h = build_horizon(&scalar_plant(), &one, &one, 2).unwrap();
        assert_eq!(h.phi, Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0]]).unwrap());
        assert_eq!(h.upsilon, Matrix::from_rows(&[[2.0], [4.0]]).unwrap());
        assert_eq!(h.qbar, Matrix::identity(2));
        assert_eq!(h.g, h.phi);
        assert_eq!(h.h, Matrix::from_rows(&[[-2.0], [-4.0]]).unwrap());
    }

    #[test]
    fn degenerate_horizon_one() {
        let q = Matrix::from_rows(&[[3.0]]).unwrap();
        let p = Matrix::from_rows(&[[5.0]]).unwrap();
        let h = build_horizon(&scalar_plant(), &q, &p, 1).unwrap();
        assert_eq!(h.phi, Matrix::from_rows(&[[1.0]]).unwrap());
        assert_eq!(h.qbar, p);
    }

    #[test]
    fn stage_cost_examples() {
        let one = Matrix::identity(1);
        let h = build_horizon(&scalar_plant(), &one, &one, 2).unwrap();
        assert_eq!(h.stage_cost(&[0.0, 0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(h.stage_cost(&[-2.0, 0.0], &[1.0]).unwrap(), 0.0);
        assert!(h.stage_cost(&[0.0], &[1.0]).is_err());
        assert!(h.stage_cost(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_horizon_rejected() {
        let one = Matrix::identity(1);
        assert!(build_horizon(&scalar_plant(), &one, &one, 0).is_err());
    }
}
