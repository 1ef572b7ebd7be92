//! Selection of the stability parameters `P`, `rho`, `c`, the margin `E` and
//! the constraint weight `W = P - Q + E`.
//!
//! `P` solves the cheap-control Riccati equation
//! `P = A^T P A - A^T P B (B^T P B)^{-1} B^T P A + Q`; `x^T P x` is the
//! infinite-horizon value of the unweighted-input problem and serves as the
//! Lyapunov function of the networked loop. With `W` built from it, the
//! packet constraint `||G u - H x||^2 <= x^T W x` is always feasible since
//! the unconstrained least-squares optimum equals `x^T (P - Q) x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{build_horizon, HorizonData};
use crate::numerics::{
    cholesky, congruence_eigenvalues, dot, general_eigen_max, general_eigen_min, sym_eigenvalues, Matrix,
};
use crate::plant::PlantModel;

pub const RICCATI_MAX_ITERS: usize = 100_000;
pub const RICCATI_REL_CHANGE: f64 = 1e-12;
/// Acceptance bound for the Riccati residual, relative to `1 + max|P|`.
pub const RICCATI_RESIDUAL_TOL: f64 = 1e-9;
const MIN_BTPB: f64 = 1e-12;

/// How the column term `Phi_i^T P Phi_i` in the definition of `c` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CInterpretation {
    /// `Phi_i` is the i-th column of `Phi` and `P` acts blockwise as `I_N ⊗ P`,
    /// giving a scalar per column.
    #[default]
    ColumnLift,
    /// `Phi_i` is the i-th n×N block row of `Phi`; the term is an N×N matrix.
    BlockRow,
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

/// `max|A^T P A - A^T P B (B^T P B)^{-1} B^T P A + Q - P|`.
pub fn riccati_residual(plant: &PlantModel, p: &Matrix, q: &Matrix) -> f64 {
    let next = riccati_map(plant, p, q).unwrap_or_else(|_| Matrix::zeros(p.rows(), p.cols()));
    (&next - p).max_abs()
}

fn riccati_map(plant: &PlantModel, p: &Matrix, q: &Matrix) -> Result<Matrix> {
    let a = plant.a();
    let b = plant.b_vec();
    let pb = p.mul_vec(b);
    let btpb = dot(b, &pb);
    if !(btpb > MIN_BTPB) {
        return Err(Error::DegenerateInput(format!("B^T P B = {btpb:e}")));
    }
    let atpb = a.tr_mul_vec(&pb);
    let mut next = &(&a.transpose() * &(p * a)) + q;
    for i in 0..atpb.len() {
        for j in 0..atpb.len() {
            next[(i, j)] -= atpb[i] * atpb[j] / btpb;
        }
    }
    Ok(next.symmetrize())
}

/// Fixed-point (value) iteration from `P_0 = Q`.
pub fn solve_riccati(plant: &PlantModel, q: &Matrix) -> Result<RiccatiSolution> {
    let n = plant.dim();
    if q.rows() != n || q.cols() != n {
        return Err(Error::dims(format!("{n}x{n} Q"), format!("{}x{}", q.rows(), q.cols())));
    }
    cholesky(q)?;
    if !plant.is_reachable() {
        return Err(Error::NotReachable);
    }

    let mut p = q.symmetrize();
    for iteration in 1..=RICCATI_MAX_ITERS {
        let next = riccati_map(plant, &p, q)?;
        let change = (&next - &p).max_abs();
        p = next;
        if change <= RICCATI_REL_CHANGE * p.max_abs() {
            let residual = riccati_residual(plant, &p, q);
            return Ok(RiccatiSolution {
                p,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "Riccati iteration",
        iterations: RICCATI_MAX_ITERS,
    })
}

/// `1 - lambda_min(Q P^{-1})`, clamped at 0 against rounding when `P = Q`.
pub fn compute_rho(q: &Matrix, p: &Matrix) -> Result<f64> {
    let lambda = general_eigen_min(q, p)?;
    let rho = (1.0 - lambda).max(0.0);
    if rho >= 1.0 {
        return Err(Error::DegenerateInput(format!("lambda_min(QP^-1) = {lambda:e}")));
    }
    Ok(rho)
}

/// `(1 - rho^N) / (1 - rho)`, the geometric sum `1 + rho + ... + rho^{N-1}`.
pub fn geometric_prefactor(rho: f64, horizon: usize) -> f64 {
    (1.0 - rho.powi(horizon as i32)) / (1.0 - rho)
}

pub fn compute_c(h: &HorizonData, p: &Matrix, rho: f64, interpretation: CInterpretation) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} outside [0, 1)")));
    }
    let n = h.state_dim();
    let horizon = h.horizon();
    let worst = match interpretation {
        CInterpretation::ColumnLift => {
            // lambda_max((Phi^T Qbar Phi)^{-1}) = 1 / sigma_min(G)^2.
            let inv_gram_max = 1.0 / (h.g_sigma_min * h.g_sigma_min);
            (0..horizon)
                .map(|col| {
                    let phi_col = h.phi.column(col);
                    phi_col.chunks(n).map(|block| p.quad_form(block)).sum::<f64>() * inv_gram_max
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        CInterpretation::BlockRow => {
            let mut worst = f64::NEG_INFINITY;
            for i in 0..horizon {
                let row = h.phi.block(i * n, 0, n, horizon);
                let m = (&row.transpose() * &(p * &row)).symmetrize();
                worst = worst.max(general_eigen_max(&m, &h.gram)?);
            }
            worst
        }
    };
    let c = geometric_prefactor(rho, horizon) * worst;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::DegenerateInput(format!("c = {c:e}")));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    pub horizon: usize,
    /// Fraction of the admissible cone used for `E = alpha (1 - rho) P / c`.
    pub alpha: f64,
    pub c_interpretation: CInterpretation,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            alpha: 0.5,
            c_interpretation: CInterpretation::ColumnLift,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub q: Matrix,
    pub p: Matrix,
    pub rho: f64,
    pub c: f64,
    pub eps: Matrix,
    pub w: Matrix,
    pub alpha: f64,
    pub c_interpretation: CInterpretation,
    pub riccati_iterations: usize,
    pub riccati_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl InvariantCheck {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            passed: value <= bound,
            value,
            bound,
        }
    }

    fn above(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            passed: value > bound,
            value,
            bound,
        }
    }
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(&m.symmetrize()).map_or(f64::NEG_INFINITY, |e| e[0])
}

/// Smallest eigenvalue of `M P^{-1}`. Same sign pattern as `M` but free of
/// the spread in `P`, so near-singular weights stay decidable.
fn min_eigenvalue_in(m: &Matrix, p: &Matrix) -> f64 {
    congruence_eigenvalues(&m.symmetrize(), p).map_or(f64::NEG_INFINITY, |e| e[0])
}

impl SynthesisResult {
    /// Re-checks every invariant of the result against `plant`.
    pub fn check_invariants(&self, plant: &PlantModel) -> Vec<InvariantCheck> {
        let residual = riccati_residual(plant, &self.p, &self.q);
        let admissible = &self.p.scale((1.0 - self.rho) / self.c) - &self.eps;
        let b = plant.b_vec();
        vec![
            InvariantCheck::at_most(
                "riccati_residual",
                residual,
                RICCATI_RESIDUAL_TOL * (1.0 + self.p.max_abs()),
            ),
            InvariantCheck::above("p_positive_definite", min_eigenvalue(&self.p), 0.0),
            InvariantCheck::above("btpb_positive", dot(b, &self.p.mul_vec(b)), MIN_BTPB),
            InvariantCheck::above("p_minus_q_psd", min_eigenvalue(&(&self.p - &self.q)), -1e-9),
            InvariantCheck::above("rho_nonnegative", self.rho, -f64::MIN_POSITIVE),
            InvariantCheck::above("rho_below_one", 1.0 - self.rho, 0.0),
            InvariantCheck::above("c_positive", self.c, 0.0),
            InvariantCheck::above("eps_positive_definite", min_eigenvalue_in(&self.eps, &self.p), 0.0),
            InvariantCheck::above(
                "eps_below_admissible_bound",
                min_eigenvalue_in(&admissible, &self.p),
                0.0,
            ),
            InvariantCheck::above("w_positive_definite", min_eigenvalue_in(&self.w, &self.p), 0.0),
        ]
    }
}

/// `P - Q` evaluated at the fixed point as the Gram matrix `C^T C` with
/// `C = (I - v v^T / v^T v) L^T A`, `v = L^T B`, `P = L L^T`. Positive
/// semidefinite by construction, so rounding cannot push `W` below `eps`.
pub fn value_decrease(plant: &PlantModel, p: &Matrix) -> Result<Matrix> {
    let lt = cholesky(p)?.transpose();
    let v = lt.mul_vec(plant.b_vec());
    let vv = dot(&v, &v);
    let mut c = &lt * plant.a();
    for j in 0..c.cols() {
        let col = c.column(j);
        let f = dot(&v, &col) / vv;
        for i in 0..c.rows() {
            c[(i, j)] -= f * v[i];
        }
    }
    Ok((&c.transpose() * &c).symmetrize())
}

/// Runs the full parameter selection and returns the result together with
/// the lifted horizon matrices built from `Q` and `P`.
pub fn synthesize(plant: &PlantModel, q: &Matrix, params: &SynthesisParams) -> Result<(SynthesisResult, HorizonData)> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} outside (0, 1)",
            params.alpha
        )));
    }
    let riccati = solve_riccati(plant, q)?;
    let p = riccati.p;
    let horizon = build_horizon(plant, q, &p, params.horizon)?;
    let rho = compute_rho(q, &p)?;
    let c = compute_c(&horizon, &p, rho, params.c_interpretation)?;
    let eps = p.scale(params.alpha * (1.0 - rho) / c);
    let w = (&value_decrease(plant, &p)? + &eps).symmetrize();
    let result = SynthesisResult {
        q: q.clone(),
        p,
        rho,
        c,
        eps,
        w,
        alpha: params.alpha,
        c_interpretation: params.c_interpretation,
        riccati_iterations: riccati.iterations,
        riccati_residual: riccati.residual,
    };
    Ok((result, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> PlantModel {
        PlantModel::new(Matrix::from_rows(&[[a]]).unwrap(), Matrix::identity(1)).unwrap()
    }

    #[test]
    fn scalar_riccati_is_q() {
        let sol = solve_riccati(&scalar(2.0), &Matrix::identity(1)).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(sol.residual < 1e-15);

        let q = Matrix::from_rows(&[[3.5]]).unwrap();
        let sol = solve_riccati(&scalar(0.0), &q).unwrap();
        assert!((sol.p[(0, 0)] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn riccati_rejects_unreachable() {
        let plant = PlantModel::new(Matrix::identity(2), Matrix::from_rows(&[[1.0], [1.0]]).unwrap()).unwrap();
        assert_eq!(
            solve_riccati(&plant, &Matrix::identity(2)).unwrap_err(),
            Error::NotReachable
        );
    }

    #[test]
    fn rho_examples() {
        let p = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        assert!(compute_rho(&p, &p).unwrap() < 1e-15);
        let rho = compute_rho(&Matrix::identity(1), &Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        assert!((rho - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prefactor_examples() {
        assert_eq!(geometric_prefactor(0.0, 1), 1.0);
        assert_eq!(geometric_prefactor(0.0, 7), 1.0);
        assert!((geometric_prefactor(0.5, 10) - 1.998046875).abs() < 1e-15);
    }

    #[test]
    fn scalar_c_column_lift() {
        let one = Matrix::identity(1);
        let h = build_horizon(&scalar(2.0), &one, &one, 2).unwrap();
        let c = compute_c(&h, &one, 0.0, CInterpretation::ColumnLift).unwrap();
        let expected = 5.0 * (3.0 + 2.0 * 2f64.sqrt());
        assert!((c - expected).abs() < 1e-9, "c = {c}");
    }

    #[test]
    fn scalar_c_block_row() {
        // Block rows [1 0] and [2 1]; (Phi^T Phi)^{-1} = [[1,-2],[-2,5]].
        // Row 2: [2 1]^T [2 1] K^{-1} has rank one with eigenvalue
        // [2 1] K^{-1} [2 1]^T = 4 - 8 + 5 = 1; row 1 gives K^{-1}_{00} = 1.
        let one = Matrix::identity(1);
        let h = build_horizon(&scalar(2.0), &one, &one, 2).unwrap();
        let c = compute_c(&h, &one, 0.0, CInterpretation::BlockRow).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "c = {c}");
    }

    #[test]
    fn synthesize_scalar() {
        let (syn, _) = synthesize(
            &scalar(2.0),
            &Matrix::identity(1),
            &SynthesisParams {
                horizon: 2,
                alpha: 0.5,
                c_interpretation: CInterpretation::ColumnLift,
            },
        )
        .unwrap();
        let c = 5.0 * (3.0 + 2.0 * 2f64.sqrt());
        assert_eq!(syn.rho, 0.0);
        assert!((syn.eps[(0, 0)] - 0.5 / c).abs() < 1e-15);
        assert!((syn.w[(0, 0)] - 0.5 / c).abs() < 1e-15);
        assert!(syn.check_invariants(&scalar(2.0)).iter().all(|c| c.passed));
    }

    #[test]
    fn nilpotent_scalar_plant_has_w_equal_eps() {
        let (syn, _) = synthesize(&scalar(0.0), &Matrix::identity(1), &SynthesisParams::default()).unwrap();
        assert_eq!(syn.p, syn.q);
        assert_eq!(syn.rho, 0.0);
        assert_eq!(syn.w, syn.eps);
    }

    #[test]
    fn alpha_must_be_inside_unit_interval() {
        for alpha in [0.0, 1.0, -0.3, f64::NAN] {
            let params = SynthesisParams {
                alpha,
                ..SynthesisParams::default()
            };
            assert!(synthesize(&scalar(2.0), &Matrix::identity(1), &params).is_err());
        }
    }
}
