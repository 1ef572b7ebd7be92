//! Control packet design.
//!
//! The packet is the sparsest `u` with `||G u - H x||^2 <= x^T W x`. Three
//! designers are provided:
//!
//! - [`omp_design`]: orthogonal matching pursuit, grows the support greedily
//!   and refits by least squares until the threshold is met;
//! - [`exhaustive_design`]: enumerates supports by increasing size, giving the
//!   true minimum of `||u||_0` (only viable for short horizons);
//! - [`l1_design`]: the ℓ¹-regularized baseline `lambda ||u||_1 + ½||G u - H x||^2`,
//!   whose state-independent regularization makes it only practically stable.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::HorizonData;
use crate::numerics::{norm2, norm_sq, solve_least_squares, Matrix};

/// Relative slack tolerated before a full-support residual above the
/// threshold is reported as [`Error::Infeasible`].
pub const INFEASIBLE_REL_TOL: f64 = 1e-7;
pub const EXHAUSTIVE_MAX_HORIZON: usize = 12;

pub const L1_MAX_ITERS: usize = 5000;
pub const L1_REL_TOL: f64 = 1e-10;
/// Entries below this fraction of `max|u|` are zeroed for ℓ⁰ accounting.
pub const L1_TRUNCATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPacket {
    /// `u_0, ..., u_{N-1}`; zero outside `support`.
    pub coeffs: Vec<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    /// `||G u - H x||^2` at the returned `u`.
    pub residual_sq: f64,
    /// `x^T W x` for OMP and exhaustive designs; the fixed bound for ℓ¹.
    pub threshold: f64,
    pub iterations: usize,
}

impl ControlPacket {
    fn zero(horizon: usize, threshold: f64, residual_sq: f64) -> Self {
        Self {
            coeffs: vec![0.0; horizon],
            support: Vec::new(),
            residual_sq,
            threshold,
            iterations: 0,
        }
    }

    /// `||u||_0`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn is_feasible(&self) -> bool {
        self.residual_sq <= self.threshold
    }
}

/// Column selection rule for OMP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmpSelection {
    /// `argmax |G_i^T r| / ||G_i||`.
    #[default]
    Normalized,
    /// `argmax |G_i^T r|`.
    Unnormalized,
}

fn check_inputs(h: &HorizonData, w: Option<&Matrix>, x: &[f64]) -> Result<()> {
    let n = h.state_dim();
    if x.len() != n {
        return Err(Error::dims(format!("{n}-vector x"), format!("{}-vector", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(w) = w {
        if w.rows() != n || w.cols() != n {
            return Err(Error::dims(format!("{n}x{n} W"), format!("{}x{}", w.rows(), w.cols())));
        }
    }
    Ok(())
}

fn residual_sq(g: &Matrix, target: &[f64], coeffs: &[f64]) -> f64 {
    g.mul_vec(coeffs)
        .iter()
        .zip(target)
        .map(|(a, b)| (b - a) * (b - a))
        .sum()
}

/// Least-squares fit of `target` on the given columns; returns the full
/// coefficient vector and the squared residual.
fn refit(h: &HorizonData, support: &[usize], target: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut coeffs = vec![0.0; h.horizon()];
    if support.is_empty() {
        return Ok((coeffs, norm_sq(target)));
    }
    let sub = h.g.select_columns(support);
    let fit = solve_least_squares(&sub, target)?;
    for (&i, v) in support.iter().zip(fit) {
        coeffs[i] = v;
    }
    let r = residual_sq(&h.g, target, &coeffs);
    Ok((coeffs, r))
}

fn infeasible_unless_close(residual: f64, threshold: f64) -> Result<()> {
    if residual > threshold * (1.0 + INFEASIBLE_REL_TOL) {
        Err(Error::Infeasible { residual, threshold })
    } else {
        Ok(())
    }
}

/// OMP with normalized column selection.
pub fn omp_design(h: &HorizonData, w: &Matrix, x: &[f64]) -> Result<ControlPacket> {
    omp_design_traced(h, w, x, OmpSelection::Normalized).map(|(packet, _)| packet)
}

pub fn omp_design_with(h: &HorizonData, w: &Matrix, x: &[f64], selection: OmpSelection) -> Result<ControlPacket> {
    omp_design_traced(h, w, x, selection).map(|(packet, _)| packet)
}

/// OMP returning also the squared residual after every iteration (entry 0 is
/// the residual of `u = 0`).
///
/// The iteration runs on the unit-norm state `x / ||x||` and the result is
/// rescaled. Support selection is scale invariant and the coefficients scale
/// linearly, so this only matters numerically: closed-loop states decay fast
/// enough to reach the subnormal range, where `x^T W x` loses all precision.
pub fn omp_design_traced(
    h: &HorizonData,
    w: &Matrix,
    x: &[f64],
    selection: OmpSelection,
) -> Result<(ControlPacket, Vec<f64>)> {
    check_inputs(h, Some(w), x)?;
    let horizon = h.horizon();
    let scale = norm2(x);
    if scale == 0.0 {
        return Ok((ControlPacket::zero(horizon, 0.0, 0.0), vec![0.0]));
    }
    let unit: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let threshold = w.quad_form(&unit);
    let target = h.target(&unit);
    let mut residual = target.clone();
    let mut r_sq = norm_sq(&residual);
    let mut history = vec![r_sq];

    let col_norms: Vec<f64> = match selection {
        OmpSelection::Normalized => (0..horizon).map(|i| norm2(&h.g.column(i))).collect(),
        OmpSelection::Unnormalized => vec![1.0; horizon],
    };

    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; horizon];
    let mut coeffs = vec![0.0; horizon];

    while r_sq > threshold && support.len() < horizon {
        let correlations = h.g.tr_mul_vec(&residual);
        let mut best: Option<(usize, f64)> = None;
        for i in (0..horizon).filter(|&i| !in_support[i]) {
            let score = correlations[i].abs() / col_norms[i];
            // Strict comparison keeps the smallest index on ties.
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (chosen, _) = best.expect("support not full");
        in_support[chosen] = true;
        support.push(chosen);
        support.sort_unstable();

        let (fit, fit_sq) = refit(h, &support, &target)?;
        coeffs = fit;
        let gu = h.g.mul_vec(&coeffs);
        residual = target.iter().zip(&gu).map(|(t, g)| t - g).collect();
        r_sq = fit_sq;
        history.push(r_sq);
    }

    if r_sq > threshold {
        infeasible_unless_close(r_sq, threshold)?;
    }
    let iterations = support.len();
    // Multiplying both sides by the same positive factor preserves r_sq <= threshold.
    let s2 = scale * scale;
    coeffs.iter_mut().for_each(|v| *v *= scale);
    history.iter_mut().for_each(|v| *v *= s2);
    let packet = finalize(coeffs, r_sq * s2, threshold * s2, iterations);
    Ok((packet, history))
}

/// Builds the packet, deriving the support from the exact nonzeros.
fn finalize(coeffs: Vec<f64>, residual_sq: f64, threshold: f64, iterations: usize) -> ControlPacket {
    let support = coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect();
    ControlPacket {
        coeffs,
        support,
        residual_sq,
        threshold,
        iterations,
    }
}

/// Globally sparsest feasible packet by enumerating supports in order of
/// cardinality, lexicographically within a cardinality.
pub fn exhaustive_design(h: &HorizonData, w: &Matrix, x: &[f64], max_horizon: usize) -> Result<ControlPacket> {
    check_inputs(h, Some(w), x)?;
    let horizon = h.horizon();
    let limit = max_horizon.min(EXHAUSTIVE_MAX_HORIZON);
    if horizon > limit {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search limited to N <= {limit}, got {horizon}"
        )));
    }
    let scale = norm2(x);
    if scale == 0.0 {
        return Ok(ControlPacket::zero(horizon, 0.0, 0.0));
    }
    // Same unit-norm working scale as OMP.
    let unit: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let threshold = w.quad_form(&unit);
    let target = h.target(&unit);
    let s2 = scale * scale;
    let rescale = |mut coeffs: Vec<f64>, r_sq: f64, tried: usize| {
        coeffs.iter_mut().for_each(|v| *v *= scale);
        finalize(coeffs, r_sq * s2, threshold * s2, tried)
    };
    let mut tried = 0;
    let mut last = f64::INFINITY;
    for size in 0..=horizon {
        for support in (0..horizon).combinations(size) {
            tried += 1;
            let (coeffs, r_sq) = refit(h, &support, &target)?;
            last = r_sq;
            if r_sq <= threshold {
                return Ok(rescale(coeffs, r_sq, tried));
            }
        }
    }
    infeasible_unless_close(last, threshold)?;
    let (coeffs, r_sq) = refit(h, &(0..horizon).collect::<Vec<_>>(), &target)?;
    Ok(rescale(coeffs, r_sq, tried))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// ℓ¹-regularized least squares by accelerated proximal gradient (FISTA with
/// function-value restart). `fixed_bound` is only recorded as the packet's
/// threshold; feasibility is not enforced for this designer.
pub fn l1_design(h: &HorizonData, x: &[f64], lambda: f64, fixed_bound: f64) -> Result<ControlPacket> {
    check_inputs(h, None, x)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let horizon = h.horizon();
    let target = h.target(x);
    let gt_target = h.g.tr_mul_vec(&target);
    if gt_target.iter().all(|v| v.abs() <= lambda) {
        // u = 0 satisfies the optimality condition |G^T H x|_inf <= lambda.
        return Ok(ControlPacket::zero(horizon, fixed_bound, norm_sq(&target)));
    }

    let lipschitz = h.g_sigma_max * h.g_sigma_max;
    let step = 1.0 / lipschitz;
    let objective = |u: &[f64]| lambda * u.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * residual_sq(&h.g, &target, u);
    let prox_step = |y: &[f64]| -> Vec<f64> {
        // grad = G^T G y - G^T H x
        let grad: Vec<f64> = h.gram.mul_vec(y).iter().zip(&gt_target).map(|(a, b)| a - b).collect();
        y.iter()
            .zip(&grad)
            .map(|(yi, gi)| soft_threshold(yi - step * gi, lambda * step))
            .collect()
    };

    let mut u = vec![0.0; horizon];
    let mut y = u.clone();
    let mut t = 1.0_f64;
    let mut f = objective(&u);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=L1_MAX_ITERS {
        iterations = it;
        let mut next = prox_step(&y);
        let mut f_next = objective(&next);
        if f_next > f {
            // Restart momentum from the last iterate.
            t = 1.0;
            next = prox_step(&u);
            f_next = objective(&next);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = next.iter().zip(&u).map(|(a, b)| a + momentum * (a - b)).collect();
        let change = (f - f_next).abs();
        u = next;
        t = t_next;
        let done = change <= L1_REL_TOL * f_next.abs().max(f64::MIN_POSITIVE);
        f = f_next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "l1 proximal gradient",
            iterations: L1_MAX_ITERS,
        });
    }

    let peak = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for v in &mut u {
        if v.abs() < L1_TRUNCATION * peak {
            *v = 0.0;
        }
    }
    let r_sq = residual_sq(&h.g, &target, &u);
    Ok(finalize(u, r_sq, fixed_bound, iterations))
}

/// `min_u ||G u - H x||^2`, the residual of the full-support least-squares fit.
pub fn full_support_residual(h: &HorizonData, x: &[f64]) -> Result<f64> {
    let target = h.target(x);
    let all: Vec<usize> = (0..h.horizon()).collect();
    refit(h, &all, &target).map(|(_, r)| r)
}

/// `max |G^T H x|`; for `lambda` at or above this value the ℓ¹ design is zero.
pub fn l1_zero_threshold(h: &HorizonData, x: &[f64]) -> f64 {
    h.g.tr_mul_vec(&h.target(x)).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
