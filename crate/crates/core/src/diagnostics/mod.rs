//! First-order optimality measures, runtime checks of the convergence
//! inequalities, and empirical rate estimation.

mod checks;
mod rate;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use checks::{
    assert_lambda_chain, assert_monotone_after_truncation, assert_sufficient_increase, assert_truncation_budget,
    sufficient_increase_constant, CheckStatus, ChainReport, MonotoneReport, SweepCheck, SweepReport, TruncationReport,
    CHAIN_IDENTITY_TOL, CHAIN_MONOTONE_TOL, INCREASE_SLACK,
};
pub use rate::{estimate_rate, estimate_rate_with, RateEstimate, RateModel, RateOptions};

use crate::error::{Error, Result};
use crate::linalg;
use crate::solver::{self, FactorSet, SubgradientTerms};
use crate::tensor::DenseTensor;

/// Residuals of the KKT system at a feasible point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub per_mode_stiefel: Vec<f64>,
    pub per_mode_oblique: Vec<f64>,
    pub lambda_residual: f64,
    pub total: f64,
    /// `total / (‖A‖·max(1, ‖λ‖))`.
    pub normalized: f64,
}

/// `V^(i)` at the point `u` itself, with `λ(u)`.
fn point_lambda_v(a: &DenseTensor, u: &FactorSet, mode: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    solver::compute_lambda_v(a, u, mode)
}

/// Multiplier-projected KKT residuals: `‖V^(i)Λ − U^(i) sym((U^(i))ᵀV^(i)Λ)‖`
/// on orthonormal modes and `‖V^(i)Λ − U^(i) Λ²‖` on the others, with
/// `Λ = diag(λ(U))`.
pub fn kkt_residual(a: &DenseTensor, u: &FactorSet) -> Result<KktResidual> {
    let lam = solver::lambdas(a, u)?;
    let lam_arr = Array1::from(lam.clone());
    let lam_sq = lam_arr.mapv(|l| l * l);
    let mut stiefel = Vec::with_capacity(u.s());
    let mut oblique = Vec::with_capacity(u.order() - u.s());
    for mode in 0..u.order() {
        let (_, v) = point_lambda_v(a, u, mode)?;
        let y = &v * &lam_arr;
        let factor = u.factor(mode);
        if mode < u.s() {
            let p = linalg::symmetrize(&factor.t().dot(&y));
            stiefel.push(linalg::frobenius(&(&y - &factor.dot(&p))));
        } else {
            oblique.push(linalg::frobenius(&(&y - &(factor * &lam_sq))));
        }
    }
    let total = stiefel.iter().chain(&oblique).map(|x| x * x).sum::<f64>().sqrt();
    let norm_a = crate::tensor::hs_norm(a);
    let lam_norm = lam_sq.sum().sqrt();
    let denom = norm_a * lam_norm.max(1.0);
    Ok(KktResidual {
        per_mode_stiefel: stiefel,
        per_mode_oblique: oblique,
        lambda_residual: 0.0,
        total,
        normalized: if denom > 0.0 { total / denom } else { total },
    })
}

/// Riemannian gradient of `g(U, x) = ½‖A − (U)·diag_k(x)‖²` on the product
/// of Stiefel and Oblique manifolds times `R^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientComponents {
    pub modes: Vec<Array2<f64>>,
    pub x: Vec<f64>,
}

impl GradientComponents {
    pub fn norm(&self) -> f64 {
        let m: f64 = self.modes.iter().map(|g| linalg::frobenius(g).powi(2)).sum();
        (m + self.x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

pub fn riemannian_grad_components(a: &DenseTensor, u: &FactorSet, x: &[f64]) -> Result<GradientComponents> {
    if x.len() != u.rank() {
        return Err(Error::Dimension(format!("x has length {}, rank is {}", x.len(), u.rank())));
    }
    let gamma = Array1::from(x.to_vec());
    let mut modes = Vec::with_capacity(u.order());
    for mode in 0..u.order() {
        let (_, v) = point_lambda_v(a, u, mode)?;
        let y = &v * &gamma;
        let factor = u.factor(mode);
        let g = if mode < u.s() {
            let n = factor.nrows();
            let proj = Array2::<f64>::eye(n) - factor.dot(&factor.t()) * 0.5;
            let inner = &y - &factor.dot(&y.t()).dot(factor);
            -proj.dot(&inner)
        } else {
            let d: Array1<f64> = (0..u.rank()).map(|j| factor.column(j).dot(&y.column(j))).collect();
            -(&y - &(factor * &d))
        };
        modes.push(g);
    }
    let lam = solver::lambdas(a, u)?;
    let xg = x.iter().zip(&lam).map(|(xi, li)| xi - li).collect();
    Ok(GradientComponents { modes, x: xg })
}

/// `2√k (2r√k ‖A‖² + ε)`: bound on the subgradient norm per unit step.
pub fn subdiff_bound_constant(norm_a: f64, r: usize, k: usize, epsilon: f64) -> f64 {
    let sk = (k as f64).sqrt();
    2.0 * sk * (2.0 * r as f64 * sk * norm_a * norm_a + epsilon)
}

/// Norm of the subgradient `2W` assembled after a non-truncation sweep, with
/// `W^(i) = −V^(i)Λ + terms[i]` evaluated at the post-sweep factors.
pub fn subgradient_witness_norm(a: &DenseTensor, u_new: &FactorSet, terms: &SubgradientTerms) -> Result<f64> {
    if terms.terms.len() != u_new.order() {
        return Err(Error::Dimension("one term per mode expected".into()));
    }
    let lam = Array1::from(solver::lambdas(a, u_new)?);
    let mut sq = 0.0;
    for (mode, t) in terms.terms.iter().enumerate() {
        let (_, v) = point_lambda_v(a, u_new, mode)?;
        let w = t - &(&v * &lam);
        sq += linalg::frobenius(&w).powi(2);
    }
    Ok(2.0 * sq.sqrt())
}

/// Number of variables of the Lagrangian polynomial:
/// `N = (1 + Σ_{i≤s} n_i) r + s r(r+1)/2`.
pub fn lagrangian_variable_count(n_dims: &[usize], r: usize, s: usize) -> usize {
    let sum: usize = n_dims.iter().take(s).sum();
    (1 + sum) * r + s * r * (r + 1) / 2
}

/// `ln(1 − ζ) = −ln(2k) − (N − 1) ln(6k − 3)`; finite even where `ζ` itself
/// rounds to 1.
pub fn lojasiewicz_log_gap(k: usize, n_vars: usize) -> f64 {
    let k = k as f64;
    -(2.0 * k).ln() - (n_vars as f64 - 1.0) * (6.0 * k - 3.0).ln()
}

/// `ζ = 1 − 1 / (2k (6k − 3)^{N−1})` for a given variable count `N`.
pub fn lojasiewicz_exponent_for(k: usize, n_vars: usize) -> f64 {
    let kf = k as f64;
    let denom = 2.0 * kf * (6.0 * kf - 3.0).powi(n_vars as i32 - 1);
    1.0 - 1.0 / denom
}

/// Łojasiewicz exponent of the Lagrangian for the given problem sizes.
pub fn lojasiewicz_exponent(k: usize, n_dims: &[usize], r: usize, s: usize) -> f64 {
    lojasiewicz_exponent_for(k, lagrangian_variable_count(n_dims, r, s))
}
