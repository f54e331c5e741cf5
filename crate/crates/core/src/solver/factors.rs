use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{self, DenseTensor};

/// Feasibility tolerance for factor matrices.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Factor matrices `U^(1), ..., U^(k)`, all with the same number of columns.
/// The first `s` have orthonormal columns, the rest have unit columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    factors: Vec<Array2<f64>>,
    s: usize,
}

impl FactorSet {
    /// Validates shapes and the Stiefel/Oblique constraints.
    pub fn new(factors: Vec<Array2<f64>>, s: usize) -> Result<Self> {
        let set = Self::from_parts(factors, s)?;
        let err = set.feasibility_error();
        if err > FEASIBILITY_TOL {
            return Err(Error::Argument(format!("factors are infeasible (deviation {err:.3e})")));
        }
        Ok(set)
    }

    /// Shape checks only; the caller guarantees feasibility.
    pub(crate) fn from_parts(factors: Vec<Array2<f64>>, s: usize) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Argument("need at least one factor".into()));
        }
        if s == 0 || s > factors.len() {
            return Err(Error::Argument(format!("s = {s} must lie in 1..={}", factors.len())));
        }
        let r = factors[0].ncols();
        if factors.iter().any(|f| f.ncols() != r) {
            return Err(Error::Dimension("factor matrices disagree on column count".into()));
        }
        Ok(Self { factors, s })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Current number of columns.
    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn factor(&self, mode: usize) -> &Array2<f64> {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub(crate) fn factor_mut(&mut self, mode: usize) -> &mut Array2<f64> {
        &mut self.factors[mode]
    }

    pub fn into_factors(self) -> Vec<Array2<f64>> {
        self.factors
    }

    /// Column `j` of every factor.
    pub fn column_tuple(&self, j: usize) -> Vec<Vec<f64>> {
        self.factors.iter().map(|f| f.column(j).to_vec()).collect()
    }

    /// Largest deviation from the Stiefel (modes `< s`) and Oblique
    /// (modes `>= s`) constraints.
    pub fn feasibility_error(&self) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if i < self.s {
                    linalg::orthonormality_error(f)
                } else {
                    f.axis_iter(Axis(1))
                        .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
                        .fold(0.0, f64::max)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Keeps only the listed columns, preserving their order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let factors = self.factors.iter().map(|f| f.select(Axis(1), keep)).collect();
        Self { factors, s: self.s }
    }

    /// `sqrt(Σ_i ‖U^(i) − V^(i)‖_F²)`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.dims() != other.dims() || self.rank() != other.rank() {
            return Err(Error::Dimension("factor sets differ in shape".into()));
        }
        Ok(self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| linalg::frobenius(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Applies a column permutation (`perm[new] = old`) and per-mode column
    /// signs to every factor.
    pub fn permuted_and_signed(&self, perm: &[usize], signs: &[Vec<f64>]) -> Result<Self> {
        if perm.len() != self.rank() || signs.len() != self.order() {
            return Err(Error::Dimension("permutation or sign pattern has wrong size".into()));
        }
        let factors = self
            .factors
            .iter()
            .zip(signs)
            .map(|(f, sg)| {
                let mut g = f.select(Axis(1), perm);
                for (mut col, &s) in g.axis_iter_mut(Axis(1)).zip(sg) {
                    col.mapv_inplace(|x| x * s);
                }
                g
            })
            .collect();
        Ok(Self { factors, s: self.s })
    }

    fn check_tensor(&self, a: &DenseTensor) -> Result<()> {
        if a.dims() != self.dims().as_slice() {
            return Err(Error::Dimension(format!(
                "tensor shape {:?} does not match factor rows {:?}",
                a.dims(),
                self.dims()
            )));
        }
        Ok(())
    }
}

/// Coefficients `λ_1, ..., λ_r` of the diagonal core `diag_k(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCore {
    pub lambdas: Vec<f64>,
}

/// `λ_j(U) = Aτ(u^(1)_j, ..., u^(k)_j)` for every column.
pub fn lambdas(a: &DenseTensor, u: &FactorSet) -> Result<Vec<f64>> {
    u.check_tensor(a)?;
    (0..u.rank())
        .map(|j| {
            let cols = u.column_tuple(j);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            tensor::a_tau_relaxed(a, &refs)
        })
        .collect()
}

/// Objective of the maximization form: `f(U) = Σ_j λ_j(U)²`.
pub fn objective_f(a: &DenseTensor, u: &FactorSet) -> Result<f64> {
    Ok(lambdas(a, u)?.iter().map(|l| l * l).sum())
}

/// `(U^(1), ..., U^(k)) · diag_k(λ)`.
pub fn reconstruct(u: &FactorSet, core: &DiagonalCore) -> Result<DenseTensor> {
    if core.lambdas.len() != u.rank() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} columns",
            core.lambdas.len(),
            u.rank()
        )));
    }
    let d = tensor::diag(&core.lambdas, u.order())?;
    tensor::mat_tensor_product(u.factors(), &d)
}
