use ndarray::{Array1, Array2, Axis};

use super::{FactorSet, InnerTrace, IterationRecord, SubgradientTerms, SweepOutcome, SweepState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{self, DenseTensor};

/// `sgn` with `sgn(0) = +1`.
fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `λ^{i−1}_j = Aτ(x^i_j)` and `V^(i)` with columns `Aτ_i(x^i_j)`, where the
/// mixed tuple `x^i_j` is read off the current contents of `u` (already
/// updated modes before `mode`, previous iterates from `mode` on).
pub fn compute_lambda_v(a: &DenseTensor, u: &FactorSet, mode: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    if mode >= u.order() {
        return Err(Error::Argument(format!("mode {mode} out of range for order {}", u.order())));
    }
    if a.dims() != u.dims().as_slice() {
        return Err(Error::Invariant("tensor and factor shapes diverged".into()));
    }
    let n = a.dims()[mode];
    let r = u.rank();
    let mut v = Array2::zeros((n, r));
    let mut lam = Vec::with_capacity(r);
    for j in 0..r {
        let cols = u.column_tuple(j);
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let vj = tensor::a_tau_i_relaxed(a, &refs, mode)?;
        lam.push(tensor::dot(&vj, &cols[mode]));
        for (dst, x) in v.column_mut(j).iter_mut().zip(vj) {
            *dst = x;
        }
    }
    Ok((lam, v))
}

/// Result of the polar update of one orthonormal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarStep {
    pub factor: Array2<f64>,
    pub proximal_applied: bool,
    /// Symmetric factor `S^(i)` of the decomposed matrix.
    pub s_matrix: Array2<f64>,
    /// `λ^{i−1}` for this mode.
    pub lambdas_prev: Vec<f64>,
    pub v: Array2<f64>,
    /// The matrix that was decomposed: `V^(i)Λ^(i)` plus `ε U_prev` when the
    /// proximal correction fired.
    pub decomposed: Array2<f64>,
}

/// Polar step for an orthonormal mode, with proximal correction when
/// `σ_min(V^(i)Λ^(i)) < ε`.
pub fn polar_update(a: &DenseTensor, u: &FactorSet, mode: usize, epsilon: f64) -> Result<PolarStep> {
    if mode >= u.s() {
        return Err(Error::Argument(format!("mode {mode} is not an orthonormal mode (s = {})", u.s())));
    }
    let (lam, v) = compute_lambda_v(a, u, mode)?;
    let x = &v * &Array1::from(lam.clone());
    let plain = linalg::polar(&x)?;
    let smallest = *plain.singular_values.last().expect("r >= 1");
    let (polar, decomposed, proximal_applied) = if smallest < epsilon {
        let shifted = &x + &(u.factor(mode) * epsilon);
        (linalg::polar(&shifted)?, shifted, true)
    } else {
        (plain, x, false)
    };
    Ok(PolarStep {
        factor: polar.orthonormal_factor,
        proximal_applied,
        s_matrix: polar.psd_factor,
        lambdas_prev: lam,
        v,
        decomposed,
    })
}

/// Drops every column `j` with `|λ^s_j| < κ` from all factors and from
/// `lambda_s`, keeping survivors in order. Returns the removed positions.
pub fn truncate(u: &mut FactorSet, lambda_s: &mut Vec<f64>, kappa: f64) -> Result<Vec<usize>> {
    if lambda_s.len() != u.rank() {
        return Err(Error::Invariant("λ^s length differs from the active rank".into()));
    }
    let removed: Vec<usize> = (0..lambda_s.len()).filter(|&j| lambda_s[j].abs() < kappa).collect();
    if removed.is_empty() {
        return Ok(removed);
    }
    if removed.len() == lambda_s.len() {
        return Err(Error::Invariant("truncation would remove every column".into()));
    }
    let keep: Vec<usize> = (0..lambda_s.len()).filter(|j| !removed.contains(j)).collect();
    *u = u.select_columns(&keep);
    *lambda_s = keep.iter().map(|&j| lambda_s[j]).collect();
    Ok(removed)
}

/// Result of the least-squares update of one non-orthonormal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsStep {
    pub factor: Array2<f64>,
    pub lambdas_prev: Vec<f64>,
    pub v: Array2<f64>,
    /// Columns with `Aτ_i(x^i_j) = 0`; these keep their previous value.
    pub degenerate: Vec<usize>,
}

/// `u^(i)_j = sgn(λ^{i−1}_j) Aτ_i(x^i_j) / ‖Aτ_i(x^i_j)‖` for every column.
pub fn als_update(a: &DenseTensor, u: &FactorSet, mode: usize) -> Result<AlsStep> {
    if mode < u.s() {
        return Err(Error::Argument(format!("mode {mode} is an orthonormal mode (s = {})", u.s())));
    }
    let (lam, v) = compute_lambda_v(a, u, mode)?;
    let mut factor = u.factor(mode).clone();
    let mut degenerate = Vec::new();
    for (j, (vj, mut col)) in v.axis_iter(Axis(1)).zip(factor.axis_iter_mut(Axis(1))).enumerate() {
        let norm = vj.dot(&vj).sqrt();
        if norm == 0.0 {
            degenerate.push(j);
            continue;
        }
        let scale = sign(lam[j]) / norm;
        col.iter_mut().zip(vj.iter()).for_each(|(dst, x)| *dst = x * scale);
    }
    Ok(AlsStep { factor, lambdas_prev: lam, v, degenerate })
}

fn column_dots(v: &Array2<f64>, u: &Array2<f64>) -> Vec<f64> {
    v.axis_iter(Axis(1)).zip(u.axis_iter(Axis(1))).map(|(a, b)| a.dot(&b)).collect()
}

fn column_shift_sq(new: &Array2<f64>, old: &Array2<f64>) -> Vec<f64> {
    new.axis_iter(Axis(1))
        .zip(old.axis_iter(Axis(1)))
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect()
}

/// One sweep in place; telemetry timing and KKT are filled by the caller.
pub(super) fn run(a: &DenseTensor, state: &mut SweepState, record_inner: bool) -> Result<SweepOutcome> {
    let k = state.u.order();
    let s = state.u.s();
    let mut previous = state.u.clone();
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut shifts: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut terms: Vec<Array2<f64>> = Vec::new();
    let mut proximal_modes = Vec::new();

    for mode in 0..s {
        let step = polar_update(a, &state.u, mode, state.epsilon)?;
        if mode == 0 {
            chain.push(step.lambdas_prev.clone());
        }
        chain.push(column_dots(&step.v, &step.factor));
        shifts.push(column_shift_sq(&step.factor, state.u.factor(mode)));
        if step.proximal_applied {
            proximal_modes.push(mode);
        }
        if record_inner {
            let alpha = if step.proximal_applied { state.epsilon } else { 0.0 };
            terms.push(&step.decomposed - &(&step.factor * alpha));
        }
        *state.u.factor_mut(mode) = step.factor;
    }

    let before: f64 = chain[s].iter().map(|l| l * l).sum();
    let mut lambda_s = chain[s].clone();
    let removed = truncate(&mut state.u, &mut lambda_s, state.kappa)?;
    let truncation_drop = before - lambda_s.iter().map(|l| l * l).sum::<f64>();
    if !removed.is_empty() {
        let keep: Vec<usize> = (0..chain[s].len()).filter(|j| !removed.contains(j)).collect();
        previous = previous.select_columns(&keep);
        for c in chain.iter_mut().chain(shifts.iter_mut()) {
            *c = keep.iter().map(|&j| c[j]).collect();
        }
        for t in terms.iter_mut() {
            *t = t.select(Axis(1), &keep);
        }
    }

    let mut degenerate_columns = 0;
    for mode in s..k {
        let step = als_update(a, &state.u, mode)?;
        degenerate_columns += step.degenerate.len();
        let lam_new = column_dots(&step.v, &step.factor);
        shifts.push(column_shift_sq(&step.factor, state.u.factor(mode)));
        if record_inner {
            terms.push(&step.v * &Array1::from(lam_new.clone()));
        }
        chain.push(lam_new);
        *state.u.factor_mut(mode) = step.factor;
    }

    let objective_f: f64 = chain[k].iter().map(|l| l * l).sum();
    let step_norm = state.u.distance(&previous)?;
    state.sweep += 1;
    state.lambda_chain_start = chain[k].clone();

    let record = IterationRecord {
        sweep: state.sweep,
        objective_f,
        step_norm,
        truncated_indices: removed,
        proximal_modes,
        kkt_residual: None,
        wall_time_ms: 0.0,
        active_rank: state.u.rank(),
        truncation_drop,
        degenerate_columns,
        feasibility_error: 0.0,
    };
    let trace = record_inner.then(|| InnerTrace { sweep: state.sweep, s, lambdas: chain, column_shift_sq: shifts });
    let subgradient = record_inner.then(|| SubgradientTerms { sweep: state.sweep, terms });
    Ok(SweepOutcome { record, trace, subgradient, previous })
}
