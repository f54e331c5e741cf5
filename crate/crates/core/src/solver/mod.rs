//! Alternating polar decompositions with proximal correction on the
//! orthonormal modes, normalized least-squares updates on the remaining
//! modes, and truncation of vanishing components.
//!
//! One sweep updates `U^(1)`, ..., `U^(s)` by polar decomposition of
//! `V^(i) Λ^(i)`, removes every column `j` with `|λ^s_j| < κ`, then updates
//! `U^(s+1)`, ..., `U^(k)` column by column. Modes are 0-based in code: the
//! orthonormal modes are `0..s`.

mod factors;
mod sweep;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use factors::{lambdas, objective_f, reconstruct, DiagonalCore, FactorSet, FEASIBILITY_TOL};
pub use sweep::{als_update, compute_lambda_v, polar_update, truncate, AlsStep, PolarStep};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::tensor::{self, DenseTensor};

/// Initialization attempts before giving up on finding `f(U_[0]) > 0`.
pub const MAX_INIT_RETRIES: usize = 16;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Default proximal strength relative to `‖A‖`.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-3;
/// Default stop tolerance relative to `sqrt(r Σ n_i)`.
pub const DEFAULT_STOP_SCALE: f64 = 1e-10;
/// Auto truncation parameter relative to `sqrt(f(U_[0]) / r)`.
pub const AUTO_KAPPA_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kappa {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Proximal threshold and strength; `None` means `1e-3·‖A‖`.
    pub epsilon: Option<f64>,
    pub kappa: Kappa,
    pub max_sweeps: usize,
    /// Stop once `‖U_[p] − U_[p−1]‖_F` falls to this; `None` means
    /// `1e-10·sqrt(r Σ n_i)`.
    pub stop_tol: Option<f64>,
    pub seed: u64,
    /// Keep per-sweep λ chains and subgradient terms.
    pub record_inner: bool,
    /// Evaluate the KKT residual after every sweep.
    pub track_kkt: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            kappa: Kappa::Auto,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            stop_tol: None,
            seed: 0,
            record_inner: false,
            track_kkt: false,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Iterate state between sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepState {
    pub u: FactorSet,
    /// `λ^k` of the previous sweep, i.e. `λ^0` of the next one.
    pub lambda_chain_start: Vec<f64>,
    pub sweep: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub initial_rank: usize,
    pub initial_objective: f64,
}

impl SweepState {
    /// Starts from given factors with explicit `ε` and `κ`.
    pub fn from_factors(a: &DenseTensor, u: FactorSet, epsilon: f64, kappa: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(kappa > 0.0) {
            return Err(Error::Argument("epsilon and kappa must be positive".into()));
        }
        let lam = lambdas(a, &u)?;
        let f0 = lam.iter().map(|l| l * l).sum();
        Ok(Self {
            initial_rank: u.rank(),
            u,
            lambda_chain_start: lam,
            sweep: 0,
            epsilon,
            kappa,
            initial_objective: f0,
        })
    }

    pub fn objective(&self) -> f64 {
        self.lambda_chain_start.iter().map(|l| l * l).sum()
    }
}

/// Per-sweep telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub sweep: usize,
    pub objective_f: f64,
    pub step_norm: f64,
    /// Positions (among the columns active at the start of the sweep) that
    /// were truncated.
    pub truncated_indices: Vec<usize>,
    /// Orthonormal modes (0-based) where the proximal correction fired.
    pub proximal_modes: Vec<usize>,
    pub kkt_residual: Option<f64>,
    pub wall_time_ms: f64,
    pub active_rank: usize,
    /// Objective lost to truncation in this sweep.
    pub truncation_drop: f64,
    /// Columns whose least-squares direction vanished and were kept as is.
    pub degenerate_columns: usize,
    /// Largest Stiefel/Oblique constraint violation after the sweep.
    #[serde(default)]
    pub feasibility_error: f64,
}

impl IterationRecord {
    pub fn is_truncation(&self) -> bool {
        !self.truncated_indices.is_empty()
    }
}

/// λ chain of one sweep: `lambdas[i]` is `λ^i` for `i = 0..=k` over the
/// surviving columns, and `column_shift_sq[i][j] = ‖u^(i)_j − ū^(i)_j‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerTrace {
    pub sweep: usize,
    pub s: usize,
    pub lambdas: Vec<Vec<f64>>,
    pub column_shift_sq: Vec<Vec<f64>>,
}

/// Quantities needed to assemble the subgradient witness of a sweep:
/// `terms[i]` is `V^(i)Λ^(i) + α_i(U_prev − U_new)` for orthonormal modes and
/// `V^(i) diag(λ^i)` for the others.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientTerms {
    pub sweep: usize,
    pub terms: Vec<ndarray::Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub record: IterationRecord,
    pub trace: Option<InnerTrace>,
    pub subgradient: Option<SubgradientTerms>,
    pub previous: FactorSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Converged,
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub factors: FactorSet,
    pub core: DiagonalCore,
    /// Starts with a sweep-0 record describing the initialization.
    pub records: Vec<IterationRecord>,
    pub traces: Vec<InnerTrace>,
    /// Post-sweep factors paired with that sweep's subgradient terms.
    pub subgradients: Vec<(FactorSet, SubgradientTerms)>,
    pub status: SolveStatus,
    pub epsilon: f64,
    pub kappa: f64,
    pub stop_tol: f64,
    pub initial_rank: usize,
    pub norm_a: f64,
}

impl SolveOutput {
    pub fn objective(&self) -> f64 {
        self.core.lambdas.iter().map(|l| l * l).sum()
    }

    /// `‖A − (U)·diag_k(λ)‖`.
    pub fn residual(&self, a: &DenseTensor) -> Result<f64> {
        Ok(tensor::hs_norm(&a.sub(&reconstruct(&self.factors, &self.core)?)?))
    }

    /// Sweep index of the last truncation, if any.
    pub fn last_truncation_sweep(&self) -> Option<usize> {
        self.records.iter().rev().find(|r| r.is_truncation()).map(|r| r.sweep)
    }
}

fn validate_problem(a: &DenseTensor, r: usize, s: usize) -> Result<()> {
    let k = a.order();
    if s == 0 || s > k {
        return Err(Error::Argument(format!("s = {s} must lie in 1..={k}")));
    }
    let cap = a.dims()[..s].iter().copied().min().expect("s >= 1");
    if r == 0 || r > cap {
        return Err(Error::Argument(format!("r = {r} must lie in 1..={cap} (min of the first s dims)")));
    }
    if a.is_zero() {
        return Err(Error::ZeroTensor);
    }
    Ok(())
}

fn initial_factors(dims: &[usize], r: usize, s: usize, seed: u64, attempt: usize) -> Result<FactorSet> {
    let mut factors = Vec::with_capacity(dims.len());
    for (i, &n) in dims.iter().enumerate() {
        let stream_seed = rng::derive_seed(seed, &[0x494E_4954, attempt as u64, i as u64]);
        if i < s {
            factors.push(linalg::random_orthonormal(n, r, stream_seed)?);
        } else {
            let mut stream = rng::stream(stream_seed, &[]);
            let mut m = ndarray::Array2::zeros((n, r));
            for j in 0..r {
                let mut col = rng::gaussian_vec(&mut stream, n);
                let mut norm = tensor::norm2(&col);
                while norm == 0.0 {
                    col = rng::gaussian_vec(&mut stream, n);
                    norm = tensor::norm2(&col);
                }
                for (dst, x) in m.column_mut(j).iter_mut().zip(col) {
                    *dst = x / norm;
                }
            }
            factors.push(m);
        }
    }
    FactorSet::from_parts(factors, s)
}

/// Seeded feasible starting point with `f(U_[0]) > 0`, plus resolved `ε`, `κ`.
pub fn initialize(a: &DenseTensor, r: usize, s: usize, config: &SolverConfig) -> Result<SweepState> {
    validate_problem(a, r, s)?;
    let norm_a = tensor::hs_norm(a);
    let epsilon = config.epsilon.unwrap_or(DEFAULT_EPSILON_SCALE * norm_a);
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    for attempt in 0..=MAX_INIT_RETRIES {
        let u = initial_factors(a.dims(), r, s, config.seed, attempt)?;
        let lam = lambdas(a, &u)?;
        let f0: f64 = lam.iter().map(|l| l * l).sum();
        if !(f0 > 0.0) {
            continue;
        }
        let bound = (f0 / r as f64).sqrt();
        let kappa = match config.kappa {
            Kappa::Auto => AUTO_KAPPA_FRACTION * bound,
            Kappa::Fixed(k) if k > 0.0 && k < bound => k,
            Kappa::Fixed(k) => {
                return Err(Error::Argument(format!("kappa = {k} must lie in (0, {bound})")));
            }
        };
        return Ok(SweepState {
            initial_rank: r,
            u,
            lambda_chain_start: lam,
            sweep: 0,
            epsilon,
            kappa,
            initial_objective: f0,
        });
    }
    Err(Error::Initialization(format!(
        "f(U_[0]) vanished for {} seeded draws",
        MAX_INIT_RETRIES + 1
    )))
}

/// One full sweep over all modes.
pub fn sweep(a: &DenseTensor, state: &mut SweepState, config: &SolverConfig) -> Result<SweepOutcome> {
    let started = Instant::now();
    let outcome = sweep::run(a, state, config.record_inner)?;
    let mut outcome = outcome;
    if config.track_kkt {
        outcome.record.kkt_residual = Some(diagnostics::kkt_residual(a, &state.u)?.total);
    }
    outcome.record.feasibility_error = state.u.feasibility_error();
    outcome.record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(outcome)
}

fn default_stop_tol(a: &DenseTensor, r: usize) -> f64 {
    let total: usize = a.dims().iter().sum();
    DEFAULT_STOP_SCALE * ((total * r) as f64).sqrt()
}

/// Runs sweeps from a prepared state until the step norm drops to the stop
/// tolerance or the sweep cap is hit.
pub fn solve_from(a: &DenseTensor, mut state: SweepState, config: &SolverConfig) -> Result<SolveOutput> {
    let stop_tol = config.stop_tol.unwrap_or_else(|| default_stop_tol(a, state.initial_rank));
    let mut records = Vec::new();
    records.push(IterationRecord {
        sweep: state.sweep,
        objective_f: state.objective(),
        step_norm: 0.0,
        truncated_indices: Vec::new(),
        proximal_modes: Vec::new(),
        kkt_residual: if config.track_kkt { Some(diagnostics::kkt_residual(a, &state.u)?.total) } else { None },
        wall_time_ms: 0.0,
        active_rank: state.u.rank(),
        truncation_drop: 0.0,
        degenerate_columns: 0,
        feasibility_error: state.u.feasibility_error(),
    });
    let mut traces = Vec::new();
    let mut subgradients = Vec::new();
    let mut status = SolveStatus::Cap;
    for _ in 0..config.max_sweeps {
        let outcome = sweep(a, &mut state, config)?;
        let done = outcome.record.step_norm <= stop_tol;
        if let Some(t) = outcome.trace {
            traces.push(t);
        }
        if let Some(g) = outcome.subgradient {
            subgradients.push((state.u.clone(), g));
        }
        records.push(outcome.record);
        if done {
            status = SolveStatus::Converged;
            break;
        }
    }
    let core = DiagonalCore { lambdas: lambdas(a, &state.u)? };
    Ok(SolveOutput {
        factors: state.u,
        core,
        records,
        traces,
        subgradients,
        status,
        epsilon: state.epsilon,
        kappa: state.kappa,
        stop_tol,
        initial_rank: state.initial_rank,
        norm_a: tensor::hs_norm(a),
    })
}

/// Seeded initialization followed by [`solve_from`].
pub fn solve(a: &DenseTensor, r: usize, s: usize, config: &SolverConfig) -> Result<SolveOutput> {
    let state = initialize(a, r, s, config)?;
    solve_from(a, state, config)
}
