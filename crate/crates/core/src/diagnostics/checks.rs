use serde::{Deserialize, Serialize};

use crate::solver::{InnerTrace, IterationRecord};

/// Allowed violation of the per-sweep inequalities, relative to `‖A‖²`.
pub const INCREASE_SLACK: f64 = 1e-10;
/// Allowed decrease of `|λ|` along the least-squares modes, relative to
/// `max(1, |λ|)`.
pub const CHAIN_MONOTONE_TOL: f64 = 1e-12;
/// Tolerance on the per-column increment identity, relative to `max(1, |λ|)`.
pub const CHAIN_IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Exempt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCheck {
    pub sweep: usize,
    pub status: CheckStatus,
    /// Left side minus right side of the checked inequality.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub constant: f64,
    pub checks: Vec<SweepCheck>,
    pub passed: bool,
}

/// `min{ε, 2κ²} / 2`.
pub fn sufficient_increase_constant(epsilon: f64, kappa: f64) -> f64 {
    epsilon.min(2.0 * kappa * kappa) / 2.0
}

/// `f_p − f_{p−1} ≥ c·‖U_[p] − U_[p−1]‖² − slack` for every consecutive pair
/// whose later sweep did not truncate; truncation sweeps are exempt.
pub fn assert_sufficient_increase(records: &[IterationRecord], epsilon: f64, kappa: f64, norm_a: f64) -> SweepReport {
    let c = sufficient_increase_constant(epsilon, kappa);
    let slack = INCREASE_SLACK * norm_a * norm_a;
    let checks: Vec<SweepCheck> = records
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            if cur.is_truncation() {
                return SweepCheck { sweep: cur.sweep, status: CheckStatus::Exempt, margin: 0.0 };
            }
            let margin = cur.objective_f - prev.objective_f - c * cur.step_norm * cur.step_norm;
            let status = if margin >= -slack { CheckStatus::Pass } else { CheckStatus::Fail };
            SweepCheck { sweep: cur.sweep, status, margin }
        })
        .collect();
    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    SweepReport { constant: c, checks, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub last_truncation: Option<usize>,
    pub checks: Vec<SweepCheck>,
    pub passed: bool,
}

/// `f` is nondecreasing (up to `1e-10·‖A‖²`) over the sweeps after the last
/// truncation.
pub fn assert_monotone_after_truncation(records: &[IterationRecord], norm_a: f64) -> MonotoneReport {
    let slack = INCREASE_SLACK * norm_a * norm_a;
    let last = records.iter().rev().find(|r| r.is_truncation()).map(|r| r.sweep);
    let checks: Vec<SweepCheck> = records
        .windows(2)
        .filter(|w| last.map_or(true, |t| w[0].sweep >= t))
        .map(|w| {
            let margin = w[1].objective_f - w[0].objective_f;
            let status = if margin >= -slack { CheckStatus::Pass } else { CheckStatus::Fail };
            SweepCheck { sweep: w[1].sweep, status, margin }
        })
        .collect();
    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    MonotoneReport { last_truncation: last, checks, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub initial_rank: usize,
    pub total_truncated: usize,
    pub cumulative_drop: f64,
    pub drop_bound: f64,
    /// Per truncation sweep: `f_p − f_{p−1} + |J_p|κ²`.
    pub checks: Vec<SweepCheck>,
    pub passed: bool,
}

/// At most `r` columns are ever truncated, each truncation sweep loses at
/// most `|J_p|κ²`, and the total loss stays below `r κ²`.
pub fn assert_truncation_budget(
    records: &[IterationRecord],
    initial_rank: usize,
    kappa: f64,
    norm_a: f64,
) -> TruncationReport {
    let slack = INCREASE_SLACK * norm_a * norm_a;
    let k2 = kappa * kappa;
    let mut total = 0;
    let mut cumulative = 0.0;
    let mut checks = Vec::new();
    for w in records.windows(2) {
        let cur = &w[1];
        if !cur.is_truncation() {
            continue;
        }
        let j = cur.truncated_indices.len();
        total += j;
        cumulative += cur.truncation_drop;
        let budget = j as f64 * k2;
        let margin = cur.objective_f - w[0].objective_f + budget;
        let drop_ok = !(cur.truncation_drop > budget + slack);
        let status = if margin >= -slack && drop_ok { CheckStatus::Pass } else { CheckStatus::Fail };
        checks.push(SweepCheck { sweep: cur.sweep, status, margin });
    }
    let drop_bound = initial_rank as f64 * k2 + 1e-10;
    let passed = total <= initial_rank
        && !(cumulative > drop_bound)
        && checks.iter().all(|c| c.status != CheckStatus::Fail);
    TruncationReport { initial_rank, total_truncated: total, cumulative_drop: cumulative, drop_bound, checks, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFailure {
    pub sweep: usize,
    pub mode: usize,
    pub column: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub sweeps_checked: usize,
    pub failures: Vec<ChainFailure>,
    pub passed: bool,
}

fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Along the least-squares modes of each sweep: `λ^{i+1}_j` keeps the sign of
/// `λ^i_j`, `|λ^{i+1}_j| ≥ |λ^i_j|`, and
/// `λ^{i+1}_j − λ^i_j = sgn(λ^i_j) |λ^{i+1}_j| ‖u_new − u_old‖² / 2`.
pub fn assert_lambda_chain(traces: &[InnerTrace]) -> ChainReport {
    let mut failures = Vec::new();
    for t in traces {
        let k = t.lambdas.len().saturating_sub(1);
        if t.column_shift_sq.len() != k || t.s > k {
            failures.push(ChainFailure { sweep: t.sweep, mode: 0, column: 0, reason: "malformed trace".into() });
            continue;
        }
        for i in t.s..k {
            let (lo, hi, shift) = (&t.lambdas[i], &t.lambdas[i + 1], &t.column_shift_sq[i]);
            if lo.len() != hi.len() || shift.len() != hi.len() {
                failures.push(ChainFailure { sweep: t.sweep, mode: i, column: 0, reason: "ragged trace".into() });
                continue;
            }
            for j in 0..hi.len() {
                let (a, b) = (lo[j], hi[j]);
                let scale = a.abs().max(b.abs()).max(1.0);
                let mut fail = |reason: &str| {
                    failures.push(ChainFailure { sweep: t.sweep, mode: i, column: j, reason: reason.into() })
                };
                if b != 0.0 && sgn(b) != sgn(a) {
                    fail("sign flip");
                    continue;
                }
                if b.abs() < a.abs() - CHAIN_MONOTONE_TOL * scale {
                    fail("|lambda| decreased");
                    continue;
                }
                let identity = b - a - sgn(a) * b.abs() * shift[j] / 2.0;
                if identity.abs() > CHAIN_IDENTITY_TOL * scale {
                    fail("increment identity violated");
                }
            }
        }
    }
    let passed = failures.is_empty();
    ChainReport { sweeps_checked: traces.len(), failures, passed }
}
