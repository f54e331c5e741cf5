//! Sweep logs as CSV and solve results as versioned JSON.
//!
//! CSV columns, in order: `sweep,f,step_norm,kkt_total,active_rank,
//! truncated,proximal_mask,wall_ms`. `truncated` lists removed positions
//! separated by `;`; `proximal_mask` has one `0`/`1` per orthonormal mode;
//! `kkt_total` is empty when not tracked. Floats use shortest round-trip form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, KktResidual};
use crate::error::{Error, Result};
use crate::problems::SCHEMA;
use crate::solver::{FactorSet, IterationRecord, SolveOutput, SolveStatus};
use crate::tensor::DenseTensor;

pub const CSV_HEADER: &str = "sweep,f,step_norm,kkt_total,active_rank,truncated,proximal_mask,wall_ms";

/// Renders a sweep log. Wall time is written as 0 unless `timing` is set, so
/// that logs of identical runs are byte-identical.
pub fn log_to_csv(records: &[IterationRecord], s: usize, timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let kkt = r.kkt_residual.map(|x| format!("{x:e}")).unwrap_or_default();
        let truncated: Vec<String> = r.truncated_indices.iter().map(usize::to_string).collect();
        let mask: String = (0..s).map(|m| if r.proximal_modes.contains(&m) { '1' } else { '0' }).collect();
        let wall = if timing { r.wall_time_ms } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{},{},{},{:e}",
            r.sweep,
            r.objective_f,
            r.step_norm,
            kkt,
            r.active_rank,
            truncated.join(";"),
            mask,
            wall
        );
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad {name} value {s:?}")))
}

/// Parses a log written by [`log_to_csv`]. Truncation drops are not part of
/// the log and come back as 0.
pub fn parse_csv_log(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse(format!("missing header {CSV_HEADER:?}"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::Parse(format!("line {line_no}: expected 8 columns, got {}", cols.len())));
        }
        let objective_f: f64 = field(line_no, "f", cols[1])?;
        let step_norm: f64 = field(line_no, "step_norm", cols[2])?;
        if !objective_f.is_finite() || !step_norm.is_finite() {
            return Err(Error::Parse(format!("line {line_no}: non-finite value")));
        }
        let kkt_residual = if cols[3].trim().is_empty() { None } else { Some(field(line_no, "kkt_total", cols[3])?) };
        let truncated_indices = if cols[5].trim().is_empty() {
            Vec::new()
        } else {
            cols[5].split(';').map(|t| field(line_no, "truncated", t)).collect::<Result<Vec<usize>>>()?
        };
        let mut proximal_modes = Vec::new();
        for (m, c) in cols[6].trim().chars().enumerate() {
            match c {
                '1' => proximal_modes.push(m),
                '0' => {}
                _ => return Err(Error::Parse(format!("line {line_no}: bad proximal mask {:?}", cols[6]))),
            }
        }
        records.push(IterationRecord {
            sweep: field(line_no, "sweep", cols[0])?,
            objective_f,
            step_norm,
            truncated_indices,
            proximal_modes,
            kkt_residual,
            wall_time_ms: field(line_no, "wall_ms", cols[7])?,
            active_rank: field(line_no, "active_rank", cols[4])?,
            truncation_drop: 0.0,
            degenerate_columns: 0,
            feasibility_error: 0.0,
        });
    }
    if records.is_empty() {
        return Err(Error::Parse("log has no rows".into()));
    }
    if records.windows(2).any(|w| w[1].sweep != w[0].sweep + 1) {
        return Err(Error::Parse("sweep indices are not consecutive".into()));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationEvent {
    pub sweep: usize,
    pub removed: usize,
    pub drop: f64,
}

/// JSON result of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub schema: String,
    pub status: SolveStatus,
    pub dims: Vec<usize>,
    pub r: usize,
    pub s: usize,
    pub seed: u64,
    pub restarts: usize,
    pub best_restart: usize,
    pub max_sweeps: usize,
    pub sweeps: usize,
    pub objective: f64,
    pub lambdas: Vec<f64>,
    pub residual: f64,
    pub relative_residual: f64,
    pub norm_a: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub stop_tol: f64,
    pub initial_rank: usize,
    pub active_rank: usize,
    pub truncations: Vec<TruncationEvent>,
    pub kkt: KktResidual,
    /// Final factor matrices, row-major, `dims[i] × active_rank`.
    pub factors: Vec<Vec<f64>>,
}

/// Provenance of a solve that goes into its result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunInfo {
    pub seed: u64,
    pub restarts: usize,
    pub best_restart: usize,
    pub max_sweeps: usize,
}

impl SolveResult {
    pub fn from_output(a: &DenseTensor, out: &SolveOutput, info: RunInfo) -> Result<Self> {
        let residual = out.residual(a)?;
        Ok(Self {
            schema: SCHEMA.into(),
            status: out.status,
            dims: a.dims().to_vec(),
            r: out.initial_rank,
            s: out.factors.s(),
            seed: info.seed,
            restarts: info.restarts,
            best_restart: info.best_restart,
            max_sweeps: info.max_sweeps,
            sweeps: out.records.last().map_or(0, |r| r.sweep),
            objective: out.objective(),
            lambdas: out.core.lambdas.clone(),
            residual,
            relative_residual: if out.norm_a > 0.0 { residual / out.norm_a } else { residual },
            norm_a: out.norm_a,
            epsilon: out.epsilon,
            kappa: out.kappa,
            stop_tol: out.stop_tol,
            initial_rank: out.initial_rank,
            active_rank: out.factors.rank(),
            truncations: out
                .records
                .iter()
                .filter(|r| r.is_truncation())
                .map(|r| TruncationEvent { sweep: r.sweep, removed: r.truncated_indices.len(), drop: r.truncation_drop })
                .collect(),
            kkt: diagnostics::kkt_residual(a, &out.factors)?,
            factors: out.factors.factors().iter().map(|f| f.iter().copied().collect()).collect(),
        })
    }

    pub fn factor_set(&self) -> Result<FactorSet> {
        if self.factors.len() != self.dims.len() {
            return Err(Error::Parse("one factor per mode expected".into()));
        }
        let mats = self
            .dims
            .iter()
            .zip(&self.factors)
            .map(|(&n, f)| {
                ndarray::Array2::from_shape_vec((n, self.active_rank), f.clone())
                    .map_err(|e| Error::Parse(format!("factor shape: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FactorSet::new(mats, self.s)
    }

    /// Copies the recorded truncation drops into parsed log records.
    pub fn annotate(&self, records: &mut [IterationRecord]) {
        for ev in &self.truncations {
            if let Some(r) = records.iter_mut().find(|r| r.sweep == ev.sweep) {
                r.truncation_drop = ev.drop;
            }
        }
    }
}
