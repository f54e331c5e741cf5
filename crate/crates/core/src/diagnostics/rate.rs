use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::IterationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    Linear,
    Sublinear,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub model: RateModel,
    /// `ρ` in `f* − f_p ≈ C ρ^p`.
    pub linear_factor: Option<f64>,
    /// `β` in `f* − f_p ≈ C p^β`.
    pub sublinear_exponent: Option<f64>,
    pub fit_r2: f64,
    pub linear_r2: f64,
    pub sublinear_r2: f64,
    pub tail_start: usize,
    pub tail_points: usize,
    pub f_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateOptions {
    pub tail_fraction: f64,
    pub min_tail_points: usize,
    pub r2_threshold: f64,
    pub min_records: usize,
    /// Scale of the noise floor, normally `‖A‖²`; defaults to
    /// `max(|f*|, max f_p)`.
    pub norm_sq: Option<f64>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { tail_fraction: 0.5, min_tail_points: 10, r2_threshold: 0.9, min_records: 20, norm_sq: None }
    }
}

struct Fit {
    slope: f64,
    r2: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Fit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    Fit { slope, r2: r2.clamp(0.0, 1.0) }
}

pub fn estimate_rate(records: &[IterationRecord], f_star_hint: Option<f64>) -> Result<RateEstimate> {
    estimate_rate_with(records, f_star_hint, &RateOptions::default())
}

/// Fits `ln(f* − f_p)` against `p` and against `ln p` over the tail of the
/// post-truncation records and reports the better model.
pub fn estimate_rate_with(
    records: &[IterationRecord],
    f_star_hint: Option<f64>,
    opts: &RateOptions,
) -> Result<RateEstimate> {
    let last_trunc = records.iter().filter(|r| r.is_truncation()).map(|r| r.sweep).max();
    let post: Vec<&IterationRecord> = records
        .iter()
        .filter(|r| r.sweep >= 1 && last_trunc.map_or(true, |t| r.sweep > t))
        .collect();
    if post.len() < opts.min_records {
        return Err(Error::Argument(format!(
            "rate estimation needs at least {} post-truncation records, got {}",
            opts.min_records,
            post.len()
        )));
    }
    let f_max = post.iter().map(|r| r.objective_f).fold(f64::NEG_INFINITY, f64::max);
    let f_star = f_star_hint.unwrap_or(f_max + 4.0 * f64::EPSILON * f_max.abs());
    let scale = opts.norm_sq.unwrap_or(f_star.abs().max(f_max.abs()));
    let floor = 1e3 * f64::EPSILON * scale;
    let usable: Vec<(f64, f64)> = post
        .iter()
        .map(|r| (r.sweep as f64, f_star - r.objective_f))
        .filter(|&(_, gap)| gap > floor)
        .collect();
    let want = ((opts.tail_fraction * usable.len() as f64).ceil() as usize).max(opts.min_tail_points);
    let tail = &usable[usable.len().saturating_sub(want)..];
    let undecided = |tail_start, points, linear_r2, sublinear_r2| RateEstimate {
        model: RateModel::Undecided,
        linear_factor: None,
        sublinear_exponent: None,
        fit_r2: f64::max(linear_r2, sublinear_r2),
        linear_r2,
        sublinear_r2,
        tail_start,
        tail_points: points,
        f_star,
    };
    if tail.len() < 3 {
        let start = tail.first().map_or(post[post.len() - 1].sweep, |t| t.0 as usize);
        return Ok(undecided(start, tail.len(), 0.0, 0.0));
    }
    let tail_start = tail[0].0 as usize;
    let p: Vec<f64> = tail.iter().map(|t| t.0).collect();
    let logp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = tail.iter().map(|t| t.1.ln()).collect();
    let lin = least_squares(&p, &y);
    let sub = least_squares(&logp, &y);
    let lin_ok = lin.slope < 0.0 && lin.r2 >= opts.r2_threshold;
    let sub_ok = sub.slope < 0.0 && sub.r2 >= opts.r2_threshold;
    let mut est = undecided(tail_start, tail.len(), lin.r2, sub.r2);
    if lin_ok && (!sub_ok || lin.r2 >= sub.r2) {
        est.model = RateModel::Linear;
        est.linear_factor = Some(lin.slope.exp());
        est.fit_r2 = lin.r2;
    } else if sub_ok {
        est.model = RateModel::Sublinear;
        est.sublinear_exponent = Some(sub.slope);
        est.fit_r2 = sub.r2;
    }
    Ok(est)
}
