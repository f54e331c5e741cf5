//! Planted instances with known factors, plus rank and dimension utilities.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::solver::{reconstruct, DiagonalCore, FactorSet};
use crate::tensor::{self, DenseTensor};

/// Schema tag written into every JSON artifact.
pub const SCHEMA: &str = "potapprox/v1";
/// Smallest singular value required of planted non-orthonormal factors.
pub const INDEPENDENCE_MARGIN: f64 = 0.1;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
const MAX_INDEPENDENCE_DRAWS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub tensor: DenseTensor,
    pub true_factors: FactorSet,
    pub true_sigmas: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
    /// The additive noise; zero when `noise_level == 0`.
    pub noise: DenseTensor,
}

/// `Σ_j σ_j a^(1)_j ⊗ ... ⊗ a^(k)_j` with orthonormal `A^(1..s)` and
/// well-conditioned unit-column `A^(s+1..k)`, plus Gaussian noise scaled to
/// `noise_level · ‖signal‖`.
pub fn plant(n_dims: &[usize], r: usize, s: usize, sigmas: &[f64], noise_level: f64, seed: u64) -> Result<PlantedInstance> {
    let k = n_dims.len();
    if k == 0 || s == 0 || s > k {
        return Err(Error::Argument(format!("need 1 <= s <= k, got s = {s}, k = {k}")));
    }
    if r == 0 || r > n_dims.iter().copied().min().unwrap_or(0) {
        return Err(Error::Argument(format!("r = {r} must lie in 1..=min(n_i) = {:?}", n_dims.iter().min())));
    }
    if sigmas.len() != r || sigmas.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Argument(format!("need {r} positive finite sigmas, got {sigmas:?}")));
    }
    if !(noise_level >= 0.0) || !noise_level.is_finite() {
        return Err(Error::Argument(format!("noise level must be nonnegative, got {noise_level}")));
    }
    let mut factors = Vec::with_capacity(k);
    for (i, &n) in n_dims.iter().enumerate() {
        let mode_seed = rng::derive_seed(seed, &[0x504C_414E, i as u64]);
        if i < s {
            factors.push(linalg::random_orthonormal(n, r, mode_seed)?);
        } else {
            factors.push(independent_unit_columns(n, r, mode_seed)?);
        }
    }
    let true_factors = FactorSet::new(factors, s)?;
    let signal = reconstruct(&true_factors, &DiagonalCore { lambdas: sigmas.to_vec() })?;
    let noise = if noise_level > 0.0 {
        let mut stream = rng::stream(seed, &[0x4E4F_4953]);
        let g = DenseTensor::new(n_dims, rng::gaussian_vec(&mut stream, signal.data().len()))?;
        g.scaled(noise_level * tensor::hs_norm(&signal) / tensor::hs_norm(&g))
    } else {
        DenseTensor::zeros(n_dims)?
    };
    Ok(PlantedInstance {
        tensor: signal.add(&noise)?,
        true_factors,
        true_sigmas: sigmas.to_vec(),
        noise_level,
        seed,
        noise,
    })
}

fn independent_unit_columns(n: usize, r: usize, seed: u64) -> Result<Array2<f64>> {
    for attempt in 0..MAX_INDEPENDENCE_DRAWS {
        let mut stream = rng::stream(seed, &[attempt]);
        let mut m = Array2::zeros((n, r));
        for mut col in m.columns_mut() {
            let g = rng::gaussian_vec(&mut stream, n);
            let norm = tensor::norm2(&g);
            if norm == 0.0 {
                continue;
            }
            col.iter_mut().zip(g).for_each(|(d, x)| *d = x / norm);
        }
        if linalg::sigma_min(&m)? >= INDEPENDENCE_MARGIN {
            return Ok(m);
        }
    }
    Err(Error::Initialization(format!("no {n}x{r} unit-column matrix with sigma_min >= {INDEPENDENCE_MARGIN}")))
}

/// Number of coefficients with `|σ_i| > tol`. Equals the tensor rank for
/// partially orthogonal tensors with at least two orthonormal modes.
pub fn rank_from_sigmas(sigmas: &[f64], tol: f64) -> usize {
    sigmas.iter().filter(|x| x.abs() > tol).count()
}

/// Numerical rank of the mode-1 flattening: singular values above
/// `tol · σ_max`. Meaningful for tensors in or near the partially orthogonal
/// set only.
pub fn rank_via_flattening(t: &DenseTensor, tol: f64) -> Result<usize> {
    if t.is_zero() {
        return Ok(0);
    }
    let a1 = t.unfold(0)?;
    let m = if a1.nrows() <= a1.ncols() { a1.t().to_owned() } else { a1 };
    let sv = linalg::svd(&m)?.singular_values;
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&x| x > tol * top).count())
}

/// `r (Σ n_i − s(r−1)/2 − k + 1)`.
pub fn manifold_dimension(n_dims: &[usize], r: usize, s: usize) -> Result<usize> {
    let k = n_dims.len() as i64;
    let (r, s) = (r as i64, s as i64);
    let sum: i64 = n_dims.iter().map(|&n| n as i64).sum();
    let twice = r * (2 * sum - s * (r - 1) - 2 * k + 2);
    if twice % 2 != 0 || twice < 0 {
        return Err(Error::Invariant(format!("dimension formula gave {twice}/2")));
    }
    Ok((twice / 2) as usize)
}

/// The same dimension counted piece by piece: Stiefel factors, Oblique
/// factors, and the `r` scales, minus nothing (sign redundancy is discrete).
pub fn manifold_dimension_by_parts(n_dims: &[usize], r: usize, s: usize) -> usize {
    if r == 0 {
        return 0;
    }
    let stiefel: usize = n_dims[..s].iter().map(|&n| r * (n - r) + r * (r - 1) / 2).sum();
    let oblique: usize = n_dims[s..].iter().map(|&n| r * (n - 1)).sum();
    stiefel + oblique + r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub score: f64,
    /// Truth column `l` matched to estimate column `assignment[l]`.
    pub assignment: Vec<Option<usize>>,
    /// Set when the ranks differ and only a partial matching exists.
    pub partial: bool,
}

/// σ-weighted mean over truth columns of the mode-averaged absolute cosine to
/// the matched estimate column. Matching is greedy on the sign-insensitive
/// cosine matrix, so it is invariant under column permutations and sign flips.
pub fn factor_match_score(u: &FactorSet, truth: &FactorSet, sigmas: &[f64]) -> Result<MatchScore> {
    if u.dims() != truth.dims() {
        return Err(Error::Dimension(format!("shapes {:?} vs {:?}", u.dims(), truth.dims())));
    }
    if sigmas.len() != truth.rank() {
        return Err(Error::Dimension("one sigma per truth column expected".into()));
    }
    let (re, rt) = (u.rank(), truth.rank());
    let k = u.order() as f64;
    let mut cos = vec![vec![0.0; rt]; re];
    for (ue, ut) in u.factors().iter().zip(truth.factors()) {
        let g = ue.t().dot(ut);
        for j in 0..re {
            for l in 0..rt {
                let nj = ue.column(j).dot(&ue.column(j)).sqrt();
                let nl = ut.column(l).dot(&ut.column(l)).sqrt();
                cos[j][l] += (g[[j, l]] / (nj * nl)).abs() / k;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..re).flat_map(|j| (0..rt).map(move |l| (j, l))).collect();
    pairs.sort_by(|a, b| cos[b.0][b.1].total_cmp(&cos[a.0][a.1]).then(a.cmp(b)));
    let mut used = vec![false; re];
    let mut assignment = vec![None; rt];
    for (j, l) in pairs {
        if !used[j] && assignment[l].is_none() {
            used[j] = true;
            assignment[l] = Some(j);
        }
    }
    let weight: f64 = sigmas.iter().map(|x| x.abs()).sum();
    let total: f64 = assignment
        .iter()
        .enumerate()
        .filter_map(|(l, m)| m.map(|j| sigmas[l].abs() * cos[j][l]))
        .sum();
    Ok(MatchScore { score: (total / weight).clamp(0.0, 1.0), assignment, partial: re != rt })
}

impl PlantedInstance {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            schema: SCHEMA.into(),
            dims: self.tensor.dims().to_vec(),
            r: self.true_factors.rank(),
            s: self.true_factors.s(),
            sigmas: self.true_sigmas.clone(),
            noise_level: self.noise_level,
            seed: self.seed,
            factors: self.true_factors.factors().iter().map(|f| f.iter().copied().collect()).collect(),
        }
    }
}

/// JSON sidecar of a planted instance; factors are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub dims: Vec<usize>,
    pub r: usize,
    pub s: usize,
    pub sigmas: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
    pub factors: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn factor_set(&self) -> Result<FactorSet> {
        if self.factors.len() != self.dims.len() {
            return Err(Error::Parse("one factor per mode expected".into()));
        }
        let mats = self
            .dims
            .iter()
            .zip(&self.factors)
            .map(|(&n, f)| {
                Array2::from_shape_vec((n, self.r), f.clone()).map_err(|e| Error::Parse(format!("factor shape: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FactorSet::new(mats, self.s)
    }

    /// `Σ σ_j²`, the optimal objective of a noiseless instance.
    pub fn objective(&self) -> f64 {
        self.sigmas.iter().map(|x| x * x).sum()
    }
}
