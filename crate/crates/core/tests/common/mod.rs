#![allow(dead_code)]

use ndarray::{Array1, Array2};
use potapprox::solver::{self, DiagonalCore, FactorSet, Kappa, SolveOutput, SolverConfig};
use potapprox::{diagnostics, linalg, rng, tensor, DenseTensor};

pub fn gaussian(seed: u64, tag: u64, len: usize) -> Vec<f64> {
    rng::gaussian_vec(&mut rng::stream(seed, &[tag]), len)
}

pub fn gaussian_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    DenseTensor::new(dims, gaussian(seed, 0xA11, dims.iter().product())).unwrap()
}

pub fn gaussian_matrix(n: usize, m: usize, seed: u64, tag: u64) -> Array2<f64> {
    Array2::from_shape_vec((n, m), gaussian(seed, tag, n * m)).unwrap()
}

/// Decodes a flat row-major position into a multi-index by repeated division.
pub fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for m in (0..dims.len()).rev() {
        idx[m] = flat % dims[m];
        flat /= dims[m];
    }
    idx
}

pub fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, n)| acc * n + i)
}

/// Every shape with `1..=max_order` modes of sizes `1..=max_dim`.
pub fn all_shapes(max_dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 1..=max_order {
        let count = max_dim.pow(k as u32);
        for c in 0..count {
            out.push(unravel(c, &vec![max_dim; k]).into_iter().map(|d| d + 1).collect());
        }
    }
    out
}

pub fn oracle_a_tau(a: &DenseTensor, vecs: &[Vec<f64>]) -> f64 {
    let dims = a.dims();
    (0..a.data().len())
        .map(|flat| {
            let idx = unravel(flat, dims);
            a.data()[flat] * idx.iter().enumerate().map(|(m, &i)| vecs[m][i]).product::<f64>()
        })
        .sum()
}

pub fn oracle_a_tau_i(a: &DenseTensor, vecs: &[Vec<f64>], mode: usize) -> Vec<f64> {
    let dims = a.dims();
    let mut out = vec![0.0; dims[mode]];
    for flat in 0..a.data().len() {
        let idx = unravel(flat, dims);
        let w: f64 = idx.iter().enumerate().filter(|&(m, _)| m != mode).map(|(m, &i)| vecs[m][i]).product();
        out[idx[mode]] += a.data()[flat] * w;
    }
    out
}

pub fn oracle_mat_tensor(mats: &[Array2<f64>], a: &DenseTensor) -> (Vec<usize>, Vec<f64>) {
    let out_dims: Vec<usize> = mats.iter().map(|m| m.nrows()).collect();
    let len: usize = out_dims.iter().product();
    let mut out = vec![0.0; len];
    for (o, slot) in out.iter_mut().enumerate() {
        let oi = unravel(o, &out_dims);
        for flat in 0..a.data().len() {
            let ii = unravel(flat, a.dims());
            let w: f64 = (0..mats.len()).map(|m| mats[m][[oi[m], ii[m]]]).product();
            *slot += w * a.data()[flat];
        }
    }
    (out_dims, out)
}

pub fn oracle_contract(a: &DenseTensor, b: &DenseTensor, modes: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let dims = a.dims();
    let kept: Vec<usize> = (0..dims.len()).filter(|m| !modes.contains(m)).collect();
    let out_dims: Vec<usize> = kept.iter().map(|&m| dims[m]).collect();
    let mut out = vec![0.0; out_dims.iter().product::<usize>().max(1)];
    for flat in 0..a.data().len() {
        let idx = unravel(flat, dims);
        let bi: Vec<usize> = modes.iter().map(|&m| idx[m]).collect();
        let oi: Vec<usize> = kept.iter().map(|&m| idx[m]).collect();
        out[ravel(&oi, &out_dims)] += a.data()[flat] * b.data()[ravel(&bi, b.dims())];
    }
    (out_dims, out)
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Largest deviation from the nested-loop oracles for one shape.
pub fn tensor_op_error(dims: &[usize], seed: u64) -> f64 {
    let k = dims.len();
    let a = gaussian_tensor(dims, seed);
    let vecs: Vec<Vec<f64>> = dims.iter().enumerate().map(|(m, &n)| gaussian(seed, 10 + m as u64, n)).collect();
    let refs: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
    let mut err = (tensor::a_tau_relaxed(&a, &refs).unwrap() - oracle_a_tau(&a, &vecs)).abs();
    for mode in 0..k {
        let got = tensor::a_tau_i_relaxed(&a, &refs, mode).unwrap();
        err = err.max(max_abs_diff(&got, &oracle_a_tau_i(&a, &vecs, mode)));
    }
    let mats: Vec<Array2<f64>> = dims
        .iter()
        .enumerate()
        .map(|(m, &n)| gaussian_matrix(1 + (seed as usize + m) % 3, n, seed, 20 + m as u64))
        .collect();
    let got = tensor::mat_tensor_product(&mats, &a).unwrap();
    let (want_dims, want) = oracle_mat_tensor(&mats, &a);
    assert_eq!(got.dims(), want_dims.as_slice());
    err = err.max(max_abs_diff(got.data(), &want));
    for mask in 0..(1usize << k) {
        let modes: Vec<usize> = (0..k).filter(|m| mask >> m & 1 == 1).collect();
        let b_dims: Vec<usize> = modes.iter().map(|&m| dims[m]).collect();
        let b = if b_dims.is_empty() {
            DenseTensor::from_scalar(gaussian(seed, 30, 1)[0])
        } else {
            gaussian_tensor(&b_dims, seed ^ 0x55)
        };
        let got = tensor::contract(&a, &b, &modes).unwrap();
        let (want_dims, want) = oracle_contract(&a, &b, &modes);
        if want_dims.is_empty() {
            assert_eq!(got.order(), 0);
        } else {
            assert_eq!(got.dims(), want_dims.as_slice());
        }
        err = err.max(max_abs_diff(got.data(), &want));
    }
    err
}

/// One instance of the seeded convergence suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub index: usize,
    pub dims: Vec<usize>,
    pub r: usize,
    pub s: usize,
    pub tensor: DenseTensor,
}

/// Twenty Gaussian tensors with modes of size 3 to 6 and every `(s, r)` in
/// `{1,2,3}²` represented.
pub fn suite() -> Vec<SuiteCase> {
    (0..20)
        .map(|i| {
            let seed = 1000 + i as u64;
            let dims: Vec<usize> = match i {
                0 => vec![3, 3, 3],
                1 => vec![6, 6, 6],
                _ => rng::gaussian_vec(&mut rng::stream(seed, &[1]), 3)
                    .iter()
                    .enumerate()
                    .map(|(m, x)| 3 + ((x.abs() * 1e6) as usize + m) % 4)
                    .collect(),
            };
            SuiteCase { index: i, s: 1 + i % 3, r: 1 + (i / 3) % 3, tensor: gaussian_tensor(&dims, seed), dims }
        })
        .collect()
}

pub fn suite_config(index: usize) -> SolverConfig {
    SolverConfig {
        stop_tol: Some(1e-12),
        max_sweeps: 10_000,
        record_inner: true,
        seed: index as u64,
        ..SolverConfig::default()
    }
}

pub fn run_suite() -> Vec<(SuiteCase, SolveOutput)> {
    let cases = suite();
    let outs = potapprox::multistart::map_runs(cases.len(), |i| {
        let c = &cases[i];
        solver::solve(&c.tensor, c.r, c.s, &suite_config(c.index)).unwrap()
    });
    cases.into_iter().zip(outs).collect()
}

/// The same suite at the largest admissible rank and with `κ` at 90% of its
/// upper bound `sqrt(f(U_[0])/r)`, so that truncations actually happen.
pub fn run_truncating_suite() -> Vec<(SuiteCase, SolveOutput)> {
    let cases: Vec<SuiteCase> = suite()
        .into_iter()
        .map(|mut c| {
            c.r = c.dims[..c.s].iter().copied().min().unwrap();
            c
        })
        .collect();
    let outs = potapprox::multistart::map_runs(cases.len(), |i| {
        let c = &cases[i];
        let probe = solver::initialize(&c.tensor, c.r, c.s, &suite_config(c.index)).unwrap();
        let bound = (probe.initial_objective / c.r as f64).sqrt();
        let cfg = SolverConfig { kappa: Kappa::Fixed(0.9 * bound), ..suite_config(c.index) };
        solver::solve(&c.tensor, c.r, c.s, &cfg).unwrap()
    });
    cases.into_iter().zip(outs).collect()
}

fn unit_columns(mut m: Array2<f64>) -> Array2<f64> {
    for mut c in m.columns_mut() {
        let n = c.dot(&c).sqrt();
        c.mapv_inplace(|x| x / n);
    }
    m
}

pub fn random_point(dims: &[usize], r: usize, s: usize, seed: u64) -> FactorSet {
    let factors = dims
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if i < s {
                linalg::random_orthonormal(n, r, rng::derive_seed(seed, &[i as u64])).unwrap()
            } else {
                unit_columns(gaussian_matrix(n, r, seed, 100 + i as u64))
            }
        })
        .collect();
    FactorSet::new(factors, s).unwrap()
}

fn half_residual_sq(a: &DenseTensor, u: &FactorSet, x: &[f64]) -> f64 {
    let rec = solver::reconstruct(u, &DiagonalCore { lambdas: x.to_vec() }).unwrap();
    0.5 * tensor::hs_norm(&a.sub(&rec).unwrap()).powi(2)
}

/// Relative error of the Riemannian gradient against a central difference of
/// `½‖A − (U)·diag_k(x)‖²` along a random tangent direction (step `1e-5`,
/// polar retraction on orthonormal modes, column normalization elsewhere).
pub fn gradient_fd_error(seed: u64) -> f64 {
    let k = 3 + (seed % 2) as usize;
    let dims: Vec<usize> = (0..k).map(|m| 3 + (seed as usize + m) % 3).collect();
    let s = 1 + (seed % k as u64) as usize;
    let r = 1 + (seed / 3 % 3) as usize;
    let a = gaussian_tensor(&dims, seed);
    let u = random_point(&dims, r, s, seed);
    let x = gaussian(seed, 31, r);
    let dx = gaussian(seed, 32, r);
    let dir: Vec<Array2<f64>> = u
        .factors()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let z = gaussian_matrix(f.nrows(), r, seed, 200 + i as u64);
            if i < s {
                &z - &f.dot(&linalg::symmetrize(&f.t().dot(&z)))
            } else {
                let d: Array1<f64> = (0..r).map(|j| f.column(j).dot(&z.column(j))).collect();
                &z - &(f * &d)
            }
        })
        .collect();
    let g = diagnostics::riemannian_grad_components(&a, &u, &x).unwrap();
    let analytic: f64 = g.modes.iter().zip(&dir).map(|(gm, d)| (gm * d).sum()).sum::<f64>()
        + g.x.iter().zip(&dx).map(|(p, q)| p * q).sum::<f64>();
    let at = |t: f64| {
        let factors = u
            .factors()
            .iter()
            .zip(&dir)
            .enumerate()
            .map(|(i, (f, d))| {
                let moved = f + &(d * t);
                if i < s {
                    linalg::polar(&moved).unwrap().orthonormal_factor
                } else {
                    unit_columns(moved)
                }
            })
            .collect();
        let xt: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + t * q).collect();
        half_residual_sq(&a, &FactorSet::new(factors, s).unwrap(), &xt)
    };
    let h = 1e-5;
    let numeric = (at(h) - at(-h)) / (2.0 * h);
    (analytic - numeric).abs() / analytic.abs().max(1e-8)
}
