//! Deterministic dense linear algebra: one-sided Jacobi SVD, polar
//! decomposition and the inequality checks that the polar update relies on.
//!
//! Everything here is sized for the small `n_i × r` matrices the solver
//! produces; nothing calls out to BLAS/LAPACK.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::rng;

/// Orthonormality tolerance for results produced by this module.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Slack when an orthonormal matrix is accepted as input.
pub const ORTHONORMAL_INPUT_TOL: f64 = 1e-8;
/// Relative off-diagonal threshold for the Jacobi rotations.
pub const JACOBI_TOL: f64 = 1e-14;
const MAX_JACOBI_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(σ) Vᵀ` of an `n × m` matrix with `n ≥ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Array2<f64>,
    pub singular_values: Vec<f64>,
    pub v: Array2<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Array2<f64> {
        let sigma = Array1::from(self.singular_values.clone());
        (&self.u * &sigma).dot(&self.v.t())
    }
}

/// Polar decomposition `M = U H` with `U` orthonormal-column and `H`
/// symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarResult {
    pub orthonormal_factor: Array2<f64>,
    pub psd_factor: Array2<f64>,
    /// Singular values of the input, nonincreasing.
    pub singular_values: Vec<f64>,
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest entry of `|MᵀM − I|`.
pub fn orthonormality_error(m: &Array2<f64>) -> f64 {
    let g = m.t().dot(m);
    let mut worst = 0.0_f64;
    for ((i, j), &x) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((x - target).abs());
    }
    worst
}

fn check_finite(m: &Array2<f64>) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn check_tall(m: &Array2<f64>) -> Result<()> {
    let (n, cols) = m.dim();
    if n < cols {
        return Err(Error::Argument(format!("expected rows >= cols, got {n}x{cols}")));
    }
    if cols == 0 {
        return Err(Error::Argument("matrix has no columns".into()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn columns(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
}

fn from_columns(n: usize, cols: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j][i])
}

/// Two passes of modified Gram–Schmidt of `v` against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    dot(v, v).sqrt()
}

/// One-sided Jacobi SVD with a fixed cyclic column-pair order.
///
/// Singular values are sorted nonincreasingly and each right singular vector
/// is signed so its largest-magnitude entry (first one on ties) is positive.
/// Left vectors belonging to numerically zero singular values are completed
/// to an orthonormal set.
pub fn svd(m: &Array2<f64>) -> Result<SvdResult> {
    check_finite(m)?;
    check_tall(m)?;
    let (n, p) = m.dim();
    let mut a = columns(m);
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma_max = norms[order[0]];
    let negligible = (n.max(p) as f64) * f64::EPSILON * sigma_max;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut sigmas = Vec::with_capacity(p);
    let mut deficient = Vec::new();
    for &j in &order {
        let s = norms[j];
        sigmas.push(s);
        v_cols.push(v[j].clone());
        if s > negligible && s > 0.0 {
            u_cols.push(a[j].iter().map(|x| x / s).collect());
        } else {
            deficient.push(u_cols.len());
            u_cols.push(if s > 0.0 { a[j].iter().map(|x| x / s).collect() } else { vec![0.0; n] });
        }
    }
    // Re-orthogonalize or complete left vectors of negligible singular values.
    for &slot in &deficient {
        let basis: Vec<Vec<f64>> =
            u_cols.iter().enumerate().filter(|(k, _)| !deficient.contains(k) || *k < slot).map(|(_, c)| c.clone()).collect();
        let mut cand = u_cols[slot].clone();
        let mut norm = orthogonalize(&mut cand, &basis);
        if norm < 0.5 {
            for e in 0..n {
                let mut trial = vec![0.0; n];
                trial[e] = 1.0;
                let tn = orthogonalize(&mut trial, &basis);
                if tn > 0.5 {
                    cand = trial;
                    norm = tn;
                    break;
                }
            }
        }
        u_cols[slot] = cand.iter().map(|x| x / norm).collect();
    }

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut lead = 0;
        for (i, x) in vc.iter().enumerate() {
            if x.abs() > vc[lead].abs() {
                lead = i;
            }
        }
        if vc[lead] < 0.0 {
            vc.iter_mut().for_each(|x| *x = -*x);
            uc.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(SvdResult { u: from_columns(n, &u_cols), singular_values: sigmas, v: from_columns(p, &v_cols) })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Polar decomposition via the SVD: `U = G Hᵀ`, `H_psd = H Σ Hᵀ`.
pub fn polar(m: &Array2<f64>) -> Result<PolarResult> {
    let svd = svd(m)?;
    let orthonormal_factor = svd.u.dot(&svd.v.t());
    let sigma = Array1::from(svd.singular_values.clone());
    let psd = (&svd.v * &sigma).dot(&svd.v.t());
    let psd_factor = symmetrize(&psd);
    Ok(PolarResult { orthonormal_factor, psd_factor, singular_values: svd.singular_values })
}

pub fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    (m + &m.t()) * 0.5
}

/// Smallest singular value.
pub fn sigma_min(m: &Array2<f64>) -> Result<f64> {
    let s = svd(m)?;
    Ok(*s.singular_values.last().expect("at least one column"))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in nonincreasing order with matching columns.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    check_finite(a)?;
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::Dimension(format!("expected a square matrix, got {n}x{m}")));
    }
    let mut s = symmetrize(a);
    let mut q = Array2::<f64>::eye(n);
    let scale = frobenius(&s).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = s.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, x)| x * x).sum::<f64>().sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = s[[p, r]];
                if apr == 0.0 {
                    continue;
                }
                let theta = (s[[r, r]] - s[[p, p]]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (skp, skr) = (s[[k, p]], s[[k, r]]);
                    s[[k, p]] = c * skp - sn * skr;
                    s[[k, r]] = sn * skp + c * skr;
                }
                for k in 0..n {
                    let (spk, srk) = (s[[p, k]], s[[r, k]]);
                    s[[p, k]] = c * spk - sn * srk;
                    s[[r, k]] = sn * spk + c * srk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[[k, p]], q[[k, r]]);
                    q[[k, p]] = c * qkp - sn * qkr;
                    q[[k, r]] = sn * qkp + c * qkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[[y, y]].total_cmp(&s[[x, x]]));
    let values = order.iter().map(|&i| s[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| q[[i, order[j]]]);
    Ok((values, vectors))
}

/// Polar decomposition through `H = sqrt(MᵀM)` and `U = M H⁻¹`.
///
/// An algebraically independent route to [`polar`]; only defined for full
/// column rank inputs.
pub fn polar_via_gram(m: &Array2<f64>) -> Result<PolarResult> {
    check_finite(m)?;
    check_tall(m)?;
    let (values, q) = sym_eigen(&m.t().dot(m))?;
    let floor = values[0].abs() * 1e-24;
    if values.iter().any(|&l| l <= floor) {
        return Err(Error::Argument("matrix is rank deficient".into()));
    }
    let roots: Array1<f64> = values.iter().map(|l| l.sqrt()).collect();
    let inv_roots: Array1<f64> = roots.mapv(|x| 1.0 / x);
    let h = symmetrize(&(&q * &roots).dot(&q.t()));
    let h_inv = (&q * &inv_roots).dot(&q.t());
    Ok(PolarResult {
        orthonormal_factor: m.dot(&h_inv),
        psd_factor: h,
        singular_values: roots.to_vec(),
    })
}

/// Slack in the global polar error bound:
/// `(‖B − QC‖² − ‖B − WC‖²) − σ_min(BCᵀ)·‖W − Q‖²`, with `W` the polar
/// orthonormal factor of `BCᵀ`. Nonnegative up to rounding.
pub fn polar_error_bound_gap(b: &Array2<f64>, c: &Array2<f64>, q: &Array2<f64>) -> Result<f64> {
    let (n, p) = b.dim();
    let (m, pc) = c.dim();
    if pc != p || q.dim() != (n, m) {
        return Err(Error::Dimension(format!(
            "incompatible shapes B {n}x{p}, C {m}x{pc}, Q {:?}",
            q.dim()
        )));
    }
    if orthonormality_error(q) > ORTHONORMAL_INPUT_TOL {
        return Err(Error::Argument("Q is not orthonormal".into()));
    }
    let a = b.dot(&c.t());
    let polar = polar(&a)?;
    let w = &polar.orthonormal_factor;
    let smin = *polar.singular_values.last().expect("nonempty");
    let res_q = frobenius(&(b - &q.dot(c))).powi(2);
    let res_w = frobenius(&(b - &w.dot(c))).powi(2);
    Ok((res_q - res_w) - smin * frobenius(&(w - q)).powi(2))
}

/// `‖U − V‖² − ‖UᵀV − I‖²` for orthonormal `U`, `V`; nonnegative up to rounding.
pub fn orthonormal_distance_gap(u: &Array2<f64>, v: &Array2<f64>) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", u.dim(), v.dim())));
    }
    if orthonormality_error(u) > ORTHONORMAL_INPUT_TOL || orthonormality_error(v) > ORTHONORMAL_INPUT_TOL {
        return Err(Error::Argument("inputs must have orthonormal columns".into()));
    }
    let m = u.ncols();
    let cross = u.t().dot(v) - Array2::<f64>::eye(m);
    Ok(frobenius(&(u - v)).powi(2) - frobenius(&cross).powi(2))
}

/// Orthonormalizes the columns of `m` (Gram–Schmidt with reorthogonalization),
/// then flips each column so its diagonal entry is nonnegative.
pub fn orthonormalize_columns(m: &Array2<f64>) -> Result<Array2<f64>> {
    check_tall(m)?;
    let (n, p) = m.dim();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (j, col) in columns(m).into_iter().enumerate() {
        let scale = dot(&col, &col).sqrt();
        let mut c = col;
        let norm = orthogonalize(&mut c, &q);
        if !(norm > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Argument(format!("column {j} is linearly dependent")));
        }
        c.iter_mut().for_each(|x| *x /= norm);
        if c[j] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        q.push(c);
    }
    Ok(from_columns(n, &q))
}

/// Seeded `n × m` matrix with orthonormal columns: Gram–Schmidt QR of a
/// Gaussian matrix, each column signed so its diagonal entry is nonnegative.
pub fn random_orthonormal(n: usize, m: usize, seed: u64) -> Result<Array2<f64>> {
    if m > n || m == 0 {
        return Err(Error::Argument(format!("cannot draw {m} orthonormal columns in R^{n}")));
    }
    let mut attempt = 0u64;
    loop {
        let mut stream = rng::stream(seed, &[0x4F52_5448, attempt]);
        let g = rng::gaussian_vec(&mut stream, n * m);
        let g = Array2::from_shape_vec((n, m), g).expect("length matches");
        match orthonormalize_columns(&g) {
            Ok(q) => return Ok(q),
            Err(_) if attempt < 8 => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}
