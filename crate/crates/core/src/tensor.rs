//! Dense tensors and the multilinear maps built on contractions.
//!
//! Storage is a flat row-major buffer (last index fastest) plus an explicit
//! [`Shape`]. All operations are pure; a fixed loop order makes every
//! reduction bit-stable for a given input.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of each vector in a [`UnitVectorTuple`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Mode sizes `(n_1, ..., n_k)` of a tensor.
///
/// Order-0 shapes only arise as the result of a full contraction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Dimension("tensor order must be at least 1".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Dimension(format!("mode {pos} has size 0")));
        }
        let mut count: usize = 1;
        for &d in dims {
            count = count
                .checked_mul(d)
                .ok_or_else(|| Error::Dimension("element count overflows usize".into()))?;
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn scalar() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for m in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * self.dims[m + 1];
        }
        strides
    }

    pub fn is_cubical(&self) -> bool {
        self.dims.windows(2).all(|w| w[0] == w[1])
    }
}

/// A dense real tensor `A ∈ R^{n_1 ⊗ ... ⊗ n_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn new(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        Self::with_shape(shape, data)
    }

    fn with_shape(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Dimension(format!(
                "expected {} entries for shape {:?}, got {}",
                shape.numel(),
                shape.dims(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let n = shape.numel();
        Ok(Self { shape, data: vec![0.0; n] })
    }

    pub fn from_scalar(value: f64) -> Self {
        Self { shape: Shape::scalar(), data: vec![value] }
    }

    /// Fills entries from a function of the multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let mut data = Vec::with_capacity(shape.numel());
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..shape.numel() {
            data.push(f(&idx));
            increment(&mut idx, dims);
        }
        Self::with_shape(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        idx.iter().zip(self.shape.strides()).map(|(i, s)| i * s).sum()
    }

    /// The value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.order() == 0).then(|| self.data[0])
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|x| x * factor).collect() }
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        same_shape(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_shape(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Mode-`mode` flattening: an `n_mode × (∏_{j≠mode} n_j)` matrix.
    pub fn unfold(&self, mode: usize) -> Result<Array2<f64>> {
        if mode >= self.order() {
            return Err(Error::Argument(format!("mode {mode} out of range for order {}", self.order())));
        }
        let dims = self.dims();
        let rows = dims[mode];
        let cols = self.data.len() / rows;
        let inner: usize = dims[mode + 1..].iter().product();
        let mut out = Array2::zeros((rows, cols));
        for (flat, &v) in self.data.iter().enumerate() {
            let outer_idx = flat / (rows * inner);
            let l = (flat / inner) % rows;
            let t = flat % inner;
            out[[l, outer_idx * inner + t]] = v;
        }
        Ok(out)
    }
}

/// Advances a row-major multi-index; wraps to all zeros after the last one.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for m in (0..idx.len()).rev() {
        idx[m] += 1;
        if idx[m] < dims[m] {
            return;
        }
        idx[m] = 0;
    }
}

fn same_shape(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Dimension(format!("shape {:?} does not match {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// A tuple `(u_1, ..., u_k)` of unit vectors, one per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVectorTuple {
    vectors: Vec<Vec<f64>>,
}

impl UnitVectorTuple {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Argument("need at least one vector".into()));
        }
        for (i, v) in vectors.iter().enumerate() {
            let norm = norm2(v);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Argument(format!("vector {i} has norm {norm}, expected 1")));
            }
        }
        Ok(Self { vectors })
    }

    /// Normalizes each vector; fails on a zero vector.
    pub fn normalized(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let vectors = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let n = norm2(&v);
                if n == 0.0 || !n.is_finite() {
                    Err(Error::Argument(format!("vector {i} cannot be normalized")))
                } else {
                    Ok(v.into_iter().map(|x| x / n).collect())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.vectors.iter().map(Vec::as_slice).collect()
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Contracts `a` with `b` over `modes_of_a` (strictly increasing); the result
/// lives on the remaining modes of `a`, in their original order. Contracting
/// every mode yields an order-0 tensor.
pub fn contract(a: &DenseTensor, b: &DenseTensor, modes_of_a: &[usize]) -> Result<DenseTensor> {
    if modes_of_a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("contracted modes must be strictly increasing".into()));
    }
    if let Some(&m) = modes_of_a.iter().find(|&&m| m >= a.order()) {
        return Err(Error::Argument(format!("mode {m} out of range for order {}", a.order())));
    }
    let b_dims = b.dims();
    let contracted: Vec<usize> = modes_of_a.iter().map(|&m| a.dims()[m]).collect();
    // An order-0 `b` pairs with an empty mode list.
    if contracted.as_slice() != b_dims {
        return Err(Error::Dimension(format!(
            "contracted dims {contracted:?} do not match {b_dims:?}"
        )));
    }
    let strides = a.shape().strides();
    let kept: Vec<usize> = (0..a.order()).filter(|m| !modes_of_a.contains(m)).collect();
    let out_dims: Vec<usize> = kept.iter().map(|&m| a.dims()[m]).collect();

    // Offsets in `a` of every contracted multi-index, in `b`'s row-major order.
    let mut inner_offsets = Vec::with_capacity(b.data.len());
    let mut idx = vec![0usize; contracted.len()];
    for _ in 0..b.data.len() {
        inner_offsets.push(idx.iter().zip(modes_of_a).map(|(i, &m)| i * strides[m]).sum::<usize>());
        increment(&mut idx, &contracted);
    }

    let out_len: usize = out_dims.iter().product();
    let mut out = Vec::with_capacity(out_len);
    let mut oidx = vec![0usize; kept.len()];
    for _ in 0..out_len {
        let base: usize = oidx.iter().zip(&kept).map(|(i, &m)| i * strides[m]).sum();
        let v: f64 = inner_offsets.iter().zip(&b.data).map(|(&off, &bv)| a.data[base + off] * bv).sum();
        out.push(v);
        increment(&mut oidx, &out_dims);
    }
    if kept.is_empty() {
        return Ok(DenseTensor::from_scalar(out[0]));
    }
    DenseTensor::new(&out_dims, out)
}

/// Hilbert–Schmidt inner product.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    same_shape(a, b)?;
    Ok(dot(&a.data, &b.data))
}

/// Hilbert–Schmidt norm; the Frobenius norm for matrices.
pub fn hs_norm(a: &DenseTensor) -> f64 {
    norm2(&a.data)
}

/// Applies `matrix` (`m × n_mode`) along one mode.
pub fn mode_product(a: &DenseTensor, matrix: &Array2<f64>, mode: usize) -> Result<DenseTensor> {
    if mode >= a.order() {
        return Err(Error::Argument(format!("mode {mode} out of range for order {}", a.order())));
    }
    let dims = a.dims();
    let (rows, cols) = matrix.dim();
    if cols != dims[mode] {
        return Err(Error::Dimension(format!(
            "matrix has {cols} columns but mode {mode} has size {}",
            dims[mode]
        )));
    }
    let outer: usize = dims[..mode].iter().product();
    let inner_len: usize = dims[mode + 1..].iter().product();
    let mut out_dims = dims.to_vec();
    out_dims[mode] = rows;
    let mut out = vec![0.0; outer * rows * inner_len];
    for o in 0..outer {
        for m in 0..rows {
            let dst = &mut out[(o * rows + m) * inner_len..(o * rows + m + 1) * inner_len];
            for l in 0..cols {
                let w = matrix[[m, l]];
                let src = &a.data[(o * cols + l) * inner_len..(o * cols + l + 1) * inner_len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    DenseTensor::new(&out_dims, out)
}

/// The matrix–tensor product `(B^(1), ..., B^(k)) · A`.
pub fn mat_tensor_product(matrices: &[Array2<f64>], a: &DenseTensor) -> Result<DenseTensor> {
    if matrices.len() != a.order() {
        return Err(Error::Dimension(format!(
            "{} matrices supplied for an order-{} tensor",
            matrices.len(),
            a.order()
        )));
    }
    let mut out = a.clone();
    for (mode, m) in matrices.iter().enumerate() {
        out = mode_product(&out, m, mode)?;
    }
    Ok(out)
}

/// The diagonal tensor `diag_k(λ)` of shape `(r, ..., r)`.
pub fn diag(lambda: &[f64], k: usize) -> Result<DenseTensor> {
    if lambda.is_empty() || k == 0 {
        return Err(Error::Argument("diag needs r >= 1 and k >= 1".into()));
    }
    let r = lambda.len();
    let dims = vec![r; k];
    let mut t = DenseTensor::zeros(&dims)?;
    let step: usize = t.shape.strides().iter().sum();
    for (j, &l) in lambda.iter().enumerate() {
        t.data[j * step] = l;
    }
    if t.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite diagonal entry".into()));
    }
    Ok(t)
}

/// Super-diagonal `(a_{j,...,j})_j` of a cubical tensor; left inverse of [`diag`].
pub fn super_diagonal(a: &DenseTensor) -> Result<Vec<f64>> {
    if a.order() == 0 || !a.shape.is_cubical() {
        return Err(Error::Dimension(format!("shape {:?} is not cubical", a.dims())));
    }
    let step: usize = a.shape.strides().iter().sum();
    Ok((0..a.dims()[0]).map(|j| a.data[j * step]).collect())
}

/// Rank-one tensor `u_1 ⊗ ... ⊗ u_k` of arbitrary (not necessarily unit) vectors.
pub fn tau_relaxed(vectors: &[&[f64]]) -> Result<DenseTensor> {
    let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut data = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &x in &data {
            next.extend(v.iter().map(|&y| x * y));
        }
        data = next;
    }
    DenseTensor::new(&dims, data)
}

pub fn tau(u: &UnitVectorTuple) -> DenseTensor {
    tau_relaxed(&u.as_slices()).expect("unit vectors have positive length")
}

/// Contracts one mode of a row-major buffer with a vector.
fn contract_mode(data: &[f64], dims: &[usize], mode: usize, v: &[f64]) -> Vec<f64> {
    let len = dims[mode];
    let outer: usize = dims[..mode].iter().product();
    let inner_len: usize = dims[mode + 1..].iter().product();
    let mut out = vec![0.0; outer * inner_len];
    if inner_len == 1 {
        for (o, dst) in out.iter_mut().enumerate() {
            *dst = dot(&data[o * len..(o + 1) * len], v);
        }
        return out;
    }
    for o in 0..outer {
        let dst = &mut out[o * inner_len..(o + 1) * inner_len];
        for (l, &w) in v.iter().enumerate() {
            let src = &data[(o * len + l) * inner_len..(o * len + l + 1) * inner_len];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

fn check_vector_lengths(a: &DenseTensor, vectors: &[&[f64]], skip: Option<usize>) -> Result<()> {
    if vectors.len() != a.order() {
        return Err(Error::Dimension(format!(
            "{} vectors supplied for an order-{} tensor",
            vectors.len(),
            a.order()
        )));
    }
    for (m, (v, &n)) in vectors.iter().zip(a.dims()).enumerate() {
        if Some(m) != skip && v.len() != n {
            return Err(Error::Dimension(format!("vector {m} has length {}, mode size is {n}", v.len())));
        }
    }
    Ok(())
}

/// `Aτ(u) = ⟨A, u_1 ⊗ ... ⊗ u_k⟩` for arbitrary vectors.
pub fn a_tau_relaxed(a: &DenseTensor, vectors: &[&[f64]]) -> Result<f64> {
    check_vector_lengths(a, vectors, None)?;
    let mut dims = a.dims().to_vec();
    let mut buf: Option<Vec<f64>> = None;
    for m in (0..a.order()).rev() {
        let next = contract_mode(buf.as_deref().unwrap_or(&a.data), &dims, m, vectors[m]);
        dims.pop();
        buf = Some(next);
    }
    Ok(buf.map_or(0.0, |b| b[0]))
}

pub fn a_tau(a: &DenseTensor, u: &UnitVectorTuple) -> Result<f64> {
    a_tau_relaxed(a, &u.as_slices())
}

/// `Aτ_i(u)`: contraction of `A` with every vector except the one at `mode`.
/// The vector at `mode` is ignored and may have any length.
pub fn a_tau_i_relaxed(a: &DenseTensor, vectors: &[&[f64]], mode: usize) -> Result<Vec<f64>> {
    if mode >= a.order() {
        return Err(Error::Argument(format!("mode {mode} out of range for order {}", a.order())));
    }
    check_vector_lengths(a, vectors, Some(mode))?;
    let mut dims = a.dims().to_vec();
    let mut buf: Option<Vec<f64>> = None;
    for m in (mode + 1..a.order()).rev() {
        let next = contract_mode(buf.as_deref().unwrap_or(&a.data), &dims, m, vectors[m]);
        dims.pop();
        buf = Some(next);
    }
    for m in 0..mode {
        let next = contract_mode(buf.as_deref().unwrap_or(&a.data), &dims, 0, vectors[m]);
        dims.remove(0);
        buf = Some(next);
    }
    Ok(buf.unwrap_or_else(|| a.data.clone()))
}

pub fn a_tau_i(a: &DenseTensor, u: &UnitVectorTuple, mode: usize) -> Result<Vec<f64>> {
    a_tau_i_relaxed(a, &u.as_slices(), mode)
}
