//! Hermitian operators over an explicit tensor-product structure.
//!
//! Factor ordering follows the Kronecker convention: the first factor is the
//! most significant index, so for `v = v1 ⊗ v2` we have
//! `v[i1 * d2 + i2] = v1[i1] * v2[i2]`.
//!
//! Besides the matrix form, every Hermitian operator has real coordinates in
//! the orthonormal (Hilbert–Schmidt) basis
//!
//! ```text
//! E_jj,   (E_jk + E_kj)/√2,   (-i E_jk + i E_kj)/√2      (j < k)
//! ```
//!
//! so that `tr(XY) = <x, y>` and `||X||_HS = |x|`. The optimizer works
//! entirely in these coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `max |A - A^H|` when loading matrices from outside.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on trace and smallest eigenvalue of a density operator.
pub const DENSITY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dimensions of the tensor factors `H^(1) ⊗ ... ⊗ H^(N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimsSpec {
    factor_dims: Vec<usize>,
}

impl DimsSpec {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidDims("at least one factor is required".into()));
        }
        if factor_dims.contains(&0) {
            return Err(Error::InvalidDims(format!(
                "factor dimensions must be positive, got {factor_dims:?}"
            )));
        }
        factor_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidDims("total dimension overflows".into()))?;
        Ok(Self { factor_dims })
    }

    /// Two-qubit structure, the most common case.
    pub fn qubits(n: usize) -> Self {
        Self::new(vec![2; n.max(1)]).expect("qubit dims are valid")
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Real dimension of the space of Hermitian operators, `total_dim²`.
    pub fn real_dim(&self) -> usize {
        let d = self.total_dim();
        d * d
    }

    fn ensure_same(&self, other: &DimsSpec) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.factor_dims),
                found: format!("{:?}", other.factor_dims),
            });
        }
        Ok(())
    }

    /// Split a flat index into per-factor indices.
    pub fn split_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.factor_dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factor_dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }

    pub fn join_index(&self, parts: &[usize]) -> usize {
        parts
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

impl TryFrom<Vec<usize>> for DimsSpec {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DimsSpec> for Vec<usize> {
    fn from(d: DimsSpec) -> Self {
        d.factor_dims
    }
}

/// Dense Hermitian operator on a tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dims: DimsSpec,
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Build from a square matrix, symmetrizing to `(A + A^H)/2`.
    pub fn new(dims: DimsSpec, entries: DMatrix<Complex64>) -> Result<Self> {
        let d = dims.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let sym = (&entries + entries.adjoint()).scale(0.5);
        Ok(Self { dims, entries: sym })
    }

    /// Like [`HermitianOperator::new`] but rejects inputs whose anti-Hermitian
    /// part exceeds [`HERMITIAN_TOL`].
    pub fn new_checked(dims: DimsSpec, entries: DMatrix<Complex64>) -> Result<Self> {
        let deviation = max_hermitian_deviation(&entries);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Self::new(dims, entries)
    }

    pub fn zeros(dims: DimsSpec) -> Self {
        let d = dims.total_dim();
        Self {
            dims,
            entries: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(dims: DimsSpec) -> Self {
        Self::scalar(dims, 1.0)
    }

    pub fn scalar(dims: DimsSpec, lambda: f64) -> Self {
        let d = dims.total_dim();
        Self {
            dims,
            entries: DMatrix::from_diagonal_element(d, d, Complex64::new(lambda, 0.0)),
        }
    }

    /// Real diagonal operator.
    pub fn diagonal(dims: DimsSpec, diag: &[f64]) -> Result<Self> {
        let d = dims.total_dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d.to_string(),
                found: diag.len().to_string(),
            });
        }
        let v = DVector::from_iterator(d, diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(Self {
            dims,
            entries: DMatrix::from_diagonal(&v),
        })
    }

    /// Inverse of [`HermitianOperator::coords`].
    pub fn from_coords(dims: DimsSpec, coords: &[f64]) -> Result<Self> {
        let d = dims.total_dim();
        if coords.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: (d * d).to_string(),
                found: coords.len().to_string(),
            });
        }
        let mut m = DMatrix::from_element(d, d, ZERO);
        for j in 0..d {
            m[(j, j)] = Complex64::new(coords[j], 0.0);
        }
        let mut idx = d;
        for j in 0..d {
            for k in (j + 1)..d {
                let re = coords[idx] / std::f64::consts::SQRT_2;
                let im = -coords[idx + 1] / std::f64::consts::SQRT_2;
                m[(j, k)] = Complex64::new(re, im);
                m[(k, j)] = Complex64::new(re, -im);
                idx += 2;
            }
        }
        Ok(Self { dims, entries: m })
    }

    /// Real coordinates in the orthonormal Hermitian basis.
    ///
    /// Layout: `d` diagonal entries, then for each `j < k` the pair
    /// `(√2 Re X_jk, -√2 Im X_jk)`.
    pub fn coords(&self) -> Vec<f64> {
        let d = self.dims.total_dim();
        let mut out = Vec::with_capacity(d * d);
        for j in 0..d {
            out.push(self.entries[(j, j)].re);
        }
        for j in 0..d {
            for k in (j + 1)..d {
                let z = self.entries[(j, k)];
                out.push(std::f64::consts::SQRT_2 * z.re);
                out.push(-std::f64::consts::SQRT_2 * z.im);
            }
        }
        out
    }

    pub fn dims(&self) -> &DimsSpec {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn total_dim(&self) -> usize {
        self.dims.total_dim()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// `tr(self · other)`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &HermitianOperator) -> Result<f64> {
        self.dims.ensure_same(&other.dims)?;
        // tr(AB) = Σ_jk A_jk B_kj = Σ_jk A_jk conj(B_jk)
        Ok(self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `X - (tr X / d)·I`.
    pub fn traceless_part(&self) -> HermitianOperator {
        let shift = self.trace() / self.total_dim() as f64;
        self.shifted(-shift)
    }

    /// `X + λ·I`.
    pub fn shifted(&self, lambda: f64) -> HermitianOperator {
        let mut out = self.clone();
        for j in 0..out.total_dim() {
            out.entries[(j, j)] += Complex64::new(lambda, 0.0);
        }
        out
    }

    pub fn scale(&self, a: f64) -> HermitianOperator {
        Self {
            dims: self.dims.clone(),
            entries: self.entries.scale(a),
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &HermitianOperator, b: f64) -> Result<HermitianOperator> {
        self.dims.ensure_same(&other.dims)?;
        Ok(Self {
            dims: self.dims.clone(),
            entries: self.entries.scale(a) + other.entries.scale(b),
        })
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// HS distance `||self - other||`.
    pub fn distance(&self, other: &HermitianOperator) -> Result<f64> {
        Ok(self.sub(other)?.hs_norm())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("nonempty")
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_hermitian_deviation(&self.entries)
    }

    /// Purity-like quantity `tr(X²)`.
    pub fn trace_square(&self) -> f64 {
        self.hs_norm().powi(2)
    }
}

/// `max |A - A^H|` over entries.
pub fn max_hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > DENSITY_TOL {
            return Err(Error::TraceNotOne { trace });
        }
        let min_eigenvalue = op.min_eigenvalue();
        if min_eigenvalue < -DENSITY_TOL {
            return Err(Error::NegativeEigenvalue { min_eigenvalue });
        }
        Ok(Self { op })
    }

    /// Normalize a positive semidefinite operator by its trace.
    pub fn from_positive(op: HermitianOperator) -> Result<Self> {
        let t = op.trace();
        if !(t > 0.0) {
            return Err(Error::TraceNotOne { trace: t });
        }
        Self::new(op.scale(1.0 / t))
    }

    pub fn maximally_mixed(dims: DimsSpec) -> Self {
        let d = dims.total_dim() as f64;
        Self {
            op: HermitianOperator::scalar(dims, 1.0 / d),
        }
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) vector.
    pub fn pure(dims: DimsSpec, psi: &DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let v = psi.unscale(n);
        Self::new(HermitianOperator::new(dims, &v * v.adjoint())?)
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dims(&self) -> &DimsSpec {
        self.op.dims()
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn purity(&self) -> f64 {
        self.op.trace_square()
    }
}

impl AsRef<HermitianOperator> for DensityOperator {
    fn as_ref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Pure product state `P = P^(1) ⊗ ... ⊗ P^(N)`, stored as one unit vector per
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductProjector {
    dims: DimsSpec,
    vectors: Vec<DVector<Complex64>>,
}

impl ProductProjector {
    /// Normalizes each factor vector. Zero vectors are rejected.
    pub fn new(dims: DimsSpec, vectors: Vec<DVector<Complex64>>) -> Result<Self> {
        check_factor_vectors(&dims, &vectors)?;
        let vectors = vectors
            .into_iter()
            .map(|v| {
                let n = v.norm();
                if n == 0.0 || !n.is_finite() {
                    Err(Error::InvalidParameter("zero factor vector".into()))
                } else {
                    Ok(v.unscale(n))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, vectors })
    }

    /// Computational basis product state `|i1 i2 ... iN>`.
    pub fn basis(dims: DimsSpec, indices: &[usize]) -> Result<Self> {
        if indices.len() != dims.num_factors() {
            return Err(Error::DimensionMismatch {
                expected: dims.num_factors().to_string(),
                found: indices.len().to_string(),
            });
        }
        let mut vectors = Vec::with_capacity(indices.len());
        for (&i, &d) in indices.iter().zip(dims.factor_dims()) {
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, factors: d });
            }
            let mut v = DVector::from_element(d, ZERO);
            v[i] = ONE;
            vectors.push(v);
        }
        Ok(Self { dims, vectors })
    }

    pub fn dims(&self) -> &DimsSpec {
        &self.dims
    }

    pub fn vectors(&self) -> &[DVector<Complex64>] {
        &self.vectors
    }

    /// The full product vector `v^(1) ⊗ ... ⊗ v^(N)`.
    pub fn product_vector(&self) -> DVector<Complex64> {
        kron_vectors(&self.vectors)
    }

    /// Materialize `P` as a matrix.
    pub fn embed(&self) -> HermitianOperator {
        let v = self.product_vector();
        HermitianOperator {
            dims: self.dims.clone(),
            entries: &v * v.adjoint(),
        }
    }

    /// `tr(X P) = <v|X|v>` without forming `P`.
    pub fn trace_pair(&self, x: &HermitianOperator) -> Result<f64> {
        self.dims.ensure_same(x.dims())?;
        let v = self.product_vector();
        Ok(v.dotc(&(x.matrix() * &v)).re)
    }

    /// Coordinates of `P` in the orthonormal Hermitian basis; with them
    /// `tr(XP)` is a plain dot product with `X.coords()`.
    pub fn features(&self) -> Vec<f64> {
        let v = self.product_vector();
        let d = v.len();
        let mut out = Vec::with_capacity(d * d);
        out.extend(v.iter().map(|z| z.norm_sqr()));
        for j in 0..d {
            for k in (j + 1)..d {
                // P_jk = v_j conj(v_k); coordinates use √2 Re P_jk, -√2 Im P_jk
                let z = v[j] * v[k].conj();
                out.push(std::f64::consts::SQRT_2 * z.re);
                out.push(-std::f64::consts::SQRT_2 * z.im);
            }
        }
        out
    }
}

fn check_factor_vectors(dims: &DimsSpec, vectors: &[DVector<Complex64>]) -> Result<()> {
    if vectors.len() != dims.num_factors() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} factor vectors", dims.num_factors()),
            found: vectors.len().to_string(),
        });
    }
    for (v, &d) in vectors.iter().zip(dims.factor_dims()) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("factor vector of length {d}"),
                found: v.len().to_string(),
            });
        }
    }
    Ok(())
}

/// Kronecker product of column vectors, first factor most significant.
pub fn kron_vectors(vectors: &[DVector<Complex64>]) -> DVector<Complex64> {
    let mut out = DVector::from_element(1, ONE);
    for v in vectors {
        let mut next = DVector::from_element(out.len() * v.len(), ZERO);
        for (i, a) in out.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                next[i * v.len() + j] = a * b;
            }
        }
        out = next;
    }
    out
}

/// Transpose the tensor slot `factor_index` of `rho`.
pub fn partial_transpose(rho: &DensityOperator, factor_index: usize) -> Result<HermitianOperator> {
    partial_transpose_op(rho.op(), factor_index)
}

/// [`partial_transpose`] for an arbitrary Hermitian operator.
pub fn partial_transpose_op(x: &HermitianOperator, factor_index: usize) -> Result<HermitianOperator> {
    let dims = x.dims();
    if factor_index >= dims.num_factors() {
        return Err(Error::IndexOutOfRange {
            index: factor_index,
            factors: dims.num_factors(),
        });
    }
    let d = dims.total_dim();
    let m = x.matrix();
    let mut out = DMatrix::from_element(d, d, ZERO);
    for r in 0..d {
        let mut ri = dims.split_index(r);
        for c in 0..d {
            let mut ci = dims.split_index(c);
            std::mem::swap(&mut ri[factor_index], &mut ci[factor_index]);
            out[(r, c)] = m[(dims.join_index(&ri), dims.join_index(&ci))];
            std::mem::swap(&mut ri[factor_index], &mut ci[factor_index]);
        }
    }
    HermitianOperator::new(dims.clone(), out)
}

/// Contract every factor except `factor` against the given product vectors:
/// returns the `d_k × d_k` matrix `R` with `<u_k|R|u_k> = <u|X|u>` where
/// `u = v^(1) ⊗ ... u_k ... ⊗ v^(N)`. Entries of `vectors[factor]` are ignored.
pub fn reduce_to_factor(
    x: &HermitianOperator,
    vectors: &[DVector<Complex64>],
    factor: usize,
) -> Result<DMatrix<Complex64>> {
    let dims = x.dims();
    check_factor_vectors(dims, vectors)?;
    if factor >= dims.num_factors() {
        return Err(Error::IndexOutOfRange {
            index: factor,
            factors: dims.num_factors(),
        });
    }
    let d = dims.total_dim();
    let dk = dims.factor_dims()[factor];
    // coefficient of the "environment" part of each flat index
    let env: Vec<(usize, Complex64)> = (0..d)
        .map(|i| {
            let parts = dims.split_index(i);
            let c = parts
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != factor)
                .fold(ONE, |acc, (f, &p)| acc * vectors[f][p]);
            (parts[factor], c)
        })
        .collect();
    let m = x.matrix();
    let mut out = DMatrix::from_element(dk, dk, ZERO);
    for r in 0..d {
        let (a, cr) = env[r];
        if cr == ZERO {
            continue;
        }
        for c in 0..d {
            let (b, cc) = env[c];
            out[(a, b)] += cr.conj() * m[(r, c)] * cc;
        }
    }
    Ok(out)
}

/// Quadratic form `u ↦ <u|Y|u>` on (unnormalized) product vectors given as
/// factor lists.
pub fn product_quadratic_form(
    y: &DMatrix<Complex64>,
) -> impl Fn(&[DVector<Complex64>]) -> Complex64 + '_ {
    move |factors| {
        let u = kron_vectors(factors);
        u.dotc(&(y * &u))
    }
}

/// Recover the matrix element `<e^(1)⊗...⊗e^(N)| Y |f^(1)⊗...⊗f^(N)>` from
/// values of the quadratic form on product vectors only:
///
/// ```text
/// 4^{-N} Σ_{k ∈ {0..3}^N} i^{-(k_1+...+k_N)} q(⊗_I (e^(I) + i^{k_I} f^(I)))
/// ```
///
/// The inner product is antilinear in its first slot, which fixes the sign of
/// the phase exponent.
pub fn multipolarize<Q>(q: Q, e: &[DVector<Complex64>], f: &[DVector<Complex64>]) -> Result<Complex64>
where
    Q: Fn(&[DVector<Complex64>]) -> Complex64,
{
    if e.len() != f.len() || e.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} factors", e.len()),
            found: format!("{} factors", f.len()),
        });
    }
    for (a, b) in e.iter().zip(f) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len().to_string(),
                found: b.len().to_string(),
            });
        }
    }
    const PHASES: [Complex64; 4] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let n = e.len();
    let terms = 1usize << (2 * n);
    let mut acc = ZERO;
    let mut ks = vec![0usize; n];
    for code in 0..terms {
        let mut rest = code;
        for k in ks.iter_mut() {
            *k = rest & 3;
            rest >>= 2;
        }
        let factors: Vec<DVector<Complex64>> = e
            .iter()
            .zip(f)
            .zip(&ks)
            .map(|((a, b), &k)| a + b * PHASES[k])
            .collect();
        let total: usize = ks.iter().sum();
        // i^{-total}
        acc += PHASES[(4 - total % 4) % 4] * q(&factors);
    }
    Ok(acc / (4f64.powi(n as i32)))
}
