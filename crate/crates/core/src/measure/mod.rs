//! Finite approximations of the locally-unitarily-invariant probability
//! measure on pure product states.
//!
//! Two constructions are provided:
//!
//! * [`sample_haar`]: seeded Monte Carlo, one Haar-random unit vector per
//!   factor, uniform weights.
//! * [`design_quadrature`]: a product of per-factor complex projective
//!   `t`-designs with positive weights, integrating every polynomial of degree
//!   `≤ t` in each factor's projector exactly.
//!
//! Every [`MeasureApprox`] precomputes the real coordinates of its points
//! (see [`crate::linalg`]) so that `tr(XP_i)` for all points is one
//! matrix–vector product.

mod gauss;
mod states;

pub use states::{make_state, StateFamily};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DimsSpec, HermitianOperator, ProductProjector};
use crate::par;

/// Tolerance on `Σ w_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Largest design (in total points) we are willing to materialize.
pub const MAX_DESIGN_POINTS: usize = 2_000_000;
/// Per-factor designs above this size skip the frame-potential self-check.
const MAX_VERIFIED_FACTOR_POINTS: usize = 6_000;

/// How a measure was produced; enough to rebuild it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureKind {
    MonteCarlo { seed: u64, samples: usize },
    Design { strength: usize },
    /// Loaded from a file or assembled by hand.
    Custom,
}

/// Weighted point set approximating the invariant measure on product states.
#[derive(Debug, Clone)]
pub struct MeasureApprox {
    dims: DimsSpec,
    points: Vec<ProductProjector>,
    weights: Vec<f64>,
    kind: MeasureKind,
    /// row-major `points × d²` coordinates of each projector
    features: Vec<f64>,
    moment_error: Option<f64>,
}

impl MeasureApprox {
    /// Assemble a measure from explicit points and weights. Weights must be
    /// positive and sum to 1 within [`WEIGHT_SUM_TOL`].
    pub fn from_parts(
        dims: DimsSpec,
        points: Vec<ProductProjector>,
        weights: Vec<f64>,
        kind: MeasureKind,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("measure needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", points.len()),
                found: weights.len().to_string(),
            });
        }
        if let Some(p) = points.iter().find(|p| p.dims() != &dims) {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", dims.factor_dims()),
                found: format!("{:?}", p.dims().factor_dims()),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        let features = par::map_slice(&points, |p| p.features()).concat();
        Ok(Self {
            dims,
            points,
            weights,
            kind,
            features,
            moment_error: None,
        })
    }

    pub fn dims(&self) -> &DimsSpec {
        &self.dims
    }

    pub fn points(&self) -> &[ProductProjector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest per-factor frame-potential error measured after construction
    /// (designs only).
    pub fn moment_error(&self) -> Option<f64> {
        self.moment_error
    }

    /// Short identifier suitable for reports, e.g. `mc(seed=7,M=4000)`.
    pub fn label(&self) -> String {
        match self.kind {
            MeasureKind::MonteCarlo { seed, samples } => format!("mc(seed={seed},M={samples})"),
            MeasureKind::Design { strength } => format!("design(t={strength},n={})", self.len()),
            MeasureKind::Custom => format!("custom(n={})", self.len()),
        }
    }

    /// Coordinates of point `i` in the orthonormal Hermitian basis.
    pub fn feature(&self, i: usize) -> &[f64] {
        let r = self.dims.real_dim();
        &self.features[i * r..(i + 1) * r]
    }

    /// `tr(X P_i)` for every point, given `X` in coordinates.
    pub fn pairings(&self, x: &[f64]) -> Vec<f64> {
        let r = self.dims.real_dim();
        debug_assert_eq!(x.len(), r);
        let mut out = vec![0.0; self.len()];
        let chunks = par::map_indices(self.len().div_ceil(par::CHUNK), |c| {
            let start = c * par::CHUNK;
            let end = (start + par::CHUNK).min(self.len());
            (start..end)
                .map(|i| dot(self.feature(i), x))
                .collect::<Vec<_>>()
        });
        for (c, vals) in chunks.into_iter().enumerate() {
            out[c * par::CHUNK..c * par::CHUNK + vals.len()].copy_from_slice(&vals);
        }
        out
    }

    /// `Σ_i c_i w_i P_i` in coordinates, for per-point coefficients `c`.
    pub fn weighted_sum(&self, coeffs: &[f64]) -> Vec<f64> {
        let r = self.dims.real_dim();
        par::chunked_reduce(
            self.len(),
            |s, e| {
                let mut acc = vec![0.0; r];
                for (i, (c, w)) in coeffs[s..e].iter().zip(&self.weights[s..e]).enumerate() {
                    axpy(&mut acc, c * w, self.feature(s + i));
                }
                acc
            },
            |mut a, b| {
                axpy(&mut a, 1.0, &b);
                a
            },
        )
        .expect("measure is nonempty")
    }

    /// `Σ w_i P_i`.
    pub fn barycenter(&self) -> HermitianOperator {
        let ones = vec![1.0; self.len()];
        HermitianOperator::from_coords(self.dims.clone(), &self.weighted_sum(&ones))
            .expect("coords have the right length")
    }

    /// `Σ w_i f(tr(X P_i))` for a scalar function `f`.
    pub fn integrate<F>(&self, x: &HermitianOperator, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        if x.dims() != &self.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims.factor_dims()),
                found: format!("{:?}", x.dims().factor_dims()),
            });
        }
        let t = self.pairings(&x.coords());
        Ok(par::chunked_reduce(
            self.len(),
            |s, e| (s..e).map(|i| self.weights[i] * f(t[i])).sum::<f64>(),
            |a, b| a + b,
        )
        .expect("measure is nonempty"))
    }

    /// Rank of the span of `{P_i}` inside the real space of Hermitian
    /// operators. A measure is *full* when this equals `d²`.
    pub fn span_rank(&self) -> usize {
        let r = self.dims.real_dim();
        // Gram matrix Σ w_i f_i f_i^T has the same rank as the point span
        let mut gram = nalgebra::DMatrix::<f64>::zeros(r, r);
        for i in 0..self.len() {
            let f = nalgebra::DVector::from_column_slice(self.feature(i));
            gram.ger(self.weights[i], &f, &f, 1.0);
        }
        let ev = gram.symmetric_eigenvalues();
        let max = ev.iter().cloned().fold(0.0, f64::max);
        ev.iter().filter(|&&v| v > max * 1e-10).count()
    }

    pub fn is_full(&self) -> bool {
        self.span_rank() == self.dims.real_dim()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// Counter-based generator: the stream for point `index` depends only on
/// `(seed, index)`.
pub(crate) fn indexed_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard complex normal (`E|z|² = 1`) via Box–Muller.
pub(crate) fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// Haar-random unit vector in `C^d`.
pub(crate) fn haar_vector<R: Rng>(d: usize, rng: &mut R) -> DVector<Complex64> {
    loop {
        let v = DVector::from_fn(d, |_, _| complex_normal(rng));
        let n = v.norm();
        if n > 1e-300 {
            return v.unscale(n);
        }
    }
}

/// Monte Carlo approximation with `samples` i.i.d. Haar product states.
pub fn sample_haar(dims: &DimsSpec, samples: usize, seed: u64) -> Result<MeasureApprox> {
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let points = par::map_indices(samples, |i| {
        let mut rng = indexed_rng(seed, i as u64);
        let vs = dims
            .factor_dims()
            .iter()
            .map(|&d| haar_vector(d, &mut rng))
            .collect();
        ProductProjector::new(dims.clone(), vs).expect("dims consistent")
    });
    let w = 1.0 / samples as f64;
    let mut weights = vec![w; samples];
    // make the sum exactly representable as close to 1 as possible
    let excess: f64 = weights.iter().sum::<f64>() - 1.0;
    weights[0] -= excess;
    MeasureApprox::from_parts(
        dims.clone(),
        points,
        weights,
        MeasureKind::MonteCarlo { seed, samples },
    )
}

/// Number of points in the per-factor design of [`design_quadrature`].
pub fn factor_design_size(d: usize, strength: usize) -> usize {
    if d == 1 {
        return 1;
    }
    let nodes = (strength + 2) / 2;
    let phases = strength + 1;
    (nodes * phases).pow((d - 1) as u32)
}

/// Product of per-factor complex projective `strength`-designs.
///
/// Each factor vector is parametrized as
/// `(√r_1, √r_2 e^{iφ_2}, ..., √r_d e^{iφ_d})` with `r` uniform on the simplex
/// and independent uniform phases. The simplex is integrated by a collapsed
/// Gauss–Jacobi rule and each phase by `strength + 1` equispaced angles.
pub fn design_quadrature(dims: &DimsSpec, strength: usize) -> Result<MeasureApprox> {
    if strength == 0 {
        return Err(Error::InvalidParameter("design strength must be at least 1".into()));
    }
    let total = dims
        .factor_dims()
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(factor_design_size(d, strength)));
    let Some(total) = total.filter(|&n| n <= MAX_DESIGN_POINTS) else {
        let dim = *dims.factor_dims().iter().max().expect("nonempty");
        return Err(Error::UnsupportedDesign {
            dim,
            strength,
            fallback: "Monte Carlo sampling (--measure mc)",
        });
    };

    let factor_rules: Vec<(Vec<DVector<Complex64>>, Vec<f64>)> = dims
        .factor_dims()
        .iter()
        .map(|&d| factor_design(d, strength))
        .collect();

    let mut moment_error: f64 = 0.0;
    for ((vs, ws), &d) in factor_rules.iter().zip(dims.factor_dims()) {
        if d > 1 && vs.len() <= MAX_VERIFIED_FACTOR_POINTS {
            let err = frame_potential_error(vs, ws, d, strength);
            if err > 1e-10 {
                return Err(Error::UnsupportedDesign {
                    dim: d,
                    strength,
                    fallback: "Monte Carlo sampling (--measure mc)",
                });
            }
            moment_error = moment_error.max(err);
        }
    }

    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut vs = Vec::with_capacity(dims.num_factors());
        let mut w = 1.0;
        // last factor varies fastest
        let mut idx = vec![0; dims.num_factors()];
        for (f, rule) in factor_rules.iter().enumerate().rev() {
            idx[f] = rest % rule.0.len();
            rest /= rule.0.len();
        }
        for (f, rule) in factor_rules.iter().enumerate() {
            vs.push(rule.0[idx[f]].clone());
            w *= rule.1[idx[f]];
        }
        points.push(ProductProjector::new(dims.clone(), vs)?);
        weights.push(w);
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    let mut m = MeasureApprox::from_parts(dims.clone(), points, weights, MeasureKind::Design { strength })?;
    m.moment_error = Some(moment_error);
    Ok(m)
}

/// Weighted `t`-design on the unit sphere of `C^d` (modulo phase).
fn factor_design(d: usize, strength: usize) -> (Vec<DVector<Complex64>>, Vec<f64>) {
    if d == 1 {
        return (vec![DVector::from_element(1, Complex64::new(1.0, 0.0))], vec![1.0]);
    }
    let nodes = (strength + 2) / 2;
    let phases = strength + 1;
    // collapsed coordinates u_j, j = 0..d-2, with weight (1-u_j)^{d-2-j}
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d - 1)
        .map(|j| gauss::jacobi_unit_interval(nodes, d - 2 - j))
        .collect();
    let angles: Vec<f64> = (0..phases)
        .map(|m| 2.0 * std::f64::consts::PI * m as f64 / phases as f64)
        .collect();

    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    let n_simplex = nodes.pow((d - 1) as u32);
    let n_phase = phases.pow((d - 1) as u32);
    for s in 0..n_simplex {
        let mut rest = s;
        let mut remaining = 1.0;
        let mut r = vec![0.0; d];
        let mut w_s = 1.0;
        for (j, rule) in rules.iter().enumerate() {
            let k = rest % nodes;
            rest /= nodes;
            r[j] = remaining * rule.0[k];
            remaining *= 1.0 - rule.0[k];
            w_s *= rule.1[k];
        }
        r[d - 1] = remaining;
        for p in 0..n_phase {
            let mut rest = p;
            let mut v = DVector::from_element(d, Complex64::new(0.0, 0.0));
            v[0] = Complex64::new(r[0].sqrt(), 0.0);
            for j in 1..d {
                let phi = angles[rest % phases];
                rest /= phases;
                v[j] = Complex64::from_polar(r[j].sqrt(), phi);
            }
            vectors.push(v);
            weights.push(w_s / n_phase as f64);
        }
    }
    (vectors, weights)
}

/// `|Σ_ij w_i w_j |<v_i|v_j>|^{2t} − 1/C(d+t−1, t)|`, zero exactly for
/// weighted `t`-designs.
fn frame_potential_error(vs: &[DVector<Complex64>], ws: &[f64], d: usize, t: usize) -> f64 {
    let n = vs.len();
    let rows = par::map_indices(n, |i| {
        let mut acc = 0.0;
        for j in 0..n {
            acc += ws[j] * vs[i].dotc(&vs[j]).norm_sqr().powi(t as i32);
        }
        acc * ws[i]
    });
    let potential: f64 = rows.iter().sum();
    let mut binom = 1.0;
    for i in 1..=t {
        binom *= (d + t - 1 - (i - 1)) as f64 / i as f64;
    }
    (potential - 1.0 / binom).abs()
}

/// Serialized form of a [`MeasureApprox`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub kind: MeasureKind,
    pub seed: Option<u64>,
    pub dims: DimsSpec,
    pub points: Vec<PointRecord>,
    pub weights: Vec<f64>,
}

/// One product point: per-factor real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MeasureApprox {
    pub fn to_record(&self) -> MeasureRecord {
        let seed = match self.kind {
            MeasureKind::MonteCarlo { seed, .. } => Some(seed),
            _ => None,
        };
        MeasureRecord {
            kind: self.kind,
            seed,
            dims: self.dims.clone(),
            points: self
                .points
                .iter()
                .map(|p| PointRecord {
                    re: p.vectors().iter().map(|v| v.iter().map(|z| z.re).collect()).collect(),
                    im: p.vectors().iter().map(|v| v.iter().map(|z| z.im).collect()).collect(),
                })
                .collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn from_record(rec: MeasureRecord) -> Result<Self> {
        let points = rec
            .points
            .into_iter()
            .map(|p| {
                if p.re.len() != p.im.len() {
                    return Err(Error::Format("re/im factor count mismatch".into()));
                }
                let vs = p
                    .re
                    .iter()
                    .zip(&p.im)
                    .map(|(re, im)| {
                        if re.len() != im.len() {
                            return Err(Error::Format("re/im length mismatch".into()));
                        }
                        Ok(DVector::from_iterator(
                            re.len(),
                            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ProductProjector::new(rec.dims.clone(), vs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(rec.dims, points, rec.weights, rec.kind)
    }
}
