//! The convex objectives
//!
//! ```text
//! G(X)   = Σ_i w_i exp(tr(X P_i))             − tr(X ρ)
//! G_k(X) = Σ_i w_i (1 + tr(X P_i)/2k)^{2k}    − tr(X ρ)
//! Z(X)   = Σ_i w_i exp(tr(X P_i)),   W = ln Z,   χ = ∇W
//! ```
//!
//! over a finite [`MeasureApprox`], with gradients and Hessians.
//!
//! Internally everything is evaluated on real coordinates (see
//! [`crate::linalg`]); `tr(X P_i)` is computed once per point and shared by
//! the value, gradient and curvature of one evaluation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, HermitianOperator, ProductProjector};
use crate::measure::{axpy, dot, MeasureApprox, MeasureKind};
use crate::par;

/// Largest admissible `tr(X P)` before `exp` leaves double range.
pub const EXP_LIMIT: f64 = 700.0;

/// Largest total dimension for which Hessians are materialized densely.
pub const DENSE_HESSIAN_MAX_DIM: usize = 6;

/// Which integrand the objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Form {
    /// `e^t`
    Exponential,
    /// `(1 + t/2k)^{2k}`
    Binomial { order: u32 },
}

impl Form {
    /// `(φ(t), φ'(t), φ''(t))` for the integrand `φ`.
    #[inline]
    pub fn derivatives(self, t: f64) -> (f64, f64, f64) {
        match self {
            Form::Exponential => {
                let e = t.exp();
                (e, e, e)
            }
            Form::Binomial { order } => {
                let n = 2 * order as i32;
                let nf = n as f64;
                let base = 1.0 + t / nf;
                let d2 = if n >= 2 { base.powi(n - 2) } else { 0.0 };
                let d1 = d2 * base;
                let v = d1 * base;
                (v, d1, d2 * (nf - 1.0) / nf)
            }
        }
    }

    /// Decomposition density `φ'(t)`: `e^t` or `(1 + t/2k)^{2k-1}`.
    pub fn density(self, t: f64) -> f64 {
        self.derivatives(t).1
    }

    fn check_range(self, pairings: &[f64], norm: f64) -> Result<()> {
        if self == Form::Exponential {
            check_exp_range(pairings, norm)?;
        }
        Ok(())
    }
}

fn check_exp_range(pairings: &[f64], norm: f64) -> Result<()> {
    let max = pairings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > EXP_LIMIT || max.is_nan() {
        return Err(Error::Range {
            max_pairing: max,
            limit: EXP_LIMIT,
            norm,
        });
    }
    Ok(())
}

/// Overflow guard: fails with [`Error::Range`] when some `tr(X P_i)` exceeds
/// [`EXP_LIMIT`].
pub fn check_range(measure: &MeasureApprox, x: &HermitianOperator) -> Result<()> {
    ensure_dims(measure, x)?;
    check_exp_range(&measure.pairings(&x.coords()), x.hs_norm())
}

fn ensure_dims(measure: &MeasureApprox, x: &HermitianOperator) -> Result<()> {
    if measure.dims() != x.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", measure.dims().factor_dims()),
            found: format!("{:?}", x.dims().factor_dims()),
        });
    }
    Ok(())
}

/// `G` or `G_k` for a given state and measure.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec<'a> {
    rho: &'a DensityOperator,
    measure: &'a MeasureApprox,
    form: Form,
    rho_coords: Vec<f64>,
}

/// Value, gradient, and (optionally) the dense Hessian in coordinates.
#[derive(Debug, Clone)]
pub struct CoordEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Result of evaluating an objective at one operator.
#[derive(Debug, Clone)]
pub struct EvalResult<'a> {
    pub value: f64,
    pub gradient: HermitianOperator,
    /// per-point `w_i φ''(tr(X P_i))`
    curvature: Vec<f64>,
    measure: &'a MeasureApprox,
}

impl EvalResult<'_> {
    /// `V ↦ Σ_i w_i φ''(tr(X P_i)) tr(V P_i) P_i`.
    pub fn hessian_apply(&self, v: &HermitianOperator) -> Result<HermitianOperator> {
        ensure_dims(self.measure, v)?;
        let s = self.measure.pairings(&v.coords());
        let coeffs: Vec<f64> = s
            .iter()
            .zip(&self.curvature)
            .zip(self.measure.weights())
            .map(|((s, c), w)| s * c / w)
            .collect();
        HermitianOperator::from_coords(v.dims().clone(), &self.measure.weighted_sum(&coeffs))
    }

    /// `<V, d²·V>`.
    pub fn hessian_form(&self, v: &HermitianOperator) -> Result<f64> {
        ensure_dims(self.measure, v)?;
        let s = self.measure.pairings(&v.coords());
        Ok(s.iter().zip(&self.curvature).map(|(s, c)| c * s * s).sum())
    }
}

impl<'a> ObjectiveSpec<'a> {
    /// Validates dims and, for design measures, that the design integrates the
    /// binomial integrand exactly (`strength ≥ 2k`).
    pub fn new(rho: &'a DensityOperator, measure: &'a MeasureApprox, form: Form) -> Result<Self> {
        if rho.dims() != measure.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", measure.dims().factor_dims()),
                found: format!("{:?}", rho.dims().factor_dims()),
            });
        }
        if let Form::Binomial { order } = form {
            if order == 0 {
                return Err(Error::InvalidParameter("binomial order must be at least 1".into()));
            }
            if let MeasureKind::Design { strength } = measure.kind() {
                if strength < 2 * order as usize {
                    return Err(Error::InvalidParameter(format!(
                        "design strength {strength} cannot integrate order {order} exactly (need ≥ {})",
                        2 * order
                    )));
                }
            }
        }
        Ok(Self {
            rho,
            measure,
            form,
            rho_coords: rho.op().coords(),
        })
    }

    pub fn rho(&self) -> &'a DensityOperator {
        self.rho
    }

    pub fn measure(&self) -> &'a MeasureApprox {
        self.measure
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn rho_coords(&self) -> &[f64] {
        &self.rho_coords
    }

    /// Objective value only.
    pub fn value_coords(&self, x: &[f64]) -> Result<f64> {
        let t = self.measure.pairings(x);
        self.form.check_range(&t, norm(x))?;
        let w = self.measure.weights();
        let form = self.form;
        let integral = par::chunked_reduce(
            t.len(),
            |s, e| (s..e).map(|i| w[i] * form.derivatives(t[i]).0).sum::<f64>(),
            |a, b| a + b,
        )
        .expect("nonempty");
        Ok(integral - dot(x, &self.rho_coords))
    }

    /// Value, gradient and optionally the dense Hessian in one pass.
    pub fn evaluate_coords(&self, x: &[f64], with_hessian: bool) -> Result<CoordEval> {
        let t = self.measure.pairings(x);
        self.form.check_range(&t, norm(x))?;
        let r = self.measure.dims().real_dim();
        let w = self.measure.weights();
        let form = self.form;
        let measure = self.measure;
        let (integral, mut grad, hess) = par::chunked_reduce(
            t.len(),
            |s, e| {
                let mut val = 0.0;
                let mut g = vec![0.0; r];
                let mut h = with_hessian.then(|| DMatrix::<f64>::zeros(r, r));
                for i in s..e {
                    let (v, d1, d2) = form.derivatives(t[i]);
                    let f = measure.feature(i);
                    val += w[i] * v;
                    axpy(&mut g, w[i] * d1, f);
                    if let Some(h) = h.as_mut() {
                        let fv = DVector::from_column_slice(f);
                        h.ger(w[i] * d2, &fv, &fv, 1.0);
                    }
                }
                (val, g, h)
            },
            |(va, mut ga, ha), (vb, gb, hb)| {
                axpy(&mut ga, 1.0, &gb);
                let h = match (ha, hb) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
                (va + vb, ga, h)
            },
        )
        .expect("nonempty");
        axpy(&mut grad, -1.0, &self.rho_coords);
        Ok(CoordEval {
            value: integral - dot(x, &self.rho_coords),
            gradient: grad,
            hessian: hess,
        })
    }

    /// Evaluate at an operator.
    pub fn eval(&self, x: &HermitianOperator) -> Result<EvalResult<'a>> {
        ensure_dims(self.measure, x)?;
        let xc = x.coords();
        let t = self.measure.pairings(&xc);
        self.form.check_range(&t, x.hs_norm())?;
        let form = self.form;
        let w = self.measure.weights();
        let c = self.evaluate_coords(&xc, false)?;
        let curvature = t
            .iter()
            .zip(w)
            .map(|(&t, &w)| w * form.derivatives(t).2)
            .collect();
        Ok(EvalResult {
            value: c.value,
            gradient: HermitianOperator::from_coords(x.dims().clone(), &c.gradient)?,
            curvature,
            measure: self.measure,
        })
    }

    /// Dense Hessian in coordinates; limited to small systems.
    pub fn hessian_dense(&self, x: &HermitianOperator) -> Result<DMatrix<f64>> {
        ensure_dims(self.measure, x)?;
        let d = x.total_dim();
        if d > DENSE_HESSIAN_MAX_DIM {
            return Err(Error::TooLarge {
                total_dim: d,
                limit: DENSE_HESSIAN_MAX_DIM,
            });
        }
        Ok(self
            .evaluate_coords(&x.coords(), true)?
            .hessian
            .expect("requested"))
    }

    /// `Σ w_i φ'(tr(B P_i)) P_i`: the state decomposed by the density at `B`.
    pub fn reconstruct(&self, b: &HermitianOperator) -> Result<HermitianOperator> {
        reconstruct(b, self.measure, self.form)
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `Σ_i w_i φ'(tr(B P_i)) P_i`.
pub fn reconstruct(b: &HermitianOperator, measure: &MeasureApprox, form: Form) -> Result<HermitianOperator> {
    ensure_dims(measure, b)?;
    let t = measure.pairings(&b.coords());
    form.check_range(&t, b.hs_norm())?;
    let coeffs: Vec<f64> = t.iter().map(|&t| form.density(t)).collect();
    HermitianOperator::from_coords(b.dims().clone(), &measure.weighted_sum(&coeffs))
}

/// Decomposition density at one point: `e^{tr(BP)}` or `(1 + tr(BP)/2k)^{2k-1}`.
pub fn density_at(b: &HermitianOperator, form: Form, p: &ProductProjector) -> Result<f64> {
    Ok(form.density(p.trace_pair(b)?))
}

/// Normalized Gibbs weights `q_i = w_i e^{t_i} / Z` and `ln Z`, computed by
/// log-sum-exp.
fn gibbs_weights(measure: &MeasureApprox, t: &[f64]) -> (Vec<f64>, f64) {
    let tmax = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w = measure.weights();
    let mut q: Vec<f64> = t.iter().zip(w).map(|(&t, &w)| w * (t - tmax).exp()).collect();
    let s: f64 = q.iter().sum();
    for v in &mut q {
        *v /= s;
    }
    (q, tmax + s.ln())
}

/// Partition function `Z(X) = Σ w_i e^{tr(X P_i)}`.
pub fn eval_z(measure: &MeasureApprox, x: &HermitianOperator) -> Result<f64> {
    ensure_dims(measure, x)?;
    let t = measure.pairings(&x.coords());
    check_exp_range(&t, x.hs_norm())?;
    Ok(t.iter().zip(measure.weights()).map(|(t, w)| w * t.exp()).sum())
}

/// `W = ln Z`, evaluated stably.
pub fn eval_w(measure: &MeasureApprox, x: &HermitianOperator) -> Result<f64> {
    ensure_dims(measure, x)?;
    let t = measure.pairings(&x.coords());
    Ok(gibbs_weights(measure, &t).1)
}

/// `χ(X) = ∇W(X) = Σ q_i P_i`, a convex combination of the measure's points.
pub fn chi(measure: &MeasureApprox, x: &HermitianOperator) -> Result<DensityOperator> {
    ensure_dims(measure, x)?;
    let t = measure.pairings(&x.coords());
    let (q, _) = gibbs_weights(measure, &t);
    let coeffs: Vec<f64> = q.iter().zip(measure.weights()).map(|(q, w)| q / w).collect();
    let op = HermitianOperator::from_coords(x.dims().clone(), &measure.weighted_sum(&coeffs))?;
    // exact renormalization absorbs rounding in Σ q_i
    DensityOperator::from_positive(op)
}

/// `V ↦ d²W(X)·V = Σ q_i s_i P_i − (Σ q_i s_i) χ(X)` with `s_i = tr(V P_i)`.
pub fn hessian_w_apply(
    measure: &MeasureApprox,
    x: &HermitianOperator,
    v: &HermitianOperator,
) -> Result<HermitianOperator> {
    ensure_dims(measure, x)?;
    ensure_dims(measure, v)?;
    let t = measure.pairings(&x.coords());
    let s = measure.pairings(&v.coords());
    let (q, _) = gibbs_weights(measure, &t);
    let mean: f64 = q.iter().zip(&s).map(|(q, s)| q * s).sum();
    let coeffs: Vec<f64> = q
        .iter()
        .zip(&s)
        .zip(measure.weights())
        .map(|((q, s), w)| q * s / w)
        .collect();
    let first = HermitianOperator::from_coords(x.dims().clone(), &measure.weighted_sum(&coeffs))?;
    let chi_coeffs: Vec<f64> = q.iter().zip(measure.weights()).map(|(q, w)| q / w).collect();
    let chi_op = HermitianOperator::from_coords(x.dims().clone(), &measure.weighted_sum(&chi_coeffs))?;
    first.lin_comb(1.0, &chi_op, -mean)
}

/// `d²W(X; V)`: the variance of `tr(V P)` under the Gibbs weights.
pub fn hessian_w_form(measure: &MeasureApprox, x: &HermitianOperator, v: &HermitianOperator) -> Result<f64> {
    ensure_dims(measure, x)?;
    ensure_dims(measure, v)?;
    let t = measure.pairings(&x.coords());
    let s = measure.pairings(&v.coords());
    let (q, _) = gibbs_weights(measure, &t);
    let mean: f64 = q.iter().zip(&s).map(|(q, s)| q * s).sum();
    // centered second moment, never negative
    Ok(q.iter().zip(&s).map(|(q, s)| q * (s - mean).powi(2)).sum())
}

/// Dense `d²W(X)` in coordinates (covariance of the point features).
pub fn hessian_w_dense(measure: &MeasureApprox, x: &HermitianOperator) -> Result<DMatrix<f64>> {
    ensure_dims(measure, x)?;
    let d = x.total_dim();
    if d > DENSE_HESSIAN_MAX_DIM {
        return Err(Error::TooLarge {
            total_dim: d,
            limit: DENSE_HESSIAN_MAX_DIM,
        });
    }
    let r = measure.dims().real_dim();
    let t = measure.pairings(&x.coords());
    let (q, _) = gibbs_weights(measure, &t);
    let mut mean = DVector::<f64>::zeros(r);
    for (i, &qi) in q.iter().enumerate() {
        mean.axpy(qi, &DVector::from_column_slice(measure.feature(i)), 1.0);
    }
    let mut h = DMatrix::<f64>::zeros(r, r);
    for (i, &qi) in q.iter().enumerate() {
        let f = DVector::from_column_slice(measure.feature(i)) - &mean;
        h.ger(qi, &f, &f, 1.0);
    }
    Ok(h)
}
