//! Exponential coordinates on interior separable states.
//!
//! The map `χ(b) = Σ q_i P_i`, `q_i ∝ w_i e^{tr(b P_i)}`, sends traceless
//! Hermitian operators onto the interior of the convex hull of the measure's
//! points, and is a diffeomorphism. [`from_coordinates`] evaluates it;
//! [`to_coordinates`] inverts it by minimizing `G` and projecting the minimizer
//! onto the traceless gauge (adding a multiple of the identity does not change
//! `χ`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, HermitianOperator};
use crate::measure::MeasureApprox;
use crate::minimizer::{minimize, MinimizeReport, SolverConfig};
use crate::objective::{self, Form, ObjectiveSpec, DENSE_HESSIAN_MAX_DIM};

/// Trace tolerance for coordinates.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct HusimiCoordinates {
    /// Traceless coordinate operator.
    pub b: HermitianOperator,
    /// Label of the measure the coordinates refer to.
    pub measure_ref: String,
    pub solve: MinimizeReport,
}

/// Coordinates of `rho`; fails with [`Error::NotInteriorSeparable`] when the
/// exponential objective has no minimum.
pub fn to_coordinates(
    rho: &DensityOperator,
    measure: &MeasureApprox,
    cfg: &SolverConfig,
) -> Result<HusimiCoordinates> {
    let spec = ObjectiveSpec::new(rho, measure, Form::Exponential)?;
    let solve = minimize(&spec, cfg)?;
    if !solve.converged() {
        return Err(Error::NotInteriorSeparable(format!(
            "exponential solve ended with {:?} at ||B|| = {:.3}",
            solve.status,
            solve.norm()
        )));
    }
    Ok(HusimiCoordinates {
        b: solve.minimizer.traceless_part(),
        measure_ref: measure.label(),
        solve,
    })
}

/// `χ(b)`. A non-traceless `b` is projected first.
pub fn from_coordinates(b: &HermitianOperator, measure: &MeasureApprox) -> Result<DensityOperator> {
    let tr = b.trace();
    if tr.abs() > TRACE_TOL {
        log::warn!("coordinates carry trace {tr:.3e}; projecting onto the traceless gauge");
        let b = b.traceless_part();
        objective::check_range(measure, &b)?;
        return objective::chi(measure, &b);
    }
    objective::check_range(measure, b)?;
    objective::chi(measure, b)
}

/// Smallest eigenvalue of `d²W(b)` restricted to traceless directions
/// normalized like Pauli strings, `tr(V²) = d`.
pub fn diffeo_check(b: &HermitianOperator, measure: &MeasureApprox) -> Result<f64> {
    let d = b.total_dim();
    if d > DENSE_HESSIAN_MAX_DIM {
        return Err(Error::TooLarge {
            total_dim: d,
            limit: DENSE_HESSIAN_MAX_DIM,
        });
    }
    let h = objective::hessian_w_dense(measure, b)?;
    let basis = traceless_basis(d);
    let restricted = basis.transpose() * h * &basis;
    let ev = restricted.symmetric_eigenvalues();
    Ok(d as f64 * ev.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Orthonormal basis (columns, in coordinates) of the traceless subspace.
fn traceless_basis(d: usize) -> DMatrix<f64> {
    let r = d * d;
    let mut q = DMatrix::<f64>::zeros(r, r - 1);
    // Helmert-style basis on the diagonal block
    for j in 1..d {
        let norm = ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            q[(i, j - 1)] = 1.0 / norm;
        }
        q[(j, j - 1)] = -(j as f64) / norm;
    }
    // off-diagonal coordinates are already traceless and orthonormal
    for c in d..r {
        q[(c, c - 1)] = 1.0;
    }
    q
}

/// `-Σ_i w_i ρ(P_i) ln ρ(P_i)` for the normalized density `e^{tr(bP)}/Z`,
/// which equals `ln Z(b) − tr(b χ(b))`.
pub fn entropy_diagnostic(b: &HermitianOperator, measure: &MeasureApprox) -> Result<f64> {
    objective::check_range(measure, b)?;
    let w = objective::eval_w(measure, b)?;
    let chi = objective::chi(measure, b)?;
    Ok(w - b.trace_product(chi.op())?)
}
