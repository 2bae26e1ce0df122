//! Minimization of `G` and `G_k` over Hermitian operators.
//!
//! Both objectives are smooth and convex. `G_k` always has a unique minimum;
//! `G` has one exactly when the state lies in the interior of the convex hull
//! of the measure's support, and otherwise decreases without bound along some
//! direction. The solver reports that case as [`SolveStatus::Diverged`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, HermitianOperator};
use crate::measure::{axpy, dot, MeasureApprox};
use crate::objective::{Form, ObjectiveSpec, DENSE_HESSIAN_MAX_DIM};

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NewtonDense,
    GradientBacktracking,
}

impl Method {
    /// Newton for `total_dim ≤ 6`, gradient descent otherwise.
    pub fn default_for(total_dim: usize) -> Self {
        if total_dim <= DENSE_HESSIAN_MAX_DIM {
            Method::NewtonDense
        } else {
            Method::GradientBacktracking
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `||∇||_HS ≤ grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Starting point; zero when absent.
    #[serde(skip)]
    pub initial: Option<HermitianOperator>,
    /// Chosen from the dimension when absent.
    pub method: Option<Method>,
    /// Iterate norm beyond which the exponential objective is declared divergent.
    pub divergence_norm: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 500,
            initial: None,
            method: None,
            divergence_norm: 1e3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.divergence_norm > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "divergence_norm must exceed 1, got {}",
                self.divergence_norm
            )));
        }
        Ok(())
    }

    pub fn with_initial(mut self, x: HermitianOperator) -> Self {
        self.initial = Some(x);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged { final_norm: f64 },
    MaxIters,
    RangeError { message: String },
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub form: Form,
    /// Last accepted iterate (the minimal point when converged).
    pub minimizer: HermitianOperator,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub status: SolveStatus,
    pub trace: Vec<TraceEntry>,
}

impl MinimizeReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn norm(&self) -> f64 {
        self.minimizer.hs_norm()
    }
}

/// Minimize `spec` starting from `cfg.initial` (or zero).
pub fn minimize(spec: &ObjectiveSpec<'_>, cfg: &SolverConfig) -> Result<MinimizeReport> {
    cfg.validate()?;
    let dims = spec.measure().dims().clone();
    let method = cfg.method.unwrap_or_else(|| Method::default_for(dims.total_dim()));
    let mut x = match &cfg.initial {
        Some(x0) => {
            if x0.dims() != &dims {
                return Err(Error::DimensionMismatch {
                    expected: format!("{:?}", dims.factor_dims()),
                    found: format!("{:?}", x0.dims().factor_dims()),
                });
            }
            x0.coords()
        }
        None => vec![0.0; dims.real_dim()],
    };
    let want_hessian = method == Method::NewtonDense;

    let finish = |x: &[f64], value: f64, grad_norm: f64, iters, status, trace| -> Result<MinimizeReport> {
        Ok(MinimizeReport {
            form: spec.form(),
            minimizer: HermitianOperator::from_coords(dims.clone(), x)?,
            value,
            grad_norm,
            iters,
            status,
            trace,
        })
    };

    let mut cur = match spec.evaluate_coords(&x, want_hessian) {
        Ok(e) => e,
        Err(Error::Range { .. }) if cfg.initial.is_some() => {
            // an out-of-range warm start is useless; restart from zero
            x = vec![0.0; dims.real_dim()];
            spec.evaluate_coords(&x, want_hessian)?
        }
        Err(e @ Error::Range { .. }) => {
            return finish(&x, f64::NAN, f64::NAN, 0, SolveStatus::RangeError { message: e.to_string() }, vec![]);
        }
        Err(e) => return Err(e),
    };
    let mut trace = Vec::new();
    let mut last_step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..cfg.max_iters {
        let gn = norm(&cur.gradient);
        if gn <= cfg.grad_tol {
            return finish(&x, cur.value, gn, iter, SolveStatus::Converged, trace);
        }
        let xn = norm(&x);
        if xn > cfg.divergence_norm {
            return finish(&x, cur.value, gn, iter, SolveStatus::Diverged { final_norm: xn }, trace);
        }

        let (direction, initial_step) = match method {
            Method::NewtonDense => {
                let h = cur.hessian.as_ref().expect("newton evaluates the hessian");
                (newton_direction(h, &cur.gradient), 1.0)
            }
            Method::GradientBacktracking => {
                let d: Vec<f64> = cur.gradient.iter().map(|g| -g).collect();
                // Barzilai–Borwein guess, falling back to the last accepted step
                let step = match &prev {
                    Some((px, pg)) => {
                        let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                        let y: Vec<f64> = cur.gradient.iter().zip(pg).map(|(a, b)| a - b).collect();
                        let sy = dot(&s, &y);
                        if sy > 0.0 {
                            dot(&s, &s) / sy
                        } else {
                            last_step * 2.0
                        }
                    }
                    None => 1.0,
                };
                (d, step)
            }
        };

        let slope = dot(&cur.gradient, &direction);
        let mut alpha = initial_step;
        let mut hit_range: Option<Error> = None;
        let accepted = loop {
            if alpha < MIN_STEP {
                break None;
            }
            let mut trial = x.clone();
            axpy(&mut trial, alpha, &direction);
            match spec.value_coords(&trial) {
                Ok(v) => {
                    let armijo = v <= cur.value + ARMIJO_C1 * alpha * slope;
                    let flat = (v - cur.value).abs() <= 8.0 * f64::EPSILON * cur.value.abs().max(1.0);
                    if armijo && v < cur.value {
                        break Some((trial, alpha));
                    }
                    if flat || armijo {
                        // decrease is below rounding; accept only if the gradient improves
                        let e = spec.evaluate_coords(&trial, false)?;
                        if norm(&e.gradient) < gn && v <= cur.value + 8.0 * f64::EPSILON * cur.value.abs().max(1.0) {
                            break Some((trial, alpha));
                        }
                    }
                }
                Err(e @ Error::Range { .. }) => hit_range = Some(e),
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        };

        let Some((trial, alpha)) = accepted else {
            let status = match hit_range {
                Some(e) => SolveStatus::RangeError { message: e.to_string() },
                None => SolveStatus::MaxIters,
            };
            return finish(&x, cur.value, gn, iter, status, trace);
        };

        prev = Some((x.clone(), cur.gradient.clone()));
        x = trial;
        last_step = alpha;
        cur = spec.evaluate_coords(&x, want_hessian)?;
        trace.push(TraceEntry {
            iter: iter + 1,
            value: cur.value,
            grad_norm: norm(&cur.gradient),
            step: alpha,
        });
    }

    let gn = norm(&cur.gradient);
    let status = if gn <= cfg.grad_tol {
        SolveStatus::Converged
    } else if norm(&x) > cfg.divergence_norm {
        SolveStatus::Diverged { final_norm: norm(&x) }
    } else {
        SolveStatus::MaxIters
    };
    finish(&x, cur.value, gn, cfg.max_iters, status, trace)
}

/// Solve `H s = -g`, regularizing `H` when it is numerically singular.
fn newton_direction(h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let rhs = -DVector::from_column_slice(g);
    let scale = h.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..40 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(chol) = hr.cholesky() {
            let s = chol.solve(&rhs);
            if s.iter().all(|v| v.is_finite()) && s.dot(&rhs) > 0.0 {
                return s.as_slice().to_vec();
            }
        }
        ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 10.0 };
    }
    rhs.as_slice().to_vec()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Minimize `G_k` for each order in turn, warm-starting each solve from the
/// previous minimizer.
pub fn minimize_sequence(
    rho: &DensityOperator,
    measure: &MeasureApprox,
    orders: &[u32],
    cfg: &SolverConfig,
) -> Result<Vec<MinimizeReport>> {
    if orders.is_empty() {
        return Err(Error::InvalidParameter("at least one order is required".into()));
    }
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("orders must be strictly increasing, got {orders:?}")));
    }
    let mut out: Vec<MinimizeReport> = Vec::with_capacity(orders.len());
    let mut warm = cfg.initial.clone();
    for &order in orders {
        let spec = ObjectiveSpec::new(rho, measure, Form::Binomial { order })?;
        let mut c = cfg.clone();
        c.initial = warm.take();
        let rep = minimize(&spec, &c)?;
        warm = Some(rep.minimizer.clone());
        out.push(rep);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DimsSpec;
    use crate::measure::{design_quadrature, make_state, sample_haar, StateFamily};

    fn two_qubits() -> DimsSpec {
        DimsSpec::qubits(2)
    }

    #[test]
    fn maximally_mixed_minimizer_is_zero() {
        let dims = two_qubits();
        let rho = DensityOperator::maximally_mixed(dims.clone());
        let m = design_quadrature(&dims, 8).unwrap();
        for form in [Form::Exponential, Form::Binomial { order: 1 }, Form::Binomial { order: 4 }] {
            let spec = ObjectiveSpec::new(&rho, &m, form).unwrap();
            let rep = minimize(&spec, &SolverConfig::default()).unwrap();
            assert!(rep.converged());
            assert!(rep.minimizer.hs_norm() < 1e-12);
            assert!((rep.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singlet_exponential_diverges() {
        let dims = two_qubits();
        let rho = make_state(StateFamily::Werner { p: 1.0 }, &dims).unwrap();
        let m = design_quadrature(&dims, 4).unwrap();
        let spec = ObjectiveSpec::new(&rho, &m, Form::Exponential).unwrap();
        let rep = minimize(&spec, &SolverConfig::default()).unwrap();
        assert!(
            matches!(rep.status, SolveStatus::Diverged { .. } | SolveStatus::RangeError { .. }),
            "{:?}",
            rep.status
        );
        assert!(rep.value < -10.0);
    }

    #[test]
    fn binomial_always_converges_and_descends() {
        let dims = two_qubits();
        let m = design_quadrature(&dims, 8).unwrap();
        for seed in 0..4 {
            let rho = make_state(StateFamily::GinibreRandom { seed }, &dims).unwrap();
            for order in [1, 2, 4] {
                let spec = ObjectiveSpec::new(&rho, &m, Form::Binomial { order }).unwrap();
                let rep = minimize(&spec, &SolverConfig::default()).unwrap();
                assert!(rep.converged(), "seed {seed} k {order}: {:?}", rep.status);
                assert!(rep.grad_norm <= 1e-8);
                let mut last: f64 = 1.0; // value at zero
                for t in &rep.trace {
                    assert!(t.value <= last + 1e-14 * last.abs().max(1.0));
                    last = t.value;
                }
            }
        }
    }

    #[test]
    fn exponential_minimum_is_strict() {
        let dims = two_qubits();
        let m = design_quadrature(&dims, 6).unwrap();
        let rho = make_state(StateFamily::Werner { p: 0.1 }, &dims).unwrap();
        let spec = ObjectiveSpec::new(&rho, &m, Form::Exponential).unwrap();
        let rep = minimize(&spec, &SolverConfig::default()).unwrap();
        assert!(rep.converged());
        let e = spec.eval(&rep.minimizer).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let c: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
            let v = HermitianOperator::from_coords(dims.clone(), &c).unwrap();
            assert!(e.hessian_form(&v).unwrap() >= 1e-10);
        }
    }

    #[test]
    fn gradient_method_agrees_with_newton() {
        let dims = two_qubits();
        let m = design_quadrature(&dims, 4).unwrap();
        let rho = make_state(StateFamily::GinibreRandom { seed: 11 }, &dims).unwrap();
        let spec = ObjectiveSpec::new(&rho, &m, Form::Binomial { order: 1 }).unwrap();
        let newton = minimize(&spec, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            method: Some(Method::GradientBacktracking),
            max_iters: 20_000,
            ..SolverConfig::default()
        };
        let grad = minimize(&spec, &cfg).unwrap();
        assert!(grad.converged(), "{:?}", grad.status);
        assert!(newton.minimizer.distance(&grad.minimizer).unwrap() < 1e-6);
    }

    #[test]
    fn sequence_validation_and_warm_start() {
        let dims = two_qubits();
        let m = sample_haar(&dims, 600, 3).unwrap();
        let rho = make_state(StateFamily::Werner { p: 0.2 }, &dims).unwrap();
        let cfg = SolverConfig::default();
        assert!(minimize_sequence(&rho, &m, &[2, 1], &cfg).is_err());
        assert!(minimize_sequence(&rho, &m, &[], &cfg).is_err());
        let seq = minimize_sequence(&rho, &m, &[1, 2, 4], &cfg).unwrap();
        for (rep, k) in seq.iter().zip([1, 2, 4]) {
            assert!(rep.converged());
            let spec = ObjectiveSpec::new(&rho, &m, Form::Binomial { order: k }).unwrap();
            let cold = minimize(&spec, &cfg).unwrap();
            assert!(cold.minimizer.distance(&rep.minimizer).unwrap() <= 10.0 * cfg.grad_tol);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let dims = two_qubits();
        let rho = DensityOperator::maximally_mixed(dims.clone());
        let m = design_quadrature(&dims, 2).unwrap();
        let spec = ObjectiveSpec::new(&rho, &m, Form::Exponential).unwrap();
        let bad = SolverConfig {
            grad_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(minimize(&spec, &bad).is_err());
        let bad = SolverConfig {
            divergence_norm: 0.5,
            ..SolverConfig::default()
        };
        assert!(minimize(&spec, &bad).is_err());
    }
}
