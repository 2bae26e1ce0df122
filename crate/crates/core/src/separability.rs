//! Separability classification from the boundedness of the `G_k` minimizers.
//!
//! For an interior separable state the minimizers `B_k` of `G_k` stay bounded
//! and converge to the minimizer of `G`; for an entangled state `G` is
//! unbounded below and `||B_k||` grows without limit. A finite run cannot
//! observe either limit, so [`classify`] commits to an explicit protocol:
//!
//! 1. Solve `G_k` for every configured order (warm-started).
//! 2. If every `||B_k||` is below `bound_threshold` and the last two growth
//!    ratios are below `growth_ratio`, solve `G` from the last `B_k`. A
//!    converged solve whose decomposition reproduces `ρ` is a certificate of
//!    separability (with respect to the measure's support).
//! 3. Otherwise build a witness from the largest iterates and certify it
//!    against all product states with an alternating eigen-ascent.
//! 4. Anything else is `Inconclusive`.
//!
//! The thresholds are calibrated on the two-qubit Werner family.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{partial_transpose, reduce_to_factor, DensityOperator, HermitianOperator, ProductProjector};
use crate::measure::{design_quadrature, sample_haar, MeasureApprox};
use crate::minimizer::{minimize, minimize_sequence, MinimizeReport, SolveStatus, SolverConfig};
use crate::objective::{self, Form, ObjectiveSpec};

/// Gauge offset used to push every product pairing strictly below zero.
pub const WITNESS_EPSILON: f64 = 1e-6;
/// Required separation between the state margin and the product margin.
pub const CERTIFY_MARGIN: f64 = 1e-8;
/// Negative partial-transpose eigenvalues above this are treated as zero.
pub const PPT_TOL: f64 = 1e-10;
const ASCENT_SWEEPS: usize = 50;
const ASCENT_STARTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Separable,
    Entangled,
    Inconclusive,
}

/// How to build the measure used by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSettings {
    MonteCarlo { samples: usize, seed: u64 },
    Design { strength: usize },
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings::MonteCarlo { samples: 4000, seed: 7 }
    }
}

impl MeasureSettings {
    pub fn build(&self, dims: &crate::linalg::DimsSpec) -> Result<MeasureApprox> {
        match *self {
            MeasureSettings::MonteCarlo { samples, seed } => sample_haar(dims, samples, seed),
            MeasureSettings::Design { strength } => design_quadrature(dims, strength),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub orders: Vec<u32>,
    /// `||B_k||_HS` at or above this counts as unbounded.
    pub bound_threshold: f64,
    /// Largest acceptable `||B_{k_j}|| / ||B_{k_{j-1}}||` over the last two steps.
    pub growth_ratio: f64,
    pub measure: MeasureSettings,
    pub solver: SolverConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 4, 8, 16, 32],
            bound_threshold: 50.0,
            growth_ratio: 1.15,
            measure: MeasureSettings::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bound_threshold > 0.0) || !(self.growth_ratio > 0.0) {
            return Err(Error::InvalidParameter("classifier thresholds must be positive".into()));
        }
        self.solver.validate()
    }
}

/// Summary of one `G_k` solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderSummary {
    pub order: u32,
    pub norm: f64,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub status: SolveStatus,
}

/// A candidate separating hyperplane `tr(E P) < tr(E ρ)` for all products `P`.
#[derive(Debug, Clone)]
pub struct WitnessCandidate {
    /// Unit HS norm, shifted so that every product pairing is negative.
    pub direction: HermitianOperator,
    /// `tr(E ρ)`.
    pub margin_state: f64,
    /// Largest `tr(E P)` found over the measure's points and by eigen-ascent.
    pub margin_products: f64,
    /// The product state attaining `margin_products`.
    pub maximizer: ProductProjector,
}

impl WitnessCandidate {
    pub fn gap(&self) -> f64 {
        self.margin_state - self.margin_products
    }

    pub fn certified(&self) -> bool {
        self.margin_products < self.margin_state - CERTIFY_MARGIN
    }

    /// Largest `tr(E P)` over an independent measure; certification holds on
    /// it when the result stays below `margin_state`.
    pub fn recheck(&self, measure: &MeasureApprox) -> Result<f64> {
        let t = measure.pairings(&self.direction.coords());
        Ok(t.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    pub sequence: Vec<OrderSummary>,
    /// Full `G_k` reports, in order.
    pub solves: Vec<MinimizeReport>,
    pub witness: Option<WitnessCandidate>,
    pub exp_solve: Option<MinimizeReport>,
    /// Minimizer of `G` when it was found.
    pub limit: Option<HermitianOperator>,
    /// `||Σ w e^{tr(BP)} P − ρ||_HS` for the limit.
    pub reconstruction_error: Option<f64>,
    pub notes: Vec<String>,
}

impl Classification {
    /// `(k, ||B_k||)` pairs.
    pub fn bk_norms(&self) -> Vec<(u32, f64)> {
        self.sequence.iter().map(|s| (s.order, s.norm)).collect()
    }
}

/// Successive norm ratios of a `B_k` trajectory. Tiny norms count as ratio 1.
pub fn growth_ratios(norms: &[f64]) -> Vec<f64> {
    norms
        .windows(2)
        .map(|w| if w[0] < 1e-9 { if w[1] < 1e-9 { 1.0 } else { f64::INFINITY } } else { w[1] / w[0] })
        .collect()
}

/// Build the configured measure and classify.
pub fn classify(rho: &DensityOperator, cfg: &ClassifierConfig) -> Result<Classification> {
    let measure = cfg.measure.build(rho.dims())?;
    classify_with_measure(rho, &measure, cfg)
}

/// Classify against a caller-supplied measure (so several runs can share it).
pub fn classify_with_measure(
    rho: &DensityOperator,
    measure: &MeasureApprox,
    cfg: &ClassifierConfig,
) -> Result<Classification> {
    cfg.validate()?;
    let mut notes = Vec::new();
    let reports = minimize_sequence(rho, measure, &cfg.orders, &cfg.solver)?;
    let sequence: Vec<OrderSummary> = cfg
        .orders
        .iter()
        .zip(&reports)
        .map(|(&order, r)| OrderSummary {
            order,
            norm: r.norm(),
            value: r.value,
            grad_norm: r.grad_norm,
            iters: r.iters,
            status: r.status.clone(),
        })
        .collect();
    if let Some(bad) = reports.iter().zip(&cfg.orders).find(|(r, _)| !r.converged()) {
        notes.push(format!("G_{} solve ended with {:?}", bad.1, bad.0.status));
    }

    let norms: Vec<f64> = sequence.iter().map(|s| s.norm).collect();
    let ratios = growth_ratios(&norms);
    let below = norms.iter().all(|&n| n < cfg.bound_threshold);
    let settled = ratios.iter().rev().take(2).all(|&r| r < cfg.growth_ratio);
    let bounded = below && settled;
    if !below {
        notes.push(format!(
            "||B_k|| reached {:.3} (threshold {})",
            norms.iter().cloned().fold(0.0, f64::max),
            cfg.bound_threshold
        ));
    } else if !settled {
        notes.push(format!("||B_k|| still growing (last ratios {:?})", &ratios[ratios.len().saturating_sub(2)..]));
    }

    let spec = ObjectiveSpec::new(rho, measure, Form::Exponential)?;
    let warm = reports.last().map(|r| r.minimizer.clone());
    let mut solver = cfg.solver.clone();
    solver.initial = warm;
    let exp = minimize(&spec, &solver)?;

    if exp.converged() {
        let recon = objective::reconstruct(&exp.minimizer, measure, Form::Exponential)?;
        let err = recon.distance(rho.op())?;
        if !bounded {
            notes.push("exponential solve converged although the B_k trajectory looked unbounded".into());
        }
        if err <= 10.0 * cfg.solver.grad_tol {
            return Ok(Classification {
                verdict: Verdict::Separable,
                sequence,
                solves: reports,
                witness: None,
                limit: Some(exp.minimizer.clone()),
                exp_solve: Some(exp),
                reconstruction_error: Some(err),
                notes,
            });
        }
        notes.push(format!("reconstruction error {err:.3e} exceeds tolerance"));
    } else {
        notes.push(format!("exponential solve: {:?}", exp.status));
    }

    let mut candidates: Vec<&MinimizeReport> = reports.iter().collect();
    candidates.push(&exp);
    let witness = match extract_witness(rho, &candidates, measure) {
        Ok(w) => Some(w),
        Err(Error::NoLargeIterate) => {
            notes.push("no iterate large enough to define a witness direction".into());
            None
        }
        Err(e) => return Err(e),
    };
    let verdict = match &witness {
        Some(w) if w.certified() => Verdict::Entangled,
        Some(w) => {
            notes.push(format!("witness not certified (gap {:.3e})", w.gap()));
            Verdict::Inconclusive
        }
        None => Verdict::Inconclusive,
    };
    Ok(Classification {
        verdict,
        sequence,
        solves: reports,
        witness,
        exp_solve: Some(exp),
        limit: None,
        reconstruction_error: None,
        notes,
    })
}

/// Turn the largest-norm iterates into a separating hyperplane.
///
/// Each candidate direction `E = traceless(B)/||traceless(B)||` is scored by
/// `tr(Eρ) − max_P tr(EP)`, where the maximum over product states is taken
/// over the measure's points and refined by alternating per-factor
/// leading-eigenvector updates. The best candidate is then shifted by a
/// scalar so that every product pairing is negative and renormalized.
pub fn extract_witness(
    rho: &DensityOperator,
    reports: &[&MinimizeReport],
    measure: &MeasureApprox,
) -> Result<WitnessCandidate> {
    let mut best: Option<(f64, HermitianOperator, f64, f64, ProductProjector)> = None;
    for rep in reports {
        let e = rep.minimizer.traceless_part();
        let n = e.hs_norm();
        if !(n > 1e-9) || !n.is_finite() {
            continue;
        }
        let e = e.scale(1.0 / n);
        let a = e.trace_product(rho.op())?;
        let (b, arg) = max_product_pairing(&e, measure)?;
        let gap = a - b;
        if best.as_ref().is_none_or(|(g, ..)| gap > *g) {
            best = Some((gap, e, a, b, arg));
        }
    }
    let Some((_, e, a, b, arg)) = best else {
        return Err(Error::NoLargeIterate);
    };
    let shifted = e.shifted(-(b + WITNESS_EPSILON));
    let scale = shifted.hs_norm();
    let direction = shifted.scale(1.0 / scale);
    Ok(WitnessCandidate {
        direction,
        margin_state: (a - b - WITNESS_EPSILON) / scale,
        margin_products: -WITNESS_EPSILON / scale,
        maximizer: arg,
    })
}

/// `max_P tr(E P)` over product states: best measure point, refined by
/// alternating eigen-ascent from the top starting points.
pub fn max_product_pairing(e: &HermitianOperator, measure: &MeasureApprox) -> Result<(f64, ProductProjector)> {
    let t = measure.pairings(&e.coords());
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[j].total_cmp(&t[i]));
    let mut best_val = t[order[0]];
    let mut best_arg = measure.points()[order[0]].clone();
    for &i in order.iter().take(ASCENT_STARTS) {
        let (v, p) = eigen_ascent(e, &measure.points()[i])?;
        if v > best_val {
            best_val = v;
            best_arg = p;
        }
    }
    Ok((best_val, best_arg))
}

/// Alternating maximization of `<v|E|v>` over product vectors.
pub fn eigen_ascent(e: &HermitianOperator, start: &ProductProjector) -> Result<(f64, ProductProjector)> {
    let mut vectors: Vec<DVector<Complex64>> = start.vectors().to_vec();
    let mut value = start.trace_pair(e)?;
    for _ in 0..ASCENT_SWEEPS {
        let before = value;
        for k in 0..vectors.len() {
            let r = reduce_to_factor(e, &vectors, k)?;
            let eig = r.symmetric_eigen();
            let (imax, &lmax) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty factor");
            vectors[k] = eig.eigenvectors.column(imax).into_owned();
            value = lmax;
        }
        if value - before <= 1e-14 * value.abs().max(1.0) {
            break;
        }
    }
    let p = ProductProjector::new(e.dims().clone(), vectors)?;
    let exact = p.trace_pair(e)?;
    Ok((exact, p))
}

/// Result of the partial-transpose test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PptResult {
    pub ppt: bool,
    pub min_eigenvalue: f64,
}

/// Positivity of the partial transpose on the second factor of a bipartite
/// state; an exact separability test for 2×2 and 2×3.
pub fn ppt_oracle(rho: &DensityOperator) -> Result<PptResult> {
    let n = rho.dims().num_factors();
    if n != 2 {
        return Err(Error::InvalidParameter(format!(
            "the PPT oracle needs exactly two factors, got {n}"
        )));
    }
    let min_eigenvalue = partial_transpose(rho, 1)?.min_eigenvalue();
    Ok(PptResult {
        ppt: min_eigenvalue >= -PPT_TOL,
        min_eigenvalue,
    })
}

/// `Σ_i w_i density(b, P_i) P_i` for the given form.
pub fn reconstruct(b: &HermitianOperator, measure: &MeasureApprox, form: Form) -> Result<HermitianOperator> {
    objective::reconstruct(b, measure, form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DimsSpec;
    use crate::measure::{make_state, StateFamily};

    fn werner(p: f64) -> DensityOperator {
        make_state(StateFamily::Werner { p }, &DimsSpec::qubits(2)).unwrap()
    }

    #[test]
    fn ppt_on_werner_grid() {
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let r = ppt_oracle(&werner(p)).unwrap();
            assert!((r.min_eigenvalue - (1.0 - 3.0 * p) / 4.0).abs() < 1e-12);
            assert_eq!(r.ppt, p <= 1.0 / 3.0);
        }
        let mm = ppt_oracle(&werner(0.0)).unwrap();
        assert!((mm.min_eigenvalue - 0.25).abs() < 1e-14);
        assert!(ppt_oracle(&DensityOperator::maximally_mixed(DimsSpec::qubits(3))).is_err());
        let prod = make_state(StateFamily::PureProductRandom { seed: 4 }, &DimsSpec::new(vec![2, 3]).unwrap()).unwrap();
        assert!(ppt_oracle(&prod).unwrap().ppt);
    }

    #[test]
    fn growth_ratio_edge_cases() {
        assert_eq!(growth_ratios(&[0.0, 0.0, 2.0]), vec![1.0, f64::INFINITY]);
        assert_eq!(growth_ratios(&[1.0, 2.0]), vec![2.0]);
    }

    #[test]
    fn ascent_finds_product_maximum_of_singlet_projector() {
        // max over product states of <ψ⁻|P|ψ⁻> is 1/2
        let rho = werner(1.0);
        let m = sample_haar(rho.dims(), 200, 1).unwrap();
        let (v, p) = max_product_pairing(rho.op(), &m).unwrap();
        assert!((v - 0.5).abs() < 1e-12, "{v}");
        assert!((p.trace_pair(rho.op()).unwrap() - v).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_is_separable_with_zero_limit() {
        let dims = DimsSpec::qubits(2);
        let rho = DensityOperator::maximally_mixed(dims);
        let cfg = ClassifierConfig {
            orders: vec![1, 2, 4, 8],
            measure: MeasureSettings::Design { strength: 16 },
            ..ClassifierConfig::default()
        };
        let c = classify(&rho, &cfg).unwrap();
        assert_eq!(c.verdict, Verdict::Separable);
        assert!(c.limit.unwrap().hs_norm() < 1e-10);
    }

    #[test]
    fn singlet_is_entangled_with_certified_witness() {
        let c = classify(&werner(1.0), &ClassifierConfig::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Entangled);
        let w = c.witness.unwrap();
        assert!(w.certified());
        assert!(w.gap() >= 0.2, "gap {}", w.gap());
        assert!(w.margin_products < 0.0 && w.margin_state > 0.0);
        assert!((w.direction.hs_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_werner_reconstructs() {
        let rho = werner(0.15);
        let cfg = ClassifierConfig::default();
        let m = cfg.measure.build(rho.dims()).unwrap();
        let c = classify_with_measure(&rho, &m, &cfg).unwrap();
        assert_eq!(c.verdict, Verdict::Separable);
        let b = c.limit.unwrap();
        let recon = reconstruct(&b, &m, Form::Exponential).unwrap();
        assert!(recon.distance(rho.op()).unwrap() < 1e-6);
    }

    #[test]
    fn separable_input_yields_uncertified_witness() {
        let rho = werner(0.1);
        let m = sample_haar(rho.dims(), 500, 2).unwrap();
        // a direction that is not a witness: rho itself minus I/4
        let fake = MinimizeReport {
            form: Form::Exponential,
            minimizer: rho.op().scale(30.0),
            value: 0.0,
            grad_norm: 1.0,
            iters: 0,
            status: SolveStatus::MaxIters,
            trace: vec![],
        };
        let w = extract_witness(&rho, &[&fake], &m).unwrap();
        assert!(!w.certified());
        let zero = MinimizeReport {
            minimizer: HermitianOperator::zeros(rho.dims().clone()),
            ..fake
        };
        assert!(matches!(extract_witness(&rho, &[&zero], &m), Err(Error::NoLargeIterate)));
    }
}
