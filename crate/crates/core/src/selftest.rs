//! Embedded self-checks: measure barycenter, derivative consistency,
//! polarization, coordinate round-trip and the Werner threshold.
//!
//! Reports contain only seeded, deterministic quantities so that two runs
//! with the same configuration serialize to identical bytes.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::husimi::{from_coordinates, to_coordinates};
use crate::linalg::{multipolarize, product_quadratic_form, DensityOperator, DimsSpec, HermitianOperator};
use crate::measure::{design_quadrature, make_state, MeasureApprox, StateFamily};
use crate::minimizer::SolverConfig;
use crate::objective::{Form, ObjectiveSpec};
use crate::separability::{classify_with_measure, ppt_oracle, ClassifierConfig, MeasureSettings, Verdict};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Negative control: skew the design weights so the barycenter check fails.
    pub corrupt_design_weights: bool,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            corrupt_design_weights: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    /// Observed error (or count) compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestReport {
    pub tool: String,
    pub version: String,
    pub config: SelftestConfig,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl SelftestReport {
    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:<6} {:>12} {:>12}  detail\n", "check", "result", "value", "tolerance");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<14} {:<6} {:>12.3e} {:>12.3e}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.tolerance,
                c.detail
            );
        }
        let _ = writeln!(s, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: String) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        passed: value <= tolerance,
        value,
        tolerance,
        detail,
    }
}

fn failed(name: &str, err: crate::Error) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        passed: false,
        value: f64::INFINITY,
        tolerance: 0.0,
        detail: format!("error: {err}"),
    }
}

fn random_hermitian(dims: &DimsSpec, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let c: Vec<f64> = (0..dims.real_dim()).map(|_| rng.random::<f64>() - 0.5).collect();
    HermitianOperator::from_coords(dims.clone(), &c).expect("coordinate length matches dims")
}

/// Move a slice of mass between the first two points; the total is unchanged.
fn corrupt(measure: &MeasureApprox) -> Result<MeasureApprox> {
    let mut w = measure.weights().to_vec();
    let shift = 0.5 * w[1];
    w[0] += shift;
    w[1] -= shift;
    MeasureApprox::from_parts(measure.dims().clone(), measure.points().to_vec(), w, measure.kind())
}

fn barycenter_check(cfg: &SelftestConfig) -> Result<CheckRecord> {
    let dims = DimsSpec::qubits(2);
    let mut m = design_quadrature(&dims, 2)?;
    if cfg.corrupt_design_weights {
        m = corrupt(&m)?;
    }
    let err = m.barycenter().distance(DensityOperator::maximally_mixed(dims).op())?;
    Ok(check("barycenter", err, 1e-12, format!("{} vs I/4", m.label())))
}

fn gradient_check(cfg: &SelftestConfig) -> Result<CheckRecord> {
    let dims = DimsSpec::qubits(2);
    let m = design_quadrature(&dims, 8)?;
    let rho = make_state(StateFamily::GinibreRandom { seed: cfg.seed }, &dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for form in [Form::Exponential, Form::Binomial { order: 4 }] {
        let spec = ObjectiveSpec::new(&rho, &m, form)?;
        for _ in 0..3 {
            let x = random_hermitian(&dims, &mut rng).coords();
            let g = spec.evaluate_coords(&x, false)?.gradient;
            for (i, gi) in g.iter().enumerate() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (spec.value_coords(&xp)? - spec.value_coords(&xm)?) / (2.0 * h);
                worst = worst.max((fd - gi).abs() / gi.abs().max(1.0));
            }
        }
    }
    Ok(check("gradient", worst, 1e-5, "central differences, G and G_4".into()))
}

fn polarization_check(cfg: &SelftestConfig) -> Result<CheckRecord> {
    let dims = DimsSpec::qubits(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vec2 = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(2, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let y: DMatrix<Complex64> = random_hermitian(&dims, &mut rng).matrix().clone();
        let e = vec![vec2(&mut rng), vec2(&mut rng)];
        let f = vec![vec2(&mut rng), vec2(&mut rng)];
        let got = multipolarize(product_quadratic_form(&y), &e, &f)?;
        let ev = crate::linalg::kron_vectors(&e);
        let fv = crate::linalg::kron_vectors(&f);
        let want = ev.dotc(&(&y * fv));
        worst = worst.max((got - want).norm());
    }
    Ok(check("polarization", worst, 1e-9, "matrix elements from product values".into()))
}

fn round_trip_check(cfg: &SelftestConfig) -> Result<CheckRecord> {
    let dims = DimsSpec::qubits(2);
    let m = design_quadrature(&dims, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let solver = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let b0 = random_hermitian(&dims, &mut rng).traceless_part();
        let b0 = b0.scale(2.0 * rng.random::<f64>() / b0.hs_norm());
        let rho = from_coordinates(&b0, &m)?;
        let c = to_coordinates(&rho, &m, &solver)?;
        worst = worst.max(c.b.distance(&b0)?);
    }
    Ok(check("round_trip", worst, 1e-5, "chi(b) -> coordinates, |b| <= 2".into()))
}

fn werner_check(cfg: &SelftestConfig) -> Result<CheckRecord> {
    let dims = DimsSpec::qubits(2);
    let settings = ClassifierConfig {
        measure: MeasureSettings::MonteCarlo {
            samples: 4000,
            seed: cfg.seed,
        },
        ..ClassifierConfig::default()
    };
    let m = settings.measure.build(&dims)?;
    let mut contradictions = 0usize;
    let mut verdicts = Vec::new();
    for p in [0.1, 0.2, 0.5, 0.9] {
        let rho = make_state(StateFamily::Werner { p }, &dims)?;
        let v = classify_with_measure(&rho, &m, &settings)?.verdict;
        let ppt = ppt_oracle(&rho)?.ppt;
        let wrong = matches!((v, ppt), (Verdict::Separable, false) | (Verdict::Entangled, true) | (Verdict::Inconclusive, _));
        contradictions += usize::from(wrong);
        verdicts.push(format!("{p}:{v:?}"));
    }
    Ok(check("werner", contradictions as f64, 0.0, verdicts.join(" ")))
}

/// Run every check. Failures inside a check are recorded, never propagated.
pub fn run(cfg: &SelftestConfig) -> SelftestReport {
    type CheckFn = fn(&SelftestConfig) -> Result<CheckRecord>;
    let suite: [(&str, CheckFn); 5] = [
        ("barycenter", barycenter_check),
        ("gradient", gradient_check),
        ("polarization", polarization_check),
        ("round_trip", round_trip_check),
        ("werner", werner_check),
    ];
    let checks: Vec<CheckRecord> = suite
        .iter()
        .map(|(name, f)| f(cfg).unwrap_or_else(|e| failed(name, e)))
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    SelftestReport {
        tool: "husep".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let r = run(&SelftestConfig::default());
        assert!(r.passed, "{}", r.table());
    }

    #[test]
    fn corrupted_weights_fail_barycenter_only() {
        let r = run(&SelftestConfig {
            corrupt_design_weights: true,
            ..SelftestConfig::default()
        });
        assert!(!r.passed);
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["barycenter"]);
    }
}
