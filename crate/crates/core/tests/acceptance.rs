//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero on any FAIL.
//!
//! Reference values come from oracles computed here with dense matrices,
//! independent of the library's coordinate machinery.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use husep::husimi::{from_coordinates, to_coordinates};
use husep::io::to_json;
use husep::linalg::{kron_vectors, multipolarize, product_quadratic_form, DensityOperator, DimsSpec, HermitianOperator};
use husep::measure::{design_quadrature, make_state, sample_haar, MeasureApprox, StateFamily};
use husep::minimizer::{minimize, minimize_sequence, SolverConfig};
use husep::objective::{self, Form, ObjectiveSpec};
use husep::selftest::{self, SelftestConfig};
use husep::separability::{classify_with_measure, ppt_oracle, ClassifierConfig, Verdict};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_hermitian(dims: &DimsSpec, rng: &mut ChaCha8Rng) -> HermitianOperator {
    HermitianOperator::new(dims.clone(), random_matrix(dims.total_dim(), rng)).unwrap()
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_traceless(dims: &DimsSpec, max_norm: f64, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let t = random_hermitian(dims, rng).traceless_part();
    t.scale(max_norm * rng.random::<f64>() / t.hs_norm())
}

/// Dense `tr(X P)` with `P = |u><u|`.
fn dense_pairing(x: &DMatrix<Complex64>, u: &DVector<Complex64>) -> f64 {
    u.dotc(&(x * u)).re
}

fn projector(u: &DVector<Complex64>) -> DMatrix<Complex64> {
    u * u.adjoint()
}

fn hs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ w φ(tr(XP)) P` computed point by point with dense matrices.
fn dense_weighted_sum(measure: &MeasureApprox, x: &DMatrix<Complex64>, phi: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let d = measure.dims().total_dim();
    let mut acc = DMatrix::<Complex64>::zeros(d, d);
    for (p, w) in measure.points().iter().zip(measure.weights()) {
        let u = p.product_vector();
        acc += projector(&u).scale(w * phi(dense_pairing(x, &u)));
    }
    acc
}

/// `χ(b)` as `Σ w e^{tr(bP)} P / Σ w e^{tr(bP)}`.
fn dense_chi(measure: &MeasureApprox, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let num = dense_weighted_sum(measure, b, f64::exp);
    let z: f64 = measure
        .points()
        .iter()
        .zip(measure.weights())
        .map(|(p, w)| w * dense_pairing(b, &p.product_vector()).exp())
        .sum();
    num.unscale(z)
}

/// `max_{a,b} <a⊗b|E|a⊗b>` on two qubits: for each `a` on a Bloch-sphere grid,
/// maximize over `b` exactly by the top eigenvalue of `<a|E|a>`.
fn product_max_two_qubits(e: &DMatrix<Complex64>, steps: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let theta = std::f64::consts::PI * i as f64 / steps as f64;
        for j in 0..(2 * steps) {
            let phi = std::f64::consts::PI * j as f64 / steps as f64;
            let a = [c((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), phi)];
            let mut red = DMatrix::<Complex64>::zeros(2, 2);
            for (r, s) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                for (k, l) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    red[(k, l)] += a[r].conj() * e[(2 * r + k, 2 * s + l)] * a[s];
                }
            }
            let top = red.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            best = best.max(top);
        }
    }
    best
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for factors in [2usize, 3] {
        let dims = DimsSpec::qubits(factors);
        for _ in 0..20 {
            let y = random_hermitian(&dims, &mut rng).matrix().clone();
            let e: Vec<_> = (0..factors).map(|_| random_vector(2, &mut rng)).collect();
            let f: Vec<_> = (0..factors).map(|_| random_vector(2, &mut rng)).collect();
            let got = multipolarize(product_quadratic_form(&y), &e, &f).unwrap();
            let want = kron_vectors(&e).dotc(&(&y * kron_vectors(&f)));
            worst = worst.max((got - want).norm());
        }
    }
    (worst <= 1e-9, format!("max |error| = {worst:.2e} over 40 operators (tol 1e-9)"))
}

fn criterion_2() -> Outcome {
    let qubit = DimsSpec::qubits(1);
    let m = design_quadrature(&qubit, 2).unwrap();
    let half = DMatrix::<Complex64>::identity(2, 2).scale(0.5);
    let bary = dense_weighted_sum(&m, &DMatrix::zeros(2, 2), |_| 1.0);
    let bary_err = hs(&(bary - half));
    let z = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
    let second: f64 = m
        .points()
        .iter()
        .zip(m.weights())
        .map(|(p, w)| w * dense_pairing(&z, &p.product_vector()).powi(2))
        .sum();
    let second_err = (second - 1.0 / 3.0).abs();

    // E||mean(P) - I/4||² = (1 - 1/4)/M for i.i.d. pure states on 2x2
    let dims = DimsSpec::qubits(2);
    let samples = 10_000;
    let bound = 3.0 * (0.75 / samples as f64).sqrt();
    let quarter = DMatrix::<Complex64>::identity(4, 4).scale(0.25);
    let mut mc_worst: f64 = 0.0;
    for seed in 1..=5 {
        let mc = sample_haar(&dims, samples, seed).unwrap();
        let b = dense_weighted_sum(&mc, &DMatrix::zeros(4, 4), |_| 1.0);
        mc_worst = mc_worst.max(hs(&(b - &quarter)));
    }
    let ok = bary_err <= 1e-12 && second_err <= 1e-10 && mc_worst < bound;
    (
        ok,
        format!(
            "design barycenter {bary_err:.1e} (1e-12), second moment {second_err:.1e} (1e-10), \
             MC worst {mc_worst:.2e} < {bound:.2e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let m = design_quadrature(&dims, 8).unwrap();
    let rho = make_state(StateFamily::GinibreRandom { seed: 5 }, &dims).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let mut grad_worst: f64 = 0.0;
    let mut hess_worst: f64 = 0.0;
    let forms = [
        Form::Exponential,
        Form::Binomial { order: 1 },
        Form::Binomial { order: 2 },
        Form::Binomial { order: 4 },
    ];
    for form in forms {
        let spec = ObjectiveSpec::new(&rho, &m, form).unwrap();
        for _ in 0..10 {
            let x = random_hermitian(&dims, &mut rng);
            let v = random_hermitian(&dims, &mut rng);
            let ev = spec.eval(&x).unwrap();
            // directional derivatives along every coordinate axis and along v
            let xc = x.coords();
            let mut fd = vec![0.0; xc.len()];
            for i in 0..xc.len() {
                let (mut p, mut q) = (xc.clone(), xc.clone());
                p[i] += h;
                q[i] -= h;
                fd[i] = (spec.value_coords(&p).unwrap() - spec.value_coords(&q).unwrap()) / (2.0 * h);
            }
            let g = ev.gradient.coords();
            let diff: f64 = fd.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let gn: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            grad_worst = grad_worst.max(diff / gn.max(1.0));

            let plus = spec.eval(&x.lin_comb(1.0, &v, h).unwrap()).unwrap().gradient;
            let minus = spec.eval(&x.lin_comb(1.0, &v, -h).unwrap()).unwrap().gradient;
            let fd_h = plus.sub(&minus).unwrap().scale(1.0 / (2.0 * h));
            let hv = ev.hessian_apply(&v).unwrap();
            hess_worst = hess_worst.max(fd_h.distance(&hv).unwrap() / hv.hs_norm().max(1.0));
        }
    }

    let mc = sample_haar(&dims, 2000, 3).unwrap();
    let mut min_form = f64::INFINITY;
    let mut scalar_worst: f64 = 0.0;
    let identity = HermitianOperator::identity(dims.clone());
    for measure in [&m, &mc] {
        for _ in 0..20 {
            let b = random_hermitian(&dims, &mut rng).scale(4.0);
            let v = random_hermitian(&dims, &mut rng);
            min_form = min_form.min(objective::hessian_w_form(measure, &b, &v).unwrap());
            scalar_worst = scalar_worst.max(objective::hessian_w_form(measure, &b, &identity).unwrap().abs());
        }
    }
    let ok = grad_worst <= 1e-5 && hess_worst <= 1e-5 && min_form >= -1e-10 && scalar_worst <= 1e-12;
    (
        ok,
        format!(
            "gradient rel {grad_worst:.1e}, hessian rel {hess_worst:.1e} (1e-5); \
             min d2W form {min_form:.2e} (>= -1e-10), scalar {scalar_worst:.1e} (1e-12)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let m = design_quadrature(&dims, 16).unwrap();
    let cfg = SolverConfig::default();
    let mut grad_worst: f64 = 0.0;
    let mut recon_worst: f64 = 0.0;
    let mut all_converged = true;
    let mut npt = 0;
    for seed in 0..10 {
        let rho = make_state(StateFamily::GinibreRandom { seed }, &dims).unwrap();
        npt += usize::from(!ppt_oracle(&rho).unwrap().ppt);
        for k in [1u32, 2, 4, 8] {
            let spec = ObjectiveSpec::new(&rho, &m, Form::Binomial { order: k }).unwrap();
            let r = minimize(&spec, &cfg).unwrap();
            all_converged &= r.converged();
            grad_worst = grad_worst.max(r.grad_norm);
            let kk = 2.0 * k as f64;
            let recon = dense_weighted_sum(&m, r.minimizer.matrix(), |t| (1.0 + t / kk).powf(kk - 1.0));
            recon_worst = recon_worst.max(hs(&(recon - rho.op().matrix())));
        }
    }
    let ok = all_converged && grad_worst <= 1e-8 && recon_worst <= 1e-6;
    (
        ok,
        format!(
            "40 solves ({npt} NPT states), converged {all_converged}, max grad {grad_worst:.1e} (1e-8), \
             max reconstruction {recon_worst:.1e} (1e-6)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let cfg = ClassifierConfig::default();
    let m = cfg.measure.build(&dims).unwrap();
    let mut contradictions = Vec::new();
    let mut definite = 0;
    for i in 0..=20 {
        let p = i as f64 * 0.05;
        let rho = make_state(StateFamily::Werner { p }, &dims).unwrap();
        let verdict = classify_with_measure(&rho, &m, &cfg).unwrap().verdict;
        let ppt = ppt_oracle(&rho).unwrap().ppt;
        // the PPT oracle is exact for two qubits
        if (p - 1.0 / 3.0).abs() > 0.05 {
            let wrong = matches!((verdict, ppt), (Verdict::Separable, false) | (Verdict::Entangled, true));
            if wrong {
                contradictions.push(p);
            }
        }
        definite += usize::from(verdict != Verdict::Inconclusive);
    }
    (
        contradictions.is_empty() && definite >= 15,
        format!("contradictions {contradictions:?}, definite verdicts {definite}/21 (>= 15)"),
    )
}

fn criterion_6() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let cfg = ClassifierConfig::default();
    let m = cfg.measure.build(&dims).unwrap();
    let fresh = sample_haar(&dims, 10_000, 2024).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.0, 0.8] {
        let rho = make_state(StateFamily::Werner { p }, &dims).unwrap();
        let cls = classify_with_measure(&rho, &m, &cfg).unwrap();
        let Some(w) = cls.witness.as_ref() else {
            ok = false;
            parts.push(format!("p={p}: no witness"));
            continue;
        };
        let recheck = w.recheck(&fresh).unwrap();
        let e = w.direction.matrix();
        let state = (e * rho.op().matrix()).trace().re;
        let oracle_max = product_max_two_qubits(e, 200);
        let fresh_gap = state - recheck;
        let oracle_gap = state - oracle_max;
        ok &= w.certified() && w.gap() >= 0.05 && fresh_gap >= 0.05 && oracle_gap > 0.0;
        parts.push(format!(
            "p={p}: gap {:.3}, fresh-measure gap {fresh_gap:.3}, sphere-grid gap {oracle_gap:.3}",
            w.gap()
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let m = design_quadrature(&dims, 8).unwrap();
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut coord_worst: f64 = 0.0;
    let mut state_worst: f64 = 0.0;
    for _ in 0..20 {
        let b0 = random_traceless(&dims, 2.0, &mut rng);
        let rho = DensityOperator::new(HermitianOperator::new(dims.clone(), dense_chi(&m, b0.matrix())).unwrap()).unwrap();
        let coords = to_coordinates(&rho, &m, &cfg).unwrap();
        coord_worst = coord_worst.max(coords.b.distance(&b0).unwrap());
        let back = from_coordinates(&coords.b, &m).unwrap();
        state_worst = state_worst.max(back.op().distance(rho.op()).unwrap());
    }
    let werner = make_state(StateFamily::Werner { p: 0.1 }, &dims).unwrap();
    let wc = to_coordinates(&werner, &m, &cfg).unwrap();
    let werner_err = from_coordinates(&wc.b, &m).unwrap().op().distance(werner.op()).unwrap();
    let ok = coord_worst <= 1e-5 && state_worst <= 1e-5 && werner_err <= 1e-6;
    (
        ok,
        format!(
            "coordinates {coord_worst:.1e} (1e-5), states {state_worst:.1e} (1e-5), \
             Werner(0.1) from(to) {werner_err:.1e} (1e-6)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let dims = DimsSpec::qubits(2);
    let cls = ClassifierConfig::default();
    let m = cls.measure.build(&dims).unwrap();
    let cfg = SolverConfig::default();

    let low = make_state(StateFamily::Werner { p: 0.2 }, &dims).unwrap();
    let orders: Vec<u32> = (1..=16).collect();
    let seq = minimize_sequence(&low, &m, &orders, &cfg).unwrap();
    let steps: Vec<f64> = seq
        .windows(2)
        .map(|w| w[1].minimizer.distance(&w[0].minimizer).unwrap())
        .collect();
    let decreasing = seq.iter().all(|r| r.converged()) && steps.windows(2).all(|s| s[1] < s[0]);
    let spec = ObjectiveSpec::new(&low, &m, Form::Exponential).unwrap();
    let warm = cfg.clone().with_initial(seq.last().unwrap().minimizer.clone());
    let exp = minimize(&spec, &warm).unwrap();
    let warm_ok = exp.converged() && exp.iters <= 50;

    let high = make_state(StateFamily::Werner { p: 0.9 }, &dims).unwrap();
    let doubling = minimize_sequence(&high, &m, &cls.orders, &cfg).unwrap();
    let norms: Vec<f64> = doubling.iter().map(|r| r.norm()).collect();
    let n = norms.len();
    let ratios = [norms[n - 2] / norms[n - 3], norms[n - 1] / norms[n - 2]];
    let growing = ratios.iter().all(|&r| r >= 1.15);
    (
        decreasing && warm_ok && growing,
        format!(
            "Werner(0.2) steps {:.3e} .. {:.3e} decreasing {decreasing}, warm exp solve {} iters ({:?}); \
             Werner(0.9) last ratios {:.3}, {:.3} (>= 1.15)",
            steps[0],
            steps[steps.len() - 1],
            exp.iters,
            exp.status,
            ratios[0],
            ratios[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = SelftestConfig::default();
    let a = to_json(&selftest::run(&cfg)).unwrap();
    let b = to_json(&selftest::run(&cfg)).unwrap();
    let report = selftest::run(&cfg);
    (
        a == b && report.passed,
        format!("{} bytes, identical {}, selftest passed {}", a.len(), a == b, report.passed),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("multipolarization", criterion_1),
        ("measure fidelity", criterion_2),
        ("derivative consistency", criterion_3),
        ("G_k existence", criterion_4),
        ("Werner classification", criterion_5),
        ("witness extraction", criterion_6),
        ("coordinate round-trip", criterion_7),
        ("convergence behavior", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        failures += usize::from(!ok);
        println!(
            "criterion {} {:<24} {}  {}  [{:.1}s]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
