use husep::linalg::{partial_transpose_op, DimsSpec, HermitianOperator, ProductProjector};
use husep::measure::{design_quadrature, make_state, MeasureApprox, StateFamily};
use husep::objective::{self, Form, ObjectiveSpec};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn dims() -> DimsSpec {
    DimsSpec::qubits(2)
}

fn measure() -> &'static MeasureApprox {
    static M: OnceLock<MeasureApprox> = OnceLock::new();
    M.get_or_init(|| design_quadrature(&dims(), 4).unwrap())
}

fn operator(scale: f64) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec(-scale..scale, 16).prop_map(|c| HermitianOperator::from_coords(dims(), &c).unwrap())
}

fn product() -> impl Strategy<Value = ProductProjector> {
    prop::collection::vec(-1.0f64..1.0, 8).prop_filter_map("nonzero factors", |v| {
        let a = DVector::from_vec(vec![Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]);
        let b = DVector::from_vec(vec![Complex64::new(v[4], v[5]), Complex64::new(v[6], v[7])]);
        ProductProjector::new(dims(), vec![a, b]).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_pair_is_linear(p in product(), x in operator(2.0), y in operator(2.0), a in -3.0f64..3.0) {
        let lhs = p.trace_pair(&x.lin_comb(a, &y, 1.0).unwrap()).unwrap();
        let rhs = a * p.trace_pair(&x).unwrap() + p.trace_pair(&y).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn coords_round_trip(x in operator(5.0)) {
        let back = HermitianOperator::from_coords(dims(), &x.coords()).unwrap();
        prop_assert!(back.distance(&x).unwrap() < 1e-14);
        let norm: f64 = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((norm - x.hs_norm()).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_an_involution(x in operator(2.0), k in 0usize..2) {
        let twice = partial_transpose_op(&partial_transpose_op(&x, k).unwrap(), k).unwrap();
        prop_assert!(twice.distance(&x).unwrap() < 1e-15);
    }

    #[test]
    fn objectives_are_midpoint_convex(x in operator(1.5), y in operator(1.5), order in 1u32..3, seed in 0u64..50) {
        let rho = make_state(StateFamily::GinibreRandom { seed }, &dims()).unwrap();
        for form in [Form::Exponential, Form::Binomial { order }] {
            let spec = ObjectiveSpec::new(&rho, measure(), form).unwrap();
            let mid = x.lin_comb(0.5, &y, 0.5).unwrap();
            let f = |z: &HermitianOperator| spec.eval(z).unwrap().value;
            prop_assert!(f(&mid) <= 0.5 * (f(&x) + f(&y)) + 1e-12);
        }
    }

    #[test]
    fn chi_is_a_density_and_shift_invariant(b in operator(2.0), lambda in -5.0f64..5.0) {
        let rho = objective::chi(measure(), &b).unwrap();
        prop_assert!((rho.op().trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.op().min_eigenvalue() > -1e-12);
        let shifted = objective::chi(measure(), &b.shifted(lambda)).unwrap();
        prop_assert!(shifted.op().distance(rho.op()).unwrap() < 1e-12);
    }

    #[test]
    fn hessian_form_is_nonnegative(b in operator(2.0), v in operator(1.0)) {
        prop_assert!(objective::hessian_w_form(measure(), &b, &v).unwrap() >= -1e-12);
    }
}
