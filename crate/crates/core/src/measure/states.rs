use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{complex_normal, haar_vector, indexed_rng};
use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, DimsSpec, HermitianOperator, ProductProjector};

/// Test-state generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StateFamily {
    /// `p |ψ⁻><ψ⁻| + (1 - p) I/4` on two qubits.
    Werner { p: f64 },
    /// `G G^† / tr(G G^†)` with a seeded complex Gaussian `G`.
    GinibreRandom { seed: u64 },
    PureProductRandom { seed: u64 },
    MaximallyMixed,
}

/// The singlet `(|01> - |10>)/√2`.
pub fn singlet_vector() -> DVector<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_vec(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(0.0, 0.0),
    ])
}

pub fn make_state(family: StateFamily, dims: &DimsSpec) -> Result<DensityOperator> {
    match family {
        StateFamily::Werner { p } => {
            if dims.factor_dims() != [2, 2] {
                return Err(Error::InvalidParameter(format!(
                    "Werner states need dims [2, 2], got {:?}",
                    dims.factor_dims()
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("Werner parameter {p} outside [0, 1]")));
            }
            let psi = singlet_vector();
            let singlet = &psi * psi.adjoint();
            let mixed = DMatrix::<Complex64>::identity(4, 4).scale(0.25);
            let m = singlet.scale(p) + mixed.scale(1.0 - p);
            DensityOperator::new(HermitianOperator::new(dims.clone(), m)?)
        }
        StateFamily::GinibreRandom { seed } => {
            let d = dims.total_dim();
            let mut rng = indexed_rng(seed, u64::MAX);
            let g = DMatrix::from_fn(d, d, |_, _| complex_normal(&mut rng));
            let gg = &g * g.adjoint();
            DensityOperator::from_positive(HermitianOperator::new(dims.clone(), gg)?)
        }
        StateFamily::PureProductRandom { seed } => {
            let mut rng = indexed_rng(seed, u64::MAX);
            let vs = dims
                .factor_dims()
                .iter()
                .map(|&d| haar_vector(d, &mut rng))
                .collect();
            let p = ProductProjector::new(dims.clone(), vs)?;
            DensityOperator::new(p.embed())
        }
        StateFamily::MaximallyMixed => Ok(DensityOperator::maximally_mixed(dims.clone())),
    }
}
