//! JSON matrix format and report records.
//!
//! Matrices are stored as `{"dims": [..], "re": [[..]], "im": [[..]]}` with
//! row-major nested arrays. `im` may be omitted for real matrices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::husimi::HusimiCoordinates;
use crate::linalg::{DensityOperator, DimsSpec, HermitianOperator, ProductProjector};
use crate::measure::MeasureApprox;
use crate::minimizer::{MinimizeReport, SolveStatus, TraceEntry};
use crate::objective::Form;
use crate::separability::{Classification, OrderSummary, Verdict, WitnessCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

impl MatrixRecord {
    pub fn from_op(x: &HermitianOperator) -> Self {
        let m = x.matrix();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            dims: Some(x.dims().factor_dims().to_vec()),
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    /// Resolve the tensor structure: the record's own `dims`, an override, or
    /// a single factor. Both present must agree.
    fn resolve_dims(&self, dims: Option<&DimsSpec>) -> Result<DimsSpec> {
        match (&self.dims, dims) {
            (Some(own), Some(given)) => {
                if own.as_slice() != given.factor_dims() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{:?}", given.factor_dims()),
                        found: format!("{own:?}"),
                    });
                }
                Ok(given.clone())
            }
            (Some(own), None) => DimsSpec::new(own.clone()),
            (None, Some(given)) => Ok(given.clone()),
            (None, None) => DimsSpec::new(vec![self.re.len()]),
        }
    }

    fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        let n = self.re.len();
        if n == 0 {
            return Err(Error::Format("empty matrix".into()));
        }
        let has_im = !self.im.is_empty();
        if has_im && self.im.len() != n {
            return Err(Error::Format(format!("'im' has {} rows, 're' has {n}", self.im.len())));
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            if self.re[i].len() != n {
                return Err(Error::Format(format!("row {i} of 're' has {} entries, expected {n}", self.re[i].len())));
            }
            if has_im && self.im[i].len() != n {
                return Err(Error::Format(format!("row {i} of 'im' has {} entries, expected {n}", self.im[i].len())));
            }
            for j in 0..n {
                let im = if has_im { self.im[i][j] } else { 0.0 };
                if !self.re[i][j].is_finite() || !im.is_finite() {
                    return Err(Error::Format(format!("entry ({i}, {j}) is not finite")));
                }
                m[(i, j)] = Complex64::new(self.re[i][j], im);
            }
        }
        Ok(m)
    }

    /// Hermitian operator, rejecting non-Hermitian input.
    pub fn to_op(&self, dims: Option<&DimsSpec>) -> Result<HermitianOperator> {
        let dims = self.resolve_dims(dims)?;
        HermitianOperator::new_checked(dims, self.to_matrix()?)
    }

    /// Density operator, rejecting input that is not Hermitian, not unit
    /// trace or not positive semidefinite.
    pub fn to_density(&self, dims: Option<&DimsSpec>) -> Result<DensityOperator> {
        DensityOperator::new(self.to_op(dims)?)
    }
}

pub fn parse_density(json: &str, dims: Option<&DimsSpec>) -> Result<DensityOperator> {
    let rec: MatrixRecord = serde_json::from_str(json)?;
    rec.to_density(dims)
}

pub fn read_density(path: &Path, dims: Option<&DimsSpec>) -> Result<DensityOperator> {
    parse_density(&std::fs::read_to_string(path)?, dims)
}

pub fn read_operator(path: &Path, dims: Option<&DimsSpec>) -> Result<HermitianOperator> {
    let rec: MatrixRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    rec.to_op(dims)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn write_measure(path: &Path, measure: &MeasureApprox) -> Result<()> {
    write_json(path, &measure.to_record())
}

pub fn read_measure(path: &Path) -> Result<MeasureApprox> {
    let rec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    MeasureApprox::from_record(rec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRecord {
    pub form: Form,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub norm: f64,
    #[serde(flatten)]
    pub status: SolveStatus,
}

impl From<&MinimizeReport> for SolveRecord {
    fn from(r: &MinimizeReport) -> Self {
        Self {
            form: r.form,
            value: r.value,
            grad_norm: r.grad_norm,
            iters: r.iters,
            norm: r.norm(),
            status: r.status.clone(),
        }
    }
}

/// Product vector per factor, as re/im arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ProductProjector> for ProductRecord {
    fn from(p: &ProductProjector) -> Self {
        Self {
            re: p.vectors().iter().map(|v| v.iter().map(|z| z.re).collect()).collect(),
            im: p.vectors().iter().map(|v| v.iter().map(|z| z.im).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub direction: MatrixRecord,
    pub margin_state: f64,
    pub margin_products: f64,
    pub gap: f64,
    pub certified: bool,
    pub maximizer: ProductRecord,
}

impl From<&WitnessCandidate> for WitnessRecord {
    fn from(w: &WitnessCandidate) -> Self {
        Self {
            direction: MatrixRecord::from_op(&w.direction),
            margin_state: w.margin_state,
            margin_products: w.margin_products,
            gap: w.gap(),
            certified: w.certified(),
            maximizer: (&w.maximizer).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub verdict: Verdict,
    pub trajectory: Vec<OrderSummary>,
    pub exp_solve: Option<SolveRecord>,
    pub limit: Option<MatrixRecord>,
    pub reconstruction_error: Option<f64>,
    pub witness: Option<WitnessRecord>,
    pub notes: Vec<String>,
}

impl From<&Classification> for ClassificationRecord {
    fn from(c: &Classification) -> Self {
        Self {
            verdict: c.verdict,
            trajectory: c.sequence.clone(),
            exp_solve: c.exp_solve.as_ref().map(SolveRecord::from),
            limit: c.limit.as_ref().map(MatrixRecord::from_op),
            reconstruction_error: c.reconstruction_error,
            witness: c.witness.as_ref().map(WitnessRecord::from),
            notes: c.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinatesRecord {
    pub b: MatrixRecord,
    pub measure_ref: String,
    pub solve: SolveRecord,
    pub entropy: f64,
}

impl CoordinatesRecord {
    pub fn new(c: &HusimiCoordinates, entropy: f64) -> Self {
        Self {
            b: MatrixRecord::from_op(&c.b),
            measure_ref: c.measure_ref.clone(),
            solve: (&c.solve).into(),
            entropy,
        }
    }
}

/// Plot-ready `k,norm,value` rows.
pub fn trajectory_csv(sequence: &[OrderSummary]) -> String {
    let mut s = String::from("k,norm,value\n");
    for o in sequence {
        let _ = writeln!(s, "{},{},{}", o.order, o.norm, o.value);
    }
    s
}

#[derive(Serialize)]
struct TraceLine<'a> {
    solve: &'a str,
    #[serde(flatten)]
    entry: &'a TraceEntry,
}

/// One JSON object per accepted iteration, tagged with the solve label.
pub fn trace_jsonl(solves: &[(String, &MinimizeReport)]) -> Result<String> {
    let mut s = String::new();
    for (label, r) in solves {
        for entry in &r.trace {
            s.push_str(&serde_json::to_string(&TraceLine { solve: label, entry })?);
            s.push('\n');
        }
    }
    Ok(s)
}
