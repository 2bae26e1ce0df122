use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use husep::husimi::{diffeo_check, entropy_diagnostic, from_coordinates, to_coordinates};
use husep::io::{self, ClassificationRecord, CoordinatesRecord, MatrixRecord, WitnessRecord};
use husep::linalg::{DensityOperator, DimsSpec};
use husep::measure::{make_state, MeasureApprox, MeasureKind, StateFamily};
use husep::minimizer::{MinimizeReport, SolverConfig};
use husep::objective::DENSE_HESSIAN_MAX_DIM;
use husep::selftest::{self, SelftestConfig};
use husep::separability::{
    classify_with_measure, ppt_oracle, ClassifierConfig, Classification, MeasureSettings, PptResult, Verdict,
};
use husep::{par, Error, Result};
use serde::Serialize;

use crate::{Common, MeasureArg};

const TOOL: &str = "husep";
const RECHECK_SAMPLES: usize = 10_000;
const COORDINATE_DESIGN_STRENGTH: usize = 4;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Range { .. } => 4,
        Error::NotHermitian { .. }
        | Error::TraceNotOne { .. }
        | Error::NegativeEigenvalue { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidDims(_)
        | Error::IndexOutOfRange { .. }
        | Error::InvalidParameter(_)
        | Error::Format(_)
        | Error::Json(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    input: Option<String>,
    dims: Vec<usize>,
    seed: u64,
    measure: MeasureSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    classifier: Option<ClassifierConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

#[derive(Debug, Serialize)]
struct MeasureInfo {
    label: String,
    kind: MeasureKind,
    points: usize,
    moment_error: Option<f64>,
}

impl From<&MeasureApprox> for MeasureInfo {
    fn from(m: &MeasureApprox) -> Self {
        Self {
            label: m.label(),
            kind: m.kind(),
            points: m.len(),
            moment_error: m.moment_error(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    measure: MeasureInfo,
    result: T,
}

fn emit<T: Serialize>(cfg: &RunConfig, measure: &MeasureApprox, output: Option<&Path>, result: T) -> Result<()> {
    let report = Report {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        measure: measure.into(),
        result,
    };
    match output {
        Some(path) => io::write_json(path, &report),
        None => {
            std::io::stdout().write_all(io::to_json(&report)?.as_bytes())?;
            Ok(())
        }
    }
}

fn dims_arg(c: &Common) -> Result<Option<DimsSpec>> {
    c.dims.clone().map(DimsSpec::new).transpose()
}

fn input_path(c: &Common) -> Result<&Path> {
    c.input
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--input is required for this command".into()))
}

fn load_state(c: &Common) -> Result<DensityOperator> {
    io::read_density(input_path(c)?, dims_arg(c)?.as_ref())
}

fn solver(c: &Common) -> SolverConfig {
    let mut s = SolverConfig::default();
    if let Some(t) = c.grad_tol {
        s.grad_tol = t;
    }
    s
}

fn measure_settings(c: &Common, default: MeasureArg, default_strength: usize) -> MeasureSettings {
    match c.measure.unwrap_or(default) {
        MeasureArg::Mc => MeasureSettings::MonteCarlo {
            samples: c.samples,
            seed: c.seed,
        },
        MeasureArg::Design => MeasureSettings::Design {
            strength: c.design_strength.unwrap_or(default_strength),
        },
    }
}

fn classifier(c: &Common) -> ClassifierConfig {
    let mut cfg = ClassifierConfig::default();
    if let Some(orders) = &c.orders {
        cfg.orders = orders.clone();
    }
    if let Some(b) = c.bound_threshold {
        cfg.bound_threshold = b;
    }
    let top = cfg.orders.iter().copied().max().unwrap_or(1) as usize;
    cfg.measure = measure_settings(c, MeasureArg::Mc, 2 * top);
    cfg.solver = solver(c);
    cfg
}

fn run_config(command: &'static str, c: &Common, dims: &DimsSpec, measure: MeasureSettings) -> RunConfig {
    RunConfig {
        command,
        input: c.input.as_ref().map(|p| p.display().to_string()),
        dims: dims.factor_dims().to_vec(),
        seed: c.seed,
        measure,
        classifier: None,
        solver: None,
        grid: None,
    }
}

fn write_trace(path: Option<&Path>, solves: &[(String, &MinimizeReport)]) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, io::trace_jsonl(solves)?)?;
    }
    Ok(())
}

fn classification_trace(c: &Classification) -> Vec<(String, &MinimizeReport)> {
    let mut v: Vec<(String, &MinimizeReport)> =
        c.sequence.iter().zip(&c.solves).map(|(o, r)| (format!("G_{}", o.order), r)).collect();
    if let Some(e) = &c.exp_solve {
        v.push(("G".into(), e));
    }
    v
}

#[derive(Debug, Serialize)]
struct ClassifyResult {
    #[serde(flatten)]
    classification: ClassificationRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    ppt: Option<PptResult>,
}

fn run_classifier(command: &'static str, c: &Common) -> Result<(RunConfig, MeasureApprox, DensityOperator, Classification)> {
    let rho = load_state(c)?;
    let cls_cfg = classifier(c);
    cls_cfg.validate()?;
    let measure = cls_cfg.measure.build(rho.dims())?;
    let mut cfg = run_config(command, c, rho.dims(), cls_cfg.measure);
    let result = classify_with_measure(&rho, &measure, &cls_cfg)?;
    cfg.classifier = Some(cls_cfg);
    write_trace(c.trace.as_deref(), &classification_trace(&result))?;
    if let Some(p) = &c.csv {
        std::fs::write(p, io::trajectory_csv(&result.sequence))?;
    }
    Ok((cfg, measure, rho, result))
}

fn ppt_if_bipartite(rho: &DensityOperator) -> Result<Option<PptResult>> {
    if rho.dims().num_factors() == 2 {
        ppt_oracle(rho).map(Some)
    } else {
        Ok(None)
    }
}

pub fn classify(c: &Common) -> Result<ExitCode> {
    let (cfg, measure, rho, result) = run_classifier("classify", c)?;
    let verdict = result.verdict;
    let out = ClassifyResult {
        classification: (&result).into(),
        ppt: ppt_if_bipartite(&rho)?,
    };
    emit(&cfg, &measure, c.output.as_deref(), out)?;
    eprintln!("verdict: {verdict:?}");
    Ok(if verdict == Verdict::Inconclusive { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

#[derive(Debug, Serialize)]
struct WitnessResult {
    verdict: Verdict,
    witness: Option<WitnessRecord>,
    /// Largest product pairing on an independent Monte Carlo measure.
    recheck_max_products: Option<f64>,
    recheck_seed: u64,
    recheck_holds: Option<bool>,
    notes: Vec<String>,
}

pub fn witness(c: &Common) -> Result<ExitCode> {
    let (cfg, measure, rho, result) = run_classifier("witness", c)?;
    let recheck_seed = c.seed.wrapping_add(1);
    let mut recheck = None;
    if let Some(w) = result.witness.as_ref().filter(|w| w.certified()) {
        let fresh = husep::measure::sample_haar(rho.dims(), RECHECK_SAMPLES, recheck_seed)?;
        recheck = Some(w.recheck(&fresh)?);
    }
    let holds = recheck.zip(result.witness.as_ref()).map(|(r, w)| r < w.margin_state);
    let out = WitnessResult {
        verdict: result.verdict,
        witness: result.witness.as_ref().map(WitnessRecord::from),
        recheck_max_products: recheck,
        recheck_seed,
        recheck_holds: holds,
        notes: result.notes.clone(),
    };
    emit(&cfg, &measure, c.output.as_deref(), out)?;
    if holds == Some(true) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("no certified witness (verdict {:?})", result.verdict);
        Ok(ExitCode::from(1))
    }
}

pub fn coordinatize(c: &Common) -> Result<ExitCode> {
    let rho = load_state(c)?;
    let settings = measure_settings(c, MeasureArg::Design, COORDINATE_DESIGN_STRENGTH);
    let measure = settings.build(rho.dims())?;
    let mut cfg = run_config("coordinatize", c, rho.dims(), settings);
    let solver = solver(c);
    solver.validate()?;
    cfg.solver = Some(solver.clone());
    let coords = to_coordinates(&rho, &measure, &solver)?;
    write_trace(c.trace.as_deref(), &[("G".into(), &coords.solve)])?;
    let entropy = entropy_diagnostic(&coords.b, &measure)?;
    emit(&cfg, &measure, c.output.as_deref(), CoordinatesRecord::new(&coords, entropy))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct ReconstructResult {
    state: MatrixRecord,
    entropy: f64,
    /// Smallest eigenvalue of d²W on traceless directions (small systems only).
    diffeo_min_eigenvalue: Option<f64>,
}

pub fn reconstruct(c: &Common) -> Result<ExitCode> {
    let b = io::read_operator(input_path(c)?, dims_arg(c)?.as_ref())?;
    let settings = measure_settings(c, MeasureArg::Design, COORDINATE_DESIGN_STRENGTH);
    let measure = settings.build(b.dims())?;
    let cfg = run_config("reconstruct", c, b.dims(), settings);
    let state = from_coordinates(&b, &measure)?;
    let b0 = b.traceless_part();
    let out = ReconstructResult {
        state: MatrixRecord::from_op(state.op()),
        entropy: entropy_diagnostic(&b0, &measure)?,
        diffeo_min_eigenvalue: if b.total_dim() <= DENSE_HESSIAN_MAX_DIM {
            Some(diffeo_check(&b0, &measure)?)
        } else {
            None
        },
    };
    emit(&cfg, &measure, c.output.as_deref(), out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    p: f64,
    verdict: Verdict,
    ppt: bool,
    final_norm: f64,
    witness_gap: Option<f64>,
}

pub fn werner_sweep(grid: usize, c: &Common) -> Result<ExitCode> {
    if grid < 2 {
        return Err(Error::InvalidParameter(format!("--grid must be at least 2, got {grid}")));
    }
    let dims = DimsSpec::qubits(2);
    if let Some(d) = dims_arg(c)? {
        if d != dims {
            return Err(Error::InvalidParameter("Werner states are defined on dims 2,2".into()));
        }
    }
    let cls_cfg = classifier(c);
    cls_cfg.validate()?;
    let measure = cls_cfg.measure.build(&dims)?;
    let mut cfg = run_config("werner-sweep", c, &dims, cls_cfg.measure);
    cfg.grid = Some(grid);
    let rows = par::map_indices(grid, |i| -> Result<SweepRow> {
        let p = i as f64 / (grid - 1) as f64;
        let rho = make_state(StateFamily::Werner { p }, &dims)?;
        let r = classify_with_measure(&rho, &measure, &cls_cfg)?;
        Ok(SweepRow {
            p,
            verdict: r.verdict,
            ppt: ppt_oracle(&rho)?.ppt,
            final_norm: r.sequence.last().map_or(0.0, |o| o.norm),
            witness_gap: r.witness.as_ref().map(|w| w.gap()),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    cfg.classifier = Some(cls_cfg);

    let mut csv = String::from("p,verdict,ppt,final_norm,witness_gap\n");
    for r in &rows {
        let gap = r.witness_gap.map(|g| g.to_string()).unwrap_or_default();
        let verdict = serde_json::to_value(r.verdict)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.p,
            verdict.as_str().unwrap_or_default(),
            r.ppt,
            r.final_norm,
            gap
        ));
    }
    match &c.csv {
        Some(p) => std::fs::write(p, &csv)?,
        None => eprint!("{csv}"),
    }
    emit(&cfg, &measure, c.output.as_deref(), rows)?;
    Ok(ExitCode::SUCCESS)
}

pub fn selftest(seed: u64, output: Option<&Path>, corrupt_design_weights: bool) -> Result<ExitCode> {
    let report = selftest::run(&SelftestConfig {
        seed,
        corrupt_design_weights,
    });
    print!("{}", report.table());
    if let Some(p) = output {
        io::write_json(p, &report)?;
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
