//! Implementations of the six subcommands.
//!
//! Grid work is dispatched to the rayon pool and re-assembled in grid order,
//! so parallelism never changes the output. Solver failures on individual
//! grid points become rows with zero entropy and an explicit status; they
//! abort nothing.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use seqrand_core::bell::{bell_values, boundary_residuals, pironio_hmin, s_theta_of};
use seqrand_core::npa::{
    build_chsh_guessing_problem, build_guessing_problem, certify_guessing,
    protocol_min_entropy, table_min_entropy, GuessingConstraintMode, MinEntropyCertificate,
    NpaError,
};
use seqrand_core::protocol::{chsh_reference, correlations_kraus, ProtocolParams};
use seqrand_core::scenario::{CorrelationTable, TABLE_TOL};
use seqrand_core::sdp::{SolveOptions, SolveStatus};

use crate::output::{num, Table};
use crate::{CliError, Format};

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Inaccurate => "inaccurate",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Failed => "failed",
    }
}

fn parse_grid(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| CliError::Input(format!("bad {what} list: {raw:?}")))?;
    if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input(format!("bad {what} list: {raw:?}")));
    }
    Ok(vals)
}

fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    match points {
        0 => Err(CliError::Input("--points must be positive".into())),
        1 => Ok(vec![lo]),
        n => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn theta_grid(arg: Option<&str>, points: usize) -> Result<Vec<f64>, CliError> {
    match arg {
        Some(raw) => parse_grid(raw, "θ"),
        None => uniform_grid(0.0, FRAC_PI_4, points),
    }
}

fn check_epsilon(mode: GuessingConstraintMode) -> Result<(), CliError> {
    let eps = match mode {
        GuessingConstraintMode::FullTable { epsilon } => epsilon,
        GuessingConstraintMode::Summary { epsilon } => epsilon,
    };
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(CliError::Input(format!("epsilon {eps} outside [0, 1)")));
    }
    Ok(())
}

/// A grid-point solve, folded to (bits, status): solver failures become a
/// zero-entropy row instead of aborting the scan, anything else propagates.
fn entropy_or_zero(
    r: Result<MinEntropyCertificate, NpaError>,
) -> Result<(f64, &'static str), CliError> {
    match r {
        Ok(cert) => Ok((cert.min_entropy, status_str(cert.status))),
        Err(NpaError::Solver(_)) => Ok((0.0, "failed")),
        Err(other) => Err(other.into()),
    }
}

pub fn boundary(
    theta_arg: Option<&str>,
    points: usize,
    format: Format,
) -> Result<String, CliError> {
    let grid = theta_grid(theta_arg, points)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &theta in &grid {
        let params = ProtocolParams::ideal(theta);
        params.validate().map_err(|e| CliError::Input(e.to_string()))?;
        let table = correlations_kraus(&params).map_err(|e| CliError::Input(e.to_string()))?;
        let v = bell_values(&table).map_err(|e| CliError::Input(e.to_string()))?;
        let res =
            boundary_residuals(&table, theta).map_err(|e| CliError::Input(e.to_string()))?;
        rows.push(vec![
            num(theta),
            num(v.s1),
            num(v.s2),
            num(v.sc),
            num(s_theta_of(&v, theta)),
            num(res.circle),
        ]);
    }
    let table = Table {
        header: vec!["theta", "s1", "s2", "sc", "s_theta", "circle_residual"],
        rows,
    };
    Ok(table.render(format))
}

pub fn scan_theta(
    theta_arg: Option<&str>,
    points: usize,
    p_arg: &str,
    c: f64,
    mode: GuessingConstraintMode,
    options: &SolveOptions,
    format: Format,
) -> Result<String, CliError> {
    check_epsilon(mode)?;
    let thetas = theta_grid(theta_arg, points)?;
    let ps = parse_grid(p_arg, "p")?;
    let jobs: Vec<(f64, f64)> = ps
        .iter()
        .flat_map(|&p| thetas.iter().map(move |&t| (p, t)))
        .collect();
    let results: Vec<Result<Vec<String>, CliError>> = jobs
        .par_iter()
        .map(|&(p, theta)| {
            let params =
                ProtocolParams::new(theta, p, c).map_err(|e| CliError::Input(e.to_string()))?;
            let (h, status) = entropy_or_zero(protocol_min_entropy(&params, mode, options))?;
            let endpoint = theta.abs() < 1e-12 || (theta - FRAC_PI_4).abs() < 1e-12;
            Ok(vec![
                num(p),
                num(theta),
                (endpoint as u8).to_string(),
                num(h),
                status.to_string(),
            ])
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let table = Table {
        header: vec!["p", "theta", "endpoint", "hmin", "status"],
        rows,
    };
    Ok(table.render(format))
}

/// Golden-section maximization of a unimodal scan, fixed iteration count for
/// determinism. Returns the best (argument, value, status) probed.
fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64, &'static str)
where
    F: FnMut(f64) -> (f64, &'static str),
{
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut best = (a, f64::NEG_INFINITY, "failed");
    let track = |t: f64, out: (f64, &'static str), best: &mut (f64, f64, &'static str)| {
        if out.0 > best.1 {
            *best = (t, out.0, out.1);
        }
        out.0
    };
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = track(c, f(c), &mut best);
    let mut fd = track(d, f(d), &mut best);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = track(c, f(c), &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = track(d, f(d), &mut best);
        }
    }
    best
}

pub fn scan_noise(
    p_arg: Option<&str>,
    points: usize,
    c: f64,
    mode: GuessingConstraintMode,
    options: &SolveOptions,
    format: Format,
) -> Result<String, CliError> {
    check_epsilon(mode)?;
    let ps = match p_arg {
        Some(raw) => parse_grid(raw, "p")?,
        None => uniform_grid(0.0, 0.1, points)?,
    };
    // Away from the endpoints, where the certificate drops discontinuously.
    let (lo, hi) = (0.05, FRAC_PI_4 - 0.05);
    let results: Vec<Result<Vec<String>, CliError>> = ps
        .par_iter()
        .map(|&p| {
            let mut bad_input: Option<CliError> = None;
            let eval = |theta: f64| -> (f64, &'static str) {
                let params = match ProtocolParams::new(theta, p, c) {
                    Ok(ps) => ps,
                    Err(e) => {
                        bad_input = Some(CliError::Input(e.to_string()));
                        return (f64::NEG_INFINITY, "failed");
                    }
                };
                match protocol_min_entropy(&params, mode, options) {
                    Ok(cert) => (cert.min_entropy, status_str(cert.status)),
                    Err(_) => (f64::NEG_INFINITY, "failed"),
                }
            };
            let (best_theta, best_h, seq_status) = golden_max(eval, lo, hi, 16);
            if let Some(e) = bad_input {
                return Err(e);
            }
            let s_model = chsh_reference(p, c).map_err(|e| CliError::Input(e.to_string()))?;
            let analytic =
                pironio_hmin(s_model).map_err(|e| CliError::Input(e.to_string()))?;
            let (problem, _) = build_chsh_guessing_problem(s_model, 2)?;
            let (chsh_l2, chsh_status) = entropy_or_zero(certify_guessing(&problem, options))?;
            let status = if seq_status == "failed" || chsh_status == "failed" {
                "failed"
            } else {
                seq_status
            };
            let (best_theta, best_h) = if best_h.is_finite() {
                (best_theta, best_h)
            } else {
                (0.0, 0.0)
            };
            Ok(vec![
                num(p),
                num(best_theta),
                num(best_h),
                num(analytic),
                num(chsh_l2),
                status.to_string(),
            ])
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let table = Table {
        header: vec![
            "p",
            "best_theta",
            "hmin_sequential",
            "hmin_chsh_analytic",
            "hmin_chsh_level2",
            "status",
        ],
        rows,
    };
    Ok(table.render(format))
}

/// The three reference experiment parameter sets (strength, depolarization,
/// decoherence).
const EXPERIMENTS: [(u32, f64, f64, f64); 3] = [
    (1, 0.412, 0.019, 0.017),
    (2, 0.436, 0.016, 0.012),
    (3, 0.436, 0.015, 0.012),
];

pub fn tables(
    epsilon: f64,
    options: &SolveOptions,
    format: Format,
) -> Result<String, CliError> {
    let mode = GuessingConstraintMode::Summary { epsilon };
    check_epsilon(mode)?;
    let results: Vec<Result<Vec<String>, CliError>> = EXPERIMENTS
        .par_iter()
        .map(|&(id, theta, p, c)| {
            let params =
                ProtocolParams::new(theta, p, c).map_err(|e| CliError::Input(e.to_string()))?;
            let table =
                correlations_kraus(&params).map_err(|e| CliError::Input(e.to_string()))?;
            let v = bell_values(&table).map_err(|e| CliError::Input(e.to_string()))?;
            let (h, status) = entropy_or_zero(table_min_entropy(&table, 0, 1, mode, options))?;
            let s_model = chsh_reference(p, c).map_err(|e| CliError::Input(e.to_string()))?;
            let analytic =
                pironio_hmin(s_model).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(vec![
                id.to_string(),
                num(theta),
                num(p),
                num(c),
                num(v.s1),
                num(v.s2),
                num(v.sc),
                num(h),
                status.to_string(),
                num(s_model),
                num(analytic),
            ])
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let table = Table {
        header: vec![
            "id",
            "theta",
            "p",
            "c",
            "s1",
            "s2",
            "sc",
            "hmin_summary",
            "status",
            "chsh_model",
            "hmin_chsh_analytic",
        ],
        rows,
    };
    Ok(table.render(format))
}

fn read_table(path: &Path) -> Result<CorrelationTable, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CheckReport {
    max_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst: Option<String>,
    pass: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    tolerance: f64,
    no_signaling: CheckReport,
    sequentiality: CheckReport,
    pass: bool,
}

/// Returns the rendered report; `Err(CliError::Validation)` when a check
/// fails (after the caller has written the report).
pub fn validate(path: &Path, format: Format) -> Result<(String, bool), CliError> {
    let table = read_table(path)?;
    let ns = table.validate_no_signaling();
    let seq = table.validate_sequentiality();
    let pass = ns.passes(TABLE_TOL) && seq.passes(TABLE_TOL);
    let report = ValidateReport {
        tolerance: TABLE_TOL,
        no_signaling: CheckReport {
            max_violation: ns.max_violation(),
            worst: (!ns.passes(TABLE_TOL)).then(|| ns.worst_description().to_string()),
            pass: ns.passes(TABLE_TOL),
        },
        sequentiality: CheckReport {
            max_violation: seq.max_violation(),
            worst: None,
            pass: seq.passes(TABLE_TOL),
        },
        pass,
    };
    let rendered = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serialization");
            s.push('\n');
            s
        }
        Format::Csv => Table {
            header: vec!["check", "max_violation", "pass"],
            rows: vec![
                vec![
                    "no_signaling".into(),
                    num(report.no_signaling.max_violation),
                    report.no_signaling.pass.to_string(),
                ],
                vec![
                    "sequentiality".into(),
                    num(report.sequentiality.max_violation),
                    report.sequentiality.pass.to_string(),
                ],
            ],
        }
        .to_csv(),
    };
    Ok((rendered, pass))
}

#[derive(Serialize)]
struct EntropyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<String>,
    mode: &'static str,
    epsilon: f64,
    y1: u8,
    y2: u8,
    guessing_probability: f64,
    min_entropy_bits: f64,
    status: &'static str,
    iterations: usize,
    duality_gap: f64,
    constraint_excess: f64,
    min_block_eigenvalue: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn minentropy(
    theta: Option<f64>,
    p: f64,
    c: f64,
    table_path: Option<&Path>,
    mode: GuessingConstraintMode,
    dump_sdp: Option<&Path>,
    options: &SolveOptions,
    format: Format,
) -> Result<String, CliError> {
    check_epsilon(mode)?;
    let table = match (table_path, theta) {
        (Some(path), _) => read_table(path)?,
        (None, Some(theta)) => {
            let params =
                ProtocolParams::new(theta, p, c).map_err(|e| CliError::Input(e.to_string()))?;
            correlations_kraus(&params).map_err(|e| CliError::Input(e.to_string()))?
        }
        (None, None) => {
            return Err(CliError::Input("need either --theta or --table".into()));
        }
    };
    let (problem, _) = build_guessing_problem(&table, 0, 1, mode)?;
    if let Some(path) = dump_sdp {
        let mut s = serde_json::to_string_pretty(&problem).expect("problem serialization");
        s.push('\n');
        std::fs::write(path, s)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    let cert = certify_guessing(&problem, options)?;
    let (mode_name, epsilon) = match mode {
        GuessingConstraintMode::FullTable { epsilon } => ("full-table", epsilon),
        GuessingConstraintMode::Summary { epsilon } => ("summary", epsilon),
    };
    let report = EntropyReport {
        theta: table_path.is_none().then_some(theta.unwrap_or_default()),
        p: table_path.is_none().then_some(p),
        c: table_path.is_none().then_some(c),
        table: table_path.map(|pb| pb.display().to_string()),
        mode: mode_name,
        epsilon,
        y1: 0,
        y2: 1,
        guessing_probability: cert.guessing_probability,
        min_entropy_bits: cert.min_entropy,
        status: status_str(cert.status),
        iterations: cert.iterations,
        duality_gap: cert.duality_gap,
        constraint_excess: cert.constraint_excess,
        min_block_eigenvalue: cert.min_block_eigenvalue,
    };
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serialization");
            s.push('\n');
            s
        }
        Format::Csv => Table {
            header: vec![
                "guessing_probability",
                "min_entropy_bits",
                "status",
                "iterations",
                "duality_gap",
                "constraint_excess",
                "min_block_eigenvalue",
            ],
            rows: vec![vec![
                num(report.guessing_probability),
                num(report.min_entropy_bits),
                report.status.to_string(),
                report.iterations.to_string(),
                num(report.duality_gap),
                num(report.constraint_excess),
                num(report.min_block_eigenvalue),
            ]],
        }
        .to_csv(),
    })
}
