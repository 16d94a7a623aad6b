//! The `jetspray` command line.
//!
//! Every command reads a spray config (see [`crate::spray::config`]) and
//! writes CSV or JSON to `--output` or stdout. Residual checks are printed
//! to stderr; a failed check gives exit status 2, bad input exit status 1.

pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::bundle::BundlePoint;
use crate::error::GeomError;
use crate::flow::{self, GeodesicRecord};
use crate::jacobi::{self, ChartOptions, JacobiTensor, ParallelFrame};
use crate::spray::Semispray;
use crate::variation::{self, GeodesicVariation, Stencil};

use config::{load_spray, parse_indices, parse_list, parse_matrix, parse_rect, parse_window, Thresholds};
use output::{matrix_header, matrix_row, matrix_rows, report, write_json, write_output, Format};

const COLUMNS_HELP: &str = "\
CSV columns:
  geodesic      t, pos[m][i]..., vel[m][i]...   (m = block mask 0..2^r, i = component)
  lift          acc[m][i]...
  variation     same layout as geodesic, for the derived curve of order len(indices)
  reconstruct   r, eps, t0, t1, step, residual
  jacobi tensor t, J[i][j]..., DJ[i][j]..., det   (J, ∇J in the parallel frame {c', e_a}; det of the e-block)
  riccati       t, L[i][j]..., A[i][j]..., trace   (transverse blocks of L = ∇J J⁻¹ and of the shape operator)
  chart         t, s[a]..., x[i]...
  verify        check, status, residual, threshold, seconds

Exit status: 0 success, 1 input error, 2 residual check failed (output is still written).
JETSPRAY_THREADS caps the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "jetspray", version, about = "Lifted semisprays, geodesic variations and Jacobi tensors", after_help = COLUMNS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a geodesic of the lifted semispray S^(r).
    Geodesic(GeodesicArgs),
    /// Evaluate the acceleration of S^(r) at one state.
    Lift(LiftArgs),
    /// Mixed parameter derivative of a geodesic variation, checked against S^(r).
    Variation(VariationArgs),
    /// Build a variation from a recorded S^(r) geodesic and report the round trip.
    Reconstruct(ReconstructArgs),
    /// Jacobi tensors along a geodesic.
    #[command(subcommand)]
    Jacobi(JacobiCommand),
    /// Same as `jacobi riccati`.
    Riccati(JacobiArgs),
    /// Same as `jacobi chart`.
    Chart(JacobiArgs),
    /// Run the property suite against a spray.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum JacobiCommand {
    /// Integrate J with J(t0) = J0, ∇J(t0) = J0p.
    Tensor(JacobiArgs),
    /// Riccati operator ∇J J⁻¹ and the shape operator of the associated variation.
    Riccati(JacobiArgs),
    /// Pre-semigeodesic chart from an invertible Jacobi tensor.
    Chart(JacobiArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Spray config (JSON).
    #[arg(long)]
    pub spray: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Override a residual threshold, e.g. `variation.forward_r2=1e-2`.
    #[arg(long, value_name = "KEY=VALUE")]
    pub threshold: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Span {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = flow::DEFAULT_STEP)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct Start {
    /// Initial position: n base components, or all 2^r·n blocks in mask order.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Initial velocity, same layout as --x0; defaults to e_1.
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<String>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[command(flatten)]
    pub start: Start,
    #[command(flatten)]
    pub span: Span,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[command(flatten)]
    pub start: Start,
}

#[derive(Debug, Args)]
pub struct VariationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of variation parameters.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Parameters to differentiate along, e.g. `1,2`.
    #[arg(long, default_value = "1")]
    pub indices: String,
    #[arg(long, default_value_t = variation::DEFAULT_HS)]
    pub hs: f64,
    /// Half-width of the parameter box.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Plain central differences without the Richardson step.
    #[arg(long)]
    pub no_richardson: bool,
    /// Position offsets per parameter, k rows of n (default e_a).
    #[arg(long, allow_hyphen_values = true)]
    pub dx: Option<String>,
    /// Velocity offsets per parameter, k rows of n (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub dv: Option<String>,
    #[command(flatten)]
    pub start: Start,
    #[command(flatten)]
    pub span: Span,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    /// Geodesic record written by `geodesic` (CSV or JSON).
    #[arg(long)]
    pub geodesic: PathBuf,
    #[arg(long, default_value_t = variation::DEFAULT_HS)]
    pub hs: f64,
}

#[derive(Debug, Args)]
pub struct JacobiArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub start: Start,
    #[command(flatten)]
    pub span: Span,
    /// J(t0) in chart components (default 0).
    #[arg(long = "J0", allow_hyphen_values = true)]
    pub j0: Option<String>,
    /// ∇J(t0) in chart components (default the projector onto W along c').
    #[arg(long = "J0p", allow_hyphen_values = true)]
    pub j0p: Option<String>,
    /// Time window `a,b`; required for riccati and chart.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Variation width (riccati) or first chart width (chart).
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed for the sampled checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report wall-clock seconds per check (otherwise null, keeping output byte-stable).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    /// Names of the failed checks.
    Residual(Vec<String>),
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Residual(_) => 2,
        }
    }
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Input(msg) => eprintln!("error: {msg}"),
                CliError::Residual(names) => eprintln!("failed: {}", names.join(", ")),
            }
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Geodesic(a) => geodesic(a),
        Command::Lift(a) => lift(a),
        Command::Variation(a) => run_variation(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Jacobi(JacobiCommand::Tensor(a)) => tensor(a),
        Command::Jacobi(JacobiCommand::Riccati(a)) | Command::Riccati(a) => riccati(a),
        Command::Jacobi(JacobiCommand::Chart(a)) | Command::Chart(a) => chart(a),
        Command::Verify(a) => verify::run(a),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("JETSPRAY_THREADS") else {
        return Ok(());
    };
    let threads = v
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("JETSPRAY_THREADS must be a positive integer, got `{v}`")))?;
    // a pool may already exist when running inside a test harness
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn check_span(span: &Span) -> Result<(), CliError> {
    if !(span.step > 0.0) || !(span.t1 > span.t0) {
        return Err(CliError::Input(format!(
            "need t0 < t1 and step > 0, got t0 = {}, t1 = {}, step = {}",
            span.t0, span.t1, span.step
        )));
    }
    Ok(())
}

fn start_point(start: &Start, n: usize, r: usize) -> Result<(BundlePoint, BundlePoint), CliError> {
    let parse = |v: &Option<String>| v.as_deref().map(parse_list).transpose();
    let (x, v) = (parse(&start.x0)?, parse(&start.v0)?);
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let pos = config::bundle_values(x.as_deref(), n, r, &vec![0.0; n])?;
    let vel = config::bundle_values(v.as_deref(), n, r, &e1)?;
    Ok((BundlePoint::new(n, r, pos)?, BundlePoint::new(n, r, vel)?))
}

/// Compare against the named threshold, print the line, and collect failures.
fn gate(thresholds: &Thresholds, failed: &mut Vec<String>, key: &str, residual: f64) {
    let pass = thresholds.passes(key, residual);
    report(key, residual, thresholds.get(key), pass);
    if !pass {
        failed.push(key.to_string());
    }
}

fn finish(failed: Vec<String>) -> Result<(), CliError> {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Residual(failed))
    }
}

fn write_record(common: &Common, g: &GeodesicRecord) -> Result<(), CliError> {
    write_output(common.output.as_deref(), |w| match common.format.unwrap_or(Format::Csv) {
        Format::Csv => g.write_csv(w),
        Format::Json => write_json(w, g),
    })
}

fn geodesic(a: GeodesicArgs) -> Result<(), CliError> {
    let spray = load_spray(&a.common.spray)?;
    Thresholds::with_overrides(&a.common.threshold)?;
    check_span(&a.span)?;
    let (pos, vel) = start_point(&a.start, spray.dim(), a.r)?;
    let g = flow::integrate_geodesic(&spray, a.r, (&pos, &vel), (a.span.t0, a.span.t1), a.span.step)?;
    if let Some(reason) = &g.exit {
        eprintln!("warning: stopped at t = {}: {reason}", g.t_grid[g.len() - 1]);
    }
    write_record(&a.common, &g)
}

fn lift(a: LiftArgs) -> Result<(), CliError> {
    let spray = load_spray(&a.common.spray)?;
    Thresholds::with_overrides(&a.common.threshold)?;
    let (pos, vel) = start_point(&a.start, spray.dim(), a.r)?;
    let acc = spray.lifted_rhs(a.r, &pos, &vel)?;
    #[derive(Serialize)]
    struct Lifted<'a> {
        r: usize,
        pos: &'a BundlePoint,
        vel: &'a BundlePoint,
        acceleration: &'a BundlePoint,
    }
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let n = acc.dim();
            let header: Vec<String> = (0..acc.block_count())
                .flat_map(|m| (0..n).map(move |i| format!("acc[{m}][{i}]")))
                .collect();
            writeln!(w, "{}", header.join(","))?;
            let row: Vec<String> = acc.as_slice().iter().map(f64::to_string).collect();
            writeln!(w, "{}", row.join(","))
        }
        Format::Json => write_json(
            w,
            &Lifted {
                r: a.r,
                pos: &pos,
                vel: &vel,
                acceleration: &acc,
            },
        ),
    })
}

fn run_variation(a: VariationArgs) -> Result<(), CliError> {
    let spray = load_spray(&a.common.spray)?;
    let thresholds = Thresholds::with_overrides(&a.common.threshold)?;
    check_span(&a.span)?;
    let n = spray.dim();
    let k = a.k;
    if k == 0 {
        return Err(CliError::Input("k must be at least 1".into()));
    }
    if !(a.eps > 0.0) {
        return Err(CliError::Input(format!("eps must be positive, got {}", a.eps)));
    }
    let indices = parse_indices(&a.indices)?;
    let (pos, vel) = start_point(&a.start, n, 0)?;
    let dx = match &a.dx {
        Some(t) => parse_rect(t, k, n)?,
        None => DMatrix::from_fn(k, n, |row, col| if col == row % n { 1.0 } else { 0.0 }),
    };
    let dv = match &a.dv {
        Some(t) => parse_rect(t, k, n)?,
        None => DMatrix::zeros(k, n),
    };
    let (x0, v0) = (pos.as_slice().to_vec(), vel.as_slice().to_vec());
    let init = move |s: &[f64]| {
        let sv = nalgebra::DVector::from_column_slice(s);
        let x = dx.tr_mul(&sv);
        let y = dv.tr_mul(&sv);
        Ok((
            x0.iter().zip(x.iter()).map(|(a, b)| a + b).collect(),
            v0.iter().zip(y.iter()).map(|(a, b)| a + b).collect(),
        ))
    };
    let v = GeodesicVariation::new(spray.clone(), k, a.eps, (a.span.t0, a.span.t1), a.span.step, init);
    let stencil = Stencil {
        hs: a.hs,
        richardson: !a.no_richardson,
    };
    let derived = variation::mixed_derivative_with(&v, &indices, stencil)?;
    write_record(&a.common, &derived.to_record(spray.label()))?;
    let residual = variation::verify_variation_theorem_forward(&v, &indices, stencil)?;
    let key = if indices.len() == 1 {
        "variation.forward_r1"
    } else {
        "variation.forward_r2"
    };
    let mut failed = Vec::new();
    gate(&thresholds, &mut failed, key, residual);
    finish(failed)
}

fn read_record(path: &Path, label: &str) -> Result<GeodesicRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let parsed = if text.trim_start().starts_with('{') {
        GeodesicRecord::from_json(&text)
    } else {
        GeodesicRecord::read_csv(text.as_bytes(), label)
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn reconstruct(a: ReconstructArgs) -> Result<(), CliError> {
    let spray = load_spray(&a.common.spray)?;
    let thresholds = Thresholds::with_overrides(&a.common.threshold)?;
    let g = read_record(&a.geodesic, spray.label())?;
    if g.dim() != spray.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: spray.dim(),
            got: g.dim(),
        }
        .into());
    }
    let v = variation::variation_from_geodesic(&spray, &g)?;
    let residual = variation::round_trip_residual(&v, &g, Stencil { hs: a.hs, richardson: true })?;
    #[derive(Serialize)]
    struct Summary {
        r: usize,
        eps: f64,
        t_span: (f64, f64),
        t_ref: f64,
        step: f64,
        residual: f64,
    }
    let summary = Summary {
        r: g.r,
        eps: v.eps,
        t_span: v.t_span,
        t_ref: v.t_ref,
        step: v.step,
        residual,
    };
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            writeln!(w, "r,eps,t0,t1,step,residual")?;
            writeln!(w, "{},{},{},{},{},{}", summary.r, summary.eps, v.t_span.0, v.t_span.1, v.step, residual)
        }
        Format::Json => write_json(w, &summary),
    })?;
    let mut failed = Vec::new();
    gate(&thresholds, &mut failed, "variation.round_trip", residual);
    finish(failed)
}

struct JacobiSetup {
    frame: ParallelFrame,
    jt: JacobiTensor,
    thresholds: Thresholds,
}

fn jacobi_setup(a: &JacobiArgs) -> Result<JacobiSetup, CliError> {
    let spray: Semispray = load_spray(&a.common.spray)?;
    let thresholds = Thresholds::with_overrides(&a.common.threshold)?;
    check_span(&a.span)?;
    let n = spray.dim();
    let (pos, vel) = start_point(&a.start, n, 0)?;
    let g = flow::integrate_geodesic(&spray, 0, (&pos, &vel), (a.span.t0, a.span.t1), a.span.step)?;
    g.require_complete()?;
    let frame = ParallelFrame::new(&spray, &g)?;
    let j0 = match &a.j0 {
        Some(t) => parse_matrix(t, n)?,
        None => DMatrix::zeros(n, n),
    };
    let j0p = match &a.j0p {
        Some(t) => parse_matrix(t, n)?,
        None => frame.transverse_projector(0),
    };
    let jt = jacobi::integrate_jacobi_tensor(&frame, &j0, &j0p)?;
    Ok(JacobiSetup { frame, jt, thresholds })
}

fn required_window(a: &JacobiArgs) -> Result<(f64, f64), CliError> {
    let text = a
        .window
        .as_deref()
        .ok_or_else(|| CliError::Input("--window a,b is required".into()))?;
    parse_window(text)
}

fn tensor(a: JacobiArgs) -> Result<(), CliError> {
    let JacobiSetup { frame, jt, thresholds } = jacobi_setup(&a)?;
    let window = match &a.window {
        Some(t) => parse_window(t)?,
        None => (a.span.t0, a.span.t1),
    };
    let n = frame.dim();
    let idx = jacobi::window_indices(&jt.j.t_grid, window);
    let rows: Vec<(f64, DMatrix<f64>, DMatrix<f64>, f64)> = idx
        .iter()
        .map(|&k| {
            let t = jt.j.t_grid[k];
            let i = frame.index_of(t)?;
            Ok((
                t,
                frame.to_frame(i, &jt.j.comps[k]),
                frame.to_frame(i, &jt.nabla.comps[k]),
                frame.transverse(i, &jt.j.comps[k]).determinant(),
            ))
        })
        .collect::<Result<_, GeomError>>()?;
    #[derive(Serialize)]
    struct Sample {
        t: f64,
        j: Vec<Vec<f64>>,
        nabla_j: Vec<Vec<f64>>,
        det: f64,
    }
    #[derive(Serialize)]
    struct Out {
        residual: f64,
        samples: Vec<Sample>,
    }
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend(matrix_header("J", n, n));
            header.extend(matrix_header("DJ", n, n));
            header.push("det".into());
            writeln!(w, "{}", header.join(","))?;
            for (t, j, d, det) in &rows {
                let mut row = vec![t.to_string()];
                row.extend(matrix_row(j));
                row.extend(matrix_row(d));
                row.push(det.to_string());
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        }
        Format::Json => write_json(
            w,
            &Out {
                residual: jt.residual,
                samples: rows
                    .iter()
                    .map(|(t, j, d, det)| Sample {
                        t: *t,
                        j: matrix_rows(j),
                        nabla_j: matrix_rows(d),
                        det: *det,
                    })
                    .collect(),
            },
        ),
    })?;
    let tr = jacobi::check_transversality(&jt.j, &frame)?;
    eprintln!("transversal: {} (|J c'| {:e}, off-W image {:e})", tr.transversal, tr.tangent, tr.image);
    let mut failed = Vec::new();
    gate(&thresholds, &mut failed, "jacobi.tensor_residual", jt.residual);
    finish(failed)
}

fn riccati(a: JacobiArgs) -> Result<(), CliError> {
    let JacobiSetup { frame, jt, thresholds } = jacobi_setup(&a)?;
    let window = required_window(&a)?;
    let ric = jacobi::riccati_residual(&jt, &frame, window)?;
    let v = jacobi::variation_from_tensor(&jt, &frame, a.eps)?;
    let shape = jacobi::shape_operator(&v, &frame, window)?;
    let (j1, j2) = jacobi::check_j1_j2(&v, &jt, &frame, window)?;
    let n = frame.dim();
    let rows: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = ric
        .l
        .t_grid
        .iter()
        .zip(&ric.l.comps)
        .zip(&shape.a.comps)
        .map(|((&t, l), am)| {
            let i = frame.index_of(t)?;
            Ok((t, frame.transverse(i, l), frame.transverse(i, am)))
        })
        .collect::<Result<_, GeomError>>()?;
    #[derive(Serialize)]
    struct Sample {
        t: f64,
        l: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        trace: f64,
    }
    #[derive(Serialize)]
    struct Out {
        riccati_residual: f64,
        shape_riccati_residual: f64,
        res_j1: f64,
        res_j2: f64,
        samples: Vec<Sample>,
    }
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend(matrix_header("L", n - 1, n - 1));
            header.extend(matrix_header("A", n - 1, n - 1));
            header.push("trace".into());
            writeln!(w, "{}", header.join(","))?;
            for (t, l, am) in &rows {
                let mut row = vec![t.to_string()];
                row.extend(matrix_row(l));
                row.extend(matrix_row(am));
                row.push(l.trace().to_string());
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        }
        Format::Json => write_json(
            w,
            &Out {
                riccati_residual: ric.residual,
                shape_riccati_residual: shape.riccati_residual,
                res_j1: j1,
                res_j2: j2,
                samples: rows
                    .iter()
                    .map(|(t, l, am)| Sample {
                        t: *t,
                        l: matrix_rows(l),
                        a: matrix_rows(am),
                        trace: l.trace(),
                    })
                    .collect(),
            },
        ),
    })?;
    let mut failed = Vec::new();
    gate(&thresholds, &mut failed, "jacobi.riccati", ric.residual);
    gate(&thresholds, &mut failed, "jacobi.shape_operator_j1", j1);
    gate(&thresholds, &mut failed, "jacobi.liouville_j2", j2);
    finish(failed)
}

fn chart(a: JacobiArgs) -> Result<(), CliError> {
    let JacobiSetup { frame, jt, thresholds } = jacobi_setup(&a)?;
    let window = required_window(&a)?;
    let opts = ChartOptions {
        eps0: a.eps,
        ..ChartOptions::default()
    };
    let c = jacobi::build_chart(&jt, &frame, window, opts)?;
    let m = frame.dim() - 1;
    let levels = [-0.9, -0.45, 0.0, 0.45, 0.9].map(|l| l * c.eps);
    let times: Vec<f64> = (0..opts.t_samples)
        .map(|q| window.0 + (window.1 - window.0) * q as f64 / (opts.t_samples - 1) as f64)
        .map(|t| frame.t_grid()[frame.index_of_nearest(t)])
        .collect();
    let mut samples = Vec::new();
    for &t in &times {
        for code in 0..levels.len().pow(m as u32) {
            let mut rest = code;
            let s: Vec<f64> = (0..m)
                .map(|_| {
                    let l = levels[rest % levels.len()];
                    rest /= levels.len();
                    l
                })
                .collect();
            let x = c.eval(t, &s)?;
            samples.push((t, s, x));
        }
    }
    #[derive(Serialize)]
    struct Sample<'a> {
        t: f64,
        s: &'a [f64],
        x: &'a [f64],
    }
    #[derive(Serialize)]
    struct Out<'a> {
        eps: f64,
        window: (f64, f64),
        min_abs_det: f64,
        min_separation: f64,
        t_line_residual: f64,
        samples: Vec<Sample<'a>>,
    }
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend((0..m).map(|i| format!("s[{i}]")));
            header.extend((0..=m).map(|i| format!("x[{i}]")));
            writeln!(w, "{}", header.join(","))?;
            for (t, s, x) in &samples {
                let row: Vec<String> = std::iter::once(*t).chain(s.iter().copied()).chain(x.iter().copied()).map(|v| v.to_string()).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        }
        Format::Json => write_json(
            w,
            &Out {
                eps: c.eps,
                window: c.window,
                min_abs_det: c.min_abs_det,
                min_separation: c.min_separation,
                t_line_residual: c.t_line_residual,
                samples: samples.iter().map(|(t, s, x)| Sample { t: *t, s, x }).collect(),
            },
        ),
    })?;
    eprintln!(
        "chart: eps {:e}, min |det| {:e}, min separation {:e}",
        c.eps, c.min_abs_det, c.min_separation
    );
    let mut failed = Vec::new();
    gate(&thresholds, &mut failed, "jacobi.chart", c.t_line_residual);
    finish(failed)
}
