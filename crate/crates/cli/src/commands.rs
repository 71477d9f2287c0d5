//! Subcommand implementations. Each returns a report plus an exit status,
//! or an error that the caller maps to a status.

use std::fs;
use std::path::{Path, PathBuf};

use phzero_core::analysis::{
    discrete_reduce, feedthrough, scan_zeros, stability_report, w_to_s, ZeroScanOptions,
};
use phzero_core::canonicalize::{
    diagonalize_constant, reflect_positive, split_commensurate_with_layout, SplitLayout,
};
use phzero_core::ensemble::{self, profile, profile_in};
use phzero_core::linalg::Matrix;
use phzero_core::model::{validate, validate_multispeed, PHSystem, RawConstantSystem, SystemDocument};
use phzero_core::sim::{simulate, simulate_zeroing, Feedback, Trajectory, ZeroInput};
use phzero_core::zerodyn::{cross_check, reduce, vstar_of_system, ReduceOptions};
use phzero_core::{Error, ErrorClass};
use serde_json::{json, Value};

use crate::report::{complex, matrix, number, InputDigest, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_PRECONDITION: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => EXIT_INPUT,
        ErrorClass::Precondition => EXIT_PRECONDITION,
        ErrorClass::Internal => EXIT_INTERNAL,
    }
}

/// What a command produced: an optional report for stdout, an optional
/// artifact that goes to `-o` or, without `-o`, to stdout in place of the
/// report.
pub struct Outcome {
    pub report: Report,
    pub artifact: Option<String>,
    pub code: u8,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Outcome {
            report,
            artifact: None,
            code: EXIT_OK,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CmdResult = std::result::Result<Outcome, CliError>;

fn read(path: &Path) -> Result<(Vec<u8>, InputDigest), Error> {
    let bytes = fs::read(path)?;
    let digest = InputDigest::of(path, &bytes);
    Ok((bytes, digest))
}

fn text(bytes: &[u8]) -> Result<&str, Error> {
    std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: format!("input is not UTF-8: {e}"),
    })
}

/// Any accepted input file.
enum Loaded {
    Document(SystemDocument),
    Raw(RawConstantSystem),
}

fn parse_any(src: &str) -> Result<Loaded, Error> {
    let probe: Value = serde_json::from_str(src).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if probe.get("P1").is_some() {
        let raw: RawConstantSystem = serde_json::from_value(probe).map_err(|e| Error::Schema {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        return Ok(Loaded::Raw(raw));
    }
    Ok(Loaded::Document(SystemDocument::parse(src)?))
}

/// Multi-speed or physical documents are reduced to the uniform form; the
/// layout of the split is returned when one was needed.
fn to_uniform(loaded: Loaded) -> Result<(PHSystem, Option<SplitLayout>), Error> {
    match loaded {
        Loaded::Document(SystemDocument::Uniform(s)) => Ok((s, None)),
        Loaded::Document(SystemDocument::MultiSpeed(ms)) => {
            let (s, layout) = split_commensurate_with_layout(&reflect_positive(&ms))?;
            Ok((s, Some(layout)))
        }
        Loaded::Raw(raw) => {
            let (_, ms) = diagonalize_constant(&raw)?;
            let (s, layout) = split_commensurate_with_layout(&reflect_positive(&ms))?;
            Ok((s, Some(layout)))
        }
    }
}

fn load_uniform(path: &Path, report: &mut Report) -> Result<PHSystem, Error> {
    let (bytes, digest) = read(path)?;
    report.inputs.push(digest);
    let (sys, layout) = to_uniform(parse_any(text(&bytes)?)?)?;
    if let Some(layout) = layout {
        report.set("split_channels", layout.channel_count());
    }
    Ok(sys)
}

fn layout_value(layout: &SplitLayout) -> Value {
    json!({
        "segments": layout.segments,
        "travel_time": [layout.travel_time.0.to_string(), layout.travel_time.1.to_string()],
    })
}

pub fn validate_cmd(file: &Path) -> CmdResult {
    let mut report = Report::new("validate");
    let (bytes, digest) = read(file)?;
    report.inputs.push(digest);
    let src = text(&bytes)?;
    let findings = match SystemDocument::parse_unchecked(src) {
        Ok(SystemDocument::Uniform(s)) => validate(&s),
        Ok(SystemDocument::MultiSpeed(ms)) => validate_multispeed(&ms),
        Err(e) => return Err(e.into()),
    };
    let list: Vec<Value> = findings
        .iter()
        .map(|f| json!({ "kind": f.kind, "message": f.to_string() }))
        .collect();
    report.set("well_posed", findings.is_empty());
    report.set("findings", Value::Array(list));
    let code = if findings.iter().any(|f| f.is_structural()) {
        EXIT_INPUT
    } else if findings.is_empty() {
        EXIT_OK
    } else {
        EXIT_PRECONDITION
    };
    Ok(Outcome {
        report,
        artifact: None,
        code,
    })
}

pub fn split_cmd(file: &Path) -> CmdResult {
    let mut report = Report::new("split");
    let (bytes, digest) = read(file)?;
    report.inputs.push(digest);
    let loaded = parse_any(text(&bytes)?)?;
    let was_uniform = matches!(loaded, Loaded::Document(SystemDocument::Uniform(_)));
    let (sys, layout) = to_uniform(loaded)?;
    report.set("n", sys.n);
    report.set("m", sys.m);
    report.set("travel_time", number(sys.p));
    report.set("already_uniform", was_uniform);
    if let Some(layout) = &layout {
        report.set("layout", layout_value(layout));
    }
    Ok(Outcome {
        report,
        artifact: Some(SystemDocument::Uniform(sys).to_json()),
        code: EXIT_OK,
    })
}

pub fn analyze_cmd(file: &Path) -> CmdResult {
    let mut report = Report::new("analyze");
    let sys = load_uniform(file, &mut report)?;
    let d = discrete_reduce(&sys)?;
    let st = stability_report(&d)?;
    report.set("well_posed", true);
    report.set("n", sys.n);
    report.set("m", sys.m);
    report.set("travel_time", number(sys.p));
    report.set("E", matrix(&feedthrough(&sys)?));
    report.set(
        "quadruple",
        json!({ "Ad": matrix(&d.ad), "Bd": matrix(&d.bd), "Cd": matrix(&d.cd), "Dd": matrix(&d.dd) }),
    );
    report.set("spectral_radius", number(st.spectral_radius));
    report.set("sigma_max", number(st.sigma_max));
    report.set("exponentially_stable", st.stable);
    Ok(Outcome::ok(report))
}

pub fn zerodyn_cmd(file: &Path, opts: &ReduceOptions) -> CmdResult {
    let mut report = Report::new("zerodyn");
    let sys = load_uniform(file, &mut report)?;
    let zd = reduce(&sys, opts)?;
    let (fa, fb) = zd.zeroing_functional();
    report.set("k", zd.k);
    report.set("full_state", zd.full_state);
    report.set("iterations", zd.transform_chain.len());
    report.set("s0_used", Value::Array(zd.s0_used.iter().map(|&s| number(s)).collect()));
    report.set(
        "identity_residuals",
        Value::Array(zd.identity_residuals.iter().map(|&s| number(s)).collect()),
    );
    report.set("constraints", matrix(&zd.constraints));
    report.set("Kw", matrix(&zd.kw));
    report.set("Lw", matrix(&zd.lw));
    report.set("Ku_tilde", matrix(&zd.ku_tilde));
    report.set("Lu_tilde", matrix(&zd.lu_tilde));
    report.set("zeroing_input", json!({ "at_0": matrix(&fa), "at_1": matrix(&fb) }));
    let mut code = EXIT_OK;
    if sys.m == 1 && !zd.full_state {
        match cross_check(&sys) {
            Ok(c) => {
                report.set(
                    "cross_check",
                    json!({
                        "vstar_dim": c.vstar_dim,
                        "constraint_residual": number(c.constraint_residual),
                        "max_root_mismatch": number(c.max_root_mismatch),
                        "roots_w": Value::Array(c.reduced_roots.iter().map(|&w| complex(w)).collect()),
                    }),
                );
            }
            Err(e) => {
                report.set("cross_check", json!({ "error": e.to_string() }));
                code = exit_code(&e).max(EXIT_PRECONDITION);
            }
        }
    }
    Ok(Outcome {
        report,
        artifact: Some(zd.to_json()),
        code,
    })
}

pub fn vstar_cmd(file: &Path) -> CmdResult {
    let mut report = Report::new("vstar");
    let sys = load_uniform(file, &mut report)?;
    let v = vstar_of_system(&sys)?;
    report.set("n", sys.n);
    report.set("dim", v.dim());
    // Columns of the basis, one row per vector.
    report.set("basis", matrix(&v.basis().transpose()));
    Ok(Outcome::ok(report))
}

pub fn zeros_cmd(file: &Path, wgrid: usize) -> CmdResult {
    let mut report = Report::new("zeros");
    let sys = load_uniform(file, &mut report)?;
    let scan = scan_zeros(&sys, ZeroScanOptions { grid: wgrid })?;
    report.set("identically_zero", scan.identically_zero);
    report.set("period", number(scan.period));
    report.set("inside_unit_circle", scan.winding.map_or(Value::Null, Value::from));
    let zeros: Vec<Value> = scan
        .zeros
        .iter()
        .map(|z| json!({ "w": complex(z.w), "s": complex(w_to_s(z.w, sys.p)) }))
        .collect();
    report.set("count", zeros.len());
    report.set("zeros", Value::Array(zeros));
    Ok(Outcome::ok(report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Open,
    Zeroing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FeedbackRoute {
    Friend,
    Reduction,
}

pub struct SimulateArgs {
    pub initial: Option<PathBuf>,
    pub steps: usize,
    pub grid: usize,
    pub mode: Mode,
    pub format: Format,
    pub feedback: FeedbackRoute,
    pub seed: u64,
}

/// Profile rows as stored on disk: a bare `n × cells` array or an object
/// with a `profile` field. Each cell is repeated to fill `grid`.
fn read_profile(bytes: &[u8], n: usize, grid: usize) -> Result<Matrix, Error> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum ProfileFile {
        Rows(Vec<Vec<f64>>),
        Wrapped { profile: Vec<Vec<f64>> },
    }
    let parsed: ProfileFile = serde_json::from_slice(bytes).map_err(|e| Error::Schema {
        field: "profile".into(),
        message: e.to_string(),
    })?;
    let rows = match parsed {
        ProfileFile::Rows(r) | ProfileFile::Wrapped { profile: r } => r,
    };
    if rows.len() != n {
        return Err(Error::Schema {
            field: "profile".into(),
            message: format!("{} rows, system has {n} channels", rows.len()),
        });
    }
    let cells = rows[0].len();
    if cells == 0 || rows.iter().any(|r| r.len() != cells) || !grid.is_multiple_of(cells) {
        return Err(Error::Schema {
            field: "profile".into(),
            message: format!("rows must share a cell count that divides the grid ({grid})"),
        });
    }
    let rep = grid / cells;
    Ok(Matrix::from_fn(n, grid, |i, j| rows[i][j / rep]))
}

pub fn simulate_cmd(file: &Path, args: &SimulateArgs, opts: &ReduceOptions) -> CmdResult {
    let mut report = Report::new("simulate");
    let sys = load_uniform(file, &mut report)?;
    if args.grid == 0 {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    let zd = match args.mode {
        Mode::Zeroing => Some(reduce(&sys, opts)?),
        Mode::Open => None,
    };
    let z0 = match &args.initial {
        Some(path) => {
            let (bytes, digest) = read(path)?;
            report.inputs.push(digest);
            read_profile(&bytes, sys.n, args.grid)?
        }
        None => {
            let mut r = ensemble::rng(args.seed);
            match args.mode {
                Mode::Zeroing => profile_in(&mut r, vstar_of_system(&sys)?.basis(), args.grid),
                Mode::Open => profile(&mut r, sys.n, args.grid),
            }
        }
    };
    let traj: Trajectory = match &zd {
        Some(zd) => {
            let fb = match args.feedback {
                FeedbackRoute::Friend => Feedback::Friend,
                FeedbackRoute::Reduction => Feedback::Reduction,
            };
            simulate_zeroing(&sys, zd, &z0, args.steps, fb)?
        }
        None => simulate(&sys, &z0, &mut ZeroInput { m: sys.m }, args.steps)?,
    };
    let norm = (z0.norm_squared() / args.grid as f64).sqrt();
    report.set("steps", args.steps);
    report.set("grid", args.grid);
    report.set("mode", format!("{:?}", args.mode).to_lowercase());
    report.set("initial_norm", number(norm));
    report.set("max_abs_output", number(traj.max_abs_output()));
    let artifact = match args.format {
        Format::Json => traj.to_json(),
        Format::Csv => traj.to_csv(),
    };
    Ok(Outcome {
        report,
        artifact: Some(artifact),
        code: EXIT_OK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Siso,
    Square,
    Stable,
}

pub fn generate_cmd(kind: Kind, max_n: usize, max_m: usize, seed: u64) -> CmdResult {
    if max_n == 0 || max_m == 0 {
        return Err(CliError::Usage("--max-n and --max-m must be positive".into()));
    }
    let mut report = Report::new("generate");
    let mut r = ensemble::rng(seed);
    let sys = match kind {
        Kind::Siso => ensemble::random_siso(&mut r, max_n),
        Kind::Square => ensemble::random_square(&mut r, max_n, max_m),
        Kind::Stable => {
            let (sys, radius) = ensemble::random_stable(&mut r, max_n, 0.95);
            report.set("spectral_radius", number(radius));
            sys
        }
    };
    report.set("seed", seed);
    report.set("n", sys.n);
    report.set("m", sys.m);
    Ok(Outcome {
        report,
        artifact: Some(SystemDocument::Uniform(sys).to_json()),
        code: EXIT_OK,
    })
}
