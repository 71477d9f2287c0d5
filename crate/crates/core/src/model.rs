//! System data model and the JSON file schema.
//!
//! Boundary convention (all types): with `z(0,t)` and `z(1,t)` the traces of
//! the channel vector at the two ends of the unit interval,
//!
//! ```text
//! [0; u(t)] = K·z(0,t) + L·z(1,t),     y(t) = Ky·z(0,t) + Ly·z(1,t)
//! ```
//!
//! The first `n − m` rows of `K`, `L` are constraint rows and the last `m`
//! are input rows. A system written with speed-weighted traces
//! `−λ₀K·z(0) − λ₀L·z(1)` maps onto this form by absorbing the constant
//! `−λ₀` into `K` and `L`; output rows carry no weight.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::linalg::{vstack, Matrix};

/// Serde adapter: matrices are stored as arrays of rows.
pub(crate) mod rows {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    /// Build a matrix from rows. `cols` is used when there are no rows.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> std::result::Result<Matrix, String> {
        let c = rows.first().map_or(cols, |r| r.len());
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != c) {
            return Err(format!("row {i} has {} entries, expected {c}", r.len()));
        }
        Ok(Matrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows, 0).map_err(serde::de::Error::custom)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Wave speed `num/den` with a propagation direction.
///
/// `direction` is the sign of the speed in `∂z/∂t = direction·(num/den)·∂z/∂ζ`:
/// `−1` moves data from `ζ = 0` to `ζ = 1`, `+1` from `ζ = 1` to `ζ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalSpeed {
    pub num: u64,
    pub den: u64,
    pub direction: i8,
}

impl RationalSpeed {
    pub fn new(num: u64, den: u64, direction: i8) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidSpeed(format!("{num}/{den} is not positive")));
        }
        if direction != 1 && direction != -1 {
            return Err(Error::InvalidSpeed(format!("direction {direction} is not ±1")));
        }
        let g = gcd(num, den);
        Ok(RationalSpeed {
            num: num / g,
            den: den / g,
            direction,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Travel time `den/num` across the unit interval, as (numerator, denominator).
    pub fn travel_time(&self) -> (u64, u64) {
        (self.den, self.num)
    }
}

impl fmt::Display for RationalSpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.direction < 0 { "-" } else { "+" };
        write!(f, "{sign}{}/{}", self.num, self.den)
    }
}

/// Transport network whose channels may have different (commensurate)
/// speeds and directions. `k`, `l` are full `n × n` boundary matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpeedSystem {
    pub n: usize,
    pub m: usize,
    pub speeds: Vec<RationalSpeed>,
    pub k: Matrix,
    pub l: Matrix,
    pub ky: Matrix,
    pub ly: Matrix,
}

impl MultiSpeedSystem {
    pub fn check_shapes(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if m == 0 || m > n {
            return Err(Error::Shape(format!("need 1 <= m <= n, got n={n}, m={m}")));
        }
        if self.speeds.len() != n {
            return Err(Error::Shape(format!("{} speeds for {n} channels", self.speeds.len())));
        }
        for (name, mat, rows) in [
            ("K", &self.k, n),
            ("L", &self.l, n),
            ("Ky", &self.ky, m),
            ("Ly", &self.ly, m),
        ] {
            if mat.shape() != (rows, n) {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, expected {rows}x{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Coefficients of the inflow traces: the `K` column for channels moving
    /// toward `ζ = 1`, the `L` column for channels moving toward `ζ = 0`.
    pub fn inflow_matrix(&self) -> Matrix {
        let mut a = self.k.clone();
        for (j, s) in self.speeds.iter().enumerate() {
            if s.direction > 0 {
                a.set_column(j, &self.l.column(j));
            }
        }
        a
    }

    /// Coefficients of the outflow traces.
    pub fn outflow_matrix(&self) -> Matrix {
        let mut a = self.l.clone();
        for (j, s) in self.speeds.iter().enumerate() {
            if s.direction > 0 {
                a.set_column(j, &self.k.column(j));
            }
        }
        a
    }

    pub fn is_well_posed(&self) -> bool {
        crate::linalg::rank(&self.inflow_matrix(), crate::linalg::DEFAULT_TOL) == self.n
    }
}

/// Uniform-speed system in boundary form: every channel obeys
/// `∂z/∂t = −λ₀ ∂z/∂ζ` and crosses the unit interval in time `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PHSystem {
    pub n: usize,
    pub m: usize,
    /// Travel time `p = ∫₀¹ λ₀⁻¹`.
    pub p: f64,
    pub k0: Matrix,
    pub l0: Matrix,
    pub ku: Matrix,
    pub lu: Matrix,
    pub ky: Matrix,
    pub ly: Matrix,
}

impl PHSystem {
    /// Build a system and reject inconsistent shapes or non-finite data.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        k0: Matrix,
        l0: Matrix,
        ku: Matrix,
        lu: Matrix,
        ky: Matrix,
        ly: Matrix,
    ) -> Result<Self> {
        let n = k0.ncols().max(ku.ncols());
        let m = ku.nrows();
        let sys = PHSystem {
            n,
            m,
            p,
            k0,
            l0,
            ku,
            lu,
            ky,
            ly,
        };
        sys.check_structure()?;
        Ok(sys)
    }

    /// `[K0; Ku]`, the coefficient of `z(0,t)` in the boundary equations.
    pub fn k(&self) -> Matrix {
        vstack(&[&self.k0, &self.ku]).expect("shapes checked on construction")
    }

    /// `[L0; Lu]`.
    pub fn l(&self) -> Matrix {
        vstack(&[&self.l0, &self.lu]).expect("shapes checked on construction")
    }

    /// `[K0; Ky]`: boundary matrix of the system with `y = 0` imposed.
    pub fn k_nulled(&self) -> Matrix {
        vstack(&[&self.k0, &self.ky]).expect("shapes checked on construction")
    }

    /// `[L0; Ly]`.
    pub fn l_nulled(&self) -> Matrix {
        vstack(&[&self.l0, &self.ly]).expect("shapes checked on construction")
    }

    fn check_structure(&self) -> Result<()> {
        let findings = structural_findings(self);
        match findings.into_iter().next() {
            None => Ok(()),
            Some(f) => Err(Error::Shape(f.message)),
        }
    }
}

/// Constant-coefficient system in physical variables:
/// `∂x/∂t = P₁ ∂(Hx)/∂ζ` with boundary rows acting on `[(Hx)(1); (Hx)(0)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConstantSystem {
    pub n: usize,
    #[serde(rename = "P1", with = "rows")]
    pub p1: Matrix,
    #[serde(rename = "H", with = "rows")]
    pub h: Matrix,
    /// Constraint rows, `(n − m) × 2n`.
    #[serde(rename = "WB1", with = "rows")]
    pub wb1: Matrix,
    /// Input rows, `m × 2n`.
    #[serde(rename = "WB2", with = "rows")]
    pub wb2: Matrix,
    /// Output rows, `m × 2n`.
    #[serde(rename = "WC", with = "rows")]
    pub wc: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    ShapeMismatch,
    NonFinite,
    NonPositiveTravelTime,
    KSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

impl Finding {
    fn new(kind: FindingKind, message: impl Into<String>) -> Self {
        Finding {
            kind,
            message: message.into(),
        }
    }

    /// True for findings that make the document unusable (as opposed to a
    /// loadable but ill-posed system).
    pub fn is_structural(&self) -> bool {
        self.kind != FindingKind::KSingular
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FindingKind::KSingular => write!(f, "K singular: {}", self.message),
            FindingKind::ShapeMismatch => write!(f, "shape mismatch: {}", self.message),
            FindingKind::NonFinite => write!(f, "non-finite entry: {}", self.message),
            FindingKind::NonPositiveTravelTime => write!(f, "travel time: {}", self.message),
        }
    }
}

pub(crate) fn structural_findings(sys: &PHSystem) -> Vec<Finding> {
    let mut out = Vec::new();
    let (n, m) = (sys.n, sys.m);
    if m == 0 || m > n {
        out.push(Finding::new(
            FindingKind::ShapeMismatch,
            format!("need 1 <= m <= n, got n={n}, m={m}"),
        ));
    }
    let c = n.saturating_sub(m);
    for (name, mat, rows) in [
        ("K0", &sys.k0, c),
        ("L0", &sys.l0, c),
        ("Ku", &sys.ku, m),
        ("Lu", &sys.lu, m),
        ("Ky", &sys.ky, m),
        ("Ly", &sys.ly, m),
    ] {
        if mat.shape() != (rows, n) {
            out.push(Finding::new(
                FindingKind::ShapeMismatch,
                format!("{name} is {}x{}, expected {rows}x{n}", mat.nrows(), mat.ncols()),
            ));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            out.push(Finding::new(FindingKind::NonFinite, name.to_string()));
        }
    }
    if !(sys.p.is_finite() && sys.p > 0.0) {
        out.push(Finding::new(
            FindingKind::NonPositiveTravelTime,
            format!("p = {} must be positive", sys.p),
        ));
    }
    out
}

/// Shape, finiteness and well-posedness findings. An empty list means the
/// system can be used by every other operation.
pub fn validate(sys: &PHSystem) -> Vec<Finding> {
    let mut out = structural_findings(sys);
    if out.is_empty() && !analysis::check_well_posed(sys) {
        out.push(Finding::new(
            FindingKind::KSingular,
            format!("rank [K0; Ku] < {}", sys.n),
        ));
    }
    out
}

/// Findings for a multi-speed system.
pub fn validate_multispeed(sys: &MultiSpeedSystem) -> Vec<Finding> {
    if let Err(e) = sys.check_shapes() {
        return vec![Finding::new(FindingKind::ShapeMismatch, e.to_string())];
    }
    if !sys.is_well_posed() {
        return vec![Finding::new(
            FindingKind::KSingular,
            "inflow boundary matrix is singular",
        )];
    }
    Vec::new()
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n: usize,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    travel_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speeds: Option<Vec<RationalSpeed>>,
    #[serde(rename = "K0", default, skip_serializing_if = "Option::is_none")]
    k0: Option<Vec<Vec<f64>>>,
    #[serde(rename = "L0", default, skip_serializing_if = "Option::is_none")]
    l0: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Ku", default, skip_serializing_if = "Option::is_none")]
    ku: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Lu", default, skip_serializing_if = "Option::is_none")]
    lu: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<Vec<Vec<f64>>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    l: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Ky")]
    ky: Vec<Vec<f64>>,
    #[serde(rename = "Ly")]
    ly: Vec<Vec<f64>>,
}

/// Either kind of system document.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemDocument {
    Uniform(PHSystem),
    MultiSpeed(MultiSpeedSystem),
}

pub(crate) fn map_json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::schema("<document>", e.to_string()),
        _ => Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn required(field: &str, v: Option<Vec<Vec<f64>>>) -> Result<Vec<Vec<f64>>> {
    v.ok_or_else(|| Error::schema(field, "missing"))
}

fn matrix(field: &str, rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    rows::from_rows(rows, cols).map_err(|msg| Error::schema(field, msg))
}

fn forbid(field: &str, v: &Option<Vec<Vec<f64>>>, kind: &str) -> Result<()> {
    if v.is_some() {
        return Err(Error::schema(field, format!("not allowed in a {kind} document")));
    }
    Ok(())
}

impl SystemDocument {
    /// Parse a document without checking shapes or well-posedness.
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text).map_err(map_json_error)?;
        match (f.travel_time, f.speeds) {
            (Some(_), Some(_)) => Err(Error::schema(
                "travel_time",
                "exactly one of `travel_time` and `speeds` may be present",
            )),
            (None, None) => Err(Error::schema(
                "travel_time",
                "one of `travel_time` or `speeds` is required",
            )),
            (Some(p), None) => {
                forbid("K", &f.k, "uniform")?;
                forbid("L", &f.l, "uniform")?;
                let n = f.n;
                Ok(SystemDocument::Uniform(PHSystem {
                    n,
                    m: f.m,
                    p,
                    k0: matrix("K0", &required("K0", f.k0)?, n)?,
                    l0: matrix("L0", &required("L0", f.l0)?, n)?,
                    ku: matrix("Ku", &required("Ku", f.ku)?, n)?,
                    lu: matrix("Lu", &required("Lu", f.lu)?, n)?,
                    ky: matrix("Ky", &f.ky, n)?,
                    ly: matrix("Ly", &f.ly, n)?,
                }))
            }
            (None, Some(speeds)) => {
                for (field, v) in [("K0", &f.k0), ("L0", &f.l0), ("Ku", &f.ku), ("Lu", &f.lu)] {
                    forbid(field, v, "multi-speed")?;
                }
                let n = f.n;
                let speeds = speeds
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        RationalSpeed::new(s.num, s.den, s.direction)
                            .map_err(|e| Error::schema(format!("speeds[{i}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SystemDocument::MultiSpeed(MultiSpeedSystem {
                    n,
                    m: f.m,
                    speeds,
                    k: matrix("K", &required("K", f.k)?, n)?,
                    l: matrix("L", &required("L", f.l)?, n)?,
                    ky: matrix("Ky", &f.ky, n)?,
                    ly: matrix("Ly", &f.ly, n)?,
                }))
            }
        }
    }

    /// Parse and reject structurally invalid documents.
    pub fn parse(text: &str) -> Result<Self> {
        let doc = Self::parse_unchecked(text)?;
        match &doc {
            SystemDocument::Uniform(sys) => {
                if let Some(f) = structural_findings(sys).into_iter().next() {
                    return Err(Error::schema(field_of(&f), f.to_string()));
                }
            }
            SystemDocument::MultiSpeed(sys) => {
                sys.check_shapes()
                    .map_err(|e| Error::schema("<shape>", e.to_string()))?;
            }
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            SystemDocument::Uniform(s) => SystemFile {
                n: s.n,
                m: s.m,
                travel_time: Some(s.p),
                speeds: None,
                k0: Some(rows::to_rows(&s.k0)),
                l0: Some(rows::to_rows(&s.l0)),
                ku: Some(rows::to_rows(&s.ku)),
                lu: Some(rows::to_rows(&s.lu)),
                k: None,
                l: None,
                ky: rows::to_rows(&s.ky),
                ly: rows::to_rows(&s.ly),
            },
            SystemDocument::MultiSpeed(s) => SystemFile {
                n: s.n,
                m: s.m,
                travel_time: None,
                speeds: Some(s.speeds.clone()),
                k0: None,
                l0: None,
                ku: None,
                lu: None,
                k: Some(rows::to_rows(&s.k)),
                l: Some(rows::to_rows(&s.l)),
                ky: rows::to_rows(&s.ky),
                ly: rows::to_rows(&s.ly),
            },
        };
        let mut s = serde_json::to_string_pretty(&file).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn field_of(f: &Finding) -> String {
    f.message
        .split_whitespace()
        .next()
        .unwrap_or("<document>")
        .to_string()
}

impl PHSystem {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        match SystemDocument::load(path)? {
            SystemDocument::Uniform(s) => Ok(s),
            SystemDocument::MultiSpeed(_) => Err(Error::schema(
                "speeds",
                "expected a uniform-speed document (with `travel_time`)",
            )),
        }
    }

    pub fn to_json(&self) -> String {
        SystemDocument::Uniform(self.clone()).to_json()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        SystemDocument::Uniform(self.clone()).save(path)
    }
}

impl MultiSpeedSystem {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        match SystemDocument::load(path)? {
            SystemDocument::MultiSpeed(s) => Ok(s),
            SystemDocument::Uniform(_) => Err(Error::schema(
                "travel_time",
                "expected a multi-speed document (with `speeds`)",
            )),
        }
    }

    pub fn to_json(&self) -> String {
        SystemDocument::MultiSpeed(self.clone()).to_json()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        SystemDocument::MultiSpeed(self.clone()).save(path)
    }
}
