//! Report envelope shared by every subcommand, with a JSON and a text form.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use phzero_core::linalg::Matrix;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "phzero-report/1";

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub tool: &'static str,
    pub schema: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub findings: Map<String, Value>,
    pub versions: Versions,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            inputs: Vec::new(),
            findings: Map::new(),
            versions: Versions {
                tool: env!("CARGO_PKG_VERSION"),
                schema: SCHEMA,
            },
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.findings.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Text form. Numbers are printed exactly as in the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "phzero {} ({})", self.command, self.versions.tool).unwrap();
        for input in &self.inputs {
            writeln!(out, "  input {} sha256:{}", input.path, input.sha256).unwrap();
        }
        for (key, value) in &self.findings {
            render(&mut out, key, value, 0);
        }
        out
    }
}

fn is_matrix(v: &Value) -> bool {
    match v {
        Value::Array(rows) => !rows.is_empty() && rows.iter().all(|r| matches!(r, Value::Array(c) if c.iter().all(Value::is_number))),
        _ => false,
    }
}

fn render(out: &mut String, key: &str, value: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match value {
        Value::Object(map) => {
            writeln!(out, "{pad}{key}:").unwrap();
            for (k, v) in map {
                render(out, k, v, depth + 1);
            }
        }
        v if is_matrix(v) => {
            writeln!(out, "{pad}{key}:").unwrap();
            for row in v.as_array().unwrap() {
                writeln!(out, "{pad}  {row}").unwrap();
            }
        }
        Value::Array(items) if items.iter().any(Value::is_object) => {
            writeln!(out, "{pad}{key}: {} entries", items.len()).unwrap();
            for (i, item) in items.iter().enumerate() {
                render(out, &format!("[{i}]"), item, depth + 1);
            }
        }
        Value::String(s) => writeln!(out, "{pad}{key}: {s}").unwrap(),
        v => writeln!(out, "{pad}{key}: {v}").unwrap(),
    }
}

pub fn matrix(m: &Matrix) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| number(x)).collect()))
            .collect(),
    )
}

/// A float as JSON. Negative zero prints as zero; non-finite values
/// become strings.
pub fn number(x: f64) -> Value {
    let x = if x == 0.0 { 0.0 } else { x };
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

pub fn complex(z: Complex64) -> Value {
    let mut m = Map::new();
    m.insert("re".into(), number(z.re));
    m.insert("im".into(), number(z.im));
    Value::Object(m)
}
