//! JSON and CSV emission. Floats are written with 17 significant digits.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use covconc::verify::Check;

use crate::config::Settings;
use crate::failure::Failure;

pub const SCHEMA_ID: &str = "covconc-report/1";

struct FixedDigits<F> {
    inner: F,
}

impl<F: Formatter> Formatter for FixedDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation; round-trips every f64.
pub fn fmt_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        "null".to_owned()
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = FixedDigits {
        inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Settings,
    pub config_file: Option<PathBuf>,
    /// SHA-256 of the resolved settings and the subcommand.
    pub config_hash: String,
    pub version: String,
    pub timestamp: String,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(
        command: Vec<String>,
        subcommand: &str,
        config: Settings,
        config_file: Option<PathBuf>,
        inputs: Vec<InputDigest>,
    ) -> Self {
        let canonical = serde_json::to_string(&json!({
            "subcommand": subcommand,
            "config": &config,
        }))
        .expect("settings serialize");
        RunManifest {
            command,
            config_hash: sha256_hex(canonical.as_bytes()),
            config,
            config_file,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            inputs,
        }
    }
}

/// Top-level report: schema tag, manifest, command-specific body.
pub fn report(kind: &str, manifest: &RunManifest, body: Value) -> Value {
    let mut out = json!({
        "schema": SCHEMA_ID,
        "kind": kind,
        "manifest": manifest,
    });
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    out
}

pub fn print_json(value: &Value) {
    println!("{}", to_json_string(value));
}

pub const CSV_HEADER: &str = "check,threshold,p_hat,ci_lo,ci_hi,prob_bound,pass";

/// One row per tail check.
pub fn tail_csv(checks: &[Check]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in checks {
        if let (Some(t), Some(cap)) = (&c.tail, c.target) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.name,
                fmt_f64(t.threshold),
                fmt_f64(t.p_hat),
                fmt_f64(t.ci_lo),
                fmt_f64(t.ci_hi),
                fmt_f64(cap),
                c.pass
            ));
        }
    }
    out
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}
