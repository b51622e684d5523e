//! JSON, CSV and PPM serialization.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use shakhov::branches::{Branch, BranchEvent};
use shakhov::spectral::ModelParams;

/// Compact JSON with every float written to 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    serde::Serialize::serialize(v, &mut ser).expect("in-memory write");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn complex(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

pub fn params_json(p: &ModelParams) -> Value {
    json!({ "tau": p.tau, "pr": p.prandtl, "r": p.r })
}

/// Merge `extra` into the parameter header.
pub fn with_params(p: &ModelParams, extra: Value) -> Value {
    let mut v = params_json(p);
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

/// Write to `out`, or to standard output.
pub fn emit(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

// ---------------------------------------------------------------------------
// Branch tables

pub const CSV_HEADER: [&str; 6] = ["k", "mode", "re_lambda", "im_lambda", "multiplicity", "residual"];

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn shortest(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// CSV rows sorted by `(mode, k)`, floats in shortest round-trip form.
pub fn branches_csv(branches: &[Branch]) -> String {
    let mut rows: Vec<(&str, f64, [String; 6])> = Vec::new();
    for b in branches {
        let m = b.label.factor().multiplicity_in_sigma();
        for s in &b.samples {
            rows.push((
                b.label.name(),
                s.k,
                [
                    shortest(s.k),
                    b.label.name().to_string(),
                    shortest(s.lambda.re),
                    shortest(s.lambda.im),
                    m.to_string(),
                    shortest(s.residual),
                ],
            ));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(&r.2).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

pub fn events_json(params: &ModelParams, branches: &[Branch]) -> Value {
    let mut events = Vec::new();
    for b in branches {
        for e in &b.events {
            let mut v = json!({ "mode": b.label.name(), "k": e.k() });
            let kind = match e {
                BranchEvent::Birth(_) => "birth",
                BranchEvent::Merge { partner, .. } => {
                    v["partner"] = json!(partner.name());
                    "merge"
                }
                BranchEvent::Absorbed(_) => "absorbed",
            };
            v["kind"] = json!(kind);
            events.push(v);
        }
    }
    with_params(params, json!({ "events": events }))
}

/// `branches.csv` → `branches.events.json`.
pub fn events_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.events.json"))
}
