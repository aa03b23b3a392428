//! Rendering of exact values into JSON/CSV artifacts.
//!
//! Rationals and big integers are rendered as strings (JSON numbers would
//! silently round them); floating-point companions ride alongside under
//! `*_f64` keys. Non-finite floats become the strings `"inf"`, `"-inf"`,
//! `"nan"`, since JSON has no encoding for them.

use std::fs;
use std::path::Path;

use dlab_core::bounds::BoundReport;
use dlab_core::exact::logreal::LinReal;
use dlab_core::exact::q_to_f64;
use dlab_core::exact::Q;
use dlab_core::lattice::ShortVec;
use dlab_core::weights::NormValue;
use num_bigint::BigInt;
use serde_json::{json, Map, Value};

pub fn q_str(q: &Q) -> String {
    q.to_string()
}

pub fn big_str(b: &BigInt) -> String {
    b.to_string()
}

pub fn q_list(qs: &[Q]) -> Value {
    Value::Array(qs.iter().map(|q| Value::String(q_str(q))).collect())
}

pub fn big_list(bs: &[BigInt]) -> Value {
    Value::Array(bs.iter().map(|b| Value::String(big_str(b))).collect())
}

/// A float as a JSON number, or as a string when JSON cannot hold it.
pub fn f64_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// A float as a CSV cell: `Display` of f64 round-trips and is deterministic.
pub fn f64_cell(x: f64) -> String {
    format!("{x}")
}

pub fn norm_json(v: &NormValue) -> Value {
    let exact = match v {
        NormValue::Zero => Some("0".to_string()),
        NormValue::Pos(p) => p.as_rational().map(|q| q_str(&q)),
    };
    json!({
        "exact": exact,
        "f64": f64_json(v.to_f64()),
        "ln": f64_json(v.ln_f64()),
    })
}

/// The exact rational value of a norm when it has one, as a CSV cell
/// (empty when the value is irrational).
pub fn norm_exact_cell(v: &NormValue) -> String {
    match v {
        NormValue::Zero => "0".to_string(),
        NormValue::Pos(p) => p.as_rational().map(|q| q_str(&q)).unwrap_or_default(),
    }
}

pub fn shortvec_json(v: &ShortVec) -> Value {
    json!({
        "norm": norm_json(&v.value),
        "coeffs": big_list(&v.coeffs),
        "vector": q_list(&v.vector),
    })
}

/// Headline string for a closed-form real: the exact rational when it is
/// one, otherwise a 12-digit decimal of the symbolic value.
pub fn linreal_str(v: &LinReal) -> String {
    if v.is_rational() {
        q_str(&v.rat)
    } else {
        v.decimal_string(12)
    }
}

pub fn linreal_json(v: &LinReal) -> Value {
    json!({
        "value": linreal_str(v),
        "exact": v.is_rational(),
        "closed_form": v.describe(),
        "f64": f64_json(v.to_f64()),
    })
}

pub fn bound_report_json(r: &BoundReport) -> Value {
    json!({
        "formula": r.formula,
        "inputs": r.inputs,
        "value": linreal_str(&r.value),
        "value_f64": f64_json(r.value.to_f64()),
        "closed_form": r.value.describe(),
        "raw": linreal_str(&r.raw),
        "clamped": r.clamped,
        "ambient": linreal_str(&r.ambient),
        "pivot": r.pivot,
    })
}

/// A CSV artifact: file name, content, and one documentation line per column.
pub struct Artifact {
    pub name: &'static str,
    pub csv: String,
    pub columns: &'static [(&'static str, &'static str)],
}

impl Artifact {
    fn meta(&self, written: bool) -> Value {
        let cols: Vec<Value> = self
            .columns
            .iter()
            .map(|(name, doc)| json!({ "name": name, "doc": doc }))
            .collect();
        json!({ "file": self.name, "written": written, "columns": cols })
    }
}

/// Print the summary to stdout and, when an output directory is given,
/// write `summary.json` plus every CSV artifact into it. The summary bytes
/// depend only on the resolved configuration, the seed, and the version.
pub fn emit(
    mut summary: Map<String, Value>,
    artifacts: Vec<Artifact>,
    out: Option<&Path>,
) -> std::io::Result<()> {
    if !artifacts.is_empty() {
        let meta: Vec<Value> = artifacts.iter().map(|a| a.meta(out.is_some())).collect();
        summary.insert("artifacts".into(), Value::Array(meta));
    }
    let text = format!(
        "{}\n",
        serde_json::to_string_pretty(&Value::Object(summary)).expect("summary serializes")
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for a in &artifacts {
            fs::write(dir.join(a.name), &a.csv)?;
        }
        fs::write(dir.join("summary.json"), &text)?;
    }
    print!("{text}");
    Ok(())
}

/// q_to_f64 re-exported for the runners' convenience.
pub fn qf(q: &Q) -> f64 {
    q_to_f64(q)
}
