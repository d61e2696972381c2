//! Result rows and their CSV / JSON encodings.
//!
//! CSV layout (schema `mtlab.v1`): one `#` header line with the experiment,
//! seed and config hash, then the columns in [`COLUMNS`]. Floats use `{:.12e}`.
//! `*_bits` columns are filled only for rows measured in nats; `rhs`, `tol`,
//! `margin` and `pass` are empty for informational rows.

use std::fmt;

use mtlab_core::info::nats_to_bits;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "mtlab.v1";

pub const COLUMNS: [&str; 12] =
    ["experiment", "case", "quantity", "unit", "relation", "lhs", "lhs_bits", "rhs", "rhs_bits", "tol", "margin", "pass"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Nats,
    TraceNorm,
    OpNorm,
    Probability,
    Count,
    Flag,
    Plain,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::TraceNorm => "trace_norm",
            Unit::OpNorm => "op_norm",
            Unit::Probability => "probability",
            Unit::Count => "count",
            Unit::Flag => "flag",
            Unit::Plain => "plain",
        }
    }
}

/// How `lhs` is compared with `rhs`, within `tol`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs ≤ rhs + tol`.
    Le,
    /// `lhs ≥ rhs − tol`.
    Ge,
    /// `|lhs − rhs| ≤ tol`.
    Eq,
    /// `lhs > rhs + tol`.
    Gt,
    Info,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "le",
            Relation::Ge => "ge",
            Relation::Eq => "eq",
            Relation::Gt => "gt",
            Relation::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub case: String,
    pub quantity: String,
    pub unit: Unit,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    /// Set when the point failed to compute; kept out of the CSV.
    pub note: Option<String>,
}

impl Row {
    fn new(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, relation: Relation, lhs: f64, rhs: f64, tol: f64) -> Self {
        Row { case: case.into(), quantity: quantity.into(), unit, relation, lhs, rhs, tol, note: None }
    }

    pub fn info(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, value: f64) -> Self {
        Row::new(case, quantity, unit, Relation::Info, value, f64::NAN, f64::NAN)
    }

    pub fn le(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, lhs: f64, rhs: f64, tol: f64) -> Self {
        Row::new(case, quantity, unit, Relation::Le, lhs, rhs, tol)
    }

    pub fn ge(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, lhs: f64, rhs: f64, tol: f64) -> Self {
        Row::new(case, quantity, unit, Relation::Ge, lhs, rhs, tol)
    }

    pub fn eq(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, lhs: f64, rhs: f64, tol: f64) -> Self {
        Row::new(case, quantity, unit, Relation::Eq, lhs, rhs, tol)
    }

    pub fn gt(case: impl Into<String>, quantity: impl Into<String>, unit: Unit, lhs: f64, rhs: f64) -> Self {
        Row::new(case, quantity, unit, Relation::Gt, lhs, rhs, 0.0)
    }

    /// A boolean check, encoded as `lhs ∈ {0, 1} ≥ 1`.
    pub fn flag(case: impl Into<String>, quantity: impl Into<String>, ok: bool) -> Self {
        Row::new(case, quantity, Unit::Flag, Relation::Ge, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    /// Failure marker for a point that returned an error.
    pub fn error(case: impl Into<String>, msg: impl Into<String>) -> Self {
        let mut r = Row::flag(case, "completed", false);
        r.note = Some(msg.into());
        r
    }

    /// Distance to failure; positive when the check passes. `None` for info rows.
    pub fn margin(&self) -> Option<f64> {
        let m = match self.relation {
            Relation::Le => self.rhs + self.tol - self.lhs,
            Relation::Ge => self.lhs - (self.rhs - self.tol),
            Relation::Eq => self.tol - (self.lhs - self.rhs).abs(),
            Relation::Gt => self.lhs - (self.rhs + self.tol),
            Relation::Info => return None,
        };
        Some(m)
    }

    pub fn pass(&self) -> Option<bool> {
        let m = self.margin()?;
        Some(match self.relation {
            Relation::Gt => m > 0.0,
            _ => m >= 0.0,
        })
    }

    pub fn is_check(&self) -> bool {
        self.relation != Relation::Info
    }
}

/// `{:.12e}`, with non-finite values spelled out.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

fn json_float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<Row>,
    /// `(point label, seconds)`, kept out of the CSV so reruns stay byte-identical.
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn header(&self) -> String {
        format!("# schema={SCHEMA} experiment={} seed={} config_hash={}", self.experiment, self.seed, self.config_hash)
    }

    pub fn checks(&self) -> usize {
        self.rows.iter().filter(|r| r.is_check()).count()
    }

    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.pass() == Some(false)).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let bits = |x: f64| if r.unit == Unit::Nats && !x.is_nan() { fmt_float(nats_to_bits(x)) } else { String::new() };
            let check = r.is_check();
            let opt = |x: f64| if check { fmt_float(x) } else { String::new() };
            let record = [
                self.experiment.clone(),
                r.case.clone(),
                r.quantity.clone(),
                r.unit.as_str().to_string(),
                r.relation.as_str().to_string(),
                fmt_float(r.lhs),
                bits(r.lhs),
                opt(r.rhs),
                if check { bits(r.rhs) } else { String::new() },
                opt(r.tol),
                r.margin().map(fmt_float).unwrap_or_default(),
                r.pass().map(|p| p.to_string()).unwrap_or_default(),
            ];
            w.write_record(&record).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        format!("{}\n{body}", self.header())
    }

    /// Machine-readable mirror of the CSV rows plus a summary.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let nats = r.unit == Unit::Nats;
                let mut v = json!({
                    "case": r.case,
                    "quantity": r.quantity,
                    "unit": r.unit,
                    "relation": r.relation,
                    "lhs": json_float(r.lhs),
                    "lhs_bits": if nats { json_float(nats_to_bits(r.lhs)) } else { Value::Null },
                    "rhs": if r.is_check() { json_float(r.rhs) } else { Value::Null },
                    "rhs_bits": if nats && r.is_check() { json_float(nats_to_bits(r.rhs)) } else { Value::Null },
                    "tol": if r.is_check() { json_float(r.tol) } else { Value::Null },
                    "margin": r.margin().map_or(Value::Null, json_float),
                    "pass": r.pass(),
                });
                if let Some(n) = &r.note {
                    v["note"] = json!(n);
                }
                v
            })
            .collect();
        json!({
            "schema": SCHEMA,
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "summary": { "rows": self.rows.len(), "checks": self.checks(), "failed": self.failures().len() },
            "rows": rows,
        })
    }

    pub fn timing_json(&self) -> Value {
        let points: Vec<Value> = self.timings.iter().map(|(k, t)| json!({ "point": k, "seconds": t })).collect();
        json!({ "experiment": self.experiment, "config_hash": self.config_hash, "points": points })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures();
        writeln!(f, "{}: {} rows, {} checks, {} failed", self.experiment, self.rows.len(), self.checks(), failed.len())?;
        for r in failed {
            write!(f, "  FAIL {} {}: lhs {} {} rhs {} (tol {})", r.case, r.quantity, fmt_float(r.lhs), r.relation.as_str(), fmt_float(r.rhs), fmt_float(r.tol))?;
            if let Some(n) = &r.note {
                write!(f, " [{n}]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert_eq!(Row::le("c", "q", Unit::Nats, 1.0, 1.0, 0.0).pass(), Some(true));
        assert_eq!(Row::le("c", "q", Unit::Nats, 1.1, 1.0, 0.05).pass(), Some(false));
        assert_eq!(Row::eq("c", "q", Unit::Nats, 0.6931, 2f64.ln(), 1e-3).pass(), Some(true));
        assert_eq!(Row::gt("c", "q", Unit::Nats, 0.0, 0.0).pass(), Some(false));
        assert_eq!(Row::le("c", "q", Unit::Nats, f64::NAN, 1.0, 0.0).pass(), Some(false));
        assert_eq!(Row::info("c", "q", Unit::Nats, 1.0).pass(), None);
        assert_eq!(Row::flag("c", "q", false).pass(), Some(false));
    }

    #[test]
    fn csv_layout() {
        let rep = Report {
            experiment: "ghz-suite".into(),
            seed: 7,
            config_hash: "ab".into(),
            rows: vec![Row::eq("n4, open", "cmi", Unit::Nats, 2f64.ln(), 2f64.ln(), 1e-9), Row::info("x", "p", Unit::Probability, 0.5)],
            timings: vec![],
        };
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# schema=mtlab.v1 experiment=ghz-suite seed=7 config_hash=ab");
        assert_eq!(lines[1], COLUMNS.join(","));
        assert!(lines[2].starts_with("ghz-suite,\"n4, open\",cmi,nats,eq,6.931471805599e-1,1.000000000000e0,"));
        assert_eq!(lines[3], "ghz-suite,x,p,probability,info,5.000000000000e-1,,,,,,");
        assert_eq!(rep.to_json()["summary"]["checks"], 1);
    }
}
