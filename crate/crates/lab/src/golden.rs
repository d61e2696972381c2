//! Golden-file regression.
//!
//! Each subdirectory of a golden root holds `config.json`, `expected.csv` and
//! optionally `tolerances.json`:
//!
//! ```json
//! { "default": {"abs": 1e-12, "rel": 1e-9},
//!   "columns": {"lhs": {"abs": 1e-10, "rel": 0}},
//!   "quantities": {"preparation_error": {"lhs": {"abs": 1e-8, "rel": 0}}} }
//! ```
//!
//! Numeric columns are compared within tolerance (quantity overrides beat
//! column overrides beat the default); every other column must match exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiments;

const NUMERIC: [&str; 6] = ["lhs", "lhs_bits", "rhs", "rhs_bits", "tol", "margin"];

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnTol {
    #[serde(default)]
    pub abs: f64,
    #[serde(default)]
    pub rel: f64,
}

impl Default for ColumnTol {
    fn default() -> Self {
        ColumnTol { abs: 1e-12, rel: 1e-9 }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub default: ColumnTol,
    #[serde(default)]
    pub columns: BTreeMap<String, ColumnTol>,
    #[serde(default)]
    pub quantities: BTreeMap<String, BTreeMap<String, ColumnTol>>,
}

impl Tolerances {
    fn for_cell(&self, quantity: &str, column: &str) -> ColumnTol {
        self.quantities
            .get(quantity)
            .and_then(|q| q.get(column))
            .or_else(|| self.columns.get(column))
            .copied()
            .unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellDiff {
    pub case: String,
    pub quantity: String,
    pub column: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for CellDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.column.as_str(), self.actual.as_str()) {
            ("row", "missing") => write!(f, "{} / {}: row missing from output", self.case, self.quantity),
            ("row", _) => write!(f, "{} / {}: row not in golden", self.case, self.quantity),
            _ => write!(f, "{} / {} column {}: expected {:?}, got {:?}", self.case, self.quantity, self.column, self.expected, self.actual),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    Fail(Vec<CellDiff>),
    /// Goldens rewritten; the diffs are what changed.
    Updated(Vec<CellDiff>),
    Skipped(String),
}

#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub name: String,
    pub status: Status,
}

#[derive(Clone, Debug, Default)]
pub struct GoldenReport {
    pub cases: Vec<GoldenCase>,
}

impl GoldenReport {
    pub fn all_pass(&self) -> bool {
        self.cases.iter().all(|c| !matches!(c.status, Status::Fail(_)))
    }

    pub fn skipped(&self) -> Vec<&GoldenCase> {
        self.cases.iter().filter(|c| matches!(c.status, Status::Skipped(_))).collect()
    }
}

impl fmt::Display for GoldenReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            match &c.status {
                Status::Pass => writeln!(f, "PASS {}", c.name)?,
                Status::Fail(d) => {
                    writeln!(f, "FAIL {} ({} cells differ)", c.name, d.len())?;
                    for x in d {
                        writeln!(f, "  {x}")?;
                    }
                }
                Status::Updated(d) => {
                    writeln!(f, "UPDATED {} ({} cells changed)", c.name, d.len())?;
                    for x in d {
                        writeln!(f, "  {x}")?;
                    }
                }
                Status::Skipped(why) => writeln!(f, "SKIP {}: {why}", c.name)?,
            }
        }
        let skipped: Vec<&str> = self.skipped().iter().map(|c| c.name.as_str()).collect();
        if !skipped.is_empty() {
            writeln!(f, "skip list: {}", skipped.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GoldenError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GoldenError + '_ {
    move |source| GoldenError::Io { path: path.to_path_buf(), source }
}

type Table = (String, Vec<BTreeMap<String, String>>);

/// Header comment line and records keyed by column name.
pub fn parse_csv(text: &str) -> Result<Table, String> {
    let header = text.lines().next().filter(|l| l.starts_with('#')).ok_or("missing '#' header line")?.to_string();
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let cols: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != cols.len() {
            return Err(format!("record has {} fields, header has {}", rec.len(), cols.len()));
        }
        rows.push(cols.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
    }
    Ok((header, rows))
}

fn numbers_match(e: &str, a: &str, t: ColumnTol) -> bool {
    if e == a {
        return true;
    }
    match (e.parse::<f64>(), a.parse::<f64>()) {
        (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => (x - y).abs() <= t.abs + t.rel * x.abs().max(y.abs()),
        (Ok(x), Ok(y)) => x.is_nan() && y.is_nan(),
        _ => false,
    }
}

/// Cell-level differences between an expected and an actual CSV.
pub fn diff_csv(expected: &str, actual: &str, tol: &Tolerances) -> Result<Vec<CellDiff>, String> {
    let (eh, erows) = parse_csv(expected).map_err(|e| format!("expected: {e}"))?;
    let (ah, arows) = parse_csv(actual).map_err(|e| format!("actual: {e}"))?;
    let mut diffs = Vec::new();
    let cell = |case: &str, q: &str, col: &str, e: &str, a: &str| CellDiff {
        case: case.into(),
        quantity: q.into(),
        column: col.into(),
        expected: e.into(),
        actual: a.into(),
    };
    if eh != ah {
        diffs.push(cell("#", "header", "header", &eh, &ah));
    }
    let key = |r: &BTreeMap<String, String>| (r.get("case").cloned().unwrap_or_default(), r.get("quantity").cloned().unwrap_or_default());
    let amap: BTreeMap<_, _> = arows.iter().map(|r| (key(r), r)).collect();
    let emap: BTreeMap<_, _> = erows.iter().map(|r| (key(r), r)).collect();
    for (k, e) in &emap {
        let Some(a) = amap.get(k) else {
            diffs.push(cell(&k.0, &k.1, "row", "present", "missing"));
            continue;
        };
        for (col, ev) in e.iter() {
            let av = a.get(col).map(String::as_str).unwrap_or("");
            let same = if NUMERIC.contains(&col.as_str()) { numbers_match(ev, av, tol.for_cell(&k.1, col)) } else { ev == av };
            if !same {
                diffs.push(cell(&k.0, &k.1, col, ev, av));
            }
        }
    }
    for k in amap.keys().filter(|k| !emap.contains_key(*k)) {
        diffs.push(cell(&k.0, &k.1, "row", "missing", "present"));
    }
    Ok(diffs)
}

/// Recomputes every golden under `root` and diffs against `expected.csv`.
/// With `update`, rewrites `expected.csv` and reports what changed.
pub fn verify_golden(root: &Path, update: bool) -> Result<GoldenReport, GoldenError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut report = GoldenReport::default();
    for dir in dirs {
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let status = verify_one(&dir, update)?;
        report.cases.push(GoldenCase { name, status });
    }
    Ok(report)
}

fn verify_one(dir: &Path, update: bool) -> Result<Status, GoldenError> {
    let config = dir.join("config.json");
    let expected_path = dir.join("expected.csv");
    let tol_path = dir.join("tolerances.json");
    if !config.exists() {
        return Ok(Status::Skipped("missing config.json".into()));
    }
    if !expected_path.exists() && !update {
        return Ok(Status::Skipped("missing expected.csv".into()));
    }
    let tol: Tolerances = if tol_path.exists() {
        let text = std::fs::read_to_string(&tol_path).map_err(io_err(&tol_path))?;
        serde_json::from_str(&text).map_err(|e| GoldenError::Format { path: tol_path.clone(), msg: e.to_string() })?
    } else {
        Tolerances::default()
    };
    let cfg = ExperimentConfig::load(&config)?;
    let actual = experiments::run(&cfg)?.to_csv();
    let expected = if expected_path.exists() { Some(std::fs::read_to_string(&expected_path).map_err(io_err(&expected_path))?) } else { None };
    let diffs = match &expected {
        Some(e) => diff_csv(e, &actual, &tol).map_err(|msg| GoldenError::Format { path: expected_path.clone(), msg })?,
        None => Vec::new(),
    };
    if update {
        std::fs::write(&expected_path, &actual).map_err(io_err(&expected_path))?;
        return Ok(Status::Updated(diffs));
    }
    Ok(if diffs.is_empty() { Status::Pass } else { Status::Fail(diffs) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "# schema=mtlab.v1 experiment=x seed=0 config_hash=h\nexperiment,case,quantity,unit,relation,lhs,lhs_bits,rhs,rhs_bits,tol,margin,pass\nx,c,q,nats,le,1.000000000000e0,,2.0e0,,0.0e0,1.0e0,true\n";

    #[test]
    fn identical_tables_match() {
        assert!(diff_csv(A, A, &Tolerances::default()).unwrap().is_empty());
    }

    #[test]
    fn perturbed_column_is_named() {
        let b = A.replace("1.000000000000e0,", "1.000001000000e0,");
        let d = diff_csv(A, &b, &Tolerances::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].column, "lhs");
        let mut loose = Tolerances::default();
        loose.quantities.insert("q".into(), [("lhs".to_string(), ColumnTol { abs: 1e-5, rel: 0.0 })].into());
        assert!(diff_csv(A, &b, &loose).unwrap().is_empty());
    }

    #[test]
    fn missing_rows_and_headers_are_reported() {
        let b = A.replace("seed=0", "seed=1");
        let d = diff_csv(A, &b, &Tolerances::default()).unwrap();
        assert_eq!(d[0].column, "header");
        let header_only: String = A.lines().take(2).map(|l| format!("{l}\n")).collect();
        let d = diff_csv(A, &header_only, &Tolerances::default()).unwrap();
        assert_eq!(d[0].column, "row");
        assert!(parse_csv("no header").is_err());
    }
}
