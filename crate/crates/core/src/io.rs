//! Matrix and Hamiltonian serialization.
//!
//! Binary matrix block, all integers little-endian:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 0..4  | magic `b"MTLM"`                         |
//! | 4..6  | version, `u16`, currently 1             |
//! | 6..8  | reserved, `u16`, must be 0              |
//! | 8..12 | rows, `u32`                             |
//! | 12..16| cols, `u32`                             |
//! | 16..  | row-major entries as `(re: f64, im: f64)` |
//!
//! JSON matrices are nested arrays of `[re, im]` pairs, one inner array per row.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hilbert::{Boundary, ChainGeometry, SiteSet};
use crate::linalg::{c64, CMat};
use crate::thermal::{Hamiltonian, PresetSpec, Term};

pub const MATRIX_MAGIC: &[u8; 4] = b"MTLM";
pub const MATRIX_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

fn decode_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Decode(msg.into()))
}

pub fn encode_matrix(m: &CMat) -> Vec<u8> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * r * c);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&u32::try_from(r).expect("row count fits u32").to_le_bytes());
    out.extend_from_slice(&u32::try_from(c).expect("column count fits u32").to_le_bytes());
    for i in 0..r {
        for j in 0..c {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out
}

/// Decodes a binary block. Rejects trailing bytes and non-finite entries.
pub fn decode_matrix(bytes: &[u8]) -> Result<CMat> {
    if bytes.len() < HEADER_LEN {
        return decode_err(format!("{} bytes is shorter than the {HEADER_LEN}-byte header", bytes.len()));
    }
    if &bytes[0..4] != MATRIX_MAGIC {
        return decode_err("bad magic");
    }
    let u16_at = |k: usize| u16::from_le_bytes([bytes[k], bytes[k + 1]]);
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let version = u16_at(4);
    if version != MATRIX_VERSION {
        return decode_err(format!("unsupported version {version}"));
    }
    if u16_at(6) != 0 {
        return decode_err("reserved field is not zero");
    }
    let (rows, cols) = (u32_at(8), u32_at(12));
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or(Error::Decode(format!("{rows}x{cols} overflows")))?;
    if bytes.len() - HEADER_LEN != payload {
        return decode_err(format!("{rows}x{cols} needs {payload} payload bytes, found {}", bytes.len() - HEADER_LEN));
    }
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let k = HEADER_LEN + 16 * (i * cols + j);
            let z = c64::new(f64_at(k), f64_at(k + 8));
            if !(z.re.is_finite() && z.im.is_finite()) {
                return decode_err(format!("entry ({i}, {j}) is not finite"));
            }
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

/// Parses nested `[re, im]` rows. Every row must have the same length.
pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let rows = v.as_array().ok_or(Error::Decode("matrix must be an array of rows".into()))?;
    let cols = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
    let mut m = CMat::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or(Error::Decode(format!("row {i} is not an array")))?;
        if row.len() != cols {
            return decode_err(format!("row {i} has {} entries, row 0 has {cols}", row.len()));
        }
        for (j, z) in row.iter().enumerate() {
            let pair = z.as_array().filter(|p| p.len() == 2);
            let parts = pair.and_then(|p| Some((p[0].as_f64()?, p[1].as_f64()?)));
            let Some((re, im)) = parts else {
                return decode_err(format!("entry ({i}, {j}) is not a [re, im] pair of numbers"));
            };
            m[(i, j)] = c64::new(re, im);
        }
    }
    Ok(m)
}

pub fn matrix_to_json_string(m: &CMat) -> String {
    matrix_to_json(m).to_string()
}

pub fn matrix_from_json_str(s: &str) -> Result<CMat> {
    matrix_from_json(&serde_json::from_str(s)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    sites: SiteSet,
    matrix: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianDoc {
    n: usize,
    #[serde(default)]
    dims: Option<Vec<usize>>,
    boundary: Boundary,
    #[serde(default)]
    terms: Vec<TermDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<PresetSpec>,
}

/// `{n, dims, boundary, terms: [{sites, matrix}], preset?}`.
pub fn hamiltonian_to_json(h: &Hamiltonian) -> String {
    let g = h.geometry();
    let doc = HamiltonianDoc {
        n: g.n(),
        dims: Some(g.dims().to_vec()),
        boundary: g.boundary(),
        terms: h.terms().iter().map(|t| TermDoc { sites: t.sites.clone(), matrix: matrix_to_json(&t.matrix) }).collect(),
        preset: h.preset().cloned(),
    };
    serde_json::to_string_pretty(&doc).expect("plain data serializes")
}

/// Parses a Hamiltonian document. With no terms and a preset, the preset is expanded.
/// `dims` defaults to qubits.
pub fn hamiltonian_from_json(s: &str, max_dim: usize) -> Result<Hamiltonian> {
    let doc: HamiltonianDoc = serde_json::from_str(s)?;
    let dims = doc.dims.unwrap_or_else(|| vec![2; doc.n.min(64)]);
    if dims.len() != doc.n {
        return decode_err(format!("n = {} but {} local dimensions given", doc.n, dims.len()));
    }
    let geom = ChainGeometry::with_cap(dims, doc.boundary, max_dim)?;
    if doc.terms.is_empty() {
        if let Some(p) = &doc.preset {
            if geom.dims().iter().any(|&d| d != 2) {
                return decode_err("presets are defined on qubits only");
            }
            return Hamiltonian::from_preset_capped(p, doc.n, doc.boundary, max_dim);
        }
    }
    let mut terms = Vec::with_capacity(doc.terms.len());
    for (k, t) in doc.terms.into_iter().enumerate() {
        geom.check(&t.sites)?;
        let matrix = matrix_from_json(&t.matrix).map_err(|e| Error::Decode(format!("term {k}: {e}")))?;
        terms.push(Term { sites: t.sites, matrix });
    }
    let h = Hamiltonian::new(geom, terms)?;
    Ok(match doc.preset {
        Some(p) => h.with_preset(p),
        None => h,
    })
}
