//! JSON and CSV formats. Integers beyond `2^53` are written as decimal strings.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::LatticeAutomorphism;
use crate::matrix::IntMatrix;

/// Largest magnitude written as a JSON number.
pub const SAFE_INT: u64 = 1 << 53;

pub fn big_to_json(b: &BigInt) -> Value {
    match b.to_i64() {
        Some(v) if v.unsigned_abs() <= SAFE_INT => Value::from(v),
        _ => Value::String(b.to_string()),
    }
}

pub fn json_to_big(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = n.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(Error::invalid(format!("matrix entry {n} is not an integer")))
            }
        }
        Value::String(s) => s
            .trim()
            .parse::<BigInt>()
            .map_err(|_| Error::invalid(format!("matrix entry {s:?} is not a decimal integer"))),
        other => Err(Error::invalid(format!("matrix entry {other} is not an integer"))),
    }
}

/// `{"d": 2, "rows": [[2, 1], [1, 1]]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    pub d: usize,
    pub rows: Vec<Vec<BigInt>>,
}

impl MatrixSpec {
    pub fn from_automorphism(l: &LatticeAutomorphism) -> Self {
        MatrixSpec {
            d: l.dim(),
            rows: l.matrix().rows(),
        }
    }

    pub fn to_automorphism(&self) -> Result<LatticeAutomorphism> {
        if self.rows.is_empty() {
            return Err(Error::invalid("empty matrix"));
        }
        if self.rows.len() != self.d || self.rows.iter().any(|r| r.len() != self.d) {
            return Err(Error::invalid(format!("matrix is not {0}x{0}", self.d)));
        }
        LatticeAutomorphism::new(IntMatrix::from_rows(&self.rows)?)
    }
}

impl Serialize for MatrixSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Value>> = self.rows.iter().map(|r| r.iter().map(big_to_json).collect()).collect();
        #[derive(Serialize)]
        struct Raw {
            d: usize,
            rows: Vec<Vec<Value>>,
        }
        Raw { d: self.d, rows }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            d: Option<usize>,
            rows: Vec<Vec<Value>>,
        }
        let raw = Raw::deserialize(de)?;
        let rows = raw
            .rows
            .iter()
            .map(|r| r.iter().map(json_to_big).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(MatrixSpec {
            d: raw.d.unwrap_or(rows.len()),
            rows,
        })
    }
}

/// Coefficients in ascending order, large ones as strings.
pub fn poly_to_json(p: &crate::poly::IntPoly) -> Vec<Value> {
    p.coeffs().iter().map(big_to_json).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Adds `"schema": name` in front of the serialized fields of `value`.
pub fn with_schema<T: Serialize>(name: &str, value: &T) -> Result<Value> {
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), Value::String(name.into()));
    match serde_json::to_value(value)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    Ok(Value::Object(map))
}

pub fn write_json<T: Serialize>(path: &Path, schema: &str, value: &T) -> Result<()> {
    std::fs::write(path, to_json(&with_schema(schema, value)?)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// CSV with a header row.
pub fn csv_string(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
