//! Cell values and their canonical form.
//!
//! Every value that leaves an engine goes through [`canonicalize_cell`] before
//! it is stored in a [`ResultTable`](super::ResultTable). Canonical cells have
//! a unique encoding, so structural equality on [`CellValue`] is the exact
//! comparison used everywhere else in the crate.

use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Largest number of fractional digits a decimal keeps in its recorded precision.
const MAX_DECIMAL_PRECISION: u8 = 38;

/// A non-integral, finite decimal number.
///
/// `precision` is the number of fractional digits in the shortest decimal
/// rendering of `value`; it is derived, never supplied, so two decimals with the
/// same value always carry the same precision.
#[derive(Debug, Clone, Copy)]
pub struct Decimal {
    value: f64,
    precision: u8,
}

impl Decimal {
    fn from_finite(value: f64) -> Self {
        let rendered = format!("{value}");
        let precision = rendered
            .split_once('.')
            .map(|(_, frac)| frac.len().min(MAX_DECIMAL_PRECISION as usize) as u8)
            .unwrap_or(0);
        Self { value, precision }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn precision(&self) -> u8 {
        self.precision
    }
}

/// A canonicalized result cell.
#[derive(Debug, Clone)]
pub enum CellValue {
    Null,
    Boolean(bool),
    Integer(i64),
    Decimal(Decimal),
    Text(String),
    Date(NaiveDate),
    Timestamp(DateTime<Utc>),
}

/// A value as reported by an engine, before canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Null,
    Integer(i64),
    Real(f64),
    /// Decimal literal text, e.g. `"12.50"` from a NUMERIC column.
    DecimalText(String),
    Text(String),
    Boolean(bool),
    /// ISO-8601 calendar date text.
    Date(String),
    /// ISO-8601 timestamp text, with or without an offset. Offset-less values are taken as UTC.
    Timestamp(String),
    Blob(Vec<u8>),
    /// A value of an engine type with no canonical counterpart.
    Unsupported {
        engine_type: String,
    },
}

impl RawValue {
    pub fn engine_type_name(&self) -> &str {
        match self {
            RawValue::Null => "NULL",
            RawValue::Integer(_) => "INTEGER",
            RawValue::Real(_) => "REAL",
            RawValue::DecimalText(_) => "DECIMAL",
            RawValue::Text(_) => "TEXT",
            RawValue::Boolean(_) => "BOOLEAN",
            RawValue::Date(_) => "DATE",
            RawValue::Timestamp(_) => "TIMESTAMP",
            RawValue::Blob(_) => "BLOB",
            RawValue::Unsupported { engine_type } => engine_type,
        }
    }
}

/// Maps an engine value to its canonical [`CellValue`].
///
/// Integral decimals collapse to `Integer`, text loses trailing whitespace and
/// timestamps are normalized to UTC.
pub fn canonicalize_cell(raw: &RawValue) -> Result<CellValue, ModelError> {
    let unrepresentable = |detail: String| ModelError::UnrepresentableValue {
        engine_type: raw.engine_type_name().to_string(),
        detail,
    };
    Ok(match raw {
        RawValue::Null => CellValue::Null,
        RawValue::Integer(v) => CellValue::Integer(*v),
        RawValue::Real(v) => number_cell(*v).ok_or_else(|| unrepresentable(format!("{v}")))?,
        RawValue::DecimalText(text) => {
            let text = text.trim();
            if let Ok(v) = text.parse::<i64>() {
                CellValue::Integer(v)
            } else {
                let v: f64 = text
                    .parse()
                    .map_err(|_| unrepresentable(format!("not a number: {text:?}")))?;
                number_cell(v).ok_or_else(|| unrepresentable(text.to_string()))?
            }
        }
        RawValue::Text(s) => CellValue::Text(s.trim_end().to_string()),
        RawValue::Boolean(b) => CellValue::Boolean(*b),
        RawValue::Date(s) => {
            CellValue::Date(parse_date(s).ok_or_else(|| unrepresentable(format!("not a date: {s:?}")))?)
        }
        RawValue::Timestamp(s) => CellValue::Timestamp(
            parse_timestamp(s).ok_or_else(|| unrepresentable(format!("not a timestamp: {s:?}")))?,
        ),
        RawValue::Blob(bytes) => return Err(unrepresentable(format!("{} bytes", bytes.len()))),
        RawValue::Unsupported { .. } => return Err(unrepresentable("unsupported type".into())),
    })
}

/// Integral values in the 64-bit range become `Integer`, everything else finite becomes `Decimal`.
fn number_cell(v: f64) -> Option<CellValue> {
    if !v.is_finite() {
        return None;
    }
    // -2^63 is exact in f64; 2^63 is the first value past i64::MAX.
    const LOWER: f64 = -9_223_372_036_854_775_808.0;
    if v.fract() == 0.0 && (LOWER..-LOWER).contains(&v) {
        Some(CellValue::Integer(v as i64))
    } else {
        Some(CellValue::Decimal(Decimal::from_finite(v)))
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts.with_timezone(&Utc));
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| naive.and_utc())
}

impl CellValue {
    /// Builds a cell from a float, applying the integral-collapse rule.
    pub fn number(v: f64) -> Result<Self, ModelError> {
        canonicalize_cell(&RawValue::Real(v))
    }

    pub fn text(s: impl Into<String>) -> Self {
        CellValue::Text(s.into().trim_end().to_string())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, CellValue::Null)
    }

    /// Numeric view for `Integer` and `Decimal` cells.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(v) => Some(*v as f64),
            CellValue::Decimal(d) => Some(d.value),
            _ => None,
        }
    }

    /// The engine-level view of this cell; canonicalizing it yields the cell back.
    pub fn to_raw(&self) -> RawValue {
        match self {
            CellValue::Null => RawValue::Null,
            CellValue::Boolean(b) => RawValue::Boolean(*b),
            CellValue::Integer(v) => RawValue::Integer(*v),
            CellValue::Decimal(d) => RawValue::Real(d.value),
            CellValue::Text(s) => RawValue::Text(s.clone()),
            CellValue::Date(d) => RawValue::Date(d.format("%Y-%m-%d").to_string()),
            CellValue::Timestamp(ts) => RawValue::Timestamp(format_timestamp(ts)),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            CellValue::Null => 0,
            CellValue::Boolean(_) => 1,
            CellValue::Integer(_) | CellValue::Decimal(_) => 2,
            CellValue::Text(_) => 3,
            CellValue::Date(_) => 4,
            CellValue::Timestamp(_) => 5,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            CellValue::Null => "null",
            CellValue::Boolean(_) => "bool",
            CellValue::Integer(_) => "int",
            CellValue::Decimal(_) => "dec",
            CellValue::Text(_) => "text",
            CellValue::Date(_) => "date",
            CellValue::Timestamp(_) => "ts",
        }
    }
}

fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
}

/// Exact comparison of an integer against a finite float.
fn cmp_int_float(i: i64, f: f64) -> Ordering {
    const BOUND: f64 = 9_223_372_036_854_775_808.0;
    if f >= BOUND {
        return Ordering::Less;
    }
    if f < -BOUND {
        return Ordering::Greater;
    }
    let floor = f.floor();
    match i.cmp(&(floor as i64)) {
        Ordering::Equal if f > floor => Ordering::Less,
        other => other,
    }
}

/// Total order: Null < Boolean < numbers < Text < Date < Timestamp.
///
/// Integers and decimals share one numeric order. An integer and a decimal with
/// the same value (impossible for canonical cells) order integer first so the
/// order stays consistent with `Eq`.
impl Ord for CellValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use CellValue::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Boolean(a), Boolean(b)) => a.cmp(b),
            (Integer(a), Integer(b)) => a.cmp(b),
            (Decimal(a), Decimal(b)) => a.value.total_cmp(&b.value),
            (Integer(a), Decimal(b)) => cmp_int_float(*a, b.value).then(Ordering::Less),
            (Decimal(a), Integer(b)) => cmp_int_float(*b, a.value).reverse().then(Ordering::Greater),
            (Text(a), Text(b)) => a.cmp(b),
            (Date(a), Date(b)) => a.cmp(b),
            (Timestamp(a), Timestamp(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for CellValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for CellValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CellValue {}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Null => f.write_str("NULL"),
            CellValue::Boolean(b) => write!(f, "{b}"),
            CellValue::Integer(v) => write!(f, "{v}"),
            CellValue::Decimal(d) => write!(f, "{}", d.value),
            CellValue::Text(s) => f.write_str(s),
            CellValue::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            CellValue::Timestamp(ts) => f.write_str(&format_timestamp(ts)),
        }
    }
}

// Canonical tagged-union encoding: {"t":"int","v":5}, {"t":"dec","v":1.5,"p":1}, {"t":"null"}.
impl Serialize for CellValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let len = match self {
            CellValue::Null => 1,
            CellValue::Decimal(_) => 3,
            _ => 2,
        };
        let mut map = serializer.serialize_map(Some(len))?;
        map.serialize_entry("t", self.tag())?;
        match self {
            CellValue::Null => {}
            CellValue::Boolean(b) => map.serialize_entry("v", b)?,
            CellValue::Integer(v) => map.serialize_entry("v", v)?,
            CellValue::Decimal(d) => {
                map.serialize_entry("v", &d.value)?;
                map.serialize_entry("p", &d.precision)?;
            }
            CellValue::Text(s) => map.serialize_entry("v", s)?,
            CellValue::Date(d) => map.serialize_entry("v", &d.format("%Y-%m-%d").to_string())?,
            CellValue::Timestamp(ts) => map.serialize_entry("v", &format_timestamp(ts))?,
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodedCell {
    t: String,
    #[serde(default)]
    v: Option<serde_json::Value>,
    // Derived from the value on decode; accepted for round-tripping only.
    #[serde(default, rename = "p")]
    _precision: Option<u8>,
}

impl<'de> Deserialize<'de> for CellValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let enc = EncodedCell::deserialize(deserializer)?;
        let value = enc.v.as_ref();
        let missing = || D::Error::custom(format!("cell of type {:?} is missing \"v\"", enc.t));
        let str_value = || {
            value
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(missing)
        };
        let raw = match enc.t.as_str() {
            "null" => RawValue::Null,
            "bool" => RawValue::Boolean(value.and_then(|v| v.as_bool()).ok_or_else(missing)?),
            "int" => RawValue::Integer(value.and_then(|v| v.as_i64()).ok_or_else(missing)?),
            "dec" => RawValue::Real(value.and_then(|v| v.as_f64()).ok_or_else(missing)?),
            "text" => RawValue::Text(str_value()?),
            "date" => RawValue::Date(str_value()?),
            "ts" => RawValue::Timestamp(str_value()?),
            other => return Err(D::Error::custom(format!("unknown cell type {other:?}"))),
        };
        canonicalize_cell(&raw).map_err(D::Error::custom)
    }
}
