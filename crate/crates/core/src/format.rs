//! JSON document format for programs and values.
//!
//! Values are single-key objects tagged by their domain, e.g.
//! `{"int64": 7}`, `{"tuple": [["a", {"bool": true}]]}` or
//! `{"collection": {"kind": "bag", "elem": ..., "items": [...]}}`. Floats
//! that JSON cannot express are written as the strings `"NaN"`, `"inf"`
//! and `"-inf"`.

use std::collections::BTreeSet;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::ir::{CollectionKind, ItemType, Name, Program, Value};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown format version {0}")]
    UnknownFormatVersion(u64),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Parse {
            line: e.line(),
            reason: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrDocument {
    pub format_version: u64,
    pub flavors_used: Vec<Name>,
    pub program: Program,
}

impl IrDocument {
    pub fn new(program: Program) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            flavors_used: flavors_used(&program),
            program,
        }
    }
}

/// Sorted flavor names referenced anywhere in `program`.
pub fn flavors_used(program: &Program) -> Vec<Name> {
    fn walk(p: &Program, acc: &mut BTreeSet<Name>) {
        for i in &p.body {
            if !i.flavor.is_empty() {
                acc.insert(i.flavor.clone());
            }
            for n in i.nested_programs() {
                walk(n, acc);
            }
        }
    }
    let mut acc = BTreeSet::new();
    walk(program, &mut acc);
    acc.into_iter().collect()
}

pub fn serialize(program: &Program) -> String {
    let doc = IrDocument::new(program.clone());
    serde_json::to_string_pretty(&doc).expect("documents always serialize")
}

pub fn deserialize(text: &str) -> Result<Program, FormatError> {
    Ok(deserialize_document(text)?.program)
}

pub fn deserialize_document(text: &str) -> Result<IrDocument, FormatError> {
    #[derive(Deserialize)]
    struct Header {
        format_version: u64,
    }
    // The version is checked before the body so that documents from a
    // future format fail with a clear error rather than a schema mismatch.
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let header: Header = serde_json::from_value(raw).map_err(|e| FormatError::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(FormatError::UnknownFormatVersion(header.format_version));
    }
    Ok(serde_json::from_str(text)?)
}

pub fn value_to_json(v: &Value) -> String {
    serde_json::to_string(v).expect("values always serialize")
}

pub fn value_to_json_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values always serialize")
}

pub fn value_from_json(text: &str) -> Result<Value, FormatError> {
    Ok(serde_json::from_str(text)?)
}

/// A data file: either a JSON array holding one value per program
/// parameter, or a single value for single-parameter programs.
pub fn inputs_from_json(text: &str) -> Result<Vec<Value>, FormatError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(vec![value_from_json(text)?])
    }
}

pub fn values_to_json(vs: &[Value]) -> String {
    serde_json::to_string(vs).expect("values always serialize")
}

struct Float(f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_nan() {
            s.serialize_str("NaN")
        } else if x.is_infinite() {
            s.serialize_str(if x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(x)
        }
    }
}

#[derive(Serialize)]
struct CollectionRef<'a> {
    kind: CollectionKind,
    elem: &'a ItemType,
    items: &'a [Value],
    #[serde(skip_serializing_if = "Option::is_none")]
    extents: Option<&'a [usize]>,
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(1))?;
        match self {
            Value::Bool(b) => m.serialize_entry("bool", b)?,
            Value::Int64(i) => m.serialize_entry("int64", i)?,
            Value::Float64(x) => m.serialize_entry("float64", &Float(*x))?,
            Value::Date(d) => m.serialize_entry("date", d)?,
            Value::Text(t) => m.serialize_entry("text", &**t)?,
            Value::Tuple(t) => {
                let pairs: Vec<(&str, &Value)> = t.iter().map(|(n, v)| (&**n, v)).collect();
                m.serialize_entry("tuple", &pairs)?
            }
            Value::Collection(c) => m.serialize_entry(
                "collection",
                &CollectionRef {
                    kind: c.kind(),
                    elem: c.elem_type(),
                    items: c.elements(),
                    extents: c.extents(),
                },
            )?,
        }
        m.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireFloat {
    Num(f64),
    Special(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireCollection {
    kind: CollectionKind,
    elem: ItemType,
    items: Vec<Value>,
    #[serde(default)]
    extents: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum WireValue {
    Bool(bool),
    Int64(i64),
    Float64(WireFloat),
    Date(i64),
    Text(String),
    Tuple(Vec<(String, Value)>),
    Collection(WireCollection),
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match WireValue::deserialize(d)? {
            WireValue::Bool(b) => Value::Bool(b),
            WireValue::Int64(i) => Value::Int64(i),
            WireValue::Float64(WireFloat::Num(x)) => Value::Float64(x),
            WireValue::Float64(WireFloat::Special(s)) => Value::Float64(match s.as_str() {
                "NaN" => f64::NAN,
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                other => return Err(de::Error::custom(format!("invalid float `{other}`"))),
            }),
            WireValue::Date(d) => Value::Date(d),
            WireValue::Text(t) => Value::text(&t),
            WireValue::Tuple(fields) => Value::try_tuple(fields).map_err(de::Error::custom)?,
            WireValue::Collection(c) => {
                Value::collection_with_extents(c.kind, c.elem, c.items, c.extents)
                    .map_err(de::Error::custom)?
            }
        })
    }
}
