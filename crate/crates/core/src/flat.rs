//! Flat key/value JSON documents for certificates and reports.
//!
//! Floats are written in scientific notation with 17 significant digits so a
//! document round-trips bit-exactly; non-finite floats are written as the
//! strings `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FlatValue {
    Float(f64),
    Int(u64),
    Str(String),
    Bool(bool),
    Null,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatDoc {
    entries: Vec<(String, FlatValue)>,
}

fn format_float(x: f64) -> String {
    if x.is_nan() {
        "\"nan\"".into()
    } else if x == f64::INFINITY {
        "\"inf\"".into()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        format!("{x:.16e}")
    }
}

impl FlatDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: FlatValue) -> &mut Self {
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value));
        self
    }

    pub fn float(&mut self, key: &str, x: f64) -> &mut Self {
        self.push(key, FlatValue::Float(x))
    }

    pub fn int(&mut self, key: &str, x: u64) -> &mut Self {
        self.push(key, FlatValue::Int(x))
    }

    pub fn string(&mut self, key: &str, x: &str) -> &mut Self {
        self.push(key, FlatValue::Str(x.to_string()))
    }

    pub fn entries(&self) -> &[(String, FlatValue)] {
        &self.entries
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        for (i, (key, value)) in self.entries.iter().enumerate() {
            let rendered = match value {
                FlatValue::Float(x) => format_float(*x),
                FlatValue::Int(x) => x.to_string(),
                FlatValue::Str(s) => Value::String(s.clone()).to_string(),
                FlatValue::Bool(b) => b.to_string(),
                FlatValue::Null => "null".into(),
            };
            let sep = if i + 1 == self.entries.len() { "" } else { "," };
            let _ = writeln!(out, "  {}: {rendered}{sep}", Value::String(key.clone()));
        }
        out.push_str("}\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(map) = value else {
            return Err(invalid("document must be a JSON object"));
        };
        let mut doc = FlatDoc::new();
        for (key, v) in map {
            let fv = match v {
                Value::Null => FlatValue::Null,
                Value::Bool(b) => FlatValue::Bool(b),
                Value::String(s) => FlatValue::Str(s),
                Value::Number(n) => match n.as_u64() {
                    Some(u) if !n.to_string().contains(['.', 'e', 'E']) => FlatValue::Int(u),
                    _ => FlatValue::Float(n.as_f64().unwrap_or(f64::NAN)),
                },
                _ => return Err(invalid(format!("field {key:?} is not a scalar"))),
            };
            doc.entries.push((key, fv));
        }
        Ok(doc)
    }

    fn get(&self, key: &str) -> Result<&FlatValue> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| invalid(format!("document lacks field {key:?}")))
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            FlatValue::Float(x) => Ok(*x),
            FlatValue::Int(x) => Ok(*x as f64),
            FlatValue::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(invalid(format!("field {key:?} is not a number"))),
            },
            _ => Err(invalid(format!("field {key:?} is not a number"))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        match self.get(key)? {
            FlatValue::Int(x) => Ok(*x),
            _ => Err(invalid(format!("field {key:?} is not an unsigned integer"))),
        }
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        match self.get(key)? {
            FlatValue::Str(s) => Ok(s),
            _ => Err(invalid(format!("field {key:?} is not a string"))),
        }
    }
}
