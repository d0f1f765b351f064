use std::fmt::Write as _;

use serde_json::{Map, Value};

/// How a numeric field is rounded in the text rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// 4 decimals.
    Meters,
    /// 3 decimals.
    Degrees,
    /// 3 decimals.
    Pixels,
    /// Shortest round-trip form.
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
enum Field {
    Number(f64, Unit),
    Int(i64),
    Bool(bool),
    Text(String),
}

/// Ordered `key=value` result. The same fields render as text lines or as
/// one JSON object; `extra` entries appear in JSON only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    fields: Vec<(String, Field)>,
    extra: Vec<(String, Value)>,
    /// Printed verbatim after the fields in text mode.
    pub body: Option<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, key: &str, v: f64, unit: Unit) -> Self {
        self.fields.push((key.into(), Field::Number(v, unit)));
        self
    }

    pub fn m(self, key: &str, v: f64) -> Self {
        self.num(key, v, Unit::Meters)
    }

    pub fn deg(self, key: &str, v: f64) -> Self {
        self.num(key, v, Unit::Degrees)
    }

    pub fn px(self, key: &str, v: f64) -> Self {
        self.num(key, v, Unit::Pixels)
    }

    pub fn int(mut self, key: &str, v: usize) -> Self {
        self.fields.push((key.into(), Field::Int(v as i64)));
        self
    }

    pub fn flag(mut self, key: &str, v: bool) -> Self {
        self.fields.push((key.into(), Field::Bool(v)));
        self
    }

    pub fn text(mut self, key: &str, v: impl Into<String>) -> Self {
        self.fields.push((key.into(), Field::Text(v.into())));
        self
    }

    pub fn extra(mut self, key: &str, v: Value) -> Self {
        self.extra.push((key.into(), v));
        self
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (k, f) in &self.fields {
            let v = match f {
                Field::Number(v, Unit::Meters) => format!("{v:.4}"),
                Field::Number(v, Unit::Degrees | Unit::Pixels) => format!("{v:.3}"),
                Field::Number(v, Unit::Plain) => format!("{v}"),
                Field::Int(v) => v.to_string(),
                Field::Bool(v) => v.to_string(),
                Field::Text(v) => v.clone(),
            };
            let _ = writeln!(out, "{k}={v}");
        }
        if let Some(body) = &self.body {
            out.push_str(body);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for (k, f) in &self.fields {
            let v = match f {
                Field::Number(v, _) => serde_json::json!(v),
                Field::Int(v) => Value::from(*v),
                Field::Bool(v) => Value::Bool(*v),
                Field::Text(v) => Value::String(v.clone()),
            };
            map.insert(k.clone(), v);
        }
        for (k, v) in &self.extra {
            map.insert(k.clone(), v.clone());
        }
        Value::Object(map)
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("plain data serializes");
        s.push('\n');
        s
    }
}
