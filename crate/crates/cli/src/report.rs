//! Report assembly: fixed 12-significant-digit number formatting, tolerance checks,
//! and the per-atom CSV table.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

/// Rounds to 12 significant digits. Zero is normalized to `+0`; non-finite values
/// become the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x.is_infinite() {
        Value::from(if x > 0.0 { "inf" } else { "-inf" })
    } else {
        Value::from(round12(x))
    }
}

fn round12(x: f64) -> f64 {
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    r + 0.0
}

/// [`num`] as plain text for CSV cells.
pub fn num_text(x: f64) -> String {
    match num(x) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

/// One tolerance check: passes when `observed <= allowed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub allowed: f64,
    pub probes: usize,
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, allowed: f64, probes: usize) -> Self {
        Self {
            name: name.into(),
            observed,
            allowed,
            probes,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.observed <= self.allowed
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "name": self.name,
            "observed": num(self.observed),
            "allowed": num(self.allowed),
            "probes": self.probes,
            "passed": self.passed(),
        });
        if let Some(d) = &self.detail {
            v["detail"] = Value::from(d.as_str());
        }
        v
    }
}

/// One row of the per-atom table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomRow {
    pub section: String,
    pub position: String,
    pub algebra: String,
    pub atom: usize,
    pub outcomes: String,
    pub quantity: String,
    pub value: String,
}

impl AtomRow {
    pub fn new(
        section: &str,
        position: &str,
        algebra: &str,
        atom: usize,
        outcomes: &str,
        quantity: &str,
        value: f64,
    ) -> Self {
        Self {
            section: section.into(),
            position: position.into(),
            algebra: algebra.into(),
            atom,
            outcomes: outcomes.into(),
            quantity: quantity.into(),
            value: num_text(value),
        }
    }
}

pub fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
}

pub fn write_csv(path: &Path, rows: &[AtomRow]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        wtr.write_record([
            "section", "position", "algebra", "atom", "outcomes", "quantity", "value",
        ])?;
    }
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| e.into_error())?;
    std::fs::File::create(path)?.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(12.5f64.sqrt()).to_string(), "3.53553390593");
        assert_eq!(num(2.0 * 12.5f64.sqrt()).to_string(), "7.07106781187");
        assert_eq!(num(-0.0).to_string(), "0.0");
        assert_eq!(num(1e-20 / 3.0).to_string(), "3.33333333333e-21");
        assert_eq!(num(f64::INFINITY), Value::from("inf"));
        assert_eq!(num_text(f64::NEG_INFINITY), "-inf");
        assert_eq!(num_text(0.1 + 0.2), "0.3");
    }

    #[test]
    fn check_passes_on_boundary() {
        assert!(Check::new("c", 1e-6, 1e-6, 1).passed());
        assert!(!Check::new("c", f64::NAN, 1.0, 1).passed());
        assert!(!Check::new("c", 2e-6, 1e-6, 1).passed());
    }
}
