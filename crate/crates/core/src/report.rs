//! Machine-readable check reports and a JSON writer that prints every
//! float with 17 significant digits.

use serde::Serialize;
use serde_json::Value;

/// Schema version embedded in every report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Inconclusive,
    Violated,
}

impl Verdict {
    /// Verdict for a claimed inequality `slack >= 0` observed with standard
    /// error `stderr` and deterministic tolerance `tol`.
    pub fn from_slack(slack: f64, stderr: f64, tol: f64) -> Verdict {
        if !slack.is_finite() || !stderr.is_finite() {
            return Verdict::Inconclusive;
        }
        if slack - 3.0 * stderr >= -tol {
            Verdict::Holds
        } else if slack + 3.0 * stderr + tol < 0.0 {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }

    /// Verdict for an approximate equality `|diff| <= 3 stderr + tol`.
    pub fn from_agreement(diff: f64, stderr: f64, tol: f64) -> Verdict {
        if !diff.is_finite() || !stderr.is_finite() {
            return Verdict::Inconclusive;
        }
        if diff.abs() <= 3.0 * stderr + tol {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }

    /// Statistical verdict for a test whose outcome is either clean within
    /// bounds or not; no inconclusive zone.
    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }

    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedEstimate {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
}

impl NamedEstimate {
    pub fn new(label: impl Into<String>, value: f64, stderr: f64) -> Self {
        NamedEstimate {
            label: label.into(),
            value,
            stderr,
        }
    }
}

/// Outcome of one inequality or identity check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub operation: String,
    pub params: Value,
    pub estimates: Vec<NamedEstimate>,
    pub inequality: String,
    /// Signed margin; nonnegative when the claim holds at the point values.
    pub slack: f64,
    pub stderr: f64,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

/// Serializes with floats as `{:.16e}` and non-finite floats as `null`.
pub fn to_json_string<S: Serialize>(value: &S) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    let mut out = String::new();
    write_value(&v, &mut out, 0);
    out.push('\n');
    out
}

/// Formats one float the same way the JSON writer does.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, out: &mut String, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(|x| x.is_number());
            if flat {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, out, level);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(x, out, level + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let len = map.len();
            for (i, (k, x)) in map.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, out, level + 1);
                if i + 1 < len {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        let s = to_json_string(&json!({ "x": x, "n": 3 }));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64().unwrap(), x);
        assert_eq!(back["n"].as_u64().unwrap(), 3);
        assert!(s.contains("3.0000000000000004e-1"));
    }

    #[test]
    fn non_finite_becomes_null() {
        let s = to_json_string(&json!({ "x": 1.0 }));
        assert!(s.contains("1.0000000000000000e0"));
        assert_eq!(format_float(f64::INFINITY), "null");
    }

    #[test]
    fn verdict_zones() {
        assert_eq!(Verdict::from_slack(1.0, 0.1, 0.0), Verdict::Holds);
        assert_eq!(Verdict::from_slack(-0.1, 0.1, 0.0), Verdict::Inconclusive);
        assert_eq!(Verdict::from_slack(-1.0, 0.1, 0.0), Verdict::Violated);
        assert_eq!(Verdict::from_slack(-1e-13, 0.0, 1e-12), Verdict::Holds);
        assert_eq!(
            Verdict::Holds.combine(Verdict::Inconclusive),
            Verdict::Inconclusive
        );
    }
}
