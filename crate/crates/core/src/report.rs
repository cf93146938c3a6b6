//! Structured experiment results.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One checked quantity against its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<"`, `"<="`, `">"` or `">="`.
    pub comparison: String,
    pub passed: bool,
}

impl Check {
    fn new(id: &str, description: &str, value: f64, comparison: &str, threshold: f64) -> Self {
        let passed = match comparison {
            "<" => value < threshold,
            "<=" => value <= threshold,
            ">" => value > threshold,
            ">=" => value >= threshold,
            _ => false,
        };
        Self {
            id: id.to_string(),
            description: description.to_string(),
            value,
            threshold,
            comparison: comparison.to_string(),
            passed,
        }
    }

    pub fn below(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self::new(id, description, value, "<", threshold)
    }

    pub fn at_most(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self::new(id, description, value, "<=", threshold)
    }

    pub fn above(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self::new(id, description, value, ">", threshold)
    }

    pub fn at_least(id: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self::new(id, description, value, ">=", threshold)
    }

    pub fn flag(id: &str, description: &str, ok: bool) -> Self {
        Self::new(id, description, if ok { 1.0 } else { 0.0 }, ">=", 1.0)
    }
}

/// Result record of one experiment: checks, named metrics and truncation
/// accounting. Maps are ordered so that serialisation is deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub leakage: f64,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), ..Default::default() }
    }

    pub fn check(&mut self, c: Check) -> &mut Self {
        self.checks.push(c);
        self
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.metrics.insert(key.to_string(), v);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn record_leakage(&mut self, l: f64) -> &mut Self {
        self.leakage = self.leakage.max(l);
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn merge(&mut self, other: ExperimentReport) {
        self.leakage = self.leakage.max(other.leakage);
        for c in other.checks {
            self.checks.push(c);
        }
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{}.{}", other.name, k), v);
        }
        self.notes.extend(other.notes);
    }
}
