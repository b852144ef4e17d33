//! Pass/fail audit reports.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// One audited claim. Numeric claims carry the horizon or bound they were
/// computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            passed,
            value: None,
            threshold: None,
            horizon: None,
            detail: String::new(),
        }
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn horizon(mut self, h: u64) -> Self {
        self.horizon = Some(h);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub schema_version: u32,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Extra structured output (tables, witnesses).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>) -> Self {
        AuditReport {
            name: name.into(),
            schema_version: SCHEMA_VERSION,
            passed: true,
            checks: Vec::new(),
            warnings: Vec::new(),
            data: serde_json::Value::Null,
            config_hash: None,
            timestamp: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Fold another report's checks in, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: AuditReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}/{}", c.name);
            self.push(c);
        }
        for w in other.warnings {
            self.warn(format!("{prefix}: {w}"));
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn with_config_hash(mut self, bytes: &[u8]) -> Self {
        self.config_hash = Some(config_hash(bytes));
        self
    }

    pub fn stamp(&mut self, started: Instant) {
        let unix_seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.timestamp = Some(Timestamp {
            unix_seconds,
            runtime_ms: started.elapsed().as_millis() as u64,
        });
    }
}

/// Hex SHA-256 of a configuration's bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_tracks_checks() {
        let mut r = AuditReport::new("demo");
        r.push(Check::new("a", true).value(0.5).horizon(10));
        assert!(r.passed);
        r.push(Check::new("b", false));
        assert!(!r.passed);
        assert_eq!(r.failed_checks().count(), 1);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
