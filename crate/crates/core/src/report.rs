//! Versioned JSON experiment reports.
//!
//! Everything except `timing` is a function of the configuration and seed,
//! so two runs can be compared byte for byte after dropping that field.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// A proved statement checked out numerically.
    Pass,
    /// A proved statement was violated numerically, or the run broke.
    Fail,
    /// Exploration of an open statement; never pass or fail.
    OpenEvidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    Proved,
    Counterexample,
    Conjecture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub statement: String,
    pub kind: StatementKind,
    pub subcommand: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
    pub verdict: Verdict,
    pub metrics: BTreeMap<String, f64>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Notes on non-finite metrics, warnings and failures.
    pub notes: Vec<String>,
    pub details: serde_json::Value,
    pub error: Option<String>,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn new(statement: &str, kind: StatementKind, subcommand: &str, seed: u64, parameters: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            statement: statement.to_string(),
            kind,
            subcommand: subcommand.to_string(),
            seed,
            parameters,
            verdict: match kind {
                StatementKind::Conjecture => Verdict::OpenEvidence,
                _ => Verdict::Fail,
            },
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
            details: serde_json::Value::Null,
            error: None,
            timing: Timing { wall_seconds: 0.0 },
        }
    }

    /// Non-finite values become a note, since JSON has no NaN.
    pub fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        } else {
            self.notes.push(format!("metric {name} is {value}"));
        }
    }

    /// Pass or fail for proved statements and counterexamples; conjectures
    /// stay open-evidence whatever `ok` says.
    pub fn conclude(&mut self, ok: bool) {
        self.verdict = match self.kind {
            StatementKind::Conjecture => Verdict::OpenEvidence,
            _ if ok => Verdict::Pass,
            _ => Verdict::Fail,
        };
    }

    pub fn details<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.details = serde_json::to_value(value)?;
        Ok(())
    }

    pub fn fail_with(&mut self, err: &Error) {
        self.verdict = Verdict::Fail;
        self.error = Some(err.to_string());
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Decodes and checks the schema version.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported report schema {:?}", r.schema_version)));
        }
        if r.kind == StatementKind::Conjecture && r.verdict != Verdict::OpenEvidence && r.error.is_none() {
            return Err(Error::invalid("conjecture reports must be open-evidence"));
        }
        Ok(r)
    }
}

/// Writes `bytes` to `<path>.tmp` and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo_statement", StatementKind::Proved, "demo", 3, BTreeMap::new());
        r.metric("x", 1.5);
        r.metric("bad", f64::NAN);
        r.conclude(true);
        r
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        assert_eq!(r.notes.len(), 1);
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.verdict, Verdict::Pass);
    }

    #[test]
    fn conjectures_never_pass() {
        let mut r = ExperimentReport::new("c", StatementKind::Conjecture, "demo", 0, BTreeMap::new());
        r.conclude(true);
        assert_eq!(r.verdict, Verdict::OpenEvidence);
        let text = r.to_json().unwrap().replace("open-evidence", "pass");
        assert!(ExperimentReport::from_json(&text).is_err());
    }

    #[test]
    fn rejects_other_schemas() {
        let text = sample().to_json().unwrap().replace("\"schema_version\": \"1\"", "\"schema_version\": \"2\"");
        assert!(ExperimentReport::from_json(&text).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("nonlin-lab-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert!(!dir.join("r.json.tmp").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
