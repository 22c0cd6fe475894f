//! Figure reproduction, verification and sweeps driven by a config file.
//!
//! Everything here is pure: runners return rendered files and an optional
//! report, and the caller decides where to write them.

pub mod config;
pub mod export;
pub mod figures;
pub mod gate;
pub mod sweep;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use export::Format;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        OutputFile {
            name: name.into(),
            contents,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub report: Option<VerificationReport>,
}

impl RunOutput {
    /// `true` unless an attached report failed.
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Informational entries never fail the report.
    pub asserted: bool,
}

impl Check {
    /// Passes when `|measured - expected| <= tolerance`.
    pub fn asserted(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            measured,
            expected,
            tolerance,
            passed: (measured - expected).abs() <= tolerance,
            asserted: true,
        }
    }

    /// Passes when `measured <= limit`.
    pub fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Check {
            name: name.to_string(),
            measured,
            expected: 0.0,
            tolerance: limit,
            passed: measured <= limit,
            asserted: true,
        }
    }

    /// Passes when `measured >= limit`.
    pub fn at_least(name: &str, measured: f64, limit: f64) -> Self {
        Check {
            name: name.to_string(),
            measured,
            expected: limit,
            tolerance: 0.0,
            passed: measured >= limit,
            asserted: true,
        }
    }

    pub fn bool(name: &str, ok: bool, measured: f64, expected: f64) -> Self {
        Check {
            name: name.to_string(),
            measured,
            expected,
            tolerance: f64::NAN,
            passed: ok,
            asserted: true,
        }
    }

    pub fn info(name: &str, measured: f64, expected: f64) -> Self {
        Check {
            name: name.to_string(),
            measured,
            expected,
            tolerance: f64::NAN,
            passed: true,
            asserted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(name: &str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed || !c.asserted);
        VerificationReport {
            name: name.to_string(),
            checks,
            passed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `name,measured,expected,tolerance,passed,asserted` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.checks {
            w.serialize(c).expect("report row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    /// One `PASS`/`FAIL`/`INFO` line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match (c.asserted, c.passed) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            out.push_str(&format!(
                "{tag} {}: measured {:.3e}, expected {:.3e}, tolerance {:.1e}\n",
                c.name, c.measured, c.expected, c.tolerance
            ));
        }
        out.push_str(&format!(
            "{}: {}\n",
            self.name,
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}
