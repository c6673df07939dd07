//! Report records shared by every command. The JSON schema and the CSV
//! column layout are described in `docs/report-schema.md`.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// passes when `value < threshold`
    ResidualBelow,
    /// passes when `value > threshold` (negative controls)
    ResidualAbove,
    /// passes when `value == threshold`
    DimensionEquals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub kind: CheckKind,
    /// `null` in JSON when the computation failed
    pub value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    fn new(
        id: impl Into<String>,
        anchor: &str,
        kind: CheckKind,
        value: f64,
        threshold: f64,
    ) -> CheckRecord {
        let pass = match kind {
            CheckKind::ResidualBelow => value < threshold,
            CheckKind::ResidualAbove => value > threshold,
            CheckKind::DimensionEquals => value == threshold,
        };
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            kind,
            value: value.is_finite().then_some(value),
            threshold,
            pass: pass && value.is_finite(),
            note: None,
        }
    }

    pub fn below(id: impl Into<String>, anchor: &str, value: f64, threshold: f64) -> CheckRecord {
        CheckRecord::new(id, anchor, CheckKind::ResidualBelow, value, threshold)
    }

    pub fn above(id: impl Into<String>, anchor: &str, value: f64, threshold: f64) -> CheckRecord {
        CheckRecord::new(id, anchor, CheckKind::ResidualAbove, value, threshold)
    }

    pub fn dim(id: impl Into<String>, anchor: &str, value: usize, expected: usize) -> CheckRecord {
        CheckRecord::new(
            id,
            anchor,
            CheckKind::DimensionEquals,
            value as f64,
            expected as f64,
        )
    }

    /// A failed check for a computation that returned an error.
    pub fn failed(
        id: impl Into<String>,
        anchor: &str,
        kind: CheckKind,
        threshold: f64,
        error: impl ToString,
    ) -> CheckRecord {
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            kind,
            value: None,
            threshold,
            pass: false,
            note: Some(error.to_string()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckRecord {
        self.note = Some(note.into());
        self
    }
}

/// Effective settings after resolving flags, environment and config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsEcho {
    pub tol: f64,
    pub jet_order: usize,
    pub grid: usize,
    pub seed: u64,
}

/// Coordinates, signature and domain of a chart built by the tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDefinition {
    pub label: String,
    pub coordinates: Vec<String>,
    pub signature: (usize, usize),
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// the configuration document the chart was built from
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub suite: String,
    pub pass: bool,
    pub settings: SettingsEcho,
    pub checks: Vec<CheckRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartDefinition>,
}

impl SuiteReport {
    /// Sorts the checks by id and sets the overall verdict.
    pub fn new(
        suite: impl Into<String>,
        settings: SettingsEcho,
        mut checks: Vec<CheckRecord>,
    ) -> SuiteReport {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            suite: suite.into(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            settings,
            checks,
            timing_ms: None,
            chart: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// One row per check: `suite,id,anchor,kind,value,threshold,pass,note`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "suite",
            "id",
            "anchor",
            "kind",
            "value",
            "threshold",
            "pass",
            "note",
        ])
        .expect("in-memory write");
        for c in &self.checks {
            let kind = serde_json::to_value(c.kind).expect("kind serialises");
            w.write_record([
                self.suite.as_str(),
                &c.id,
                &c.anchor,
                kind.as_str().unwrap_or_default(),
                &c.value.map(|v| format!("{v:e}")).unwrap_or_default(),
                &format!("{:e}", c.threshold),
                if c.pass { "true" } else { "false" },
                c.note.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Human-oriented one-line-per-check summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let value = c
                .value
                .map(|v| format!("{v:.3e}"))
                .unwrap_or_else(|| "error".into());
            let _ = writeln!(
                out,
                "{} {} = {} (threshold {:e})",
                if c.pass { "PASS" } else { "FAIL" },
                c.id,
                value,
                c.threshold
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn echo() -> SettingsEcho {
        SettingsEcho {
            tol: 1e-8,
            jet_order: 3,
            grid: 32,
            seed: 7,
        }
    }

    #[test]
    fn verdicts_follow_kind() {
        assert!(CheckRecord::below("a", "", 1e-9, 1e-8).pass);
        assert!(!CheckRecord::below("a", "", 1e-7, 1e-8).pass);
        assert!(CheckRecord::above("a", "", 0.1, 1e-3).pass);
        assert!(CheckRecord::dim("a", "", 3, 3).pass);
        assert!(!CheckRecord::dim("a", "", 3, 2).pass);
        assert!(!CheckRecord::below("a", "", f64::NAN, 1.0).pass);
    }

    #[test]
    fn checks_are_sorted_and_csv_has_header() {
        let r = SuiteReport::new(
            "demo",
            echo(),
            vec![
                CheckRecord::below("b", "x", 0.0, 1.0),
                CheckRecord::dim("a", "y", 1, 2),
            ],
        );
        assert_eq!(r.checks[0].id, "a");
        assert!(!r.pass);
        let csv = r.to_csv();
        assert!(csv.starts_with("suite,id,anchor,kind,value,threshold,pass,note\n"));
        assert!(csv.contains("demo,a,y,dimension-equals,1e0,2e0,false,"));
        let back: SuiteReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
