//! Structured pass/warn/fail ledger for checks against published values.
//!
//! WARN is reserved for cases where a published closed form disagrees with
//! the value recomputed from the defining construction; the definitions win
//! and both values are recorded.  FAIL means the build itself is wrong.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

/// One verification check.
#[derive(Clone, Debug, Serialize)]
pub struct ReportEntry {
    /// Stable check identifier, e.g. `delta.alpha.xy_x.d3`.
    pub id: String,
    /// What published object the check is anchored to.
    pub anchor: String,
    pub computed: String,
    pub expected: String,
    pub tolerance: f64,
    pub status: Status,
    pub note: String,
}

impl ReportEntry {
    /// Scalar comparison; `warn_on_mismatch` downgrades FAIL to WARN for
    /// published-value discrepancies.
    pub fn value_check(
        id: impl Into<String>,
        anchor: impl Into<String>,
        computed: f64,
        expected: f64,
        tol: f64,
        warn_on_mismatch: bool,
    ) -> Self {
        let ok = (computed - expected).abs() <= tol;
        Self {
            id: id.into(),
            anchor: anchor.into(),
            computed: format!("{computed:.12e}"),
            expected: format!("{expected:.12e}"),
            tolerance: tol,
            status: if ok {
                Status::Pass
            } else if warn_on_mismatch {
                Status::Warn
            } else {
                Status::Fail
            },
            note: if ok {
                String::new()
            } else {
                format!("deviation {:.3e}", (computed - expected).abs())
            },
        }
    }

    pub fn bool_check(
        id: impl Into<String>,
        anchor: impl Into<String>,
        ok: bool,
        detail: impl Into<String>,
        tol: f64,
    ) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.into(),
            computed: detail.into(),
            expected: "true".into(),
            tolerance: tol,
            status: if ok { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }
}

/// Ordered collection of report entries.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = ReportEntry>) {
        self.entries.extend(entries);
    }

    pub fn has_fail(&self) -> bool {
        self.entries.iter().any(|e| e.status == Status::Fail)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for e in &self.entries {
            match e.status {
                Status::Pass => c.0 += 1,
                Status::Warn => c.1 += 1,
                Status::Fail => c.2 += 1,
            }
        }
        c
    }

    /// One JSON object per line, in insertion order.
    pub fn to_json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("report entries serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_lines_one_per_entry() {
        let mut r = VerificationReport::new();
        r.push(ReportEntry::value_check("a", "x", 1.0, 1.0, 1e-9, false));
        r.push(ReportEntry::value_check("b", "y", 1.0, 2.0, 1e-9, true));
        let text = r.to_json_lines();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"PASS\""));
        assert!(lines[1].contains("\"WARN\""));
        assert!(!r.has_fail());
        assert_eq!(r.counts(), (1, 1, 0));
    }
}
