//! The report emitted by `compute`, in text and JSON form.

use serde::{Deserialize, Serialize};
use specdeg::galerkin::DegreeRecord;
use specdeg::selftest::SuiteResult;

pub const EXIT_NONZERO: i32 = 0;
pub const EXIT_ZERO: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// The comparison run itself could not be certified.
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    pub fn new(status: CheckStatus, detail: impl Into<String>) -> Self {
        Check {
            status,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub normalization: Check,
    pub stabilization: Check,
    pub restriction: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// input | margin | tail | stabilization | zero_set | pipeline
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub degree_ms: f64,
    pub checks_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub group: String,
    pub seed: u64,
    pub result: Option<DegreeRecord>,
    /// The degree in display form.
    pub degree: Option<String>,
    pub verdict: String,
    pub checks: Option<Checks>,
    pub failure: Option<Failure>,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("problem: {} (group {})\n", self.kind, self.group));
        if let Some(d) = &self.degree {
            s.push_str(&format!("degree: {d}\n"));
        }
        if let Some(r) = &self.result {
            s.push_str(&format!("level N: {}\n", r.level));
            match r.epsilon {
                Some(e) => s.push_str(&format!("margin: epsilon = {e:.3e}, tail bound = {:.3e}\n", r.tail_bound)),
                None => s.push_str("margin: empty domain\n"),
            }
            s.push_str(&format!(
                "boundary samples: {}, reference level {}, zeros at level N: {}\n",
                r.diagnostics.boundary_samples, r.diagnostics.reference_level, r.diagnostics.zeros_at_level
            ));
            for (n, why) in &r.diagnostics.rejected_levels {
                s.push_str(&format!("rejected level {n}: {why}\n"));
            }
        }
        if let Some(c) = &self.checks {
            for (name, check) in [
                ("normalization", &c.normalization),
                ("stabilization", &c.stabilization),
                ("restriction", &c.restriction),
            ] {
                let status = format!("{:?}", check.status).to_lowercase();
                s.push_str(&format!("check {name}: {status} ({})\n", check.detail));
            }
        }
        if let Some(f) = &self.failure {
            s.push_str(&format!("failed check: {}: {}\n", f.check, f.message));
        }
        s.push_str(&format!("verdict: {}\n", self.verdict));
        if let Some(t) = &self.timing {
            s.push_str(&format!(
                "timing: degree {:.1} ms, checks {:.1} ms, total {:.1} ms\n",
                t.degree_ms, t.checks_ms, t.total_ms
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

impl SelftestReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            let status = if r.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{status} {} ({} checks)\n", r.suite, r.checks));
            for f in &r.failures {
                s.push_str(&format!("    {f}\n"));
            }
        }
        s
    }
}
