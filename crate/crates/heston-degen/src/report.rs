//! Pass/fail records shared by the verifier suites.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Distinct from failure: the check could not decide (for example a
    /// diverging extrapolation). Counts as a pass with a warning.
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pass => write!(f, "pass"),
            Outcome::Fail => write!(f, "fail"),
            Outcome::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    /// Worst signed margin: nonnegative means the inequality held.
    pub margin: f64,
    /// Worst location, when meaningful.
    pub location: Option<String>,
    /// Free-form detail (empirical constants, sweep sizes).
    pub detail: String,
}

/// Pass/fail record for an inequality suite with measured margins.
#[derive(Debug, Clone, Default)]
pub struct VerdictReport {
    pub checks: Vec<Check>,
}

impl VerdictReport {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        outcome: Outcome,
        margin: f64,
        location: Option<String>,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.into(),
            outcome,
            margin,
            location,
            detail: detail.into(),
        });
    }

    /// True when no check failed (inconclusive outcomes pass with warning).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    pub fn warnings(&self) -> usize {
        self.checks.iter().filter(|c| c.outcome == Outcome::Inconclusive).count()
    }

    pub const CSV_HEADER: &'static str = "check,outcome,margin,location,detail";

    pub fn csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                c.outcome,
                c.margin,
                c.location.as_deref().unwrap_or(""),
                c.detail.replace(',', ";")
            ));
        }
        s
    }

    /// One-line exit summary for CI logs.
    pub fn summary_line(&self) -> String {
        let fails = self.checks.iter().filter(|c| c.outcome == Outcome::Fail).count();
        format!(
            "{}: {} checks, {} failed, {} inconclusive",
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks.len(),
            fails,
            self.warnings()
        )
    }

    pub fn merge(&mut self, other: VerdictReport) {
        self.checks.extend(other.checks);
    }
}
