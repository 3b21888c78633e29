//! Bookkeeping for the acceptance checks in `tests/acceptance.rs`.

use std::fmt::Write;
use std::time::Duration;

/// Failures shown per criterion before the rest are summarized.
const SHOWN_FAILURES: usize = 6;

/// Tally of the individual checks behind one acceptance criterion.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub checks: usize,
    /// Free-form summary appended to the status line.
    pub note: String,
}

impl Outcome {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn budget(&mut self, elapsed: Duration, limit: Duration) {
        self.check(elapsed <= limit, || format!("runtime {elapsed:.2?} exceeds {limit:?}"));
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// One PASS/FAIL line, followed by the first few failing checks.
    pub fn report(&self, index: usize, name: &str, elapsed: Duration) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let note = if self.note.is_empty() { String::new() } else { format!("; {}", self.note) };
        let mut out = format!(
            "{status} {index}: {name} ({}/{} checks passed, {elapsed:.2?}{note})\n",
            self.checks - self.failures.len(),
            self.checks
        );
        for f in self.failures.iter().take(SHOWN_FAILURES) {
            writeln!(out, "       {f}").unwrap();
        }
        if self.failures.len() > SHOWN_FAILURES {
            writeln!(out, "       ... {} more", self.failures.len() - SHOWN_FAILURES).unwrap();
        }
        out
    }
}
