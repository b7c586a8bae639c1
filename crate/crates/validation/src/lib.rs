//! Helpers for the acceptance runner: report lookup and one-line verdicts.

use std::time::{Duration, Instant};

use orthodyn::analysis::ComparisonReport;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    pub fn error(e: impl std::fmt::Display) -> Self {
        Self { passed: false, detail: format!("error: {e}") }
    }
}

/// Runs `f`, prints `criterion <n> <name>: PASS|FAIL (<secs>) <detail>` and
/// returns whether it passed. A runtime budget overrun counts as a failure.
pub fn criterion(n: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let mut v = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            v.passed = false;
            v.detail = format!("{}; over budget of {} s", v.detail, b.as_secs());
        }
    }
    println!(
        "criterion {n} {name}: {} ({:.1} s) {}",
        if v.passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        v.detail
    );
    v.passed
}

/// Report with id `id`, if present.
pub fn find<'a>(reports: &'a [ComparisonReport], id: &str) -> Option<&'a ComparisonReport> {
    reports.iter().find(|r| r.experiment_id == id)
}

/// `id=value/threshold:PASS` summaries of the named reports, and whether all
/// of them exist and passed.
pub fn summarize(reports: &[ComparisonReport], ids: &[String]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ids {
        match find(reports, id) {
            Some(r) => {
                ok &= r.passed();
                parts.push(format!(
                    "{id}={:.4e}/{:.4e}:{}",
                    r.value,
                    r.threshold,
                    if r.passed() { "ok" } else { "fail" }
                ));
            }
            None => {
                ok = false;
                parts.push(format!("{id}=missing"));
            }
        }
    }
    (ok, parts.join(" "))
}
