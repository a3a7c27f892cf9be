//! Reporting helpers for the acceptance suite.

use std::io::Write;
use std::time::{Duration, Instant};

/// Runs one acceptance criterion, prints a single `PASS`/`FAIL` line
/// straight to stdout (bypassing the test harness capture) and returns
/// whether it passed. Exceeding `limit` fails the criterion.
pub fn criterion(name: &str, limit: Duration, check: impl FnOnce() -> (bool, String)) -> bool {
    let start = Instant::now();
    let (ok, detail) = check();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let passed = ok && in_time;
    let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
    let line = format!(
        "{} {name}: {detail} ({timing}{})",
        if passed { "PASS" } else { "FAIL" },
        if in_time { "" } else { ", over time limit" }
    );
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    passed
}
