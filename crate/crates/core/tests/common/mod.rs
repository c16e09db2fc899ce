//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod accounting;
pub mod book;
pub mod features;
pub mod fixtures;
pub mod grad;
pub mod lifecycle;

use std::io::Write;

/// Writes one criterion line to the real stdout, past the test harness capture.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("criterion {criterion:>2}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
