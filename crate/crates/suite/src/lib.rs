//! Helpers shared by the acceptance criteria in `tests/acceptance.rs`.
//!
//! Each criterion prints one `criterion N: PASS|FAIL` line. Add
//! `-- --nocapture` to also see progress output such as training epochs.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

/// Held for the duration of a criterion so timings are not distorted by
/// other criteria running in parallel.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and fails the calling test on FAIL. The line goes
/// straight to the process stdout so it shows even when the harness
/// captures test output.
pub fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {verdict} ({detail})");
    let _ = out.flush();
    assert!(pass, "criterion {n} failed: {detail}");
}

/// Uniform white noise in [-1, 1).
pub fn white(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
