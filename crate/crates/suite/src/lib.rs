//! Runner for the acceptance criteria in `tests/acceptance.rs`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// What a criterion measured: one line per sub-check.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<(bool, String)>,
}

impl Outcome {
    pub fn check(&mut self, pass: bool, msg: impl Into<String>) {
        self.lines.push((pass, msg.into()));
    }

    pub fn pass(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|(p, _)| *p)
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget: Duration,
    pub run: fn(&mut Outcome) -> Result<(), String>,
}

/// Runs each criterion, prints a `PASS`/`FAIL` line for it, and returns the
/// number that failed. Errors, panics and overrunning the budget all fail.
pub fn run_all(criteria: &[Criterion]) -> usize {
    let mut failed = 0;
    for c in criteria {
        let mut out = Outcome::default();
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(|| (c.run)(&mut out)));
        let elapsed = start.elapsed();
        match res {
            Ok(Ok(())) => {}
            Ok(Err(e)) => out.check(false, format!("error: {e}")),
            Err(_) => out.check(false, "panicked"),
        }
        let in_time = elapsed <= c.budget;
        out.check(
            in_time,
            format!("runtime {:.2} s (budget {} s)", elapsed.as_secs_f64(), c.budget.as_secs()),
        );
        let ok = out.pass();
        if !ok {
            failed += 1;
        }
        println!("{} [{}] {}", if ok { "PASS" } else { "FAIL" }, c.id, c.name);
        for (p, msg) in &out.lines {
            println!("    {} {msg}", if *p { "ok  " } else { "FAIL" });
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed of {}",
        criteria.len() - failed,
        criteria.len()
    );
    failed
}
