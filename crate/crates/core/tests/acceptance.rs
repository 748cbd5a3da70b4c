//! Acceptance run: one PASS/FAIL line per criterion at the full tolerances.
//!
//! Criteria 2 and 4 fail on sub-checks that cannot hold as stated (see the README).
//! The run errors if any other criterion fails, or if one of these two starts passing.

use std::process::ExitCode;

use pbreg_core::config::ExperimentConfig;
use pbreg_core::suites::run_criterion;

const EXPECTED_FAILURES: [u8; 2] = [2, 4];

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let mut surprises = Vec::new();
    for id in 1..=9u8 {
        let (passed, line) = match run_criterion(id, &cfg) {
            Ok(rep) => {
                let c = &rep.criteria[0];
                (c.passed, c.line())
            }
            Err(e) => (false, format!("criterion {id} FAIL: error: {e}")),
        };
        println!("{line}");
        if passed == EXPECTED_FAILURES.contains(&id) {
            surprises.push(id);
        }
    }
    if surprises.is_empty() {
        println!("acceptance: criteria 2 and 4 fail as documented, all others pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {surprises:?}");
        ExitCode::FAILURE
    }
}
