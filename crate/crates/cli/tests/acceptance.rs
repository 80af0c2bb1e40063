//! One line per acceptance criterion. Criteria listed in `KNOWN_FAILURES` are reported but do
//! not fail the run; any other failure does.

use std::path::PathBuf;
use std::process::ExitCode;

use privalloc_cli::checks::{self, CheckOptions};

const KNOWN_FAILURES: [u8; 4] = [3, 7, 8, 9];

fn main() -> ExitCode {
    let options = CheckOptions {
        golden: Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")),
        ..CheckOptions::default()
    };
    let mut unexpected = Vec::new();
    for id in 1..=10u8 {
        match checks::run(id, &options) {
            Ok(outcome) => {
                let note = match (outcome.passed, KNOWN_FAILURES.contains(&id)) {
                    (false, true) => " (known)",
                    (true, true) => " (listed as known failure)",
                    _ => "",
                };
                println!("{}{note} [{:.1}s]", outcome.line(), outcome.elapsed.as_secs_f64());
                if !outcome.passed {
                    for d in &outcome.details {
                        println!("    {d}");
                    }
                    if !KNOWN_FAILURES.contains(&id) {
                        unexpected.push(id);
                    }
                }
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL error: {e}");
                unexpected.push(id);
            }
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
