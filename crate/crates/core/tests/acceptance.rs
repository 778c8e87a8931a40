//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;

use ovfree::verify::{criterion, CRITERIA, DEFAULT_SEED};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in CRITERIA {
        match criterion(id, DEFAULT_SEED) {
            Ok(c) => {
                println!("{c}");
                if !c.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("FAIL criterion {id:>2}: error {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.count());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
