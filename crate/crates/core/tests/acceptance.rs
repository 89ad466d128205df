//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;

use sclkit::acceptance::run_all;

fn main() -> ExitCode {
    let results = run_all(0);
    for r in &results {
        println!("{r} ({:.2}s)", r.elapsed.as_secs_f64());
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria pass", results.len(), results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
