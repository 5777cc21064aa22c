//! Check every closed form against Monte-Carlo, finite-difference and
//! dual-implementation oracles, and print the concept-to-code map.
//!
//! Run with `cargo run --release --example oracle_report`.

use evidential::oracles::{run_oracles, TRACE};

fn main() -> evidential::Result<()> {
    let report = run_oracles(0)?;
    print!("{}", report.to_text());
    println!("{}", if report.passed() { "all oracles passed" } else { "some oracles FAILED" });
    println!();
    for entry in TRACE {
        println!("{}\n  code:  {}\n  tests: {}", entry.concept, entry.operations.join(", "), entry.tests.join(", "));
    }
    Ok(())
}
