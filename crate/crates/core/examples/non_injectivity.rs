//! Different second-order parameters with the same predictive distribution:
//! the inner loss cannot tell them apart, the outer loss can.
//!
//! Run with `cargo run --example non_injectivity`.

use evidential::family::Outcome;
use evidential::second_order::SecondOrderParams;

fn main() -> evidential::Result<()> {
    let y = Outcome::Class(1);
    println!("Beta(c*7, c*3): same predictive, outer loss falls with c");
    for c in [0.1, 1.0, 10.0, 1000.0] {
        let m = SecondOrderParams::beta(7.0 * c, 3.0 * c)?;
        println!("  c={c:>7}: inner {:.6}  outer {:.6}", m.predictive_nll(y)?, m.expected_nll(y)?);
    }

    println!("NIG with beta*(1+nu)/nu held fixed");
    let y = Outcome::Real(1.3);
    for nu in [0.1, 1.0, 10.0, 100.0] {
        let beta = 2.0 * nu / (1.0 + nu);
        let m = SecondOrderParams::nig(0.0, nu, 3.0, beta)?;
        println!("  nu={nu:>6}: {:?}  inner {:.6}  outer {:.6}", m.predictive(), m.predictive_nll(y)?, m.expected_nll(y)?);
    }
    Ok(())
}
