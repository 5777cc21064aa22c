//! Log-gamma, digamma, trigamma and the regularized incomplete functions.
//!
//! Run with `cargo run --example special_functions`.

use evidential::specfun::{digamma, ln_beta, ln_gamma, reg_inc_beta, reg_inc_gamma_lower, trigamma};

fn main() -> evidential::Result<()> {
    println!("{:>8} {:>14} {:>14} {:>14}", "x", "ln_gamma", "digamma", "trigamma");
    for x in [0.01, 0.5, 1.0, 2.5, 10.0, 1000.0] {
        println!("{x:>8} {:>14.10} {:>14.10} {:>14.10}", ln_gamma(x)?, digamma(x)?, trigamma(x)?);
    }
    println!("ln B(2, 3)        = {:.12}", ln_beta(2.0, 3.0)?);
    println!("I_0.3(2, 5)       = {:.12}", reg_inc_beta(2.0, 5.0, 0.3)?);
    println!("P(3, 2)           = {:.12}", reg_inc_gamma_lower(3.0, 2.0)?);
    match ln_gamma(-1.0) {
        Err(e) => println!("ln_gamma(-1)      -> {e}"),
        Ok(v) => println!("unexpected value {v}"),
    }
    Ok(())
}
