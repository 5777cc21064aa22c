//! Inner and outer losses, entropy and epistemic measures for the three
//! second-order families.
//!
//! Run with `cargo run --example second_order_losses`.

use evidential::family::Outcome;
use evidential::second_order::SecondOrderParams;

fn show(name: &str, m: &SecondOrderParams, y: Outcome) -> evidential::Result<()> {
    let e = m.epistemic_measures();
    println!("{name}");
    println!("  predictive      {:?}", m.predictive());
    println!("  inner loss      {:.6}", m.predictive_nll(y)?);
    println!("  outer loss      {:.6}", m.expected_nll(y)?);
    println!("  entropy         {:.6}", e.entropy);
    if let Some(c) = e.pseudo_counts {
        println!("  pseudo-counts   {c}");
    }
    if let Some(mi) = e.mutual_information {
        println!("  mutual info     {mi:.6}");
    }
    if let Some(v) = e.var_mu {
        println!("  Var(mu)         {v:.6}");
    }
    Ok(())
}

fn main() -> evidential::Result<()> {
    show("Beta(alpha=8, beta=2), y = 1", &SecondOrderParams::beta(8.0, 2.0)?, Outcome::Class(1))?;
    show("Dirichlet(2, 3, 5), y = 2", &SecondOrderParams::dirichlet(vec![2.0, 3.0, 5.0])?, Outcome::Class(2))?;
    show("NIG(0, 2, 3, 4), y = 0.5", &SecondOrderParams::nig(0.0, 2.0, 3.0, 4.0)?, Outcome::Real(0.5))?;
    show("Gamma(4, 2), y = 3", &SecondOrderParams::gamma(4.0, 2.0)?, Outcome::Count(3))?;
    Ok(())
}
