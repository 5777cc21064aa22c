//! Reference second-order distribution: refit a first-order network on
//! fresh datasets and read off empirical CDFs and quantile bands.
//!
//! Run with `cargo run --release --example reference_distribution`.

use evidential::datagen::{linspace, SyntheticTask};
use evidential::nn::{Activation, Head, MlpConfig};
use evidential::reference::ReferenceEstimate;
use evidential::train::TrainConfig;

fn main() -> evidential::Result<()> {
    let grid = linspace(0.0, 1.0, 6)?;
    let mlp = MlpConfig::new(1, vec![16], Activation::Tanh, Head::FirstOrderBernoulli)?;
    let train = TrainConfig::new(1e-2, 400, 0, 100)?;
    let reference = ReferenceEstimate::estimate(SyntheticTask::ClsSine, 200, 20, &grid, &mlp, &train, 3)?;
    println!("{} converged fits", reference.d());
    println!("{:>6} {:>8} {:>8} {:>8} {:>10}", "x", "truth", "q2.5", "q97.5", "F(truth)");
    for (i, &x) in grid.iter().enumerate() {
        let truth = 0.5 + 0.4 * (2.0 * std::f64::consts::PI * x).sin();
        let band = reference.band(i, (0.025, 0.975))?;
        println!("{x:>6.2} {truth:>8.3} {:>8.3} {:>8.3} {:>10.2}", band.lo, band.hi, reference.empirical_cdf(i, truth)?);
        if let Some(w) = band.warning {
            println!("       note: {w}");
        }
    }
    Ok(())
}
