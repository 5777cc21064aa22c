//! Outer-loss training of a Beta head: without regularization the
//! pseudo-counts keep growing; an entropy penalty bounds them.
//!
//! Run with `cargo run --release --example dirac_collapse`.

use evidential::datagen::{eval_grid, SyntheticTask};
use evidential::nn::{Activation, Head, MlpConfig};
use evidential::train::{fit, LossKind, LossSpec, TrainConfig};

fn main() -> evidential::Result<()> {
    let task = SyntheticTask::ClsSine;
    let data = task.generate(200, 1)?;
    let grid = eval_grid(&task, 50)?;
    let mlp = MlpConfig::new(1, vec![16, 16], Activation::Tanh, Head::SecondOrderBeta)?;
    let train = TrainConfig::new(5e-3, 1500, 7, 250)?;
    for lambda in [0.0, 0.01] {
        let run = fit(&LossSpec::entropy_regularized(LossKind::OuterNll, lambda)?, &train, &mlp, &data, &grid)?;
        println!("lambda = {lambda}");
        for r in &run.trajectory {
            println!("  epoch {:>5}  loss {:>10.3}  mean pseudo-counts {:>12.2}", r.epoch, r.loss, r.mean_params.iter().sum::<f64>());
        }
    }
    Ok(())
}
