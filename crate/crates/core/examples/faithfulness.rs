//! Wasserstein-1 distance between a reference distribution and the
//! second-order distributions predicted by trained models.
//!
//! Run with `cargo run --release --example faithfulness`.

use evidential::datagen::{linspace, SyntheticTask};
use evidential::eval::{faithfulness_sweep, ModelPredictions};
use evidential::nn::{Activation, Head, MlpConfig};
use evidential::reference::ReferenceEstimate;
use evidential::train::{fit, predict_outputs, LossKind, LossSpec, TrainConfig};

fn main() -> evidential::Result<()> {
    let task = SyntheticTask::ClsSine;
    let grid = linspace(0.0, 1.0, 11)?;
    let train = TrainConfig::new(1e-2, 400, 0, 100)?;
    let first = MlpConfig::new(1, vec![16], Activation::Tanh, Head::FirstOrderBernoulli)?;
    let reference = ReferenceEstimate::estimate(task, 200, 15, &grid, &first, &train, 5)?;

    let data = task.generate(200, 9)?;
    let second = first.with_head(Head::SecondOrderBeta);
    let lambdas = [0.0, 0.1];
    let mut models = Vec::new();
    for &lambda in &lambdas {
        let run = fit(&LossSpec::entropy_regularized(LossKind::OuterNll, lambda)?, &train, &second, &data, &grid)?;
        let predictions = predict_outputs(&run.params, &second, &grid)?
            .into_iter()
            .filter_map(|o| o.second_order().cloned())
            .collect();
        models.push(ModelPredictions { loss_kind: LossKind::OuterNll, lambda, predictions });
    }
    let report = faithfulness_sweep(&reference, &models, &lambdas, (0.025, 0.975))?;
    for s in &report.summaries {
        println!(
            "{} lambda={}: mean W1 data {:.4}, extrapolation {:.4}, above baseline at {:.0}% of points",
            s.loss_kind,
            s.lambda,
            s.mean_w1_data,
            s.mean_w1_extrapolation,
            100.0 * s.frac_above_baseline
        );
    }
    let mut csv = Vec::new();
    report.write_w1_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
