//! NIG head on the cubic regression task: outer-loss training drives the
//! evidence parameter nu upward.
//!
//! Run with `cargo run --release --example regression_nig`.

use evidential::datagen::{eval_grid, SyntheticTask};
use evidential::nn::{Activation, Head, MlpConfig};
use evidential::train::{fit, predict_outputs, LossKind, LossSpec, TrainConfig};

fn main() -> evidential::Result<()> {
    let task = SyntheticTask::RegCubic;
    let data = task.generate(300, 2)?;
    let grid = eval_grid(&task, 25)?;
    let mlp = MlpConfig::new(1, vec![32], Activation::Tanh, Head::SecondOrderNig)?;
    let run = fit(&LossSpec::plain(LossKind::OuterNll), &TrainConfig::new(1e-3, 2000, 4, 250)?, &mlp, &data, &grid)?;
    let names = run.param_names();
    for r in &run.trajectory {
        let cells: Vec<String> = names.iter().zip(&r.mean_params).map(|(n, v)| format!("{n}={v:.3}")).collect();
        println!("epoch {:>5}  {}", r.epoch, cells.join("  "));
    }
    let outputs = predict_outputs(&run.params, &mlp, &[-2.0, 0.0, 2.0])?;
    for (x, o) in [-2.0, 0.0, 2.0].iter().zip(&outputs) {
        let m = o.second_order().expect("second-order head");
        println!("x={x:>4}: {m:?}  Var(mu)={:?}", m.epistemic_measures().var_mu);
    }
    Ok(())
}
