//! Segment-convexity probes of the inner loss in weight space.
//!
//! Run with `cargo run --release --example convexity`.

use evidential::datagen::SyntheticTask;
use evidential::nn::{Activation, Head, MlpConfig};
use evidential::train::{convexity_probe, LossKind, LossSpec};

fn main() -> evidential::Result<()> {
    let loss = LossSpec::plain(LossKind::InnerNll);
    let cls = SyntheticTask::ClsSine.generate(50, 1)?;
    let linear_beta = MlpConfig::new(1, vec![], Activation::Tanh, Head::SecondOrderBeta)?;
    let r = convexity_probe(&loss, &linear_beta, &cls.xs, &cls.ys, 100, 3.0, 1e-9, 1)?;
    println!("linear Beta head:  {}/{} violating segments, worst gap {:.2e}", r.violations, r.segments, r.worst_gap);

    let reg = SyntheticTask::RegCubic.generate(50, 1)?;
    let linear_nig = MlpConfig::new(1, vec![], Activation::Tanh, Head::SecondOrderNig)?;
    let r = convexity_probe(&loss, &linear_nig, &reg.xs, &reg.ys, 1000, 3.0, 1e-9, 1)?;
    println!("linear NIG head:   {}/{} violating segments, worst gap {:.2e}", r.violations, r.segments, r.worst_gap);
    Ok(())
}
