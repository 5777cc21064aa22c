//! Render a band table as a self-contained SVG.
//!
//! Run with `cargo run --example plot_svg > band.svg`.

use evidential::plot::{plot, PlotKind};

fn main() -> evidential::Result<()> {
    let mut csv = String::from("x,truth,mean,lo,hi,ref_lo,ref_hi\n");
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        let truth = 0.5 + 0.4 * (2.0 * std::f64::consts::PI * x).sin();
        let spread = 0.02 + 0.3 * (x - 0.25).abs();
        csv.push_str(&format!(
            "{x},{truth},{truth},{},{},{},{}\n",
            truth - 0.01,
            truth + 0.01,
            (truth - spread).max(0.0),
            (truth + spread).min(1.0)
        ));
    }
    println!("{}", plot(&csv, PlotKind::Band, None)?);
    Ok(())
}
