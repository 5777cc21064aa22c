//! The generate / train / reference / evaluate pipeline driven from code,
//! writing the same artifact tree as the command-line tool.
//!
//! Run with `cargo run --release --example experiment_pipeline [OUT_DIR]`.

use evidential::datagen::SyntheticTask;
use evidential::experiment::{run, Command, ExperimentConfig};

fn main() -> evidential::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("evidential-pipeline").display().to_string());
    let pairs: Vec<(String, String)> = [("n", "200"), ("d", "10"), ("epochs", "500"), ("lambda", "0,0.1"), ("grid", "25"), ("out", out.as_str())]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let cfg = ExperimentConfig::build(SyntheticTask::ClsSine, false, &pairs)?;
    for command in [Command::Generate, Command::Train, Command::Reference, Command::Evaluate] {
        let outcome = run(command, &cfg)?;
        println!("{command}:");
        for path in &outcome.artifacts {
            println!("  {}", path.display());
        }
    }
    println!("summary:\n{}", std::fs::read_to_string(cfg.out.join("reports/summary.json"))?);
    Ok(())
}
