use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evidential::datagen::{Dataset, SyntheticTask};
use evidential::experiment::{self, Command, ExperimentConfig, Figure};
use evidential::oracles::run_oracles;
use evidential::plot::{plot, PlotKind};
use evidential::Error;

#[derive(Parser)]
#[command(name = "evidential", version, about = "Second-order uncertainty experiments")]
struct Cli {
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set n=100.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output directory (same as --set out=DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw the training dataset.
    Generate,
    /// Train every configured loss × λ model on the generated dataset.
    Train,
    /// Estimate the reference distribution by refitting first-order models.
    Reference,
    /// Compare trained models with the saved reference.
    Evaluate,
    /// Regenerate the data behind one figure.
    Reproduce {
        /// fig2, fig3, fig4, fig5 or fig6.
        figure: String,
        /// Reduced sizes: d=30, epochs=3000, N=500, λ ∈ {0, 0.01, 0.1}.
        #[arg(long)]
        desk_scale: bool,
    },
    /// Render a CSV report as SVG.
    Plot {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Dataset CSV to scatter on band plots.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Check the closed forms against independent numerical oracles.
    Oracles {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn execute(cli: Cli) -> evidential::Result<()> {
    if let Cmd::Plot { kind, input, output, points } = &cli.command {
        if !input.exists() {
            return Err(Error::MissingFile(input.clone()));
        }
        let data = points.as_deref().map(Dataset::load).transpose()?;
        let svg = plot(&std::fs::read_to_string(input)?, PlotKind::parse(kind)?, data.as_ref())?;
        std::fs::write(output, svg)?;
        return Ok(());
    }
    if let Cmd::Oracles { seed, json } = &cli.command {
        let report = run_oracles(*seed)?;
        if *json {
            println!("{}", report.to_json()?);
        } else {
            print!("{}", report.to_text());
        }
        if !report.passed() {
            return Err(Error::Numeric(format!("oracle failures: {}", report.failures().join(", "))));
        }
        return Ok(());
    }
    let mut pairs = match &cli.config {
        Some(path) => experiment::read_pairs(path)?,
        None => Vec::new(),
    };
    for s in &cli.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(out) = &cli.out {
        pairs.push(("out".into(), out.display().to_string()));
    }
    let (command, fallback, desk) = match cli.command {
        Cmd::Generate => (Command::Generate, SyntheticTask::ClsSine, false),
        Cmd::Train => (Command::Train, SyntheticTask::ClsSine, false),
        Cmd::Reference => (Command::Reference, SyntheticTask::ClsSine, false),
        Cmd::Evaluate => (Command::Evaluate, SyntheticTask::ClsSine, false),
        Cmd::Reproduce { figure, desk_scale } => {
            let fig: Figure = figure.parse()?;
            (Command::Reproduce(fig), fig.task(), desk_scale)
        }
        Cmd::Plot { .. } | Cmd::Oracles { .. } => unreachable!("handled above"),
    };
    let cfg = ExperimentConfig::build(fallback, desk, &pairs)?;
    let outcome = experiment::run(command, &cfg)?;
    for path in &outcome.artifacts {
        println!("{}", path.display());
    }
    println!("{}", outcome.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
