//! Experiment runner: configuration, artifact layout and the end-to-end
//! pipelines behind the command-line subcommands.
//!
//! Artifacts go under the output directory:
//! `datasets/`, `checkpoints/`, `reference/`, `reports/`, `plots/`, plus one
//! JSON manifest per invocation.
//!
//! Configuration files are flat `key = value` lines (`#` starts a comment).
//! Keys: `task`, `n`, `d`, `grid`, `grid_lo`, `grid_hi`, `hidden`,
//! `activation`, `head`, `loss`, `lambda`, `lr`, `epochs`, `record_every`,
//! `runs`, `seed`, `out`. List values are comma separated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{derive_seed, linspace, Dataset, SyntheticTask};
use crate::error::{Error, Result};
use crate::eval::{faithfulness_sweep, EvalReport, ModelPredictions};
use crate::nn::{Activation, Checkpoint, Head, MlpConfig};
use crate::plot::{plot, PlotKind};
use crate::reference::ReferenceEstimate;
use crate::train::{fit, predict_outputs, LossKind, LossSpec, TrainConfig, TrainRun};

const DATA_STREAM: u64 = 1;
const REFERENCE_STREAM: u64 = 2;
const WEIGHT_STREAM: u64 = 3;

/// Quantile levels of every band.
pub const BAND_LEVELS: (f64, f64) = (0.025, 0.975);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub task: SyntheticTask,
    pub n: usize,
    pub d: usize,
    pub grid_points: usize,
    pub grid_range: (f64, f64),
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Second-order head; the first-order head follows from the task.
    pub head: Head,
    pub losses: Vec<LossKind>,
    pub lambdas: Vec<f64>,
    pub lr: f64,
    pub epochs: usize,
    pub record_every: usize,
    /// Weight seeds per configuration in trajectory studies.
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Protocol defaults of the two studies.
    pub fn for_task(task: SyntheticTask) -> Self {
        let classification = task.is_classification();
        ExperimentConfig {
            task,
            n: 500,
            d: 100,
            grid_points: 100,
            grid_range: task.eval_range(),
            hidden: if classification { vec![32, 32] } else { vec![32] },
            activation: Activation::Tanh,
            head: if classification { Head::SecondOrderBeta } else { Head::SecondOrderNig },
            losses: vec![LossKind::OuterNll, LossKind::InnerNll],
            lambdas: if classification { vec![0.0, 0.001, 0.01, 0.05, 0.1, 0.5] } else { vec![0.0, 0.01] },
            lr: if classification { 5e-4 } else { 1e-4 },
            epochs: 5000,
            record_every: 50,
            runs: 40,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }

    /// Reduced sizes that keep every qualitative effect at minutes-scale runtime.
    pub fn apply_desk_scale(&mut self) {
        self.d = 30;
        self.epochs = 3000;
        self.n = 500;
        self.lambdas = vec![0.0, 0.01, 0.1];
        self.runs = 5;
    }

    /// Defaults for the task named in `pairs` (else `fallback`), optionally
    /// desk-scaled, then every pair applied in order.
    pub fn build(fallback: SyntheticTask, desk_scale: bool, pairs: &[(String, String)]) -> Result<Self> {
        let task = match pairs.iter().rev().find(|(k, _)| k == "task") {
            Some((_, v)) => v.parse()?,
            None => fallback,
        };
        let mut cfg = Self::for_task(task);
        if desk_scale {
            cfg.apply_desk_scale();
        }
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::config(format!("invalid {what} '{value}' for key '{key}'"));
        let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
        match key {
            "task" => {
                let task: SyntheticTask = value.parse()?;
                if task.is_classification() != self.task.is_classification() {
                    *self = Self { out: self.out.clone(), seed: self.seed, ..Self::for_task(task) };
                } else {
                    self.task = task;
                }
            }
            "n" => self.n = value.parse().map_err(|_| bad("integer"))?,
            "d" => self.d = value.parse().map_err(|_| bad("integer"))?,
            "grid" => self.grid_points = value.parse().map_err(|_| bad("integer"))?,
            "grid_lo" => self.grid_range.0 = value.parse().map_err(|_| bad("number"))?,
            "grid_hi" => self.grid_range.1 = value.parse().map_err(|_| bad("number"))?,
            "hidden" => {
                self.hidden = list().map(|w| w.parse().map_err(|_| bad("width list"))).collect::<Result<_>>()?
            }
            "activation" => self.activation = Activation::parse(value)?,
            "head" => self.head = Head::parse(value)?,
            "loss" => self.losses = list().map(str::parse).collect::<Result<_>>()?,
            "lambda" => {
                self.lambdas = list().map(|l| l.parse().map_err(|_| bad("lambda list"))).collect::<Result<_>>()?
            }
            "lr" => self.lr = value.parse().map_err(|_| bad("number"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad("integer"))?,
            "record_every" => self.record_every = value.parse().map_err(|_| bad("integer"))?,
            "runs" => self.runs = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "out" => self.out = PathBuf::from(value),
            other => {
                return Err(Error::config(format!(
                    "unknown key '{other}' (task, n, d, grid, grid_lo, grid_hi, hidden, activation, head, loss, lambda, lr, epochs, record_every, runs, seed, out)"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be >= 1"));
        }
        if self.d < 2 {
            return Err(Error::config("d must be >= 2"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be >= 1"));
        }
        if self.losses.is_empty() || self.losses.contains(&LossKind::FirstOrderNll) {
            return Err(Error::config("loss must list second-order losses (inner, outer)"));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::config("lambda values must be finite and >= 0"));
        }
        let expected = if self.task.is_classification() { Head::SecondOrderBeta } else { Head::SecondOrderNig };
        if self.head != expected {
            return Err(Error::config(format!("head {:?} does not fit task {}", self.head, self.task)));
        }
        self.grid()?;
        self.train_config(0)?;
        self.second_order_mlp()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        linspace(self.grid_range.0, self.grid_range.1, self.grid_points)
    }

    pub fn first_order_mlp(&self) -> Result<MlpConfig> {
        let head = if self.task.is_classification() { Head::FirstOrderBernoulli } else { Head::FirstOrderGaussian };
        MlpConfig::new(1, self.hidden.clone(), self.activation, head)
    }

    pub fn second_order_mlp(&self) -> Result<MlpConfig> {
        MlpConfig::new(1, self.hidden.clone(), self.activation, self.head)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        TrainConfig::new(self.lr, self.epochs, seed, self.record_every)
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, DATA_STREAM)
    }

    pub fn reference_seed(&self) -> u64 {
        derive_seed(self.seed, REFERENCE_STREAM)
    }

    /// Initialization seed of weight run `run`.
    pub fn weight_seed(&self, run: usize) -> u64 {
        derive_seed(derive_seed(self.seed, WEIGHT_STREAM), run as u64)
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| {
                line.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::config(format!("config line {}: expected key = value, got '{line}'", i + 1)))
            })
        })
        .collect()
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_pairs(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Reference and model bands for N ∈ {100, 500, 1000} (classification).
    Fig2,
    /// W1 to the reference over the grid, per loss and λ (classification).
    Fig3,
    /// Mean head-parameter trajectories over weight seeds (classification).
    Fig4,
    /// Reference and model bands (regression).
    Fig5,
    /// Mean head-parameter trajectories (regression).
    Fig6,
}

impl Figure {
    pub fn task(self) -> SyntheticTask {
        match self {
            Figure::Fig2 | Figure::Fig3 | Figure::Fig4 => SyntheticTask::ClsSine,
            Figure::Fig5 | Figure::Fig6 => SyntheticTask::RegCubic,
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            other => Err(Error::config(format!("unknown figure '{other}' (fig2..fig6)"))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Figure::Fig2 => 2,
            Figure::Fig3 => 3,
            Figure::Fig4 => 4,
            Figure::Fig5 => 5,
            Figure::Fig6 => 6,
        };
        write!(f, "fig{n}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Reference,
    Evaluate,
    Reproduce(Figure),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Generate => write!(f, "generate"),
            Command::Train => write!(f, "train"),
            Command::Reference => write!(f, "reference"),
            Command::Evaluate => write!(f, "evaluate"),
            Command::Reproduce(fig) => write!(f, "reproduce-{fig}"),
        }
    }
}

/// The output directory tree.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["datasets", "checkpoints", "reference", "reports", "plots"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Artifacts { root: root.to_path_buf() })
    }

    pub fn dataset(&self, n: usize) -> PathBuf {
        self.root.join("datasets").join(format!("train_n{n}.csv"))
    }

    pub fn reference(&self, n: usize) -> PathBuf {
        self.root.join("reference").join(format!("reference_n{n}.csv"))
    }

    pub fn checkpoint(&self, tag: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{tag}.ckpt"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn plot(&self, name: &str) -> PathBuf {
        self.root.join("plots").join(name)
    }
}

/// File-name tag of one trained model.
pub fn model_tag(n: usize, kind: LossKind, lambda: f64, run: usize) -> String {
    format!("n{n}_{kind}_lambda{lambda}_run{run}")
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: String,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    version: &'static str,
    wall_time_s: f64,
    artifacts: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Seeds {
    master: u64,
    data: u64,
    reference: u64,
    weights: u64,
}

/// Files written by a command, and its manifest.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    art: Artifacts,
    written: Vec<PathBuf>,
}

impl Runner<'_> {
    fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn write(&mut self, path: PathBuf, content: &[u8]) -> Result<()> {
        std::fs::write(&path, content)?;
        self.record(path);
        Ok(())
    }

    fn generate(&mut self, n: usize) -> Result<Dataset> {
        let data = self.cfg.task.generate(n, self.cfg.data_seed())?;
        let path = self.art.dataset(n);
        data.save(&path)?;
        self.record(path);
        Ok(data)
    }

    /// Loads the dataset written by `generate`.
    fn dataset(&self, n: usize) -> Result<Dataset> {
        let data = Dataset::load(&self.art.dataset(n))?;
        if data.task != self.cfg.task {
            return Err(Error::config(format!("dataset task {} does not match config task {}", data.task, self.cfg.task)));
        }
        Ok(data)
    }

    fn reference(&mut self, n: usize) -> Result<ReferenceEstimate> {
        let grid = self.cfg.grid()?;
        let est = ReferenceEstimate::estimate(
            self.cfg.task,
            n,
            self.cfg.d,
            &grid,
            &self.cfg.first_order_mlp()?,
            &self.cfg.train_config(0)?,
            self.cfg.reference_seed(),
        )?;
        let path = self.art.reference(n);
        est.save(&path)?;
        self.record(path);
        Ok(est)
    }

    /// Trains (or resumes from a finished checkpoint) every loss × λ model for `runs` seeds.
    fn train_models(&mut self, data: &Dataset, lambdas: &[f64], runs: usize) -> Result<Vec<(LossKind, f64, usize, Checkpoint)>> {
        let mlp = self.cfg.second_order_mlp()?;
        let grid = self.cfg.grid()?;
        let jobs: Vec<(LossKind, f64, usize)> = self
            .cfg
            .losses
            .iter()
            .flat_map(|&k| lambdas.iter().flat_map(move |&l| (0..runs).map(move |r| (k, l, r))))
            .collect();
        let n = data.len();
        let art = &self.art;
        let cfg = self.cfg;
        let results: Vec<Result<(LossKind, f64, usize, Checkpoint, Vec<PathBuf>)>> = jobs
            .par_iter()
            .map(|&(kind, lambda, run)| {
                let tag = model_tag(n, kind, lambda, run);
                let ckpt_path = art.checkpoint(&tag);
                let traj_path = art.report(&format!("trajectory_{tag}.csv"));
                let train = cfg.train_config(cfg.weight_seed(run))?;
                if let Ok(existing) = Checkpoint::load(&ckpt_path) {
                    if existing.config == mlp && existing.seed == train.seed && existing.epoch == train.epochs && traj_path.exists() {
                        return Ok((kind, lambda, run, existing, vec![]));
                    }
                }
                let loss = LossSpec::entropy_regularized(kind, lambda)?;
                let trained: TrainRun = fit(&loss, &train, &mlp, data, &grid)?;
                let ckpt = trained.checkpoint();
                ckpt.save(&ckpt_path)?;
                let mut buf = Vec::new();
                trained.write_trajectory_csv(&mut buf)?;
                std::fs::write(&traj_path, buf)?;
                Ok((kind, lambda, run, ckpt, vec![ckpt_path, traj_path]))
            })
            .collect();
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            let (k, l, run, ckpt, paths) = r?;
            self.written.extend(paths);
            out.push((k, l, run, ckpt));
        }
        Ok(out)
    }

    /// Sweep of trained run-0 models against a reference, with CSV/JSON reports.
    fn evaluate(&mut self, reference: &ReferenceEstimate, models: &[(LossKind, f64, usize, Checkpoint)], prefix: &str) -> Result<EvalReport> {
        let grid = &reference.grid;
        let mut preds = Vec::new();
        for (kind, lambda, run, ckpt) in models {
            if *run != 0 {
                continue;
            }
            let outputs = predict_outputs(&ckpt.params, &ckpt.config, grid)?;
            let predictions = outputs
                .into_iter()
                .map(|o| o.second_order().cloned().ok_or_else(|| Error::config("checkpoint is not a second-order model")))
                .collect::<Result<_>>()?;
            preds.push(ModelPredictions { loss_kind: *kind, lambda: *lambda, predictions });
        }
        let report = faithfulness_sweep(reference, &preds, &self.cfg.lambdas, BAND_LEVELS)?;
        let mut buf = Vec::new();
        report.write_w1_csv(&mut buf)?;
        self.write(self.art.report(&format!("{prefix}w1.csv")), &buf)?;
        self.write(self.art.report(&format!("{prefix}summary.json")), report.summary_json()?.as_bytes())?;
        for s in &report.summaries {
            let mut buf = Vec::new();
            report.write_band_csv(s, &mut buf)?;
            let name = format!("{prefix}bands_{}_lambda{}_{}.csv", s.loss_kind, s.lambda, s.component);
            self.write(self.art.report(&name), &buf)?;
        }
        Ok(report)
    }

    fn plot_file(&mut self, csv: &Path, kind: PlotKind, svg_name: &str, points: Option<&Dataset>) -> Result<()> {
        let svg = plot(&std::fs::read_to_string(csv)?, kind, points)?;
        self.write(self.art.plot(svg_name), svg.as_bytes())
    }

    /// Combines the per-run trajectories of one (loss, λ) into `run,epoch,...` rows.
    fn combine_trajectories(&mut self, n: usize, kind: LossKind, lambda: f64, runs: usize, name: &str) -> Result<PathBuf> {
        let mut out = String::new();
        for run in 0..runs {
            let path = self.art.report(&format!("trajectory_{}.csv", model_tag(n, kind, lambda, run)));
            let text = std::fs::read_to_string(&path)?;
            let mut lines = text.lines();
            let header = lines.next().ok_or_else(|| Error::Parse(format!("empty trajectory {}", path.display())))?;
            if run == 0 {
                out.push_str(&format!("run,{header}\n"));
            }
            for line in lines {
                out.push_str(&format!("{run},{line}\n"));
            }
        }
        let path = self.art.report(name);
        self.write(path.clone(), out.as_bytes())?;
        Ok(path)
    }
}

/// Executes a subcommand and writes its manifest.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let art = Artifacts::create(&cfg.out)?;
    let mut r = Runner { cfg, art, written: Vec::new() };
    let n = cfg.n;
    match command {
        Command::Generate => {
            r.generate(n)?;
        }
        Command::Train => {
            let data = r.dataset(n)?;
            r.train_models(&data, &cfg.lambdas, 1)?;
        }
        Command::Reference => {
            r.reference(n)?;
        }
        Command::Evaluate => {
            let reference = ReferenceEstimate::load(&r.art.reference(n))?;
            let mut models = Vec::new();
            for &kind in &cfg.losses {
                for &lambda in &cfg.lambdas {
                    let path = r.art.checkpoint(&model_tag(n, kind, lambda, 0));
                    if path.exists() {
                        models.push((kind, lambda, 0, Checkpoint::load(&path)?));
                    }
                }
            }
            r.evaluate(&reference, &models, "")?;
        }
        Command::Reproduce(fig) => reproduce(&mut r, fig)?,
    }
    let manifest = Manifest {
        command: command.to_string(),
        config: cfg,
        seeds: Seeds {
            master: cfg.seed,
            data: cfg.data_seed(),
            reference: cfg.reference_seed(),
            weights: cfg.weight_seed(0),
        },
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: r.written.clone(),
    };
    let manifest_path = r.art.root.join(format!("manifest_{command}.json"));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome { artifacts: r.written, manifest: manifest_path })
}

fn reproduce(r: &mut Runner, fig: Figure) -> Result<()> {
    let cfg = r.cfg;
    if cfg.task.is_classification() != fig.task().is_classification() {
        return Err(Error::config(format!("{fig} needs task {}, config has {}", fig.task(), cfg.task)));
    }
    match fig {
        Figure::Fig2 | Figure::Fig5 => {
            let sizes: Vec<usize> = if fig == Figure::Fig2 { vec![100, 500, 1000] } else { vec![cfg.n] };
            let lambdas: Vec<f64> = if fig == Figure::Fig2 { vec![0.0] } else { cfg.lambdas.clone() };
            for n in sizes {
                let data = r.generate(n)?;
                let reference = r.reference(n)?;
                let models = r.train_models(&data, &lambdas, 1)?;
                let prefix = format!("{fig}_n{n}_");
                let report = r.evaluate(&reference, &models, &prefix)?;
                for s in &report.summaries {
                    let csv = r.art.report(&format!("{prefix}bands_{}_lambda{}_{}.csv", s.loss_kind, s.lambda, s.component));
                    let primary = s.component == report.components[0];
                    let name = if fig == Figure::Fig2 && s.loss_kind == LossKind::OuterNll {
                        format!("{fig}_n{n}.svg")
                    } else {
                        format!("{prefix}{}_lambda{}_{}.svg", s.loss_kind, s.lambda, s.component)
                    };
                    r.plot_file(&csv, PlotKind::Band, &name, primary.then_some(&data))?;
                }
            }
        }
        Figure::Fig3 => {
            let data = r.generate(cfg.n)?;
            let reference = r.reference(cfg.n)?;
            let models = r.train_models(&data, &cfg.lambdas, 1)?;
            let prefix = format!("{fig}_");
            r.evaluate(&reference, &models, &prefix)?;
            let csv = r.art.report(&format!("{prefix}w1.csv"));
            r.plot_file(&csv, PlotKind::W1, &format!("{fig}.svg"), None)?;
        }
        Figure::Fig4 | Figure::Fig6 => {
            let data = r.generate(cfg.n)?;
            r.train_models(&data, &cfg.lambdas, cfg.runs)?;
            for &kind in &cfg.losses {
                for &lambda in &cfg.lambdas {
                    let name = format!("{fig}_{kind}_lambda{lambda}");
                    let csv = r.combine_trajectories(cfg.n, kind, lambda, cfg.runs, &format!("{name}.csv"))?;
                    r.plot_file(&csv, PlotKind::Trajectory, &format!("{name}.svg"), None)?;
                }
            }
        }
    }
    Ok(())
}
