//! Synthetic tasks with known ground truth, dataset generation and CSV I/O.
//!
//! Randomness comes from ChaCha8 streams: one master seed plus a stream id
//! gives an independent, reproducible generator (see [`stream_rng`]).

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FirstOrderParams, Outcome};

/// Generator for `(master_seed, stream)`. Different streams of the same seed
/// never overlap.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, used where an API wants a plain `u64`.
pub fn derive_seed(master_seed: u64, stream: u64) -> u64 {
    stream_rng(master_seed, stream).random()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SyntheticTask {
    /// x ~ U[0, 0.5], θ(x) = 0.5 + 0.4 sin 2πx, y ~ Bernoulli(θ(x)).
    ClsSine,
    /// x ~ U[−4, 4], y = x³ + ε with ε ~ N(0, 9).
    RegCubic,
    /// x ≡ 0 and y ~ Bernoulli(theta): a sanity task whose minimizer is known.
    ConstBernoulli { theta: f64 },
}

pub const CUBIC_NOISE_VAR: f64 = 9.0;

impl SyntheticTask {
    pub fn truth(&self, x: f64) -> FirstOrderParams {
        match *self {
            SyntheticTask::ClsSine => FirstOrderParams::Bernoulli { theta: 0.5 + 0.4 * (2.0 * PI * x).sin() },
            SyntheticTask::RegCubic => FirstOrderParams::Gaussian { mean: x.powi(3), var: CUBIC_NOISE_VAR },
            SyntheticTask::ConstBernoulli { theta } => FirstOrderParams::Bernoulli { theta },
        }
    }

    /// Interval the training inputs are drawn from.
    pub fn data_region(&self) -> (f64, f64) {
        match self {
            SyntheticTask::ClsSine => (0.0, 0.5),
            SyntheticTask::RegCubic => (-4.0, 4.0),
            SyntheticTask::ConstBernoulli { .. } => (0.0, 0.0),
        }
    }

    /// Default plotting/evaluation range; extends past the data region.
    pub fn eval_range(&self) -> (f64, f64) {
        match self {
            SyntheticTask::ClsSine | SyntheticTask::ConstBernoulli { .. } => (0.0, 1.0),
            SyntheticTask::RegCubic => (-6.0, 6.0),
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, SyntheticTask::RegCubic)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::config("dataset size must be >= 1"));
        }
        let mut rng = stream_rng(seed, 0);
        let mut normal = BoxMuller::default();
        let (lo, hi) = self.data_region();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = if hi > lo { lo + (hi - lo) * rng.random::<f64>() } else { lo };
            let y = match self.truth(x) {
                FirstOrderParams::Bernoulli { theta } => Outcome::Class(usize::from(rng.random::<f64>() < theta)),
                FirstOrderParams::Gaussian { mean, var } => Outcome::Real(mean + var.sqrt() * normal.sample(&mut rng)),
                _ => unreachable!("tasks are Bernoulli or Gaussian"),
            };
            xs.push(x);
            ys.push(y);
        }
        Ok(Dataset { task: *self, seed, xs, ys })
    }
}

impl fmt::Display for SyntheticTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticTask::ClsSine => write!(f, "cls_sine"),
            SyntheticTask::RegCubic => write!(f, "reg_cubic"),
            SyntheticTask::ConstBernoulli { theta } => write!(f, "const_bernoulli:{theta}"),
        }
    }
}

impl FromStr for SyntheticTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cls_sine" => Ok(SyntheticTask::ClsSine),
            "reg_cubic" => Ok(SyntheticTask::RegCubic),
            other => {
                let theta = other
                    .strip_prefix("const_bernoulli:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|t| *t > 0.0 && *t < 1.0)
                    .ok_or_else(|| Error::config(format!("unknown task '{other}' (cls_sine, reg_cubic, const_bernoulli:<p>)")))?;
                Ok(SyntheticTask::ConstBernoulli { theta })
            }
        }
    }
}

/// Standard normal draws by the Box–Muller transform; caches the second variate.
#[derive(Debug, Default, Clone)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// `n` equidistant points covering `[lo, hi]`, endpoints included exactly.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo < hi) {
        return Err(Error::config(format!("grid needs n >= 2 and lo < hi, got n={n}, [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect())
}

/// Evaluation grid over the task's default range.
pub fn eval_grid(task: &SyntheticTask, n_points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = task.eval_range();
    linspace(lo, hi, n_points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: SyntheticTask,
    pub seed: u64,
    pub xs: Vec<f64>,
    pub ys: Vec<Outcome>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Resamples rows with replacement.
    pub fn bootstrap(&self, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 1);
        let n = self.len();
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        Dataset {
            task: self.task,
            seed,
            xs: idx.iter().map(|&i| self.xs[i]).collect(),
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
        }
    }

    /// Manifest comment line, a `x,y` header, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# task={} seed={} n={}", self.task, self.seed, self.len())?;
        writeln!(w, "x,y")?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            match y {
                Outcome::Class(k) => writeln!(w, "{x},{k}")?,
                Outcome::Real(v) => writeln!(w, "{x},{v}")?,
                Outcome::Count(c) => writeln!(w, "{x},{c}")?,
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let manifest = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let mut task = None;
        let mut seed = None;
        for field in manifest.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("task", v)) => task = Some(v.parse::<SyntheticTask>()?),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let task = task.ok_or_else(|| Error::Parse("dataset manifest lacks task=".into()))?;
        let seed = seed.ok_or_else(|| Error::Parse("dataset manifest lacks seed=".into()))?;
        match lines.next() {
            Some(Ok(h)) if h.trim() == "x,y" => {}
            _ => return Err(Error::Parse("dataset header must be 'x,y'".into())),
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (x, y) = line.split_once(',').ok_or_else(|| Error::Parse(format!("row {i}: expected two columns")))?;
            let bad = |what: &str| Error::Parse(format!("row {i}: bad {what} in '{line}'"));
            xs.push(x.trim().parse::<f64>().map_err(|_| bad("x"))?);
            let y = y.trim();
            ys.push(if task.is_classification() {
                Outcome::Class(y.parse().map_err(|_| bad("class label"))?)
            } else {
                Outcome::Real(y.parse().map_err(|_| bad("y"))?)
            });
        }
        Ok(Dataset { task, seed, xs, ys })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
