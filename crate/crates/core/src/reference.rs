//! Reference second-order distribution: the law of the fitted first-order
//! parameters θ̂(x) when the training set of size N is redrawn d times.
//!
//! Each resample is fitted independently (in parallel) with the first-order
//! loss; per grid point the d fitted values are kept per component, and the
//! sorted marginal samples give the empirical CDF and quantile bands.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{derive_seed, Dataset, SyntheticTask};
use crate::error::{Error, Result};
use crate::marginal::nearest_rank;
use crate::nn::MlpConfig;
use crate::second_order::Component;
use crate::train::{fit, predict_grid, LossKind, LossSpec, TrainConfig};

/// Largest fraction of diverged refits tolerated.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.1;

/// Below this many resamples a 95% band is flagged as unreliable.
pub const MIN_BAND_RESAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Fresh datasets from the task generator.
    Fresh,
    /// Rows of one observed dataset drawn with replacement.
    Bootstrap,
}

/// Seeds and status of one refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleRun {
    pub index: usize,
    pub data_seed: u64,
    pub weight_seed: u64,
    /// `None` when the fit converged, else the divergence message.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    pub task: SyntheticTask,
    pub mode: ResampleMode,
    pub n: usize,
    pub master_seed: u64,
    pub grid: Vec<f64>,
    pub components: Vec<Component>,
    pub runs: Vec<ResampleRun>,
    /// `values[r][i][c]`: component c of θ̂ at grid point i for the r-th kept run.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `sorted[c][i]`: ascending samples of component c at grid point i.
    pub sorted: Vec<Vec<Vec<f64>>>,
}

/// Empirical quantile band; `warning` is set when d is too small for the levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub warning: Option<String>,
}

fn first_order_components(mlp: &MlpConfig) -> Result<Vec<Component>> {
    match mlp.head {
        crate::nn::Head::FirstOrderBernoulli => Ok(vec![Component::Theta]),
        crate::nn::Head::FirstOrderGaussian => Ok(vec![Component::Mu, Component::Sigma2]),
        head => Err(Error::config(format!("reference fits need a first-order head, got {head:?}"))),
    }
}

impl ReferenceEstimate {
    /// Fits `d` first-order models on fresh size-`n` datasets.
    pub fn estimate(
        task: SyntheticTask,
        n: usize,
        d: usize,
        grid: &[f64],
        mlp: &MlpConfig,
        train: &TrainConfig,
        master_seed: u64,
    ) -> Result<Self> {
        Self::run(task, ResampleMode::Fresh, n, d, grid, mlp, train, master_seed, |seed| task.generate(n, seed))
    }

    /// Same as [`ReferenceEstimate::estimate`] but resampling rows of `data`.
    pub fn bootstrap(
        data: &Dataset,
        d: usize,
        grid: &[f64],
        mlp: &MlpConfig,
        train: &TrainConfig,
        master_seed: u64,
    ) -> Result<Self> {
        Self::run(data.task, ResampleMode::Bootstrap, data.len(), d, grid, mlp, train, master_seed, |seed| {
            Ok(data.bootstrap(seed))
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn run<F>(
        task: SyntheticTask,
        mode: ResampleMode,
        n: usize,
        d: usize,
        grid: &[f64],
        mlp: &MlpConfig,
        train: &TrainConfig,
        master_seed: u64,
        draw: F,
    ) -> Result<Self>
    where
        F: Fn(u64) -> Result<Dataset> + Sync,
    {
        if d < 2 {
            return Err(Error::config(format!("reference needs d >= 2 resamples, got {d}")));
        }
        let components = first_order_components(mlp)?;
        let loss = LossSpec::plain(LossKind::FirstOrderNll);
        let results: Vec<Result<(ResampleRun, Option<Vec<Vec<f64>>>)>> = (0..d)
            .into_par_iter()
            .map(|index| {
                let data_seed = derive_seed(master_seed, 2 * index as u64);
                let weight_seed = derive_seed(master_seed, 2 * index as u64 + 1);
                let data = draw(data_seed)?;
                let cfg = TrainConfig { seed: weight_seed, ..train.clone() };
                let fitted = fit(&loss, &cfg, mlp, &data, grid).and_then(|run| predict_grid(&run.params, mlp, grid));
                match fitted {
                    Ok(values) => Ok((ResampleRun { index, data_seed, weight_seed, excluded: None }, Some(values))),
                    Err(e @ (Error::Diverged { .. } | Error::Numeric(_))) => {
                        Ok((ResampleRun { index, data_seed, weight_seed, excluded: Some(e.to_string()) }, None))
                    }
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut runs = Vec::with_capacity(d);
        let mut values = Vec::with_capacity(d);
        for r in results {
            let (run, v) = r?;
            runs.push(run);
            values.extend(v);
        }
        Self::assemble(task, mode, n, master_seed, grid.to_vec(), components, runs, values)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        task: SyntheticTask,
        mode: ResampleMode,
        n: usize,
        master_seed: u64,
        grid: Vec<f64>,
        components: Vec<Component>,
        runs: Vec<ResampleRun>,
        values: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let excluded = runs.iter().filter(|r| r.excluded.is_some()).count();
        if excluded as f64 > MAX_EXCLUDED_FRACTION * runs.len() as f64 {
            let reasons: Vec<String> =
                runs.iter().filter_map(|r| r.excluded.as_ref().map(|e| format!("run {}: {e}", r.index))).collect();
            return Err(Error::numeric(format!(
                "{excluded} of {} reference fits diverged (limit {:.0}%): {}",
                runs.len(),
                100.0 * MAX_EXCLUDED_FRACTION,
                reasons.join("; ")
            )));
        }
        if values.len() < 2 {
            return Err(Error::numeric("fewer than two converged reference fits"));
        }
        let sorted = (0..components.len())
            .map(|c| {
                (0..grid.len())
                    .map(|i| {
                        let mut s: Vec<f64> = values.iter().map(|run| run[i][c]).collect();
                        s.sort_by(f64::total_cmp);
                        s
                    })
                    .collect()
            })
            .collect();
        Ok(ReferenceEstimate { task, mode, n, master_seed, grid, components, runs, values, sorted })
    }

    /// Number of converged resamples.
    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn component_index(&self, component: Component) -> Result<usize> {
        self.components
            .iter()
            .position(|&c| c == component)
            .ok_or_else(|| Error::mismatch(format!("reference has no component {}", component.name())))
    }

    /// Sorted samples of `component` at grid point `x_index`.
    pub fn samples(&self, x_index: usize, component: Component) -> Result<&[f64]> {
        let c = self.component_index(component)?;
        self.sorted[c]
            .get(x_index)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::domain(format!("grid index {x_index} out of range ({} points)", self.grid.len())))
    }

    /// (1/d)·#{θ̂ ≤ t} for the primary component.
    pub fn empirical_cdf(&self, x_index: usize, t: f64) -> Result<f64> {
        self.empirical_cdf_of(x_index, self.components[0], t)
    }

    pub fn empirical_cdf_of(&self, x_index: usize, component: Component, t: f64) -> Result<f64> {
        let s = self.samples(x_index, component)?;
        Ok(s.partition_point(|&v| v <= t) as f64 / s.len() as f64)
    }

    /// Nearest-rank quantiles at `levels` of the primary component.
    pub fn band(&self, x_index: usize, levels: (f64, f64)) -> Result<Band> {
        self.band_of(x_index, self.components[0], levels)
    }

    pub fn band_of(&self, x_index: usize, component: Component, levels: (f64, f64)) -> Result<Band> {
        let (p_lo, p_hi) = levels;
        if !(0.0 < p_lo && p_lo <= p_hi && p_hi < 1.0) {
            return Err(Error::domain(format!("band levels must satisfy 0 < lo <= hi < 1, got {levels:?}")));
        }
        let s = self.samples(x_index, component)?;
        Ok(sample_band(s, levels))
    }

    /// Reference sample std of the primary component at every grid point.
    pub fn spread(&self) -> Vec<f64> {
        self.sorted[0].iter().map(|s| crate::second_order::mean_and_se(s).1 * (s.len() as f64).sqrt()).collect()
    }

    /// Long-format CSV: `x_index,x,run,<component...>`, preceded by a JSON manifest comment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let manifest = Manifest {
            task: self.task,
            mode: self.mode,
            n: self.n,
            master_seed: self.master_seed,
            components: self.components.iter().map(Component::name).collect(),
            runs: self.runs.clone(),
        };
        writeln!(w, "# {}", serde_json::to_string(&manifest)?)?;
        let names: Vec<String> = self.components.iter().map(Component::name).collect();
        writeln!(w, "x_index,x,run,{}", names.join(","))?;
        let kept: Vec<usize> = self.runs.iter().filter(|r| r.excluded.is_none()).map(|r| r.index).collect();
        for (i, &x) in self.grid.iter().enumerate() {
            for (r, run) in self.values.iter().enumerate() {
                let vals: Vec<String> = run[i].iter().map(f64::to_string).collect();
                writeln!(w, "{i},{x},{},{}", kept[r], vals.join(","))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty reference file".into()))??;
        let manifest: Manifest = serde_json::from_str(
            first.strip_prefix("# ").ok_or_else(|| Error::Parse("reference file lacks the manifest line".into()))?,
        )?;
        let components = manifest.components.iter().map(|c| Component::parse(c)).collect::<Result<Vec<_>>>()?;
        let header = lines.next().ok_or_else(|| Error::Parse("reference file lacks a header".into()))??;
        let expected = format!("x_index,x,run,{}", manifest.components.join(","));
        if header.trim() != expected {
            return Err(Error::Parse(format!("reference header '{header}' != expected '{expected}'")));
        }
        let kept: Vec<usize> = manifest.runs.iter().filter(|r| r.excluded.is_none()).map(|r| r.index).collect();
        let mut grid: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); kept.len()];
        for (line_no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("reference row {}: '{line}'", line_no + 3));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 + components.len() {
                return Err(bad());
            }
            let i: usize = fields[0].parse().map_err(|_| bad())?;
            let x: f64 = fields[1].parse().map_err(|_| bad())?;
            let run: usize = fields[2].parse().map_err(|_| bad())?;
            let slot = kept.iter().position(|&k| k == run).ok_or_else(bad)?;
            if i == grid.len() {
                grid.push(x);
            } else if i > grid.len() {
                return Err(bad());
            }
            let row = fields[3..].iter().map(|f| f.parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            if values[slot].len() != i {
                return Err(bad());
            }
            values[slot].push(row);
        }
        if values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::Parse("reference file is missing rows".into()));
        }
        Self::assemble(
            manifest.task,
            manifest.mode,
            manifest.n,
            manifest.master_seed,
            grid,
            components,
            manifest.runs,
            values,
        )
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

/// Nearest-rank band of an ascending sample.
pub fn sample_band(sorted: &[f64], levels: (f64, f64)) -> Band {
    let d = sorted.len();
    let warning = (d < MIN_BAND_RESAMPLES)
        .then(|| format!("only {d} resamples; a ({}, {}) band needs at least {MIN_BAND_RESAMPLES}", levels.0, levels.1));
    Band { lo: nearest_rank(sorted, levels.0), hi: nearest_rank(sorted, levels.1), warning }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    task: SyntheticTask,
    mode: ResampleMode,
    n: usize,
    master_seed: u64,
    components: Vec<String>,
    runs: Vec<ResampleRun>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Head};

    fn small() -> ReferenceEstimate {
        let mlp = MlpConfig::new(1, vec![4], Activation::Tanh, Head::FirstOrderBernoulli).unwrap();
        let train = TrainConfig::new(0.05, 30, 0, 10).unwrap();
        let grid = [0.0, 0.25, 0.75];
        ReferenceEstimate::estimate(SyntheticTask::ClsSine, 40, 5, &grid, &mlp, &train, 9).unwrap()
    }

    #[test]
    fn seeded_and_in_domain() {
        let a = small();
        assert_eq!(a, small());
        assert_eq!(a.d(), 5);
        assert!(a.sorted[0].iter().flatten().all(|&t| t > 0.0 && t < 1.0));
        for s in &a.sorted[0] {
            assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn cdf_and_band_edges() {
        let a = small();
        let s = a.samples(1, Component::Theta).unwrap().to_vec();
        assert_eq!(a.empirical_cdf(1, s[0] - 1e-9).unwrap(), 0.0);
        assert_eq!(a.empirical_cdf(1, s[4]).unwrap(), 1.0);
        assert_eq!(a.empirical_cdf(1, s[2]).unwrap(), 3.0 / 5.0);
        let b = a.band(1, (0.025, 0.975)).unwrap();
        assert_eq!((b.lo, b.hi), (s[0], s[4]));
        assert!(b.warning.is_some());
        assert!(a.band(1, (0.9, 0.1)).is_err());
        assert!(a.samples(7, Component::Theta).is_err());
        assert!(a.samples(0, Component::Mu).is_err());
    }

    #[test]
    fn band_nearest_rank_example() {
        let s: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let b = sample_band(&s, (0.025, 0.975));
        assert_eq!((b.lo, b.hi), (0.03, 0.98));
        assert!(b.warning.is_none());
        let c = sample_band(&[0.4; 30], (0.025, 0.975));
        assert_eq!((c.lo, c.hi), (0.4, 0.4));
    }

    #[test]
    fn csv_round_trip() {
        let a = small();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(ReferenceEstimate::read_csv(&buf[..]).unwrap(), a);
        assert!(ReferenceEstimate::read_csv(&b"# {}\n"[..]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mlp = MlpConfig::new(1, vec![4], Activation::Tanh, Head::SecondOrderBeta).unwrap();
        let train = TrainConfig::new(0.05, 5, 0, 5).unwrap();
        assert!(ReferenceEstimate::estimate(SyntheticTask::ClsSine, 10, 3, &[0.0, 1.0], &mlp, &train, 1).is_err());
        let mlp = mlp.with_head(Head::FirstOrderBernoulli);
        assert!(ReferenceEstimate::estimate(SyntheticTask::ClsSine, 10, 1, &[0.0, 1.0], &mlp, &train, 1).is_err());
    }
}
