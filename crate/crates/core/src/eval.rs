//! Faithfulness metrics: Wasserstein-1 distances between reference samples
//! and learned second-order marginals, quantile bands, and sweep reports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::Marginal;
use crate::reference::ReferenceEstimate;
use crate::second_order::{Component, SecondOrderParams};
use crate::train::LossKind;

/// ∫_{-∞}^{x} F(t) dt = x·F(x) − ∫_{-∞}^{x} s dF(s).
fn integrated_cdf(law: &Marginal, x: f64) -> Result<f64> {
    Ok(x * law.cdf(x) - law.partial_mean(x)?)
}

/// inf{t ∈ [a, b] : F(t) ≥ c} by bisection, assuming F(a) < c ≤ F(b).
fn crossing(law: &Marginal, c: f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if law.cdf(mid) >= c {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

/// W1 between the empirical law of `samples` and `model`, computed exactly as
/// ∫|F̂(t) − F(t)| dt over the steps of F̂. Infinite when the model has no mean.
pub fn wasserstein1_marginal(samples: &[f64], model: &Marginal) -> Result<f64> {
    if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("W1 needs at least one finite reference sample"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = match model.mean() {
        Ok(m) => m,
        Err(_) => return Ok(f64::INFINITY),
    };
    let n = s.len() as f64;
    let (first, last) = (s[0], s[s.len() - 1]);
    // Left tail, where F̂ = 0, and right tail, where F̂ = 1.
    let mut total = integrated_cdf(model, first)?;
    total += (mean - model.partial_mean(last)?) - last * (1.0 - model.cdf(last));
    let mut i = 0;
    while i < s.len() {
        let a = s[i];
        let mut j = i;
        while j < s.len() && s[j] == a {
            j += 1;
        }
        if j == s.len() {
            break;
        }
        let b = s[j];
        let c = j as f64 / n;
        let (fa, fb) = (model.cdf(a), model.cdf(b));
        let t = if fa >= c {
            a
        } else if fb < c {
            b
        } else {
            crossing(model, c, a, b)
        };
        let (ga, gt, gb) = (integrated_cdf(model, a)?, integrated_cdf(model, t)?, integrated_cdf(model, b)?);
        // ∫_a^t (c − F) + ∫_t^b (F − c)
        total += c * (t - a) - (gt - ga) + (gb - gt) - c * (b - t);
        i = j;
    }
    Ok(total.max(0.0))
}

/// W1 between reference samples and the `component` marginal of `model`.
pub fn wasserstein1(samples: &[f64], model: &SecondOrderParams, component: Component) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::domain("W1 against a reference needs at least two samples"));
    }
    wasserstein1_marginal(samples, &model.marginal(component)?)
}

/// W1 between two empirical laws (closed form through sorted samples when sizes match).
pub fn wasserstein1_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    wasserstein1_marginal(a, &Marginal::empirical(b.to_vec())?)
}

/// Quantile band of every marginal component of `m`.
pub fn model_band(m: &SecondOrderParams, levels: (f64, f64)) -> Result<Vec<(Component, f64, f64)>> {
    m.components().into_iter().map(|c| Ok((c, m.quantile(c, levels.0)?, m.quantile(c, levels.1)?))).collect()
}

/// Moment-matched parametric law for reference samples of `component`: Beta
/// for θ, Normal for μ and inverse-gamma for σ².
pub fn moment_fit(samples: &[f64], component: Component) -> Result<Marginal> {
    let (mean, se) = crate::second_order::mean_and_se(samples);
    let var = (se * se * samples.len() as f64).max(1e-300);
    match component {
        Component::Theta | Component::ClassProb(_) => {
            let k = (mean * (1.0 - mean) / var - 1.0).max(1e-6);
            Ok(Marginal::Beta { a: mean * k, b: (1.0 - mean) * k })
        }
        Component::Mu => Ok(Marginal::Normal { mean, var }),
        Component::Sigma2 => {
            let shape = mean * mean / var + 2.0;
            Ok(Marginal::InverseGamma { shape, scale: mean * (shape - 1.0) })
        }
        Component::Rate => {
            let shape = mean * mean / var;
            Ok(Marginal::Gamma { shape, rate: shape / mean })
        }
    }
}

/// Predictions of one trained second-order model on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPredictions {
    pub loss_kind: LossKind,
    pub lambda: f64,
    pub predictions: Vec<SecondOrderParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Entry {
    pub x_index: usize,
    pub x: f64,
    pub lambda: f64,
    pub loss_kind: LossKind,
    pub component: String,
    pub w1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub x: f64,
    pub truth: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub ref_lo: f64,
    pub ref_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub loss_kind: LossKind,
    pub lambda: f64,
    pub component: String,
    pub mean_w1_data: f64,
    pub mean_w1_extrapolation: f64,
    /// Fraction of grid points where W1 exceeds the self-distance baseline.
    pub frac_above_baseline: f64,
    pub bands: Vec<BandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grid: Vec<f64>,
    pub data_region: (f64, f64),
    pub levels: (f64, f64),
    /// Sorted by loss kind, then ascending λ, component and grid index.
    pub entries: Vec<W1Entry>,
    /// `baseline[c][i]`: W1 between reference samples and their moment fit.
    pub baseline: Vec<Vec<f64>>,
    pub components: Vec<String>,
    pub summaries: Vec<ModelSummary>,
    /// (loss kind, λ) pairs that were requested but had no model.
    pub gaps: Vec<(LossKind, f64)>,
}

impl EvalReport {
    pub fn summary(&self, loss_kind: LossKind, lambda: f64, component: &str) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.loss_kind == loss_kind && s.lambda == lambda && s.component == component)
    }

    /// W1 values of one model and component, in grid order.
    pub fn w1_series(&self, loss_kind: LossKind, lambda: f64, component: &str) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.loss_kind == loss_kind && e.lambda == lambda && e.component == component)
            .map(|e| e.w1)
            .collect()
    }

    /// Long format: `x,lambda,loss_kind,component,w1`.
    pub fn write_w1_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,lambda,loss_kind,component,w1")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{}", e.x, e.lambda, e.loss_kind, e.component, e.w1)?;
        }
        Ok(())
    }

    /// Band table of one model: `x,truth,mean,lo,hi,ref_lo,ref_hi`.
    pub fn write_band_csv<W: Write>(&self, summary: &ModelSummary, mut w: W) -> Result<()> {
        writeln!(w, "{}", BAND_COLUMNS.join(","))?;
        for b in &summary.bands {
            writeln!(w, "{},{},{},{},{},{},{}", b.x, b.truth, b.mean, b.lo, b.hi, b.ref_lo, b.ref_hi)?;
        }
        Ok(())
    }

    /// JSON summary without the per-point tables.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            loss_kind: LossKind,
            lambda: f64,
            component: &'a str,
            mean_w1_data: f64,
            mean_w1_extrapolation: f64,
            frac_above_baseline: f64,
        }
        let rows: Vec<Row> = self
            .summaries
            .iter()
            .map(|s| Row {
                loss_kind: s.loss_kind,
                lambda: s.lambda,
                component: &s.component,
                mean_w1_data: s.mean_w1_data,
                mean_w1_extrapolation: s.mean_w1_extrapolation,
                frac_above_baseline: s.frac_above_baseline,
            })
            .collect();
        let value = serde_json::json!({
            "data_region": self.data_region,
            "levels": self.levels,
            "grid_points": self.grid.len(),
            "models": rows,
            "missing_models": self.gaps,
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

pub const BAND_COLUMNS: [&str; 7] = ["x", "truth", "mean", "lo", "hi", "ref_lo", "ref_hi"];

fn truth_component(task: &crate::datagen::SyntheticTask, x: f64, component: Component) -> f64 {
    use crate::family::FirstOrderParams::*;
    match (task.truth(x), component) {
        (Bernoulli { theta }, _) => theta,
        (Gaussian { mean, .. }, Component::Mu) => mean,
        (Gaussian { var, .. }, _) => var,
        (other, _) => other.components()[0],
    }
}

/// W1 of every model against the reference at every grid point, plus the
/// self-distance baseline, bands and region summaries. `lambdas` lists the
/// λ values expected per loss kind; absent models are reported in `gaps`.
pub fn faithfulness_sweep(
    reference: &ReferenceEstimate,
    models: &[ModelPredictions],
    lambdas: &[f64],
    levels: (f64, f64),
) -> Result<EvalReport> {
    let grid = reference.grid.clone();
    for m in models {
        if m.predictions.len() != grid.len() {
            return Err(Error::mismatch(format!(
                "model ({}, λ={}) has {} predictions for {} grid points",
                m.loss_kind,
                m.lambda,
                m.predictions.len(),
                grid.len()
            )));
        }
    }
    let data_region = reference.task.data_region();
    let in_data = |x: f64| x >= data_region.0 && x <= data_region.1;
    let components = reference.components.clone();

    let baseline: Vec<Vec<f64>> = components
        .iter()
        .map(|&c| {
            (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let s = reference.samples(i, c)?;
                    wasserstein1_marginal(s, &moment_fit(s, c)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<&ModelPredictions> = models.iter().collect();
    order.sort_by(|a, b| a.loss_kind.label().cmp(b.loss_kind.label()).then(a.lambda.total_cmp(&b.lambda)));

    let mut entries = Vec::new();
    let mut summaries = Vec::new();
    for m in &order {
        for (ci, &c) in components.iter().enumerate() {
            let rows: Vec<(f64, BandRow)> = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let pred = &m.predictions[i];
                    let samples = reference.samples(i, c)?;
                    let w1 = wasserstein1(samples, pred, c)?;
                    let marginal = pred.marginal(c)?;
                    let r = reference.band_of(i, c, levels)?;
                    Ok((
                        w1,
                        BandRow {
                            x: grid[i],
                            truth: truth_component(&reference.task, grid[i], c),
                            mean: marginal.mean().unwrap_or(f64::NAN),
                            lo: marginal.quantile(levels.0)?,
                            hi: marginal.quantile(levels.1)?,
                            ref_lo: r.lo,
                            ref_hi: r.hi,
                        },
                    ))
                })
                .collect::<Result<_>>()?;
            let mut data = Vec::new();
            let mut extra = Vec::new();
            let mut above = 0;
            for (i, (w1, _)) in rows.iter().enumerate() {
                entries.push(W1Entry {
                    x_index: i,
                    x: grid[i],
                    lambda: m.lambda,
                    loss_kind: m.loss_kind,
                    component: c.name(),
                    w1: *w1,
                });
                if in_data(grid[i]) { data.push(*w1) } else { extra.push(*w1) }
                above += usize::from(*w1 > baseline[ci][i]);
            }
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            summaries.push(ModelSummary {
                loss_kind: m.loss_kind,
                lambda: m.lambda,
                component: c.name(),
                mean_w1_data: mean(&data),
                mean_w1_extrapolation: mean(&extra),
                frac_above_baseline: above as f64 / grid.len() as f64,
                bands: rows.into_iter().map(|(_, b)| b).collect(),
            });
        }
    }

    let mut kinds: Vec<LossKind> = models.iter().map(|m| m.loss_kind).collect();
    kinds.dedup();
    let mut gaps = Vec::new();
    for kind in kinds {
        for &l in lambdas {
            if !models.iter().any(|m| m.loss_kind == kind && m.lambda == l) {
                gaps.push((kind, l));
            }
        }
    }
    Ok(EvalReport {
        grid,
        data_region,
        levels,
        entries,
        baseline,
        components: components.iter().map(Component::name).collect(),
        summaries,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn point_masses_translate() {
        assert_abs_diff_eq!(wasserstein1_samples(&[0.2, 0.2], &[0.7]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wasserstein1_samples(&[3.0], &[-1.0]).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn matches_sorted_sample_formula() {
        let a = [0.1, 0.5, 0.9, 0.3];
        let b = [0.2, 0.25, 1.5, 0.0];
        let mut sa = a.to_vec();
        let mut sb = b.to_vec();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let direct: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(wasserstein1_samples(&a, &b).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn uniform_against_itself_is_small() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let m = SecondOrderParams::beta(1.0, 1.0).unwrap();
        // Midpoint grid: W1 = 1/(4n).
        assert_abs_diff_eq!(wasserstein1(&s, &m, Component::Theta).unwrap(), 0.25e-3, epsilon = 1e-10);
    }

    #[test]
    fn model_band_of_uniform() {
        let b = model_band(&SecondOrderParams::beta(1.0, 1.0).unwrap(), (0.025, 0.975)).unwrap();
        assert_abs_diff_eq!(b[0].1, 0.025, epsilon = 1e-9);
        assert_abs_diff_eq!(b[0].2, 0.975, epsilon = 1e-9);
    }

    #[test]
    fn unsupported_component_and_heavy_tails() {
        let m = SecondOrderParams::beta(2.0, 3.0).unwrap();
        assert!(matches!(wasserstein1(&[0.1, 0.2], &m, Component::Mu), Err(Error::Mismatch(_))));
        let nig = SecondOrderParams::nig(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(wasserstein1(&[0.5, 1.0], &nig, Component::Sigma2).unwrap(), f64::INFINITY);
    }
}
