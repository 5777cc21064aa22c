//! Loss assembly and the Adam training loop.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{stream_rng, Dataset};
use crate::error::{Error, Result};
use crate::family::Outcome;
use crate::nn::{backward_taped, forward_taped, head_output, Checkpoint, Gradient, Head, MlpConfig, ModelParams, Tape};
use crate::second_order::SecondOrderParams;

/// Abort threshold for |loss| and for any head parameter.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// −log p(y | θ(x)) with a first-order head.
    FirstOrderNll,
    /// −log of the predictive E_θ[p(y | θ)].
    InnerNll,
    /// −E_θ[log p(y | θ)].
    OuterNll,
}

impl LossKind {
    pub fn label(self) -> &'static str {
        match self {
            LossKind::FirstOrderNll => "first_order",
            LossKind::InnerNll => "inner",
            LossKind::OuterNll => "outer",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_order" | "first" => Ok(LossKind::FirstOrderNll),
            "inner" => Ok(LossKind::InnerNll),
            "outer" => Ok(LossKind::OuterNll),
            other => Err(Error::config(format!("unknown loss '{other}' (first_order, inner, outer)"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    None,
    /// R(x) = −H(p(θ | m(x))).
    NegEntropy,
    /// R(x) = KL(p(θ | m(x)) ‖ p(θ | m0)).
    KlToReference(SecondOrderParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub regularizer: Regularizer,
    pub lambda: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, regularizer: Regularizer, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if kind == LossKind::FirstOrderNll && regularizer != Regularizer::None {
            return Err(Error::config("regularizers apply to second-order losses only"));
        }
        Ok(LossSpec { kind, regularizer, lambda })
    }

    pub fn plain(kind: LossKind) -> Self {
        LossSpec { kind, regularizer: Regularizer::None, lambda: 0.0 }
    }

    /// `kind` with a negative-entropy penalty of weight `lambda` (none when λ = 0).
    pub fn entropy_regularized(kind: LossKind, lambda: f64) -> Result<Self> {
        let reg = if lambda > 0.0 { Regularizer::NegEntropy } else { Regularizer::None };
        Self::new(kind, reg, lambda)
    }

    /// Checks that the head can be trained with this loss.
    pub fn check_head(&self, head: Head) -> Result<()> {
        match (self.kind, head.is_second_order()) {
            (LossKind::FirstOrderNll, false) | (LossKind::InnerNll | LossKind::OuterNll, true) => {}
            (kind, _) => return Err(Error::mismatch(format!("loss {kind} cannot train head {head:?}"))),
        }
        if let Regularizer::KlToReference(m0) = &self.regularizer {
            if Some(m0.kind()) != head.second_order_kind() {
                return Err(Error::mismatch(format!("KL reference {:?} does not match head {head:?}", m0.kind())));
            }
        }
        Ok(())
    }
}

/// Loss value (Σ per-sample loss + λ·Σ R), the unweighted regularizer sum
/// Σ R and the gradient of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    pub reg: f64,
    pub grad: Gradient,
    /// Largest |head parameter| seen in the batch.
    pub max_head: f64,
}

/// Per-sample loss and its gradient with respect to the head parameters.
fn sample_loss(loss: &LossSpec, head: Head, values: &[f64], y: Outcome) -> Result<(f64, f64, Vec<f64>)> {
    if loss.kind == LossKind::FirstOrderNll {
        return first_order_loss(head, values, y).map(|(l, g)| (l, 0.0, g));
    }
    let kind = head.second_order_kind().expect("checked by LossSpec::check_head");
    let m = SecondOrderParams::from_vec(kind, values)?;
    let (value, mut grad) = match loss.kind {
        LossKind::InnerNll => (m.predictive_nll(y)?, m.grad_predictive_nll(y)?),
        _ => (m.expected_nll(y)?, m.grad_expected_nll(y)?),
    };
    let reg = match &loss.regularizer {
        Regularizer::None => 0.0,
        Regularizer::NegEntropy => {
            for (g, h) in grad.iter_mut().zip(m.grad_entropy()) {
                *g -= loss.lambda * h;
            }
            -m.entropy()
        }
        Regularizer::KlToReference(m0) => {
            for (g, k) in grad.iter_mut().zip(m.grad_kl(m0)?) {
                *g += loss.lambda * k;
            }
            m.kl(m0)?
        }
    };
    Ok((value, reg, grad))
}

fn first_order_loss(head: Head, values: &[f64], y: Outcome) -> Result<(f64, Vec<f64>)> {
    match (head, y) {
        (Head::FirstOrderBernoulli, Outcome::Class(k)) if k < 2 => {
            let theta = values[0];
            Ok(if k == 1 { (-theta.ln(), vec![-1.0 / theta]) } else { (-(-theta).ln_1p(), vec![1.0 / (1.0 - theta)]) })
        }
        (Head::FirstOrderGaussian, Outcome::Real(y)) if y.is_finite() => {
            let (mu, var) = (values[0], values[1]);
            let r = y - mu;
            let nll = 0.5 * (2.0 * std::f64::consts::PI * var).ln() + r * r / (2.0 * var);
            Ok((nll, vec![-r / var, 0.5 / var - r * r / (2.0 * var * var)]))
        }
        (head, y) => Err(Error::domain(format!("outcome {y:?} is incompatible with head {head:?}"))),
    }
}

/// Full-batch loss and gradient over paired inputs and outcomes.
pub fn batch_loss_xy(loss: &LossSpec, params: &ModelParams, config: &MlpConfig, xs: &[f64], ys: &[Outcome]) -> Result<BatchLoss> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::config(format!("batch needs matching, nonempty inputs ({} xs, {} ys)", xs.len(), ys.len())));
    }
    loss.check_head(config.head)?;
    if params.layout != config.layout() {
        return Err(Error::mismatch("parameter layout does not match the network configuration"));
    }
    let mut tape = Tape::default();
    let mut grad = Gradient::zeros(params.values.len());
    let (mut total, mut reg_sum, mut max_head) = (0.0, 0.0, 0.0f64);
    for (&x, &y) in xs.iter().zip(ys) {
        forward_taped(params, config, &[x], &mut tape)?;
        let values = tape.head_values();
        max_head = values.iter().fold(max_head, |a, v| a.max(v.abs()));
        let (value, reg, upstream) = sample_loss(loss, config.head, values, y)?;
        total += value;
        reg_sum += reg;
        backward_taped(params, config, &tape, &upstream, &mut grad.values);
    }
    Ok(BatchLoss { loss: total + loss.lambda * reg_sum, reg: reg_sum, grad, max_head })
}

/// Full-batch loss and gradient over a dataset.
pub fn batch_loss(loss: &LossSpec, params: &ModelParams, config: &MlpConfig, dataset: &Dataset) -> Result<BatchLoss> {
    batch_loss_xy(loss, params, config, &dataset.xs, &dataset.ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState { config, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if state.m.len() != params.len() || grad.len() != params.len() {
        return Err(Error::mismatch(format!(
            "Adam state has {} entries, params {}, gradient {}",
            state.m.len(),
            params.len(),
            grad.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(format!("non-finite gradient entry {i}: {}", grad[i])));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Weight-initialization seed.
    pub seed: u64,
    pub record_every: usize,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn new(lr: f64, epochs: usize, seed: u64, record_every: usize) -> Result<Self> {
        let cfg = TrainConfig { lr, epochs, seed, record_every, adam: AdamConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be >= 1"));
        }
        Ok(())
    }
}

/// Snapshot taken every `record_every` epochs, after that epoch's update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    /// Objective of the epoch (computed before its update).
    pub loss: f64,
    /// Unweighted regularizer sum Σ R(x_i) of the epoch.
    pub reg: f64,
    /// Head parameters averaged over the evaluation grid.
    pub mean_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub mlp: MlpConfig,
    pub train: TrainConfig,
    pub loss: LossSpec,
    pub params: ModelParams,
    pub trajectory: Vec<TrainRecord>,
}

impl TrainRun {
    pub fn param_names(&self) -> Vec<String> {
        self.mlp.head.param_names()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { config: self.mlp.clone(), seed: self.train.seed, epoch: self.train.epochs, params: self.params.clone() }
    }

    /// Trajectory columns: epoch, loss, reg, then one per mean head parameter.
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss,reg,{}", self.param_names().join(","))?;
        for r in &self.trajectory {
            let params: Vec<String> = r.mean_params.iter().map(f64::to_string).collect();
            writeln!(w, "{},{},{},{}", r.epoch, r.loss, r.reg, params.join(","))?;
        }
        Ok(())
    }
}

/// Head parameters at every grid point.
pub fn predict_grid(params: &ModelParams, config: &MlpConfig, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::default();
    grid.iter()
        .map(|&x| {
            forward_taped(params, config, &[x], &mut tape)?;
            Ok(tape.head_values().to_vec())
        })
        .collect()
}

/// Head outputs (first- or second-order parameters) at every grid point.
pub fn predict_outputs(params: &ModelParams, config: &MlpConfig, grid: &[f64]) -> Result<Vec<crate::nn::HeadOutput>> {
    predict_grid(params, config, grid)?.iter().map(|v| head_output(config, v)).collect()
}

fn mean_over_grid(params: &ModelParams, config: &MlpConfig, grid: &[f64]) -> Result<Vec<f64>> {
    let rows = predict_grid(params, config, grid)?;
    let mut mean = vec![0.0; config.head.outputs()];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / rows.len() as f64;
        }
    }
    Ok(mean)
}

/// Full-batch Adam training from a seeded initialization.
///
/// Fails with [`Error::Diverged`] (carrying the last finite parameters) when
/// the loss, a gradient or a head parameter becomes non-finite or exceeds
/// [`DIVERGENCE_LIMIT`].
pub fn fit(loss: &LossSpec, train: &TrainConfig, mlp: &MlpConfig, dataset: &Dataset, eval_grid: &[f64]) -> Result<TrainRun> {
    train.validate()?;
    mlp.validate()?;
    loss.check_head(mlp.head)?;
    if dataset.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if eval_grid.is_empty() {
        return Err(Error::config("evaluation grid is empty"));
    }
    let mut params = ModelParams::init(mlp, train.seed);
    let mut adam = AdamState::new(params.values.len(), train.adam);
    let mut trajectory = Vec::with_capacity(train.epochs / train.record_every);
    for epoch in 1..=train.epochs {
        let diverged = |reason: String, last: &ModelParams| Error::Diverged {
            epoch,
            reason,
            last_good: Box::new(Checkpoint { config: mlp.clone(), seed: train.seed, epoch: epoch - 1, params: last.clone() }),
        };
        let step = match batch_loss(loss, &params, mlp, dataset) {
            Ok(b) => b,
            Err(Error::Numeric(msg)) => return Err(diverged(msg, &params)),
            Err(e) => return Err(e),
        };
        if !step.loss.is_finite() || step.loss.abs() > DIVERGENCE_LIMIT {
            return Err(diverged(format!("loss {} out of range", step.loss), &params));
        }
        if step.max_head > DIVERGENCE_LIMIT {
            return Err(diverged(format!("head parameter {} exceeds {DIVERGENCE_LIMIT}", step.max_head), &params));
        }
        let previous = params.values.clone();
        if let Err(e) = adam_step(&mut adam, &mut params.values, &step.grad.values, train.lr) {
            params.values = previous;
            return Err(diverged(e.to_string(), &params));
        }
        if epoch % train.record_every == 0 {
            let mean_params = match mean_over_grid(&params, mlp, eval_grid) {
                Ok(m) => m,
                Err(e) => {
                    params.values = previous;
                    return Err(diverged(e.to_string(), &params));
                }
            };
            trajectory.push(TrainRecord { epoch, loss: step.loss, reg: step.reg, mean_params });
        }
    }
    Ok(TrainRun { mlp: mlp.clone(), train: train.clone(), loss: loss.clone(), params, trajectory })
}

/// Outcome of [`convexity_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub segments: usize,
    pub violations: usize,
    /// max over probes of f(t·a + (1−t)·b) − [t·f(a) + (1−t)·f(b)], relative to the chord.
    pub worst_gap: f64,
}

/// Tests f(t·a + (1−t)·b) ≤ t·f(a) + (1−t)·f(b) at t ∈ {¼, ½, ¾} along random
/// segments in weight space; a probe violates when the gap exceeds
/// `tol · max(1, |chord|)`. Endpoint weights are uniform on ±`scale`.
pub fn convexity_probe(
    loss: &LossSpec,
    mlp: &MlpConfig,
    xs: &[f64],
    ys: &[Outcome],
    segments: usize,
    scale: f64,
    tol: f64,
    seed: u64,
) -> Result<ConvexityReport> {
    let mut rng = stream_rng(seed, 7);
    let layout = mlp.layout();
    let n = mlp.num_params();
    let eval = |v: Vec<f64>| -> Result<f64> {
        Ok(batch_loss_xy(loss, &ModelParams { values: v, layout: layout.clone() }, mlp, xs, ys)?.loss)
    };
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..segments {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let (fa, fb) = (eval(a.clone())?, eval(b.clone())?);
        let mut violated = false;
        for t in [0.25, 0.5, 0.75] {
            let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| t * p + (1.0 - t) * q).collect();
            let chord = t * fa + (1.0 - t) * fb;
            let gap = (eval(mid)? - chord) / chord.abs().max(1.0);
            worst = worst.max(gap);
            violated |= gap > tol;
        }
        violations += usize::from(violated);
    }
    Ok(ConvexityReport { segments, violations, worst_gap: worst })
}
