//! Dense feed-forward networks with hand-written reverse-mode gradients and
//! output heads that map the final linear layer onto first- or second-order
//! distribution parameters.
//!
//! Parameters live in one flat vector. Layer `l` occupies a contiguous block
//! holding its `fan_out × fan_in` weight matrix (row-major) followed by its
//! `fan_out` biases.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FirstOrderParams;
use crate::second_order::{SecondOrderKind, SecondOrderParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::config(format!("unknown activation '{other}' (expected relu or tanh)"))),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Output head: how raw outputs become distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// θ = sigmoid(z).
    FirstOrderBernoulli,
    /// μ = z₀, σ = softplus(z₁); exposes (μ, σ²).
    FirstOrderGaussian,
    /// m_k = exp(z_k), k ∈ {0, 1}; exposes the Dirichlet `[β, α]`.
    SecondOrderBeta,
    /// γ = z₀, ν = exp(z₁), α = 1 + softplus(z₂), β = exp(z₃).
    SecondOrderNig,
    /// α = exp(z₀), β = exp(z₁).
    SecondOrderGamma,
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::FirstOrderBernoulli => 1,
            Head::FirstOrderGaussian | Head::SecondOrderBeta | Head::SecondOrderGamma => 2,
            Head::SecondOrderNig => 4,
        }
    }

    pub fn is_second_order(self) -> bool {
        matches!(self, Head::SecondOrderBeta | Head::SecondOrderNig | Head::SecondOrderGamma)
    }

    pub fn second_order_kind(self) -> Option<SecondOrderKind> {
        match self {
            Head::SecondOrderBeta => Some(SecondOrderKind::Dirichlet { classes: 2 }),
            Head::SecondOrderNig => Some(SecondOrderKind::Nig),
            Head::SecondOrderGamma => Some(SecondOrderKind::Gamma),
            _ => None,
        }
    }

    /// Column names of the head parameters, in output order.
    pub fn param_names(self) -> Vec<String> {
        match self {
            Head::FirstOrderBernoulli => vec!["theta".into()],
            Head::FirstOrderGaussian => vec!["mu".into(), "sigma2".into()],
            other => other.second_order_kind().map(|k| k.param_names()).unwrap_or_default(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bernoulli" | "first_order_bernoulli" => Ok(Head::FirstOrderBernoulli),
            "gaussian" | "first_order_gaussian" => Ok(Head::FirstOrderGaussian),
            "beta" | "second_order_beta" => Ok(Head::SecondOrderBeta),
            "nig" | "second_order_nig" => Ok(Head::SecondOrderNig),
            "gamma" | "second_order_gamma" => Ok(Head::SecondOrderGamma),
            other => Err(Error::config(format!("unknown head '{other}'"))),
        }
    }

    /// Maps raw outputs to head parameters.
    fn link(self, z: &[f64]) -> Vec<f64> {
        match self {
            Head::FirstOrderBernoulli => vec![sigmoid(z[0]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)],
            Head::FirstOrderGaussian => vec![z[0], softplus(z[1]).powi(2)],
            Head::SecondOrderBeta | Head::SecondOrderGamma => vec![z[0].exp(), z[1].exp()],
            Head::SecondOrderNig => vec![z[0], z[1].exp(), 1.0 + softplus(z[2]), z[3].exp()],
        }
    }

    /// d(head param k)/d(z_k); every link is elementwise.
    fn link_derivative(self, z: &[f64], out: &[f64]) -> Vec<f64> {
        match self {
            Head::FirstOrderBernoulli => vec![out[0] * (1.0 - out[0])],
            Head::FirstOrderGaussian => vec![1.0, 2.0 * softplus(z[1]) * sigmoid(z[1])],
            Head::SecondOrderBeta | Head::SecondOrderGamma => vec![out[0], out[1]],
            Head::SecondOrderNig => vec![1.0, out[1], sigmoid(z[2]), out[3]],
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation, head: Head) -> Result<Self> {
        let cfg = MlpConfig { input_dim, hidden, activation, head };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::config("layer widths must be >= 1"));
        }
        Ok(())
    }

    /// (fan_in, fan_out) for every dense layer.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.head.outputs());
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(|(i, o)| (i + 1) * o).sum()
    }

    pub fn with_head(&self, head: Head) -> Self {
        MlpConfig { head, ..self.clone() }
    }
}

/// Flat weight vector with its layer shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub layout: Vec<(usize, usize)>,
}

/// Gradient of a scalar loss in the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient { values: vec![0.0; len] }
    }
}

/// Network output interpreted through the head.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    First(FirstOrderParams),
    Second(SecondOrderParams),
}

impl HeadOutput {
    pub fn values(&self) -> Vec<f64> {
        match self {
            HeadOutput::First(FirstOrderParams::Bernoulli { theta }) => vec![*theta],
            HeadOutput::First(FirstOrderParams::Gaussian { mean, var }) => vec![*mean, *var],
            HeadOutput::First(other) => other.components(),
            HeadOutput::Second(m) => m.to_vec(),
        }
    }

    pub fn first_order(&self) -> Option<&FirstOrderParams> {
        match self {
            HeadOutput::First(t) => Some(t),
            HeadOutput::Second(_) => None,
        }
    }

    pub fn second_order(&self) -> Option<&SecondOrderParams> {
        match self {
            HeadOutput::Second(m) => Some(m),
            HeadOutput::First(_) => None,
        }
    }
}

impl ModelParams {
    pub fn zeros(config: &MlpConfig) -> Self {
        ModelParams { values: vec![0.0; config.num_params()], layout: config.layout() }
    }

    /// Weights uniform on ±1/√fan_in, biases zero.
    pub fn init(config: &MlpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = config.layout();
        let mut values = Vec::with_capacity(config.num_params());
        for &(fan_in, fan_out) in &layout {
            let bound = 1.0 / (fan_in as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            values.extend(std::iter::repeat(0.0).take(fan_out));
        }
        ModelParams { values, layout }
    }

    fn check(&self, config: &MlpConfig) -> Result<()> {
        if self.layout != config.layout() || self.values.len() != config.num_params() {
            return Err(Error::mismatch("parameter layout does not match the network configuration"));
        }
        Ok(())
    }
}

/// Activations recorded during a forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// Input to each dense layer (the first entry is x).
    inputs: Vec<Vec<f64>>,
    raw: Vec<f64>,
    head: Vec<f64>,
}

impl Tape {
    /// Head parameters from the last forward pass, in output order.
    pub fn head_values(&self) -> &[f64] {
        &self.head
    }
}

/// Forward pass that records what [`backward_taped`] needs.
pub fn forward_taped(params: &ModelParams, config: &MlpConfig, x: &[f64], tape: &mut Tape) -> Result<()> {
    if x.len() != config.input_dim {
        return Err(Error::mismatch(format!("input has {} features, network expects {}", x.len(), config.input_dim)));
    }
    let n_layers = params.layout.len();
    tape.inputs.resize(n_layers, Vec::new());
    tape.inputs[0].clear();
    tape.inputs[0].extend_from_slice(x);
    let mut offset = 0;
    for (l, &(fan_in, fan_out)) in params.layout.iter().enumerate() {
        let w = &params.values[offset..offset + fan_in * fan_out];
        let b = &params.values[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        offset += (fan_in + 1) * fan_out;
        let last = l + 1 == n_layers;
        let mut out = if last { std::mem::take(&mut tape.raw) } else { std::mem::take(&mut tape.inputs[l + 1]) };
        out.clear();
        {
            let input = &tape.inputs[l];
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                out.push(if last { z } else { config.activation.apply(z) });
            }
        }
        if last {
            tape.raw = out;
        } else {
            tape.inputs[l + 1] = out;
        }
    }
    tape.head = config.head.link(&tape.raw);
    if let Some(bad) = tape.head.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite head output {} (raw outputs {:?}) at input {x:?}",
            config.head.param_names()[bad],
            tape.raw
        )));
    }
    Ok(())
}

/// Accumulates ∂loss/∂params into `grad`, given ∂loss/∂(head params).
pub fn backward_taped(params: &ModelParams, config: &MlpConfig, tape: &Tape, upstream: &[f64], grad: &mut [f64]) {
    let link = config.head.link_derivative(&tape.raw, &tape.head);
    let mut delta: Vec<f64> = upstream.iter().zip(&link).map(|(u, d)| if *u == 0.0 { 0.0 } else { u * d }).collect();
    let mut offsets = Vec::with_capacity(params.layout.len());
    let mut offset = 0;
    for &(fan_in, fan_out) in &params.layout {
        offsets.push(offset);
        offset += (fan_in + 1) * fan_out;
    }
    for l in (0..params.layout.len()).rev() {
        let (fan_in, fan_out) = params.layout[l];
        let start = offsets[l];
        let input = &tape.inputs[l];
        let w = &params.values[start..start + fan_in * fan_out];
        {
            let (gw, gb) = grad[start..start + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                for (g, a) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                    *g += dj * a;
                }
            }
        }
        if l > 0 {
            let mut next = vec![0.0; fan_in];
            for j in 0..fan_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for (n, wji) in next.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                    *n += wji * dj;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                *n *= config.activation.derivative_from_output(*a);
            }
            delta = next;
        }
    }
}

pub(crate) fn head_output(config: &MlpConfig, values: &[f64]) -> Result<HeadOutput> {
    Ok(match config.head {
        Head::FirstOrderBernoulli => HeadOutput::First(FirstOrderParams::Bernoulli { theta: values[0] }),
        Head::FirstOrderGaussian => HeadOutput::First(FirstOrderParams::gaussian(values[0], values[1])?),
        head => HeadOutput::Second(SecondOrderParams::from_vec(
            head.second_order_kind().expect("second-order head"),
            values,
        )?),
    })
}

/// Evaluates the network at `x`.
pub fn forward(params: &ModelParams, config: &MlpConfig, x: &[f64]) -> Result<HeadOutput> {
    params.check(config)?;
    let mut tape = Tape::default();
    forward_taped(params, config, x, &mut tape)?;
    head_output(config, &tape.head)
}

/// Gradient of a scalar loss with respect to every network parameter, given
/// the loss gradient with respect to the head parameters at input `x`.
pub fn backward(params: &ModelParams, config: &MlpConfig, x: &[f64], upstream: &[f64]) -> Result<Gradient> {
    params.check(config)?;
    if upstream.len() != config.head.outputs() {
        return Err(Error::mismatch(format!(
            "upstream gradient has {} entries, head has {}",
            upstream.len(),
            config.head.outputs()
        )));
    }
    let mut tape = Tape::default();
    forward_taped(params, config, x, &mut tape)?;
    let mut grad = Gradient::zeros(params.values.len());
    backward_taped(params, config, &tape, upstream, &mut grad.values);
    Ok(grad)
}

/// A saved network: a one-line JSON header followed by the raw weights as
/// little-endian IEEE-754 doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: MlpConfig,
    pub seed: u64,
    pub epoch: usize,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    config: MlpConfig,
    layout: Vec<(usize, usize)>,
    seed: u64,
    epoch: usize,
    n_values: usize,
}

const CHECKPOINT_FORMAT: &str = "evidential-mlp-v1";

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            layout: self.params.layout.clone(),
            seed: self.seed,
            epoch: self.epoch,
            n_values: self.params.values.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.params.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: CheckpointHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unknown checkpoint format '{}'", header.format)));
        }
        if header.layout != header.config.layout() || header.n_values != header.config.num_params() {
            return Err(Error::Parse("checkpoint header is inconsistent with its network configuration".into()));
        }
        let mut bytes = vec![0u8; header.n_values * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Parse(format!("checkpoint truncated: expected {} weights ({e})", header.n_values)))?;
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Checkpoint {
            config: header.config,
            seed: header.seed,
            epoch: header.epoch,
            params: ModelParams { values, layout: header.layout },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(head: Head) -> MlpConfig {
        MlpConfig::new(1, vec![4, 3], Activation::Tanh, head).unwrap()
    }

    #[test]
    fn init_is_seeded() {
        let c = cfg(Head::SecondOrderBeta);
        assert_eq!(ModelParams::init(&c, 3), ModelParams::init(&c, 3));
        assert_ne!(ModelParams::init(&c, 3), ModelParams::init(&c, 4));
        assert_eq!(ModelParams::init(&c, 3).values.len(), (1 + 1) * 4 + (4 + 1) * 3 + (3 + 1) * 2);
    }

    #[test]
    fn zero_weights_give_reference_heads() {
        let beta = cfg(Head::SecondOrderBeta);
        let out = forward(&ModelParams::zeros(&beta), &beta, &[0.3]).unwrap();
        assert_eq!(out, HeadOutput::Second(SecondOrderParams::beta(1.0, 1.0).unwrap()));

        let bern = cfg(Head::FirstOrderBernoulli);
        let out = forward(&ModelParams::zeros(&bern), &bern, &[0.3]).unwrap();
        assert_eq!(out, HeadOutput::First(FirstOrderParams::Bernoulli { theta: 0.5 }));

        let nig = cfg(Head::SecondOrderNig);
        let out = forward(&ModelParams::zeros(&nig), &nig, &[-2.0]).unwrap();
        let v = out.values();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0);
        assert_abs_diff_eq!(v[2], 1.0 + std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(v[3], 1.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let c = cfg(Head::SecondOrderNig);
        let p = ModelParams::init(&c, 9);
        let g = backward(&p, &c, &[0.7], &[0.0; 4]).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logistic_regression_gradient() {
        let c = MlpConfig::new(3, vec![], Activation::Tanh, Head::FirstOrderBernoulli).unwrap();
        let p = ModelParams { values: vec![0.4, -0.2, 0.9, 0.1], layout: c.layout() };
        let x = [0.5, 1.5, -0.3];
        let theta = forward(&p, &c, &x).unwrap().values()[0];
        for y in [0.0, 1.0] {
            // dNLL/dθ for a Bernoulli
            let upstream = -y / theta + (1.0 - y) / (1.0 - theta);
            let g = backward(&p, &c, &x, &[upstream]).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(g.values[i], (theta - y) * x[i], epsilon = 1e-14);
            }
            assert_abs_diff_eq!(g.values[3], theta - y, epsilon = 1e-14);
        }
    }

    #[test]
    fn input_dimension_is_checked() {
        let c = cfg(Head::SecondOrderGamma);
        let p = ModelParams::zeros(&c);
        assert!(matches!(forward(&p, &c, &[1.0, 2.0]), Err(Error::Mismatch(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let c = MlpConfig::new(1, vec![], Activation::Relu, Head::SecondOrderGamma).unwrap();
        let p = ModelParams { values: vec![1000.0, 0.0, 0.0, 0.0], layout: c.layout() };
        assert!(matches!(forward(&p, &c, &[1.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let c = cfg(Head::SecondOrderNig);
        let mut p = ModelParams::init(&c, 5);
        p.values[0] = f64::from_bits(0x3ff0_0000_0000_0001);
        p.values[1] = -0.0;
        let ck = Checkpoint { config: c, seed: 5, epoch: 120, params: p };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back.config, ck.config);
        assert_eq!((back.seed, back.epoch), (5, 120));
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params.values), bits(&ck.params.values));
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
    }
}
