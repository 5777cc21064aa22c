//! Second-order distributions p(θ | m) over first-order parameters.
//!
//! Three conjugate families are covered: Dirichlet over class probabilities
//! (the two-class case is the Beta distribution), normal-inverse-gamma over
//! Gaussian (μ, σ²), and Gamma over a Poisson rate. For each family this
//! module provides densities, entropies, KL divergences, the predictive
//! distribution obtained by integrating θ out, the two second-order losses
//! (negative log predictive, and expected negative log-likelihood) together
//! with their analytic gradients, sampling, marginal quantiles and the usual
//! epistemic-uncertainty summaries.
//!
//! Parameters are stored in a fixed canonical order, exposed through
//! [`SecondOrderParams::to_vec`]: `m_0..m_{K-1}` for Dirichlet,
//! `(γ, ν, α, β)` for NIG and `(α, β)` for Gamma. All gradient helpers return
//! vectors in that order.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FirstOrderParams, Outcome};
use crate::marginal::Marginal;
use crate::specfun::{lbeta, lgamma, psi, psi1};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SecondOrderParams {
    /// Dirichlet with concentration `m` (K ≥ 2). Index k pairs with class k.
    Dirichlet { m: Vec<f64> },
    /// Normal-inverse-gamma: σ² ~ InvGamma(α, β), μ | σ² ~ N(γ, σ²/ν).
    Nig { gamma: f64, nu: f64, alpha: f64, beta: f64 },
    /// Gamma with shape α and rate β.
    Gamma { alpha: f64, beta: f64 },
}

/// The shape of a [`SecondOrderParams`] value, without its numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecondOrderKind {
    Dirichlet { classes: usize },
    Nig,
    Gamma,
}

impl SecondOrderKind {
    pub fn len(&self) -> usize {
        match self {
            SecondOrderKind::Dirichlet { classes } => *classes,
            SecondOrderKind::Nig => 4,
            SecondOrderKind::Gamma => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column names for the canonical parameter order.
    pub fn param_names(&self) -> Vec<String> {
        match self {
            SecondOrderKind::Dirichlet { classes: 2 } => vec!["beta".into(), "alpha".into()],
            SecondOrderKind::Dirichlet { classes } => (0..*classes).map(|k| format!("m{k}")).collect(),
            SecondOrderKind::Nig => ["gamma", "nu", "alpha", "beta"].iter().map(|s| s.to_string()).collect(),
            SecondOrderKind::Gamma => vec!["alpha".into(), "beta".into()],
        }
    }
}

/// Distribution of y after integrating θ out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredictiveDist {
    Categorical { theta: Vec<f64> },
    /// Location, squared scale and degrees of freedom.
    StudentT { loc: f64, scale2: f64, df: f64 },
    /// Number of successes r and success probability p.
    NegBinomial { r: f64, p: f64 },
}

impl PredictiveDist {
    /// Negative log density (or mass) at `y`.
    pub fn nll(&self, y: Outcome) -> Result<f64> {
        match (self, y) {
            (PredictiveDist::Categorical { theta }, Outcome::Class(k)) => theta
                .get(k)
                .map(|t| -t.ln())
                .ok_or_else(|| Error::domain(format!("class {k} out of range for K={}", theta.len()))),
            (PredictiveDist::StudentT { loc, scale2, df }, Outcome::Real(y)) if y.is_finite() => {
                let z2 = (y - loc).powi(2) / (df * scale2);
                Ok(-lgamma(0.5 * (df + 1.0)) + lgamma(0.5 * df)
                    + 0.5 * (df * PI * scale2).ln()
                    + 0.5 * (df + 1.0) * z2.ln_1p())
            }
            (PredictiveDist::NegBinomial { r, p }, Outcome::Count(n)) => {
                let k = n as f64;
                Ok(-(lgamma(k + r) - lgamma(k + 1.0) - lgamma(*r) + r * p.ln() + k * (-p).ln_1p()))
            }
            (d, y) => Err(Error::domain(format!("outcome {y:?} is outside the support of {d:?}"))),
        }
    }

    /// Differential entropy (Student-t) or Shannon entropy (discrete cases).
    pub fn entropy(&self) -> f64 {
        match *self {
            PredictiveDist::Categorical { ref theta } => {
                theta.iter().filter(|&&t| t > 0.0).map(|t| -t * t.ln()).sum()
            }
            PredictiveDist::StudentT { scale2, df, .. } => {
                0.5 * (df + 1.0) * (psi(0.5 * (df + 1.0)) - psi(0.5 * df))
                    + 0.5 * df.ln()
                    + lbeta(0.5 * df, 0.5)
                    + 0.5 * scale2.ln()
            }
            PredictiveDist::NegBinomial { .. } => {
                // Direct summation until the remaining mass is negligible.
                let mut h = 0.0;
                let mut mass = 0.0;
                let mut k = 0u64;
                while mass < 1.0 - 1e-15 && k < 10_000_000 {
                    let ln_p = -self.nll(Outcome::Count(k)).unwrap_or(f64::INFINITY);
                    let p = ln_p.exp();
                    if p > 0.0 {
                        h -= p * ln_p;
                    }
                    mass += p;
                    k += 1;
                }
                h
            }
        }
    }
}

/// Scalar marginal of θ selected for quantiles and distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    /// θ = P(y = 1) of a two-class Dirichlet, i.e. Beta(m_1, m_0).
    Theta,
    /// Marginal Beta(m_k, m_0 + … − m_k) of class k.
    ClassProb(usize),
    /// Student-t marginal t_{2α}(γ, β/(να)) of μ under a NIG.
    Mu,
    /// InvGamma(α, β) marginal of σ² under a NIG.
    Sigma2,
    /// Gamma(α, β) law of a Poisson rate.
    Rate,
}

impl Component {
    pub fn name(&self) -> String {
        match self {
            Component::Theta => "theta".into(),
            Component::ClassProb(k) => format!("theta{k}"),
            Component::Mu => "mu".into(),
            Component::Sigma2 => "sigma2".into(),
            Component::Rate => "rate".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Component::Theta),
            "mu" => Ok(Component::Mu),
            "sigma2" => Ok(Component::Sigma2),
            "rate" => Ok(Component::Rate),
            other => other
                .strip_prefix("theta")
                .and_then(|k| k.parse().ok())
                .map(Component::ClassProb)
                .ok_or_else(|| Error::Parse(format!("unknown component '{other}'"))),
        }
    }
}

/// Epistemic-uncertainty summaries; entries that do not apply to a family are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicMeasures {
    /// Σ m_k (Dirichlet only).
    pub pseudo_counts: Option<f64>,
    /// Entropy of the predictive minus the expected first-order entropy.
    pub mutual_information: Option<f64>,
    /// β/((α−1)ν) (NIG with α > 1 only).
    pub var_mu: Option<f64>,
    /// Differential entropy of p(θ | m).
    pub entropy: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl SecondOrderParams {
    pub fn dirichlet(m: Vec<f64>) -> Result<Self> {
        if m.len() < 2 {
            return Err(Error::domain("Dirichlet needs K >= 2"));
        }
        for (k, &v) in m.iter().enumerate() {
            check_positive(&format!("m[{k}]"), v)?;
        }
        Ok(SecondOrderParams::Dirichlet { m })
    }

    /// Beta(α, β) over θ = P(y = 1): the two-class Dirichlet `[β, α]`.
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::dirichlet(vec![beta, alpha])
    }

    /// NIG parameters; α ≥ 1 is required (α > 1 for [`EpistemicMeasures::var_mu`]).
    pub fn nig(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::domain(format!("γ must be finite, got {gamma}")));
        }
        check_positive("ν", nu)?;
        check_positive("β", beta)?;
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(Error::domain(format!("NIG α must be finite and >= 1, got {alpha}")));
        }
        Ok(SecondOrderParams::Nig { gamma, nu, alpha, beta })
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        check_positive("α", alpha)?;
        check_positive("β", beta)?;
        Ok(SecondOrderParams::Gamma { alpha, beta })
    }

    /// Inverse of [`SecondOrderParams::predictive`] for the Gamma family:
    /// NegBinomial(r, p) comes from Gamma(α = r, β = p/(1−p)).
    pub fn gamma_from_negbinomial(r: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("negative binomial p must lie in (0, 1), got {p}")));
        }
        Self::gamma(r, p / (1.0 - p))
    }

    pub fn kind(&self) -> SecondOrderKind {
        match self {
            SecondOrderParams::Dirichlet { m } => SecondOrderKind::Dirichlet { classes: m.len() },
            SecondOrderParams::Nig { .. } => SecondOrderKind::Nig,
            SecondOrderParams::Gamma { .. } => SecondOrderKind::Gamma,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            SecondOrderParams::Dirichlet { m } => m.clone(),
            SecondOrderParams::Nig { gamma, nu, alpha, beta } => vec![*gamma, *nu, *alpha, *beta],
            SecondOrderParams::Gamma { alpha, beta } => vec![*alpha, *beta],
        }
    }

    pub fn from_vec(kind: SecondOrderKind, v: &[f64]) -> Result<Self> {
        if v.len() != kind.len() {
            return Err(Error::mismatch(format!("{kind:?} needs {} values, got {}", kind.len(), v.len())));
        }
        match kind {
            SecondOrderKind::Dirichlet { .. } => Self::dirichlet(v.to_vec()),
            SecondOrderKind::Nig => Self::nig(v[0], v[1], v[2], v[3]),
            SecondOrderKind::Gamma => Self::gamma(v[0], v[1]),
        }
    }

    /// log p(θ | m). Returns −∞ outside the support.
    pub fn log_density(&self, theta: &FirstOrderParams) -> Result<f64> {
        match (self, theta) {
            (SecondOrderParams::Dirichlet { m }, t @ (FirstOrderParams::Bernoulli { .. } | FirstOrderParams::Categorical { .. })) => {
                let probs = t.class_probs().unwrap_or_default();
                if probs.len() != m.len() {
                    return Err(Error::mismatch(format!("Dirichlet K={} vs θ with {} classes", m.len(), probs.len())));
                }
                if probs.iter().any(|&p| !(p > 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Ok(f64::NEG_INFINITY);
                }
                let ln_b: f64 = m.iter().map(|&mk| lgamma(mk)).sum::<f64>() - lgamma(m.iter().sum());
                Ok(m.iter().zip(&probs).map(|(mk, p)| (mk - 1.0) * p.ln()).sum::<f64>() - ln_b)
            }
            (SecondOrderParams::Nig { gamma, nu, alpha, beta }, FirstOrderParams::Gaussian { mean, var }) => {
                if !(*var > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(0.5 * nu.ln() - 0.5 * (LN_2PI + var.ln()) + alpha * beta.ln() - lgamma(*alpha)
                    - (alpha + 1.0) * var.ln()
                    - (2.0 * beta + nu * (mean - gamma).powi(2)) / (2.0 * var))
            }
            (SecondOrderParams::Gamma { alpha, beta }, FirstOrderParams::Poisson { rate }) => {
                if !(*rate > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(alpha * beta.ln() - lgamma(*alpha) + (alpha - 1.0) * rate.ln() - beta * rate)
            }
            (m, t) => Err(Error::mismatch(format!("{:?} is not a conjugate pair for {t:?}", m.kind()))),
        }
    }

    /// Differential entropy of p(θ | m).
    pub fn entropy(&self) -> f64 {
        match *self {
            SecondOrderParams::Dirichlet { ref m } => {
                let k = m.len() as f64;
                let m0: f64 = m.iter().sum();
                let ln_b: f64 = m.iter().map(|&mk| lgamma(mk)).sum::<f64>() - lgamma(m0);
                ln_b + (m0 - k) * psi(m0) - m.iter().map(|&mk| (mk - 1.0) * psi(mk)).sum::<f64>()
            }
            SecondOrderParams::Nig { nu, alpha, beta, .. } => {
                0.5 + 0.5 * LN_2PI + 1.5 * beta.ln() + lgamma(alpha) - 0.5 * nu.ln() + alpha
                    - (alpha + 1.5) * psi(alpha)
            }
            SecondOrderParams::Gamma { alpha, beta } => alpha - beta.ln() + lgamma(alpha) + (1.0 - alpha) * psi(alpha),
        }
    }

    /// KL(p(· | self) ‖ p(· | other)).
    pub fn kl(&self, other: &SecondOrderParams) -> Result<f64> {
        let value = match (self, other) {
            (SecondOrderParams::Dirichlet { m }, SecondOrderParams::Dirichlet { m: n }) if m.len() == n.len() => {
                let m0: f64 = m.iter().sum();
                let n0: f64 = n.iter().sum();
                let d0 = psi(m0);
                lgamma(m0) - lgamma(n0)
                    + m.iter().zip(n).map(|(&mk, &nk)| lgamma(nk) - lgamma(mk) + (mk - nk) * (psi(mk) - d0)).sum::<f64>()
            }
            (
                SecondOrderParams::Nig { gamma, nu, alpha, beta },
                SecondOrderParams::Nig { gamma: g0, nu: n0, alpha: a0, beta: b0 },
            ) => {
                gamma_kl(*alpha, *beta, *a0, *b0)
                    + 0.5 * (n0 / nu - 1.0 - (n0 / nu).ln() + n0 * (gamma - g0).powi(2) * alpha / beta)
            }
            (SecondOrderParams::Gamma { alpha, beta }, SecondOrderParams::Gamma { alpha: a0, beta: b0 }) => {
                gamma_kl(*alpha, *beta, *a0, *b0)
            }
            (a, b) => return Err(Error::mismatch(format!("KL between {:?} and {:?}", a.kind(), b.kind()))),
        };
        Ok(value.max(0.0))
    }

    /// Predictive distribution E_{θ ~ p(θ|m)}[p(y | θ)].
    pub fn predictive(&self) -> PredictiveDist {
        match *self {
            SecondOrderParams::Dirichlet { ref m } => {
                let m0: f64 = m.iter().sum();
                PredictiveDist::Categorical { theta: m.iter().map(|mk| mk / m0).collect() }
            }
            SecondOrderParams::Nig { gamma, nu, alpha, beta } => PredictiveDist::StudentT {
                loc: gamma,
                scale2: beta * (1.0 + nu) / (nu * alpha),
                df: 2.0 * alpha,
            },
            SecondOrderParams::Gamma { alpha, beta } => PredictiveDist::NegBinomial { r: alpha, p: beta / (beta + 1.0) },
        }
    }

    /// Inner loss: −log of the predictive at `y`.
    pub fn predictive_nll(&self, y: Outcome) -> Result<f64> {
        match (self, y) {
            // Direct form avoids normalizing first.
            (SecondOrderParams::Dirichlet { m }, Outcome::Class(k)) => m
                .get(k)
                .map(|mk| m.iter().sum::<f64>().ln() - mk.ln())
                .ok_or_else(|| Error::domain(format!("class {k} out of range for K={}", m.len()))),
            _ => self.predictive().nll(y),
        }
    }

    /// Outer loss: −E_{θ ~ p(θ|m)}[log p(y | θ)], in closed form.
    pub fn expected_nll(&self, y: Outcome) -> Result<f64> {
        match (self, y) {
            (SecondOrderParams::Dirichlet { m }, Outcome::Class(k)) => m
                .get(k)
                .map(|&mk| psi(m.iter().sum()) - psi(mk))
                .ok_or_else(|| Error::domain(format!("class {k} out of range for K={}", m.len()))),
            (SecondOrderParams::Nig { gamma, nu, alpha, beta }, Outcome::Real(y)) if y.is_finite() => {
                Ok(0.5 * (alpha / beta * (y - gamma).powi(2) + 1.0 / nu - psi(*alpha) + beta.ln() + LN_2PI))
            }
            (SecondOrderParams::Gamma { alpha, beta }, Outcome::Count(n)) => {
                let k = n as f64;
                Ok(-(psi(*alpha) - beta.ln()) * k + alpha / beta + lgamma(k + 1.0))
            }
            (m, y) => Err(Error::domain(format!("outcome {y:?} is incompatible with {:?}", m.kind()))),
        }
    }

    /// Draws θ ~ p(θ | m). Two-class Dirichlets yield Bernoulli parameters.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FirstOrderParams {
        match *self {
            SecondOrderParams::Dirichlet { ref m } => {
                let draws: Vec<f64> = m.iter().map(|&mk| std_gamma(mk, rng)).collect();
                let total: f64 = draws.iter().sum();
                let theta: Vec<f64> = draws.iter().map(|d| d / total).collect();
                if theta.len() == 2 {
                    FirstOrderParams::Bernoulli { theta: theta[1] }
                } else {
                    FirstOrderParams::Categorical { theta }
                }
            }
            SecondOrderParams::Nig { gamma, nu, alpha, beta } => {
                let var = beta / std_gamma(alpha, rng);
                let z: f64 = StandardNormal.sample(rng);
                FirstOrderParams::Gaussian { mean: gamma + z * (var / nu).sqrt(), var }
            }
            SecondOrderParams::Gamma { alpha, beta } => FirstOrderParams::Poisson { rate: std_gamma(alpha, rng) / beta },
        }
    }

    /// The one-dimensional law of `component` under this distribution.
    pub fn marginal(&self, component: Component) -> Result<Marginal> {
        match (self, component) {
            (SecondOrderParams::Dirichlet { m }, Component::Theta) if m.len() == 2 => {
                Ok(Marginal::Beta { a: m[1], b: m[0] })
            }
            (SecondOrderParams::Dirichlet { m }, Component::ClassProb(k)) if k < m.len() => {
                let m0: f64 = m.iter().sum();
                Ok(Marginal::Beta { a: m[k], b: m0 - m[k] })
            }
            (SecondOrderParams::Nig { gamma, nu, alpha, beta }, Component::Mu) => {
                Ok(Marginal::StudentT { loc: *gamma, scale2: beta / (nu * alpha), df: 2.0 * alpha })
            }
            (SecondOrderParams::Nig { alpha, beta, .. }, Component::Sigma2) => {
                Ok(Marginal::InverseGamma { shape: *alpha, scale: *beta })
            }
            (SecondOrderParams::Gamma { alpha, beta }, Component::Rate) => Ok(Marginal::Gamma { shape: *alpha, rate: *beta }),
            (m, c) => Err(Error::mismatch(format!("component {c:?} is not defined for {:?}", m.kind()))),
        }
    }

    pub fn quantile(&self, component: Component, p: f64) -> Result<f64> {
        self.marginal(component)?.quantile(p)
    }

    pub fn cdf(&self, component: Component, t: f64) -> Result<f64> {
        Ok(self.marginal(component)?.cdf(t))
    }

    /// Components that carry a marginal for this family.
    pub fn components(&self) -> Vec<Component> {
        match self {
            SecondOrderParams::Dirichlet { m } if m.len() == 2 => vec![Component::Theta],
            SecondOrderParams::Dirichlet { m } => (0..m.len()).map(Component::ClassProb).collect(),
            SecondOrderParams::Nig { .. } => vec![Component::Mu, Component::Sigma2],
            SecondOrderParams::Gamma { .. } => vec![Component::Rate],
        }
    }

    pub fn epistemic_measures(&self) -> EpistemicMeasures {
        let entropy = self.entropy();
        match *self {
            SecondOrderParams::Dirichlet { ref m } => {
                let m0: f64 = m.iter().sum();
                let d0 = psi(m0 + 1.0);
                let mi = self.predictive().entropy()
                    + m.iter().map(|&mk| mk / m0 * (psi(mk + 1.0) - d0)).sum::<f64>();
                EpistemicMeasures { pseudo_counts: Some(m0), mutual_information: Some(mi), var_mu: None, entropy }
            }
            SecondOrderParams::Nig { nu, alpha, beta, .. } => {
                // E[H(N(μ, σ²))] = ½ ln(2πe) + ½ E[ln σ²], E[ln σ²] = ln β − ψ(α)
                let expected_h = 0.5 * (LN_2PI + 1.0) + 0.5 * (beta.ln() - psi(alpha));
                EpistemicMeasures {
                    pseudo_counts: None,
                    mutual_information: Some(self.predictive().entropy() - expected_h),
                    var_mu: (alpha > 1.0).then(|| beta / ((alpha - 1.0) * nu)),
                    entropy,
                }
            }
            SecondOrderParams::Gamma { .. } => {
                EpistemicMeasures { pseudo_counts: None, mutual_information: None, var_mu: None, entropy }
            }
        }
    }

    /// Monte-Carlo estimate of the mutual information E_θ E_{y|θ}[log p(y|θ) − log p(y|m)],
    /// returned as (estimate, standard error). Works for every family.
    pub fn mutual_information_mc<R: Rng + ?Sized>(&self, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
        let predictive = self.predictive();
        let mut values = Vec::with_capacity(draws);
        for _ in 0..draws {
            let theta = self.sample(rng);
            let y = sample_outcome(&theta, rng);
            values.push(predictive.nll(y)? - theta.nll(y)?);
        }
        Ok(mean_and_se(&values))
    }

    /// ∂/∂m of [`SecondOrderParams::predictive_nll`] in canonical order.
    pub fn grad_predictive_nll(&self, y: Outcome) -> Result<Vec<f64>> {
        match (self, y) {
            (SecondOrderParams::Dirichlet { m }, Outcome::Class(k)) if k < m.len() => {
                let inv0 = 1.0 / m.iter().sum::<f64>();
                Ok(m.iter().enumerate().map(|(j, mj)| if j == k { inv0 - 1.0 / mj } else { inv0 }).collect())
            }
            (&SecondOrderParams::Nig { gamma, nu, alpha, beta }, Outcome::Real(y)) if y.is_finite() => {
                let r = y - gamma;
                let omega = 2.0 * beta * (1.0 + nu);
                let d = r * r * nu + omega;
                let a_half = alpha + 0.5;
                Ok(vec![
                    -a_half * 2.0 * r * nu / d,
                    -0.5 / nu - alpha * 2.0 * beta / omega + a_half * (r * r + 2.0 * beta) / d,
                    d.ln() - omega.ln() + psi(alpha) - psi(a_half),
                    -alpha / beta + a_half * 2.0 * (1.0 + nu) / d,
                ])
            }
            (&SecondOrderParams::Gamma { alpha, beta }, Outcome::Count(n)) => {
                let k = n as f64;
                Ok(vec![
                    psi(alpha) - psi(k + alpha) + (beta + 1.0).ln() - beta.ln(),
                    -alpha / beta + (alpha + k) / (beta + 1.0),
                ])
            }
            (m, y) => Err(Error::domain(format!("outcome {y:?} is incompatible with {:?}", m.kind()))),
        }
    }

    /// ∂/∂m of [`SecondOrderParams::expected_nll`] in canonical order.
    pub fn grad_expected_nll(&self, y: Outcome) -> Result<Vec<f64>> {
        match (self, y) {
            (SecondOrderParams::Dirichlet { m }, Outcome::Class(k)) if k < m.len() => {
                let t0 = psi1(m.iter().sum());
                Ok(m.iter().enumerate().map(|(j, &mj)| if j == k { t0 - psi1(mj) } else { t0 }).collect())
            }
            (&SecondOrderParams::Nig { gamma, nu, alpha, beta }, Outcome::Real(y)) if y.is_finite() => {
                let r = y - gamma;
                Ok(vec![
                    -alpha / beta * r,
                    -0.5 / (nu * nu),
                    0.5 * (r * r / beta - psi1(alpha)),
                    0.5 * (1.0 / beta - alpha * r * r / (beta * beta)),
                ])
            }
            (&SecondOrderParams::Gamma { alpha, beta }, Outcome::Count(n)) => {
                let k = n as f64;
                Ok(vec![-psi1(alpha) * k + 1.0 / beta, k / beta - alpha / (beta * beta)])
            }
            (m, y) => Err(Error::domain(format!("outcome {y:?} is incompatible with {:?}", m.kind()))),
        }
    }

    /// ∂H/∂m in canonical order.
    pub fn grad_entropy(&self) -> Vec<f64> {
        match *self {
            SecondOrderParams::Dirichlet { ref m } => {
                let k = m.len() as f64;
                let m0: f64 = m.iter().sum();
                let t0 = (m0 - k) * psi1(m0);
                m.iter().map(|&mk| t0 - (mk - 1.0) * psi1(mk)).collect()
            }
            SecondOrderParams::Nig { nu, alpha, beta, .. } => {
                vec![0.0, -0.5 / nu, 1.0 - (alpha + 1.5) * psi1(alpha), 1.5 / beta]
            }
            SecondOrderParams::Gamma { alpha, beta } => vec![1.0 + (1.0 - alpha) * psi1(alpha), -1.0 / beta],
        }
    }

    /// ∂/∂m of KL(p(·|m) ‖ p(·|reference)) in canonical order.
    pub fn grad_kl(&self, reference: &SecondOrderParams) -> Result<Vec<f64>> {
        match (self, reference) {
            (SecondOrderParams::Dirichlet { m }, SecondOrderParams::Dirichlet { m: n }) if m.len() == n.len() => {
                let m0: f64 = m.iter().sum();
                let n0: f64 = n.iter().sum();
                let t0 = (m0 - n0) * psi1(m0);
                Ok(m.iter().zip(n).map(|(&mk, &nk)| (mk - nk) * psi1(mk) - t0).collect())
            }
            (
                &SecondOrderParams::Nig { gamma, nu, alpha, beta },
                &SecondOrderParams::Nig { gamma: g0, nu: n0, alpha: a0, beta: b0 },
            ) => {
                let (ga, gb) = grad_gamma_kl(alpha, beta, a0, b0);
                let d2 = (gamma - g0).powi(2);
                Ok(vec![
                    n0 * (gamma - g0) * alpha / beta,
                    0.5 * (1.0 / nu - n0 / (nu * nu)),
                    ga + 0.5 * n0 * d2 / beta,
                    gb - 0.5 * n0 * d2 * alpha / (beta * beta),
                ])
            }
            (&SecondOrderParams::Gamma { alpha, beta }, &SecondOrderParams::Gamma { alpha: a0, beta: b0 }) => {
                let (ga, gb) = grad_gamma_kl(alpha, beta, a0, b0);
                Ok(vec![ga, gb])
            }
            (a, b) => Err(Error::mismatch(format!("KL between {:?} and {:?}", a.kind(), b.kind()))),
        }
    }
}

/// KL(Gamma(a, b) ‖ Gamma(a0, b0)) in the shape/rate parameterization.
/// Also equals the KL between the corresponding inverse-gamma laws.
fn gamma_kl(a: f64, b: f64, a0: f64, b0: f64) -> f64 {
    (a - a0) * psi(a) - lgamma(a) + lgamma(a0) + a0 * (b.ln() - b0.ln()) + a * (b0 - b) / b
}

fn grad_gamma_kl(a: f64, b: f64, a0: f64, b0: f64) -> (f64, f64) {
    ((a - a0) * psi1(a) + b0 / b - 1.0, a0 / b - a * b0 / (b * b))
}

fn std_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    GammaDist::new(shape, 1.0).expect("shape validated at construction").sample(rng)
}

/// Draws an outcome from a first-order distribution.
pub fn sample_outcome<R: Rng + ?Sized>(theta: &FirstOrderParams, rng: &mut R) -> Outcome {
    match *theta {
        FirstOrderParams::Bernoulli { theta } => Outcome::Class(usize::from(rng.random::<f64>() < theta)),
        FirstOrderParams::Categorical { ref theta } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, t) in theta.iter().enumerate() {
                acc += t;
                if u < acc {
                    return Outcome::Class(k);
                }
            }
            Outcome::Class(theta.len() - 1)
        }
        FirstOrderParams::Gaussian { mean, var } => {
            let z: f64 = StandardNormal.sample(rng);
            Outcome::Real(mean + z * var.sqrt())
        }
        FirstOrderParams::Poisson { rate } => {
            let draw = rand_distr::Poisson::new(rate).expect("positive rate").sample(rng);
            Outcome::Count(draw as u64)
        }
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
