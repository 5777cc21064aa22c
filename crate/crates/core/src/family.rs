//! First-order likelihoods p(y | θ) and their entropies.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::lgamma;

/// An observed outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    /// Class index in `0..K`. Binary problems use `0` and `1`.
    Class(usize),
    Real(f64),
    Count(u64),
}

impl Outcome {
    /// Numeric value, used when outcomes are written as a single CSV column.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Outcome::Class(k) => k as f64,
            Outcome::Real(y) => y,
            Outcome::Count(n) => n as f64,
        }
    }
}

/// Parameters θ of a first-order distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FirstOrderParams {
    /// θ = P(y = 1).
    Bernoulli { theta: f64 },
    /// Class probabilities on the simplex, K ≥ 2.
    Categorical { theta: Vec<f64> },
    Gaussian { mean: f64, var: f64 },
    Poisson { rate: f64 },
}

const SIMPLEX_TOL: f64 = 1e-12;

impl FirstOrderParams {
    pub fn bernoulli(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta < 1.0 {
            Ok(FirstOrderParams::Bernoulli { theta })
        } else {
            Err(Error::domain(format!("Bernoulli θ must lie in (0, 1), got {theta}")))
        }
    }

    pub fn categorical(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::domain("categorical θ needs at least two classes"));
        }
        if theta.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::domain(format!("categorical θ components must lie in (0, 1): {theta:?}")));
        }
        let total: f64 = theta.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!("categorical θ must sum to 1, sums to {total}")));
        }
        Ok(FirstOrderParams::Categorical { theta })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if mean.is_finite() && var.is_finite() && var > 0.0 {
            Ok(FirstOrderParams::Gaussian { mean, var })
        } else {
            Err(Error::domain(format!("Gaussian needs finite mean and var > 0, got ({mean}, {var})")))
        }
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        if rate.is_finite() && rate > 0.0 {
            Ok(FirstOrderParams::Poisson { rate })
        } else {
            Err(Error::domain(format!("Poisson rate must be finite and > 0, got {rate}")))
        }
    }

    /// Class probabilities for the discrete-class variants. Bernoulli maps to
    /// `[1 - θ, θ]` so that index 1 is the positive class.
    pub fn class_probs(&self) -> Option<Vec<f64>> {
        match self {
            FirstOrderParams::Bernoulli { theta } => Some(vec![1.0 - theta, *theta]),
            FirstOrderParams::Categorical { theta } => Some(theta.clone()),
            _ => None,
        }
    }

    /// Scalar summaries in a fixed order: θ for Bernoulli, θ_k for
    /// Categorical, (μ, σ²) for Gaussian, the rate for Poisson.
    pub fn components(&self) -> Vec<f64> {
        match self {
            FirstOrderParams::Bernoulli { theta } => vec![*theta],
            FirstOrderParams::Categorical { theta } => theta.clone(),
            FirstOrderParams::Gaussian { mean, var } => vec![*mean, *var],
            FirstOrderParams::Poisson { rate } => vec![*rate],
        }
    }

    /// Negative log-likelihood −log p(y | θ).
    pub fn nll(&self, y: Outcome) -> Result<f64> {
        match (self, y) {
            (FirstOrderParams::Bernoulli { theta }, Outcome::Class(k)) => match k {
                0 => Ok(-(-theta).ln_1p()),
                1 => Ok(-theta.ln()),
                _ => Err(Error::domain(format!("Bernoulli outcome must be 0 or 1, got {k}"))),
            },
            (FirstOrderParams::Categorical { theta }, Outcome::Class(k)) => theta
                .get(k)
                .map(|t| -t.ln())
                .ok_or_else(|| Error::domain(format!("class {k} out of range for K={}", theta.len()))),
            (FirstOrderParams::Gaussian { mean, var }, Outcome::Real(y)) if y.is_finite() => {
                Ok(0.5 * (2.0 * PI * var).ln() + (y - mean).powi(2) / (2.0 * var))
            }
            (FirstOrderParams::Poisson { rate }, Outcome::Count(n)) => {
                let n = n as f64;
                Ok(rate - n * rate.ln() + lgamma(n + 1.0))
            }
            (params, y) => Err(Error::domain(format!("outcome {y:?} is outside the outcome space of {params:?}"))),
        }
    }

    /// Shannon entropy for discrete variants, differential entropy for the Gaussian.
    pub fn entropy(&self) -> f64 {
        match self {
            FirstOrderParams::Bernoulli { theta } => xlnx_neg(*theta) + xlnx_neg(1.0 - theta),
            FirstOrderParams::Categorical { theta } => theta.iter().copied().map(xlnx_neg).sum(),
            FirstOrderParams::Gaussian { var, .. } => 0.5 * (2.0 * PI * E * var).ln(),
            FirstOrderParams::Poisson { rate } => poisson_entropy(*rate),
        }
    }
}

fn xlnx_neg(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Direct summation of −Σ p_k ln p_k; the pmf is negligible beyond
/// `rate + 40·sqrt(rate) + 50`.
fn poisson_entropy(rate: f64) -> f64 {
    let upper = (rate + 40.0 * rate.sqrt() + 50.0).ceil() as u64;
    (0..=upper)
        .map(|k| {
            let k = k as f64;
            let ln_p = k * rate.ln() - rate - lgamma(k + 1.0);
            -ln_p.exp() * ln_p
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn nll_trivial_points() {
        let b = FirstOrderParams::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(b.nll(Outcome::Class(1)).unwrap(), LN_2, epsilon = 1e-15);
        let g = FirstOrderParams::gaussian(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.nll(Outcome::Real(0.0)).unwrap(), 0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
        let p = FirstOrderParams::poisson(1.0).unwrap();
        assert_abs_diff_eq!(p.nll(Outcome::Count(0)).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn entropy_trivial_points() {
        assert_abs_diff_eq!(FirstOrderParams::bernoulli(0.5).unwrap().entropy(), LN_2, epsilon = 1e-15);
        let g = FirstOrderParams::gaussian(3.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.entropy(), 0.5 * (2.0 * PI * E).ln(), epsilon = 1e-15);
        for k in 2..8 {
            let c = FirstOrderParams::categorical(vec![1.0 / k as f64; k]).unwrap();
            assert_abs_diff_eq!(c.entropy(), (k as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn probabilities_normalize() {
        let c = FirstOrderParams::categorical(vec![0.2, 0.3, 0.5]).unwrap();
        let total: f64 = (0..3).map(|k| (-c.nll(Outcome::Class(k)).unwrap()).exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        let b = FirstOrderParams::bernoulli(0.83).unwrap();
        let total: f64 = (0..2).map(|k| (-b.nll(Outcome::Class(k)).unwrap()).exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        for &rate in &[0.1, 1.0, 7.3, 20.0] {
            let p = FirstOrderParams::poisson(rate).unwrap();
            let total: f64 = (0..=200).map(|k| (-p.nll(Outcome::Count(k)).unwrap()).exp()).sum();
            assert!((total - 1.0).abs() < 1e-10, "rate {rate}: {total}");
            assert!(p.nll(Outcome::Count(3)).unwrap() >= 0.0);
        }
    }

    #[test]
    fn bernoulli_entropy_peaks_at_half() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                let ha = FirstOrderParams::Bernoulli { theta: *a }.entropy();
                let hb = FirstOrderParams::Bernoulli { theta: *b }.entropy();
                ha.partial_cmp(&hb).unwrap()
            })
            .unwrap();
        assert_abs_diff_eq!(best, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn poisson_entropy_small_rate_matches_direct_sum() {
        // rate 1: H = 1 + e^{-1} Σ ln k! / k!
        let direct: f64 = 1.0 + (-1.0f64).exp() * (2..30).map(|k| lgamma(k as f64 + 1.0) / (lgamma(k as f64 + 1.0)).exp()).sum::<f64>();
        assert_abs_diff_eq!(FirstOrderParams::Poisson { rate: 1.0 }.entropy(), direct, epsilon = 1e-12);
    }

    #[test]
    fn outcome_space_is_checked() {
        let b = FirstOrderParams::bernoulli(0.3).unwrap();
        assert!(matches!(b.nll(Outcome::Class(2)), Err(Error::Domain(_))));
        assert!(matches!(b.nll(Outcome::Real(1.0)), Err(Error::Domain(_))));
        let g = FirstOrderParams::gaussian(0.0, 1.0).unwrap();
        assert!(g.nll(Outcome::Real(f64::NAN)).is_err());
        assert!(FirstOrderParams::bernoulli(1.0).is_err());
        assert!(FirstOrderParams::categorical(vec![0.5, 0.6]).is_err());
        assert!(FirstOrderParams::gaussian(0.0, 0.0).is_err());
    }
}
