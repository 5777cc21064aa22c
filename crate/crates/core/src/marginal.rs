//! One-dimensional laws used for quantile bands and Wasserstein distances:
//! the scalar marginals of the second-order families plus empirical samples.

use crate::error::{Error, Result};
use crate::specfun::{inc_beta, inc_gamma_p, inverse_cdf_bisect, lgamma, std_normal_cdf, std_normal_pdf};

#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Beta { a: f64, b: f64 },
    Normal { mean: f64, var: f64 },
    /// Location-scale Student-t with `df` degrees of freedom and squared scale `scale2`.
    StudentT { loc: f64, scale2: f64, df: f64 },
    /// Shape/scale parameterization, density ∝ t^{-shape-1} e^{-scale/t}.
    InverseGamma { shape: f64, scale: f64 },
    /// Shape/rate parameterization.
    Gamma { shape: f64, rate: f64 },
    /// Point masses 1/n at each (sorted) sample.
    Empirical(Vec<f64>),
}

impl Marginal {
    /// Builds an empirical law; the samples are sorted here.
    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("empirical marginal needs at least one finite sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Marginal::Empirical(samples))
    }

    /// Closure of the support, `(lower, upper)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Beta { .. } => (0.0, 1.0),
            Marginal::Normal { .. } | Marginal::StudentT { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Marginal::InverseGamma { .. } | Marginal::Gamma { .. } => (0.0, f64::INFINITY),
            Marginal::Empirical(s) => (s[0], s[s.len() - 1]),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Marginal::Beta { a, b } => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    inc_beta(a, b, t).unwrap_or(f64::NAN)
                }
            }
            Marginal::Normal { mean, var } => std_normal_cdf((t - mean) / var.sqrt()),
            Marginal::StudentT { loc, scale2, df } => {
                let z = (t - loc) / scale2.sqrt();
                if z == f64::INFINITY {
                    return 1.0;
                }
                let tail = 0.5 * inc_beta(0.5 * df, 0.5, df / (df + z * z)).unwrap_or(f64::NAN);
                if z < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
            Marginal::InverseGamma { shape, scale } => {
                if t <= 0.0 {
                    0.0
                } else {
                    inc_gamma_p(shape, scale / t).map(|(_, q)| q).unwrap_or(f64::NAN)
                }
            }
            Marginal::Gamma { shape, rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    inc_gamma_p(shape, rate * t).map(|(p, _)| p).unwrap_or(f64::NAN)
                }
            }
            Marginal::Empirical(ref s) => s.partition_point(|&x| x <= t) as f64 / s.len() as f64,
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match *self {
            Marginal::Beta { a, b } => Ok(a / (a + b)),
            Marginal::Normal { mean, .. } => Ok(mean),
            Marginal::StudentT { loc, df, .. } => {
                if df > 1.0 {
                    Ok(loc)
                } else {
                    Err(Error::domain(format!("Student-t mean is undefined for df {df} <= 1")))
                }
            }
            Marginal::InverseGamma { shape, scale } => {
                if shape > 1.0 {
                    Ok(scale / (shape - 1.0))
                } else {
                    Err(Error::domain(format!("inverse-gamma mean is infinite for shape {shape} <= 1")))
                }
            }
            Marginal::Gamma { shape, rate } => Ok(shape / rate),
            Marginal::Empirical(ref s) => Ok(s.iter().sum::<f64>() / s.len() as f64),
        }
    }

    /// Partial first moment ∫_{-∞}^{t} s dF(s).
    pub fn partial_mean(&self, t: f64) -> Result<f64> {
        let (lo, _) = self.support();
        if t < lo {
            return Ok(0.0);
        }
        match *self {
            Marginal::Beta { a, b } => {
                let f = if t >= 1.0 { 1.0 } else { inc_beta(a + 1.0, b, t)? };
                Ok(a / (a + b) * f)
            }
            Marginal::Normal { mean, var } => {
                let sd = var.sqrt();
                let z = (t - mean) / sd;
                Ok(mean * std_normal_cdf(z) - sd * std_normal_pdf(z))
            }
            Marginal::StudentT { loc, scale2, df } => {
                self.mean()?;
                // d/dz [−(ν + z²) f_ν(z) / (ν − 1)] = z f_ν(z)
                let sd = scale2.sqrt();
                let z = (t - loc) / sd;
                let tail = if z.is_finite() { -(df + z * z) / (df - 1.0) * student_pdf(z, df) } else { 0.0 };
                Ok(loc * self.cdf(t) + sd * tail)
            }
            Marginal::InverseGamma { shape, scale } => {
                let m = self.mean()?;
                if t <= 0.0 {
                    return Ok(0.0);
                }
                let (_, q) = inc_gamma_p(shape - 1.0, scale / t)?;
                Ok(m * q)
            }
            Marginal::Gamma { shape, rate } => {
                let (p, _) = inc_gamma_p(shape + 1.0, rate * t)?;
                Ok(shape / rate * p)
            }
            Marginal::Empirical(ref s) => {
                let n = s.partition_point(|&x| x <= t);
                Ok(s[..n].iter().sum::<f64>() / s.len() as f64)
            }
        }
    }

    /// Generalized inverse inf{t : F(t) ≥ p}. For the empirical law this is
    /// the nearest-rank sample `s[ceil(p·n) - 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        match *self {
            Marginal::Beta { .. } => inverse_cdf_bisect(|t| self.cdf(t), p, 0.0, 1.0),
            Marginal::Normal { mean, var } => {
                let sd = var.sqrt();
                inverse_cdf_bisect(|t| self.cdf(t), p, mean - 40.0 * sd, mean + 40.0 * sd)
            }
            Marginal::StudentT { loc, scale2, .. } => {
                let sd = scale2.sqrt();
                let mut half = 8.0 * sd;
                let mut tries = 0;
                while self.cdf(loc - half) > p || self.cdf(loc + half) < p {
                    half *= 2.0;
                    tries += 1;
                    if tries > 2000 || !half.is_finite() {
                        return Err(Error::numeric(format!("could not bracket quantile {p}")));
                    }
                }
                inverse_cdf_bisect(|t| self.cdf(t), p, loc - half, loc + half)
            }
            Marginal::InverseGamma { .. } | Marginal::Gamma { .. } => {
                let mut hi = match *self {
                    Marginal::InverseGamma { shape, scale } => scale / shape.max(1e-3),
                    Marginal::Gamma { shape, rate } => (shape + 1.0) / rate,
                    _ => unreachable!(),
                };
                let mut tries = 0;
                while self.cdf(hi) < p {
                    hi *= 2.0;
                    tries += 1;
                    if tries > 2000 || !hi.is_finite() {
                        return Err(Error::numeric(format!("could not bracket quantile {p}")));
                    }
                }
                inverse_cdf_bisect(|t| self.cdf(t), p, 0.0, hi)
            }
            Marginal::Empirical(ref s) => Ok(nearest_rank(s, p)),
        }
    }
}

/// Standard Student-t density with `df` degrees of freedom.
fn student_pdf(z: f64, df: f64) -> f64 {
    (lgamma(0.5 * (df + 1.0)) - lgamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (z * z / df).ln_1p())
    .exp()
}

/// Nearest-rank empirical quantile of a sorted sample: `s[ceil(p·n) - 1]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    // (p * n) may land a hair above an integer through rounding; snap first.
    let pos = p * n as f64;
    let snapped = if (pos - pos.round()).abs() < 1e-9 { pos.round() } else { pos };
    let rank = (snapped.ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}
