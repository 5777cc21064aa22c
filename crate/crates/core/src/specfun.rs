//! Scalar special functions: log-gamma, digamma, trigamma, log-beta, the
//! regularized incomplete beta and gamma functions, and a bisection-based
//! inverse for monotone CDFs.
//!
//! Each function comes in two flavours. The public checked form validates its
//! arguments and returns [`Error::Domain`] outside the domain. The
//! `pub(crate)` unchecked forms (`lgamma`, `psi`, `psi1`, ...) are used on hot
//! paths where the caller's types already guarantee validity.
//!
//! Algorithms: Stirling series after an upward recurrence shift for ln Γ,
//! asymptotic series after a recurrence shift for ψ and ψ′, and modified
//! Lentz continued fractions for the incomplete functions.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Shift point above which the asymptotic series are used directly.
const ASYMPTOTIC_FROM: f64 = 15.0;

/// A strictly positive, finite real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(PositiveReal(value))
        } else {
            Err(Error::domain(format!("expected a finite positive real, got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        PositiveReal::new(value)
    }
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::domain(format!("{what}: argument must be finite and > 0, got {x}")))
    }
}

fn unit_interval(x: f64, what: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::domain(format!("{what}: x must lie in [0, 1], got {x}")))
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    positive(x, "ln_gamma").map(lgamma)
}

/// ψ(x) = d/dx ln Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    positive(x, "digamma").map(psi)
}

/// ψ′(x) for x > 0. Always positive.
pub fn trigamma(x: f64) -> Result<f64> {
    positive(x, "trigamma").map(psi1)
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    let a = positive(a, "ln_beta")?;
    let b = positive(b, "ln_beta")?;
    Ok(lbeta(a, b))
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    let a = positive(a, "reg_inc_beta")?;
    let b = positive(b, "reg_inc_beta")?;
    let x = unit_interval(x, "reg_inc_beta")?;
    inc_beta(a, b, x)
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn reg_inc_gamma_lower(a: f64, x: f64) -> Result<f64> {
    let a = positive(a, "reg_inc_gamma_lower")?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("reg_inc_gamma_lower: x must be >= 0, got {x}")));
    }
    Ok(inc_gamma_p(a, x)?.0)
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 − P(a, x),
/// computed without cancellation in the upper tail.
pub fn reg_inc_gamma_upper(a: f64, x: f64) -> Result<f64> {
    let a = positive(a, "reg_inc_gamma_upper")?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("reg_inc_gamma_upper: x must be >= 0, got {x}")));
    }
    Ok(inc_gamma_p(a, x)?.1)
}

pub(crate) fn lgamma(x: f64) -> f64 {
    if x < ASYMPTOTIC_FROM {
        let mut z = x;
        let mut prod = 1.0;
        while z < ASYMPTOTIC_FROM {
            prod *= z;
            z += 1.0;
        }
        stirling_lgamma(z) - prod.ln()
    } else {
        stirling_lgamma(x)
    }
}

fn stirling_lgamma(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        * (1.0 / 12.0
            + r2 * (-1.0 / 360.0
                + r2 * (1.0 / 1260.0
                    + r2 * (-1.0 / 1680.0
                        + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

pub(crate) fn psi(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let r2 = 1.0 / (z * z);
    let series = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0
                        - r2 * (1.0 / 132.0 - r2 * (691.0 / 32_760.0 - r2 / 12.0))))));
    acc + z.ln() - 0.5 / z - series
}

pub(crate) fn psi1(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    let series = r
        + 0.5 * r2
        + r * r2
            * (1.0 / 6.0
                - r2 * (1.0 / 30.0
                    - r2 * (1.0 / 42.0
                        - r2 * (1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))));
    acc + series
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

const TINY: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;

fn max_iterations(scale: f64) -> usize {
    500 + (30.0 * scale.sqrt()) as usize
}

pub(crate) fn inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - lbeta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((front * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - front * beta_cf(b, a, 1.0 - x)? / b).clamp(0.0, 1.0))
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iterations(a.max(b)) {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::numeric(format!("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")))
}

/// Returns (P(a, x), Q(a, x)).
pub(crate) fn inc_gamma_p(a: f64, x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() - x - lgamma(a);
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..max_iterations(a.max(x)) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * CF_EPS {
                let p = (sum * ln_front.exp()).clamp(0.0, 1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::numeric(format!("incomplete gamma series did not converge (a={a}, x={x})")))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=max_iterations(a.max(x)) {
            let i = i as f64;
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() <= CF_EPS {
                let q = (ln_front.exp() * h).clamp(0.0, 1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::numeric(format!("incomplete gamma continued fraction did not converge (a={a}, x={x})")))
    }
}

/// Complementary error function.
pub(crate) fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let q = inc_gamma_p(0.5, x * x).map(|(_, q)| q).unwrap_or(if x * x > 1.0 { 0.0 } else { 1.0 });
    if x >= 0.0 {
        q
    } else {
        2.0 - q
    }
}

/// Standard normal CDF Φ(z).
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density φ(z).
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - HALF_LN_2PI).exp()
}

/// Target accuracy of [`inverse_cdf_bisect`].
pub const INVERSE_CDF_TOL: f64 = 1e-10;

/// Largest CDF jump between adjacent floats treated as resolution rather than an atom.
pub const MAX_RESOLUTION_JUMP: f64 = 1e-6;

/// Inverts a monotone nondecreasing, continuous `cdf` on the bracket
/// `[lo, hi]` by bisection, returning `q` with `|cdf(q) - p| <= 1e-10`.
///
/// When the bracket shrinks to adjacent floats first (a CDF steeper than f64
/// resolution) the upper float is returned, provided the jump across it is
/// below [`MAX_RESOLUTION_JUMP`]. Fails with [`Error::Numeric`] if `p` is not
/// bracketed, or if the CDF jumps over `p` by more than that.
pub fn inverse_cdf_bisect<F>(cdf: F, p: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("inverse_cdf_bisect: p must lie in (0, 1), got {p}")));
    }
    if !(lo < hi) || lo.is_nan() || hi.is_nan() {
        return Err(Error::numeric(format!("inverse_cdf_bisect: invalid bracket [{lo}, {hi}]")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, f_hi) = (cdf(lo), cdf(hi));
    if f_lo > p + INVERSE_CDF_TOL || f_hi < p - INVERSE_CDF_TOL {
        return Err(Error::numeric(format!(
            "inverse_cdf_bisect: bracket [{lo}, {hi}] with cdf values [{f_lo}, {f_hi}] does not contain p={p}"
        )));
    }
    let mut best = if (f_lo - p).abs() < (f_hi - p).abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = cdf(mid);
        if (f - p).abs() < (best.1 - p).abs() {
            best = (mid, f);
        }
        if (f - p).abs() <= 0.01 * INVERSE_CDF_TOL {
            break;
        }
        if f < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1 - p).abs() <= INVERSE_CDF_TOL {
        Ok(best.0)
    } else if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) && cdf(hi) - cdf(lo) <= MAX_RESOLUTION_JUMP {
        Ok(hi)
    } else {
        Err(Error::numeric(format!(
            "inverse_cdf_bisect: cdf is discontinuous near {} (cdf={}, p={p})",
            best.0, best.1
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn ln_gamma_trivial_points() {
        assert_abs_diff_eq!(ln_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(2.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0).unwrap(), 24f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(0.5).unwrap(), 0.5 * PI.ln(), epsilon = 1e-12);
        // ln Γ(x) ~ -ln x near zero
        assert_abs_diff_eq!(ln_gamma(1e-6).unwrap(), -(1e-6f64).ln() - EULER_GAMMA * 1e-6, epsilon = 1e-11);
    }

    #[test]
    fn digamma_trivial_points() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-13);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-13);
        assert_abs_diff_eq!(digamma(0.5).unwrap(), -EULER_GAMMA - 2.0 * LN_2, epsilon = 1e-13);
    }

    #[test]
    fn trigamma_trivial_points() {
        assert_abs_diff_eq!(trigamma(1.0).unwrap(), PI * PI / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trigamma(2.0).unwrap(), PI * PI / 6.0 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trigamma(0.5).unwrap(), PI * PI / 2.0, epsilon = 1e-12);
        let x = 1e6;
        assert!((trigamma(x).unwrap() * x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ln_beta_trivial_points() {
        assert_abs_diff_eq!(ln_beta(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_beta(2.0, 6.0).unwrap(), (1.0f64 / 42.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ln_beta(0.5, 0.5).unwrap(), PI.ln(), epsilon = 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        for &x in &[0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            assert_abs_diff_eq!(reg_inc_beta(1.0, 1.0, x).unwrap(), x, epsilon = 1e-13);
            for &b in &[0.5, 2.0, 7.5] {
                let expected = 1.0 - (1.0 - x).powf(b);
                assert_abs_diff_eq!(reg_inc_beta(1.0, b, x).unwrap(), expected, epsilon = 1e-13);
            }
        }
        for &a in &[0.3, 1.0, 4.0, 250.0] {
            assert_abs_diff_eq!(reg_inc_beta(a, a, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn incomplete_gamma_closed_forms() {
        for &x in &[0.0, 0.01, 0.5, 1.0, 3.0, 20.0] {
            assert_abs_diff_eq!(reg_inc_gamma_lower(1.0, x).unwrap(), 1.0 - (-x as f64).exp(), epsilon = 1e-13);
        }
        for &a in &[0.2, 1.0, 5.0, 80.0] {
            assert_eq!(reg_inc_gamma_lower(a, 0.0).unwrap(), 0.0);
            assert!((reg_inc_gamma_lower(a, 1e4).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_abs_diff_eq!(std_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-12);
        assert_abs_diff_eq!(std_normal_cdf(-3.0), 0.001_349_898_031_630_094_6, epsilon = 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(ln_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(digamma(-1.0), Err(Error::Domain(_))));
        assert!(matches!(trigamma(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(ln_beta(1.0, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(reg_inc_beta(1.0, 1.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(reg_inc_gamma_lower(1.0, -0.1), Err(Error::Domain(_))));
        assert!(PositiveReal::new(0.0).is_err());
        assert_eq!(PositiveReal::new(2.5).unwrap().get(), 2.5);
    }

    #[test]
    fn bisection_inverts_uniform_and_fails_on_jumps() {
        let q = inverse_cdf_bisect(|t| reg_inc_beta(1.0, 1.0, t).unwrap(), 0.975, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(q, 0.975, epsilon = 1e-10);
        let step = |t: f64| if t < 0.3 { 0.0 } else { 1.0 };
        assert!(matches!(inverse_cdf_bisect(step, 0.5, 0.0, 1.0), Err(Error::Numeric(_))));
        let narrow = inverse_cdf_bisect(|t| t, 0.9, 0.0, 0.5);
        assert!(matches!(narrow, Err(Error::Numeric(_))));
    }
}
