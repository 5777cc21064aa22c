use evidential::specfun::{digamma, ln_beta, ln_gamma, reg_inc_beta, reg_inc_gamma_lower, reg_inc_gamma_upper, trigamma};
use proptest::prelude::*;

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

proptest! {
    #[test]
    fn ln_gamma_recurrence(log_x in (1e-3f64).ln()..(1e4f64).ln()) {
        let x = log_x.exp();
        let lhs = ln_gamma(x + 1.0).unwrap();
        let rhs = ln_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn digamma_recurrence(log_x in (1e-3f64).ln()..(1e4f64).ln()) {
        let x = log_x.exp();
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn trigamma_recurrence(log_x in (1e-3f64).ln()..(1e4f64).ln()) {
        let x = log_x.exp();
        let lhs = trigamma(x).unwrap();
        let rhs = trigamma(x + 1.0).unwrap() + 1.0 / (x * x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs(), "x={x}");
    }

    #[test]
    fn ln_beta_symmetric_and_consistent(a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let ab = ln_beta(a, b).unwrap();
        prop_assert!((ab - ln_beta(b, a).unwrap()).abs() <= 1e-13 * ab.abs().max(1.0));
        let direct = ln_gamma(a).unwrap() + ln_gamma(b).unwrap() - ln_gamma(a + b).unwrap();
        prop_assert!((ab - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn incomplete_beta_monotone_with_exact_endpoints(a in 0.05f64..30.0, b in 0.05f64..30.0, mut xs in prop::collection::vec(0.0f64..1.0, 2..20)) {
        prop_assert_eq!(reg_inc_beta(a, b, 0.0).unwrap(), 0.0);
        prop_assert_eq!(reg_inc_beta(a, b, 1.0).unwrap(), 1.0);
        xs.sort_by(f64::total_cmp);
        let values: Vec<f64> = xs.iter().map(|&x| reg_inc_beta(a, b, x).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-15, "{} > {}", w[0], w[1]);
        }
    }

    #[test]
    fn incomplete_beta_reflection(a in 0.05f64..30.0, b in 0.05f64..30.0, x in 0.0f64..1.0) {
        let sum = reg_inc_beta(a, b, x).unwrap() + reg_inc_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn incomplete_gamma_monotone_and_complementary(a in 0.05f64..50.0, mut xs in prop::collection::vec(0.0f64..100.0, 2..20)) {
        prop_assert_eq!(reg_inc_gamma_lower(a, 0.0).unwrap(), 0.0);
        xs.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for &x in &xs {
            let p = reg_inc_gamma_lower(a, x).unwrap();
            let q = reg_inc_gamma_upper(a, x).unwrap();
            prop_assert!(p >= prev - 1e-15);
            prop_assert!((p + q - 1.0).abs() <= 1e-13);
            prev = p;
        }
    }
}

#[test]
fn trigamma_is_derivative_of_digamma() {
    for x in log_spaced(1e-2, 1e3, 100) {
        let h = 1e-5 * x;
        let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
        let t = trigamma(x).unwrap();
        assert!((fd - t).abs() <= 1e-6 * t.abs(), "x={x}: fd {fd} vs {t}");
    }
}

#[test]
fn special_functions_agree_with_statrs() {
    for x in log_spaced(1e-3, 1e3, 200) {
        let (ours, theirs) = (ln_gamma(x).unwrap(), statrs::function::gamma::ln_gamma(x));
        assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "ln_gamma({x})");
        let (ours, theirs) = (digamma(x).unwrap(), statrs::function::gamma::digamma(x));
        assert!((ours - theirs).abs() <= 1e-10 * theirs.abs().max(1.0), "digamma({x}): {ours} vs {theirs}");
    }
    for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (10.0, 0.7), (30.0, 40.0)] {
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let (ours, theirs) = (reg_inc_beta(a, b, x).unwrap(), statrs::function::beta::beta_reg(a, b, x));
            assert!((ours - theirs).abs() <= 1e-10, "I_{x}({a},{b})");
        }
    }
    for &a in &[0.3, 1.0, 4.5, 25.0] {
        for i in 1..30 {
            let x = i as f64 * 1.5;
            let (ours, theirs) = (reg_inc_gamma_lower(a, x).unwrap(), statrs::function::gamma::gamma_lr(a, x));
            assert!((ours - theirs).abs() <= 1e-10, "P({a},{x})");
        }
    }
}

#[test]
fn functions_reject_points_outside_domain() {
    assert!(ln_gamma(0.0).is_err());
    assert!(ln_gamma(-1.5).is_err());
    assert!(digamma(f64::NAN).is_err());
    assert!(trigamma(-2.0).is_err());
    assert!(reg_inc_beta(1.0, 1.0, 1.5).is_err());
    assert!(reg_inc_gamma_lower(0.0, 1.0).is_err());
}
