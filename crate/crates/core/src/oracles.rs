//! Independent numerical oracles for the closed forms, and the map from
//! modelling concepts to the code and tests that cover them.
//!
//! The oracles never reuse the formula under test: losses and entropies are
//! checked against Monte-Carlo averages, gradients against central finite
//! differences, Adam against a separately written update, and W1 against a
//! known limit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::datagen::stream_rng;
use crate::error::Result;
use crate::family::Outcome;
use crate::marginal::Marginal;
use crate::nn::{MlpConfig, ModelParams};
use crate::second_order::{mean_and_se, sample_outcome, SecondOrderKind, SecondOrderParams};
use crate::specfun::{lgamma, psi};
use crate::train::{adam_step, batch_loss_xy, AdamConfig, AdamState, LossSpec};

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Random parameters of a family over moderate ranges.
pub fn random_params<R: Rng + ?Sized>(kind: SecondOrderKind, rng: &mut R) -> SecondOrderParams {
    match kind {
        SecondOrderKind::Dirichlet { classes } => {
            SecondOrderParams::dirichlet((0..classes).map(|_| log_uniform(rng, 0.5, 20.0)).collect()).expect("valid")
        }
        SecondOrderKind::Nig => SecondOrderParams::nig(
            rng.random_range(-2.0..2.0),
            log_uniform(rng, 0.2, 5.0),
            1.0 + log_uniform(rng, 0.2, 8.0),
            log_uniform(rng, 0.2, 5.0),
        )
        .expect("valid"),
        SecondOrderKind::Gamma => SecondOrderParams::gamma(log_uniform(rng, 0.5, 20.0), log_uniform(rng, 0.2, 5.0)).expect("valid"),
    }
}

/// An outcome drawn from the predictive of `m`.
pub fn random_outcome<R: Rng + ?Sized>(m: &SecondOrderParams, rng: &mut R) -> Outcome {
    let theta = m.sample(rng);
    sample_outcome(&theta, rng)
}

/// Monte-Carlo estimate of −E_θ[log p(y | θ)] with its standard error.
pub fn mc_expected_nll<R: Rng + ?Sized>(m: &SecondOrderParams, y: Outcome, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
    let values = (0..draws).map(|_| m.sample(rng).nll(y)).collect::<Result<Vec<_>>>()?;
    Ok(mean_and_se(&values))
}

/// −log of the Monte-Carlo mean likelihood E_θ[p(y | θ)], with a delta-method standard error.
pub fn mc_predictive_nll<R: Rng + ?Sized>(m: &SecondOrderParams, y: Outcome, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
    let values = (0..draws).map(|_| Ok((-m.sample(rng).nll(y)?).exp())).collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok((-mean.ln(), se / mean))
}

/// Monte-Carlo estimate of −E_θ[log p(θ | m)].
pub fn mc_entropy<R: Rng + ?Sized>(m: &SecondOrderParams, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
    let values = (0..draws).map(|_| Ok(-m.log_density(&m.sample(rng))?)).collect::<Result<Vec<_>>>()?;
    Ok(mean_and_se(&values))
}

/// Monte-Carlo estimate of KL(p(·|m) ‖ p(·|m0)).
pub fn mc_kl<R: Rng + ?Sized>(m: &SecondOrderParams, m0: &SecondOrderParams, draws: usize, rng: &mut R) -> Result<(f64, f64)> {
    let values = (0..draws)
        .map(|_| {
            let t = m.sample(rng);
            Ok(m.log_density(&t)? - m0.log_density(&t)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_and_se(&values))
}

/// Dirichlet entropy with `(m_k − K)` in place of `(m_k − 1)` in the last sum.
/// Kept only to show that the MC oracle rejects it.
pub fn dirichlet_entropy_mutant(m: &[f64]) -> f64 {
    let k = m.len() as f64;
    let m0: f64 = m.iter().sum();
    let ln_b: f64 = m.iter().map(|&mk| lgamma(mk)).sum::<f64>() - lgamma(m0);
    ln_b + (m0 - k) * psi(m0) - m.iter().map(|&mk| (mk - k) * psi(mk)).sum::<f64>()
}

/// Largest |analytic − central difference| over all weights, relative to
/// the largest finite-difference component.
pub fn gradient_check(loss: &LossSpec, mlp: &MlpConfig, params: &ModelParams, xs: &[f64], ys: &[Outcome], h: f64) -> Result<f64> {
    let analytic = batch_loss_xy(loss, params, mlp, xs, ys)?.grad.values;
    let mut numeric = vec![0.0; analytic.len()];
    let mut p = params.clone();
    for i in 0..analytic.len() {
        let orig = p.values[i];
        p.values[i] = orig + h;
        let up = batch_loss_xy(loss, &p, mlp, xs, ys)?.loss;
        p.values[i] = orig - h;
        let down = batch_loss_xy(loss, &p, mlp, xs, ys)?.loss;
        p.values[i] = orig;
        numeric[i] = (up - down) / (2.0 * h);
    }
    let scale = numeric.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    Ok(analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale)
}

/// Textbook Adam written independently of [`adam_step`]: runs `steps`
/// updates of `x` under the gradient field `grad`.
pub fn reference_adam(x0: &[f64], grad: impl Fn(&[f64]) -> Vec<f64>, lr: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut x = x0.to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for _ in 0..steps {
        let g = grad(&x);
        b1t *= b1;
        b2t *= b2;
        for i in 0..x.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1t);
            let v_hat = v[i] / (1.0 - b2t);
            x[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    x
}

/// Runs [`adam_step`] under the same gradient field.
pub fn library_adam(x0: &[f64], grad: impl Fn(&[f64]) -> Vec<f64>, lr: f64, steps: usize) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut state = AdamState::new(x.len(), AdamConfig::default());
    for _ in 0..steps {
        let g = grad(&x);
        adam_step(&mut state, &mut x, &g, lr)?;
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub name: String,
    pub passed: bool,
    /// Worst measured error (|z|-score, relative or absolute error, per oracle).
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub results: Vec<OracleResult>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("oracle report (seed {})\n", self.seed);
        for r in &self.results {
            s.push_str(&format!(
                "{} {:<40} measured {:.3e} tol {:.1e}  {}\n",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.measured,
                r.tolerance,
                r.detail
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const FAMILIES: [SecondOrderKind; 4] = [
    SecondOrderKind::Dirichlet { classes: 2 },
    SecondOrderKind::Dirichlet { classes: 3 },
    SecondOrderKind::Nig,
    SecondOrderKind::Gamma,
];

fn family_name(kind: SecondOrderKind) -> String {
    match kind {
        SecondOrderKind::Dirichlet { classes } => format!("dirichlet{classes}"),
        SecondOrderKind::Nig => "nig".into(),
        SecondOrderKind::Gamma => "gamma".into(),
    }
}

/// Max |z| of `closed − estimate` over `configs` random parameter sets.
fn z_oracle<F>(name: String, configs: usize, z_tol: f64, rng: &mut ChaCha8Rng, mut one: F) -> Result<OracleResult>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<(f64, f64, f64)>,
{
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let (closed, est, se) = one(rng)?;
        worst = worst.max((closed - est).abs() / se.max(1e-300));
    }
    Ok(OracleResult { name, passed: worst <= z_tol, measured: worst, tolerance: z_tol, detail: format!("max |z| over {configs} configs") })
}

/// Runs every oracle at moderate sample sizes. Monte-Carlo checks use a 4σ
/// bound since each oracle takes a maximum over many configurations.
pub fn run_oracles(seed: u64) -> Result<OracleReport> {
    const CONFIGS: usize = 10;
    const DRAWS: usize = 20_000;
    const Z: f64 = 4.0;
    let mut results = Vec::new();
    let mut stream = 0;
    let mut next_rng = || {
        stream += 1;
        stream_rng(seed, 1000 + stream)
    };

    for kind in FAMILIES {
        let fam = family_name(kind);
        results.push(z_oracle(format!("expected_nll_vs_mc/{fam}"), CONFIGS, Z, &mut next_rng(), |rng| {
            let m = random_params(kind, rng);
            let y = random_outcome(&m, rng);
            let (est, se) = mc_expected_nll(&m, y, DRAWS, rng)?;
            Ok((m.expected_nll(y)?, est, se))
        })?);
        results.push(z_oracle(format!("predictive_nll_vs_mc/{fam}"), CONFIGS, Z, &mut next_rng(), |rng| {
            let m = random_params(kind, rng);
            let y = random_outcome(&m, rng);
            let (est, se) = mc_predictive_nll(&m, y, 5 * DRAWS, rng)?;
            Ok((m.predictive_nll(y)?, est, se))
        })?);
        results.push(z_oracle(format!("entropy_vs_mc/{fam}"), CONFIGS, Z, &mut next_rng(), |rng| {
            let m = random_params(kind, rng);
            let (est, se) = mc_entropy(&m, DRAWS, rng)?;
            Ok((m.entropy(), est, se))
        })?);
        results.push(z_oracle(format!("kl_vs_mc/{fam}"), CONFIGS, Z, &mut next_rng(), |rng| {
            let m = random_params(kind, rng);
            let m0 = random_params(kind, rng);
            let (est, se) = mc_kl(&m, &m0, DRAWS, rng)?;
            Ok((m.kl(&m0)?, est, se))
        })?);
        if kind != SecondOrderKind::Gamma {
            results.push(z_oracle(format!("mutual_information_vs_mc/{fam}"), CONFIGS, Z, &mut next_rng(), |rng| {
                let m = random_params(kind, rng);
                let (est, se) = m.mutual_information_mc(DRAWS, rng)?;
                Ok((m.epistemic_measures().mutual_information.expect("defined"), est, se))
            })?);
        }
        let mut rng = next_rng();
        let mut slack = f64::INFINITY;
        for _ in 0..200 {
            let m = random_params(kind, &mut rng);
            let y = random_outcome(&m, &mut rng);
            slack = slack.min(m.expected_nll(y)? - m.predictive_nll(y)?);
        }
        results.push(OracleResult {
            name: format!("outer_at_least_inner/{fam}"),
            passed: slack >= -1e-10,
            measured: slack,
            tolerance: -1e-10,
            detail: "min (outer − inner) over 200 draws".into(),
        });
    }

    // The (m_k − K) entropy variant must be rejected by the same oracle.
    let mut rng = next_rng();
    let mut worst = 0.0f64;
    for _ in 0..CONFIGS {
        let m = random_params(SecondOrderKind::Dirichlet { classes: 3 }, &mut rng);
        let (est, se) = mc_entropy(&m, DRAWS, &mut rng)?;
        let SecondOrderParams::Dirichlet { m: ref v } = m else { unreachable!() };
        worst = worst.max((dirichlet_entropy_mutant(v) - est).abs() / se);
    }
    results.push(OracleResult {
        name: "dirichlet_entropy_mutant_rejected".into(),
        passed: worst > Z,
        measured: worst,
        tolerance: Z,
        detail: "the (m_k − K) variant must exceed the z bound".into(),
    });

    results.extend(gradient_oracles(seed)?);

    let quad = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v - 0.3 * v.powi(3)).collect::<Vec<_>>();
    let x0 = [0.5, -1.0, 2.0, 0.1];
    let a = library_adam(&x0, quad, 1e-2, 100)?;
    let b = reference_adam(&x0, quad, 1e-2, 100);
    let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    results.push(OracleResult {
        name: "adam_matches_reference".into(),
        passed: diff <= 1e-12,
        measured: diff,
        tolerance: 1e-12,
        detail: "100 steps, max abs difference".into(),
    });

    let mut rng = next_rng();
    let samples: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let w1 = crate::eval::wasserstein1_marginal(&samples, &Marginal::Beta { a: 1.0, b: 1.0 })?;
    results.push(OracleResult {
        name: "w1_uniform_samples_vs_beta11".into(),
        passed: w1 <= 0.01,
        measured: w1,
        tolerance: 0.01,
        detail: "1e5 uniform draws".into(),
    });

    Ok(OracleReport { seed, results })
}

fn gradient_oracles(seed: u64) -> Result<Vec<OracleResult>> {
    use crate::datagen::SyntheticTask;
    use crate::nn::{Activation, Head};
    use crate::train::{LossKind, Regularizer};

    let cls = SyntheticTask::ClsSine.generate(12, seed)?;
    let reg = SyntheticTask::RegCubic.generate(12, seed)?;
    let counts: Vec<Outcome> = (0..12u64).map(|k| Outcome::Count(k % 5)).collect();
    let count_xs: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
    let scaled: Vec<Outcome> = reg.ys.iter().map(|y| Outcome::Real(y.as_f64() / 20.0)).collect();
    let cases: Vec<(Head, LossKind, Regularizer, &[f64], &[Outcome])> = vec![
        (Head::FirstOrderBernoulli, LossKind::FirstOrderNll, Regularizer::None, &cls.xs, &cls.ys),
        (Head::FirstOrderGaussian, LossKind::FirstOrderNll, Regularizer::None, &reg.xs, &scaled),
        (Head::SecondOrderBeta, LossKind::InnerNll, Regularizer::None, &cls.xs, &cls.ys),
        (Head::SecondOrderBeta, LossKind::OuterNll, Regularizer::NegEntropy, &cls.xs, &cls.ys),
        (Head::SecondOrderNig, LossKind::InnerNll, Regularizer::NegEntropy, &reg.xs, &scaled),
        (Head::SecondOrderNig, LossKind::OuterNll, Regularizer::None, &reg.xs, &scaled),
        (Head::SecondOrderGamma, LossKind::OuterNll, Regularizer::NegEntropy, &count_xs, &counts),
        (Head::SecondOrderGamma, LossKind::InnerNll, Regularizer::None, &count_xs, &counts),
    ];
    let mut out = Vec::new();
    for (i, (head, kind, regularizer, xs, ys)) in cases.into_iter().enumerate() {
        let lambda = if regularizer == Regularizer::None { 0.0 } else { 0.3 };
        let loss = LossSpec::new(kind, regularizer.clone(), lambda)?;
        let mlp = MlpConfig::new(1, vec![5], Activation::Tanh, head)?;
        let params = ModelParams::init(&mlp, seed.wrapping_add(i as u64));
        let err = gradient_check(&loss, &mlp, &params, xs, ys, 1e-6)?;
        out.push(OracleResult {
            name: format!("gradient_vs_finite_differences/{head:?}/{kind}{}", if lambda > 0.0 { "+negentropy" } else { "" }),
            passed: err <= 1e-4,
            measured: err,
            tolerance: 1e-4,
            detail: "central differences, h = 1e-6".into(),
        });
    }
    Ok(out)
}

/// One row of the concept-to-code map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceEntry {
    pub concept: &'static str,
    pub operations: &'static [&'static str],
    pub tests: &'static [&'static str],
}

/// Where each modelling ingredient lives and which tests exercise it.
pub const TRACE: &[TraceEntry] = &[
    TraceEntry {
        concept: "first-order risk: negative log-likelihood of Bernoulli / Gaussian / Poisson",
        operations: &["family::FirstOrderParams::nll", "train::LossKind::FirstOrderNll"],
        tests: &["first_order_nll_matches_statrs", "criterion_2_gradient_fidelity"],
    },
    TraceEntry {
        concept: "inner loss: negative log predictive",
        operations: &["second_order::SecondOrderParams::predictive_nll", "train::LossKind::InnerNll"],
        tests: &["criterion_1_closed_form_losses", "zero_weight_beta_losses"],
    },
    TraceEntry {
        concept: "outer loss: expected negative log-likelihood",
        operations: &["second_order::SecondOrderParams::expected_nll", "train::LossKind::OuterNll"],
        tests: &["criterion_1_closed_form_losses", "criterion_3_jensen_ordering"],
    },
    TraceEntry {
        concept: "entropy and KL regularizers",
        operations: &["train::Regularizer", "second_order::SecondOrderParams::kl", "second_order::SecondOrderParams::grad_entropy"],
        tests: &["kl_to_uniform_matches_negative_entropy_gradient", "kl_matches_mc"],
    },
    TraceEntry {
        concept: "reference second-order distribution from resampled first-order fits",
        operations: &["reference::ReferenceEstimate::estimate", "reference::ReferenceEstimate::empirical_cdf"],
        tests: &["constant_task_reference_mean", "reference_spread_shrinks_with_n", "reference_is_seed_deterministic"],
    },
    TraceEntry {
        concept: "non-injectivity of the inner-loss parameterization",
        operations: &["second_order::SecondOrderParams::predictive"],
        tests: &["criterion_4_non_injectivity"],
    },
    TraceEntry {
        concept: "Dirac collapse of the unregularized outer loss",
        operations: &["train::fit"],
        tests: &["criterion_5_dirac_collapse", "criterion_8_regression_trajectories"],
    },
    TraceEntry {
        concept: "regularized risk as an uncertainty budget",
        operations: &["train::LossSpec::entropy_regularized"],
        tests: &["criterion_5_dirac_collapse", "criterion_8_regression_trajectories"],
    },
    TraceEntry {
        concept: "entropies of Dirichlet, NIG and Gamma",
        operations: &["second_order::SecondOrderParams::entropy"],
        tests: &["criterion_10_entropy_formulas", "entropy_matches_mc"],
    },
    TraceEntry {
        concept: "predictive distributions: Categorical, Student-t, negative binomial",
        operations: &["second_order::SecondOrderParams::predictive", "second_order::PredictiveDist"],
        tests: &["criterion_1_closed_form_losses", "student_t_direct_form_matches_reparameterized_loss"],
    },
    TraceEntry {
        concept: "convexity of the inner loss for linear Dirichlet models, and its failure for NIG",
        operations: &["train::convexity_probe"],
        tests: &["criterion_9_convexity_probes"],
    },
    TraceEntry {
        concept: "closed-form expected log-likelihoods",
        operations: &["second_order::SecondOrderParams::expected_nll", "second_order::SecondOrderParams::grad_expected_nll"],
        tests: &["criterion_1_closed_form_losses", "criterion_2_gradient_fidelity"],
    },
    TraceEntry {
        concept: "epistemic measures: pseudo-counts, mutual information, Var(μ), entropy",
        operations: &["second_order::SecondOrderParams::epistemic_measures"],
        tests: &["mutual_information_matches_mc", "epistemic_measures_trivial_points"],
    },
    TraceEntry {
        concept: "faithfulness metric: Wasserstein-1 distance to the reference",
        operations: &["eval::wasserstein1", "eval::faithfulness_sweep"],
        tests: &["criterion_6_faithfulness_gap", "w1_triangle_inequality", "glivenko_cantelli_rate"],
    },
    TraceEntry {
        concept: "classification protocol: sine task, bands, W1 and trajectories",
        operations: &["datagen::SyntheticTask::ClsSine", "experiment::Figure::Fig2", "experiment::Figure::Fig3", "experiment::Figure::Fig4"],
        tests: &["criterion_7_band_reproduction", "reproduce_is_deterministic"],
    },
    TraceEntry {
        concept: "regression protocol: cubic task with NIG heads",
        operations: &["datagen::SyntheticTask::RegCubic", "experiment::Figure::Fig5", "experiment::Figure::Fig6"],
        tests: &["criterion_8_regression_trajectories", "cubic_noise_variance_clt"],
    },
];
