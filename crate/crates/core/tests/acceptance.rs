//! Acceptance gate: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. The process exits nonzero if any criterion fails.

use std::time::Instant;

use evidential::datagen::{stream_rng, SyntheticTask};
use evidential::eval::{faithfulness_sweep, model_band, ModelPredictions};
use evidential::experiment::{ExperimentConfig, BAND_LEVELS};
use evidential::nn::{Activation, Head, MlpConfig, ModelParams};
use evidential::oracles::{
    dirichlet_entropy_mutant, gradient_check, mc_entropy, mc_expected_nll, mc_predictive_nll, random_outcome,
    random_params,
};
use evidential::reference::ReferenceEstimate;
use evidential::second_order::{PredictiveDist, SecondOrderKind, SecondOrderParams};
use evidential::train::{convexity_probe, fit, predict_outputs, LossKind, LossSpec, Regularizer, TrainRun};
use evidential::Result;
use rand::Rng;

const FAMILIES: [SecondOrderKind; 3] =
    [SecondOrderKind::Dirichlet { classes: 3 }, SecondOrderKind::Nig, SecondOrderKind::Gamma];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn spearman(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mut idx: Vec<usize> = (0..ys.len()).collect();
    idx.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let mut rank = vec![0.0; ys.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r as f64;
    }
    let d2: f64 = rank.iter().enumerate().map(|(i, r)| (i as f64 - r).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn cv(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / mean.abs()
}

fn criterion_1_closed_form_losses() -> Result<Verdict> {
    let mut rng = stream_rng(1, 0);
    let mut lines = Vec::new();
    let mut passed = true;
    for kind in FAMILIES {
        let (mut worst_outer, mut worst_inner) = (0.0f64, 0.0f64);
        let (mut bad_outer, mut bad_inner) = (0, 0);
        for _ in 0..100 {
            let m = random_params(kind, &mut rng);
            let y = random_outcome(&m, &mut rng);
            let (est, se) = mc_expected_nll(&m, y, 100_000, &mut rng)?;
            let z = (m.expected_nll(y)? - est).abs() / se;
            worst_outer = worst_outer.max(z);
            bad_outer += usize::from(z > 3.0);
            let (est, se) = mc_predictive_nll(&m, y, 1_000_000, &mut rng)?;
            let z = (m.predictive_nll(y)? - est).abs() / se;
            worst_inner = worst_inner.max(z);
            bad_inner += usize::from(z > 3.0);
        }
        passed &= bad_outer == 0 && bad_inner == 0;
        lines.push(format!(
            "{kind:?}: outer max|z| {worst_outer:.2} ({bad_outer}/100 > 3), inner max|z| {worst_inner:.2} ({bad_inner}/100 > 3)"
        ));
    }
    Ok(verdict(passed, lines.join("; ")))
}

fn criterion_2_gradient_fidelity() -> Result<Verdict> {
    let cls = SyntheticTask::ClsSine.generate(10, 2)?;
    let reg = SyntheticTask::RegCubic.generate(10, 2)?;
    let reg_ys: Vec<_> = reg.ys.iter().map(|y| evidential::family::Outcome::Real(y.as_f64() / 10.0)).collect();
    let counts: Vec<_> = (0..10u64).map(|k| evidential::family::Outcome::Count((k * 7) % 6)).collect();
    let count_xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let mut worst = 0.0f64;
    let mut checks = 0;
    let mut cases: Vec<(Head, LossKind, bool)> = vec![
        (Head::FirstOrderBernoulli, LossKind::FirstOrderNll, false),
        (Head::FirstOrderGaussian, LossKind::FirstOrderNll, false),
    ];
    for head in [Head::SecondOrderBeta, Head::SecondOrderNig, Head::SecondOrderGamma] {
        for kind in [LossKind::InnerNll, LossKind::OuterNll] {
            for reg in [false, true] {
                cases.push((head, kind, reg));
            }
        }
    }
    for (ci, (head, kind, regularized)) in cases.into_iter().enumerate() {
        let (xs, ys): (&[f64], &[_]) = match head {
            Head::FirstOrderBernoulli | Head::SecondOrderBeta => (&cls.xs, &cls.ys),
            Head::FirstOrderGaussian | Head::SecondOrderNig => (&reg.xs, &reg_ys),
            _ => (&count_xs, &counts),
        };
        let loss = if regularized {
            LossSpec::new(kind, Regularizer::NegEntropy, 0.2)?
        } else {
            LossSpec::plain(kind)
        };
        let mlp = MlpConfig::new(1, vec![4], Activation::Tanh, head)?;
        for point in 0..50u64 {
            let params = ModelParams::init(&mlp, 1000 * ci as u64 + point);
            worst = worst.max(gradient_check(&loss, &mlp, &params, xs, ys, 1e-6)?);
            checks += 1;
        }
    }
    Ok(verdict(worst <= 1e-4, format!("{checks} points, max relative error {worst:.2e} (tol 1e-4)")))
}

fn criterion_3_jensen_ordering() -> Result<Verdict> {
    let mut rng = stream_rng(3, 0);
    let mut slack = f64::INFINITY;
    for kind in [SecondOrderKind::Dirichlet { classes: 2 }, SecondOrderKind::Dirichlet { classes: 4 }, SecondOrderKind::Nig, SecondOrderKind::Gamma] {
        for _ in 0..1000 {
            let m = random_params(kind, &mut rng);
            let y = random_outcome(&m, &mut rng);
            slack = slack.min(m.expected_nll(y)? - m.predictive_nll(y)?);
        }
    }
    Ok(verdict(slack >= -1e-10, format!("min(outer − inner) = {slack:.3e} over 4000 pairs")))
}

fn criterion_4_non_injectivity() -> Result<Verdict> {
    let mut rng = stream_rng(4, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..50.0)).collect();
        let c = rng.random_range(0.01..100.0);
        let a = SecondOrderParams::dirichlet(m.clone())?.predictive();
        let b = SecondOrderParams::dirichlet(m.iter().map(|v| c * v).collect())?.predictive();
        if let (PredictiveDist::Categorical { theta: p }, PredictiveDist::Categorical { theta: q }) = (a, b) {
            worst = worst.max(p.iter().zip(&q).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
        }

        let (gamma, nu, alpha, beta) =
            (rng.random_range(-3.0..3.0), rng.random_range(0.1..10.0), rng.random_range(1.0..10.0), rng.random_range(0.1..10.0));
        let nu2 = rng.random_range(0.1..10.0);
        let beta2 = beta * (1.0 + nu) / nu * nu2 / (1.0 + nu2);
        let a = SecondOrderParams::nig(gamma, nu, alpha, beta)?.predictive();
        let b = SecondOrderParams::nig(gamma, nu2, alpha, beta2)?.predictive();
        if let (PredictiveDist::StudentT { loc: l1, scale2: s1, df: d1 }, PredictiveDist::StudentT { loc: l2, scale2: s2, df: d2 }) = (a, b)
        {
            worst = worst.max((l1 - l2).abs()).max((s1 - s2).abs() / s1).max((d1 - d2).abs());
        }

        let (ga, gb) = (rng.random_range(0.1..50.0), rng.random_range(0.05..20.0));
        let g = SecondOrderParams::gamma(ga, gb)?;
        if let PredictiveDist::NegBinomial { r, p } = g.predictive() {
            if let SecondOrderParams::Gamma { alpha, beta } = SecondOrderParams::gamma_from_negbinomial(r, p)? {
                worst = worst.max((alpha - ga).abs() / ga).max((beta - gb).abs() / gb);
            }
        }
    }
    Ok(verdict(worst <= 1e-12, format!("max deviation {worst:.2e} over 1000 draws per family (tol 1e-12)")))
}

/// Shared classification setup at N=500, desk scale.
struct ClsStudy {
    cfg: ExperimentConfig,
    reference: ReferenceEstimate,
    runs: Vec<(LossKind, f64, TrainRun)>,
}

impl ClsStudy {
    fn new() -> Result<Self> {
        let cfg = ExperimentConfig::build(SyntheticTask::ClsSine, true, &[])?;
        let grid = cfg.grid()?;
        let data = cfg.task.generate(cfg.n, cfg.data_seed())?;
        let t = Instant::now();
        let reference = ReferenceEstimate::estimate(
            cfg.task,
            cfg.n,
            cfg.d,
            &grid,
            &cfg.first_order_mlp()?,
            &cfg.train_config(0)?,
            cfg.reference_seed(),
        )?;
        println!("  (reference d={} built in {:.0} s)", reference.d(), t.elapsed().as_secs_f64());
        let mut runs = Vec::new();
        for kind in [LossKind::OuterNll, LossKind::InnerNll] {
            for &lambda in &cfg.lambdas {
                let loss = LossSpec::entropy_regularized(kind, lambda)?;
                let run = fit(&loss, &cfg.train_config(cfg.weight_seed(0))?, &cfg.second_order_mlp()?, &data, &grid)?;
                runs.push((kind, lambda, run));
            }
        }
        Ok(ClsStudy { cfg, reference, runs })
    }

    fn run(&self, kind: LossKind, lambda: f64) -> &TrainRun {
        &self.runs.iter().find(|(k, l, _)| *k == kind && *l == lambda).expect("trained").2
    }

    fn predictions(&self, run: &TrainRun) -> Result<Vec<SecondOrderParams>> {
        Ok(predict_outputs(&run.params, &run.mlp, &self.reference.grid)?
            .into_iter()
            .map(|o| o.second_order().expect("second-order head").clone())
            .collect())
    }
}

fn pseudo_counts(run: &TrainRun) -> Vec<(usize, f64)> {
    run.trajectory.iter().map(|r| (r.epoch, r.mean_params.iter().sum())).collect()
}

fn criterion_5_dirac_collapse(study: &ClsStudy) -> Result<Verdict> {
    let at = |series: &[(usize, f64)], epoch: usize| series.iter().find(|(e, _)| *e == epoch).map(|p| p.1).expect("recorded");
    let plain = pseudo_counts(study.run(LossKind::OuterNll, 0.0));
    let rho = spearman(&plain.iter().map(|p| p.1).collect::<Vec<_>>());
    let (p300, pend) = (at(&plain, 300), plain.last().expect("trajectory").1);
    let reg = pseudo_counts(study.run(LossKind::OuterNll, 0.01));
    let (r300, r1000, rend) = (at(&reg, 300), at(&reg, 1000), reg.last().expect("trajectory").1);
    let growth = rho > 0.95 && pend >= 5.0 * p300;
    let bounded = rend <= 2.0 * r300;
    Ok(verdict(
        growth && bounded,
        format!(
            "λ=0: ρ={rho:.4}, final/epoch300 = {pend:.1}/{p300:.1} = {:.2} (≥ 5 {}); λ=0.01: final/epoch300 = {rend:.1}/{r300:.1} = {:.2} (≤ 2 {}), final/epoch1000 = {:.2}",
            pend / p300,
            if growth { "ok" } else { "FAILED" },
            rend / r300,
            if bounded { "ok" } else { "FAILED" },
            rend / r1000,
        ),
    ))
}

fn criterion_6_faithfulness_gap(study: &ClsStudy) -> Result<Verdict> {
    let mut models = Vec::new();
    for (kind, lambda, run) in &study.runs {
        models.push(ModelPredictions { loss_kind: *kind, lambda: *lambda, predictions: study.predictions(run)? });
    }
    let report = faithfulness_sweep(&study.reference, &models, &study.cfg.lambdas, BAND_LEVELS)?;
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for s in &report.summaries {
        worst = worst.min(s.frac_above_baseline);
        parts.push(format!("{} λ={}: {:.0}%", s.loss_kind, s.lambda, 100.0 * s.frac_above_baseline));
    }
    Ok(verdict(worst >= 0.8 && report.summaries.len() == 6, parts.join(", ")))
}

fn criterion_7_band_reproduction(study: &ClsStudy) -> Result<Verdict> {
    let preds = study.predictions(study.run(LossKind::OuterNll, 0.0))?;
    let grid = &study.reference.grid;
    let (lo, hi) = study.cfg.task.data_region();
    let (mut model_data, mut ref_data, mut ref_extra) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &x) in grid.iter().enumerate() {
        let band = study.reference.band(i, BAND_LEVELS)?;
        if x >= lo && x <= hi {
            let (_, l, h) = model_band(&preds[i], BAND_LEVELS)?[0];
            model_data.push(h - l);
            ref_data.push(band.hi - band.lo);
        } else if x > hi {
            ref_extra.push(band.hi - band.lo);
        }
    }
    let (m, r, e) = (median(model_data), median(ref_data), median(ref_extra));
    Ok(verdict(
        m <= r / 3.0 && e > r,
        format!("median widths: model (data) {m:.4}, reference (data) {r:.4}, reference (x > 0.5) {e:.4}"),
    ))
}

fn criterion_8_regression_trajectories() -> Result<Verdict> {
    let mut cfg = ExperimentConfig::build(SyntheticTask::RegCubic, false, &[])?;
    cfg.epochs = 3000;
    let grid = cfg.grid()?;
    let data = cfg.task.generate(cfg.n, cfg.data_seed())?;
    let mlp = cfg.second_order_mlp()?;
    let outer = fit(&LossSpec::plain(LossKind::OuterNll), &cfg.train_config(cfg.weight_seed(0))?, &mlp, &data, &grid)?;
    let nu: Vec<f64> = outer.trajectory.iter().map(|r| r.mean_params[1]).collect();
    let rho = spearman(&nu);

    let finals = |lambda: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let loss = LossSpec::entropy_regularized(LossKind::InnerNll, lambda)?;
        let (mut nus, mut betas) = (Vec::new(), Vec::new());
        for run in 0..10 {
            let r = fit(&loss, &cfg.train_config(cfg.weight_seed(run))?, &mlp, &data, &grid)?;
            let last = &r.trajectory.last().expect("trajectory").mean_params;
            nus.push(last[1]);
            betas.push(last[3]);
        }
        Ok((nus, betas))
    };
    let (nu0, beta0) = finals(0.0)?;
    let (nu1, beta1) = finals(0.01)?;
    let ratio_nu = cv(&nu0) / cv(&nu1);
    let ratio_beta = cv(&beta0) / cv(&beta1);
    let joint = 0.5 * (cv(&nu0) + cv(&beta0)) / (0.5 * (cv(&nu1) + cv(&beta1)));
    Ok(verdict(
        rho > 0.9 && joint >= 5.0,
        format!(
            "outer ν̂: ρ={rho:.4} ({:.3} → {:.3}); inner CV ratio λ=0 / λ=0.01: ν̂ {:.3}/{:.3} = {ratio_nu:.2}, β̂ {:.3}/{:.3} = {ratio_beta:.2}, joint {joint:.2} (≥ 5)",
            nu[0],
            nu[nu.len() - 1],
            cv(&nu0),
            cv(&nu1),
            cv(&beta0),
            cv(&beta1),
        ),
    ))
}

fn criterion_9_convexity_probes() -> Result<Verdict> {
    let cls = SyntheticTask::ClsSine.generate(50, 9)?;
    let linear = MlpConfig::new(1, vec![], Activation::Relu, Head::SecondOrderBeta)?;
    let dir = convexity_probe(&LossSpec::plain(LossKind::InnerNll), &linear, &cls.xs, &cls.ys, 100, 3.0, 1e-9, 9)?;
    let reg = SyntheticTask::RegCubic.generate(50, 9)?;
    let nig_mlp = MlpConfig::new(1, vec![], Activation::Relu, Head::SecondOrderNig)?;
    let nig = convexity_probe(&LossSpec::plain(LossKind::InnerNll), &nig_mlp, &reg.xs, &reg.ys, 1000, 3.0, 1e-9, 9)?;
    Ok(verdict(
        dir.violations == 0 && nig.violations >= 1,
        format!(
            "Dirichlet linear: {}/{} violating (worst gap {:.2e}); NIG: {}/{} violating",
            dir.violations, dir.segments, dir.worst_gap, nig.violations, nig.segments
        ),
    ))
}

fn criterion_10_entropy_formulas() -> Result<Verdict> {
    let mut rng = stream_rng(10, 0);
    let mut parts = Vec::new();
    let mut passed = true;
    for kind in FAMILIES {
        let (mut worst, mut bad) = (0.0f64, 0);
        for _ in 0..50 {
            let m = random_params(kind, &mut rng);
            let (est, se) = mc_entropy(&m, 100_000, &mut rng)?;
            let z = (m.entropy() - est).abs() / se;
            worst = worst.max(z);
            bad += usize::from(z > 3.0);
        }
        passed &= bad == 0;
        parts.push(format!("{kind:?} max|z| {worst:.2} ({bad}/50 > 3)"));
    }
    let mut mutant_min = f64::INFINITY;
    for _ in 0..50 {
        let m = random_params(SecondOrderKind::Dirichlet { classes: 3 }, &mut rng);
        let (est, se) = mc_entropy(&m, 100_000, &mut rng)?;
        let SecondOrderParams::Dirichlet { m: ref v } = m else { unreachable!() };
        mutant_min = mutant_min.min((dirichlet_entropy_mutant(v) - est).abs() / se);
    }
    let mutant_rejected = mutant_min > 3.0;
    passed &= mutant_rejected;
    parts.push(format!("(m_k − K) variant: min|z| {mutant_min:.1} ({})", if mutant_rejected { "rejected" } else { "NOT rejected" }));
    Ok(verdict(passed, parts.join("; ")))
}

fn report(name: &str, started: Instant, outcome: Result<Verdict>, failures: &mut usize) {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(v) => {
            *failures += usize::from(!v.passed);
            println!("{} {name} [{secs:.1} s]: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        }
        Err(e) => {
            *failures += 1;
            println!("FAIL {name} [{secs:.1} s]: error: {e}");
        }
    }
}

fn main() {
    // `cargo test -- --list` and similar harness flags: nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let cheap: [(&str, fn() -> Result<Verdict>); 5] = [
        ("criterion 1 closed-form losses", criterion_1_closed_form_losses),
        ("criterion 2 gradient fidelity", criterion_2_gradient_fidelity),
        ("criterion 3 Jensen ordering", criterion_3_jensen_ordering),
        ("criterion 4 non-injectivity", criterion_4_non_injectivity),
        ("criterion 9 convexity probes", criterion_9_convexity_probes),
    ];
    for (name, f) in cheap {
        report(name, Instant::now(), f(), &mut failures);
    }
    report("criterion 10 entropy formulas", Instant::now(), criterion_10_entropy_formulas(), &mut failures);

    let t = Instant::now();
    match ClsStudy::new() {
        Ok(study) => {
            println!("  (classification study ready in {:.0} s)", t.elapsed().as_secs_f64());
            report("criterion 5 Dirac collapse", Instant::now(), criterion_5_dirac_collapse(&study), &mut failures);
            report("criterion 6 faithfulness gap", Instant::now(), criterion_6_faithfulness_gap(&study), &mut failures);
            report("criterion 7 band reproduction", Instant::now(), criterion_7_band_reproduction(&study), &mut failures);
        }
        Err(e) => {
            for name in ["criterion 5 Dirac collapse", "criterion 6 faithfulness gap", "criterion 7 band reproduction"] {
                failures += 1;
                println!("FAIL {name}: classification study failed: {e}");
            }
        }
    }
    report("criterion 8 regression trajectories", Instant::now(), criterion_8_regression_trajectories(), &mut failures);

    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
