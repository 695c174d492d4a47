//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use privbayes::bayesmean::{run_stream, BatchMode, EpsilonSchedule, StreamState};
use privbayes::bayesreg::{completion_mean, completion_resilience, posterior_identity, regression_error_target, weak_prior_pipeline};
use privbayes::concentration::{
    sparse_spectral_exact, sparse_spectral_local_search, validate_covariance, validate_order_stat, validate_short_flat,
    validate_sparse_spectral, validate_subset_sum, BoundReport,
};
use privbayes::hardness::{
    advantage, gen_mixture, gen_mlr, hermite_moment_mixture, mean_distinguisher, psi_value, scaled_hermite_second_moment,
    Hypothesis, DEFAULT_K,
};
use privbayes::model::{
    corrupt, posterior_mean_mean_model, posterior_mean_regression, sample_mean_instance, sample_regression_instance,
    AdversarySpec, MeanDataset, PriorSpec,
};
use privbayes::numerics::{distance, hermite_value, norm, scaled, sub, Matrix, QuadratureRule, RngStream};
use privbayes::privacy::{dp_ratio_audit, mean_score_field, sensitivity_audit, MeanMode};
use privbayes::robustmean::{
    certify_weights, efficient_rate, eta_sqrt_log, feasibility_threshold, robust_mean_filter, robust_mean_statistical,
    C_EFF, C_STAT, DEFAULT_DIRECTIONS, DEFAULT_EXACT_BUDGET,
};
use privbayes::Result;

type Outcome = Result<(bool, String)>;

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

/// Posterior mean of `μ ∼ N(0, σ²)` given `x̄ ∼ N(μ, 1/n)`, integrated
/// against whichever Gaussian factor is narrower.
fn quadrature_posterior_mean(sigma2: f64, n: usize, xbar: f64) -> f64 {
    let rule = QuadratureRule::standard();
    let lik_var = 1.0 / n as f64;
    if sigma2 <= lik_var {
        let s = sigma2.sqrt();
        let lik = |mu: f64| (-(xbar - mu).powi(2) / (2.0 * lik_var)).exp();
        let num = rule.expect(|z| s * z * lik(s * z));
        let den = rule.expect(|z| lik(s * z));
        num / den
    } else {
        let s = lik_var.sqrt();
        let prior = |mu: f64| (-mu * mu / (2.0 * sigma2)).exp();
        let num = rule.expect(|z| (xbar + s * z) * prior(xbar + s * z));
        let den = rule.expect(|z| prior(xbar + s * z));
        num / den
    }
}

fn posterior_quadrature() -> Outcome {
    let mut rng = RngStream::new(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let sigma2 = 0.05 + 5.0 * rng.uniform();
        let n = 1 + rng.index(200);
        let xbar = (sigma2 + 1.0 / n as f64).sqrt() * rng.standard_normal();
        let data = MeanDataset::from_rows(&vec![vec![xbar]; n])?;
        let got = posterior_mean_mean_model(&data, &PriorSpec::isotropic(1, sigma2)?)?[0];
        worst = worst.max((got - quadrature_posterior_mean(sigma2, n, xbar)).abs());
    }
    Ok((worst <= 1e-6, format!("max |Λx̄ − quadrature| = {worst:.2e}")))
}

fn shrinkage_identity() -> Outcome {
    let mut rng = RngStream::new(102, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = 1 + rng.index(6);
        let n = 1 + rng.index(500);
        let sigma2 = 0.01 + 10.0 * rng.uniform();
        let data = MeanDataset::new(Matrix::from_fn(n, d, |_, _| 3.0 * rng.standard_normal()))?;
        let got = posterior_mean_mean_model(&data, &PriorSpec::isotropic(d, sigma2)?)?;
        let expect = scaled(&data.mean(), n as f64 / (n as f64 + 1.0 / sigma2));
        worst = worst.max(got.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok((worst <= 1e-12, format!("max coordinate error {worst:.2e}")))
}

/// Exhaustive subset check of `‖Σ_{i∈S}(y_i − ȳ)‖/m ≤ threshold` over `|S| ≤ m`.
fn brute_force_feasible(rows: &[Vec<f64>], m: usize, threshold: f64) -> bool {
    let n = rows.len();
    let mean = scaled(&rows.iter().fold(vec![0.0; rows[0].len()], |a, r| privbayes::numerics::add(&a, r)), 1.0 / n as f64);
    let c: Vec<Vec<f64>> = rows.iter().map(|r| sub(r, &mean)).collect();
    let mut ok = true;
    let mut stack: Vec<(usize, Vec<f64>, usize)> = vec![(0, vec![0.0; mean.len()], 0)];
    while let Some((start, acc, size)) = stack.pop() {
        if norm(&acc) / m as f64 > threshold + 1e-12 {
            ok = false;
            break;
        }
        if size < m {
            for (i, ci) in c.iter().enumerate().skip(start) {
                stack.push((i + 1, privbayes::numerics::add(&acc, ci), size + 1));
            }
        }
    }
    ok
}

/// Whether some reconstruction changing at most `k` rows, filled with the
/// kept mean, has mean `est` and passes the exhaustive feasibility check.
fn estimate_is_feasible(obs: &[Vec<f64>], est: &[f64], k: usize, m: usize, threshold: f64) -> bool {
    let n = obs.len();
    let mut sets: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..n {
        if k >= 1 {
            sets.push(vec![i]);
        }
        for j in i + 1..n {
            if k >= 2 {
                sets.push(vec![i, j]);
            }
        }
    }
    sets.into_iter().any(|drop| {
        let kept: Vec<&Vec<f64>> = (0..n).filter(|i| !drop.contains(i)).map(|i| &obs[i]).collect();
        let fill = scaled(&kept.iter().fold(vec![0.0; est.len()], |a, r| privbayes::numerics::add(&a, r)), 1.0 / kept.len() as f64);
        if distance(&fill, est) > 1e-9 {
            return false;
        }
        let y: Vec<Vec<f64>> = (0..n).map(|i| if drop.contains(&i) { fill.clone() } else { obs[i].clone() }).collect();
        brute_force_feasible(&y, m, threshold)
    })
}

fn statistical_mode() -> Outcome {
    let (n, d, eta, beta) = (24usize, 2usize, 1.0 / 12.0, 0.05);
    let bound = C_STAT * (eta_sqrt_log(eta) + eta.sqrt() * (d as f64 / n as f64).sqrt());
    let threshold = feasibility_threshold(eta, d, n, beta);
    let m = (2.0 * eta * n as f64).round() as usize;
    let prior = PriorSpec::isotropic(d, 1.0)?;
    let (mut hits, mut returned, mut clean_feasible, mut output_feasible) = (0, 0, 0, 0);
    let trials = 200;
    for t in 0..trials {
        let mut rng = RngStream::new(103, t);
        let (_, clean) = sample_mean_instance(&prior, n, &mut rng)?;
        let obs = corrupt(&clean, &AdversarySpec::Gross { location: 10.0 + t as f64 }, eta, &mut rng)?;
        if brute_force_feasible(&clean.rows(), m, threshold) {
            clean_feasible += 1;
        }
        if let Ok(est) = robust_mean_statistical(&obs.observed, eta, beta, DEFAULT_EXACT_BUDGET) {
            returned += 1;
            if distance(&est, &clean.mean()) <= bound {
                hits += 1;
            }
            if estimate_is_feasible(&obs.observed.rows(), &est, 2, m, threshold) {
                output_feasible += 1;
            }
        }
    }
    let rate = fraction(hits, trials as usize);
    Ok((
        rate >= 0.9 && output_feasible == returned,
        format!(
            "{hits}/{trials} within {bound:.3}; brute force: clean feasible {clean_feasible}/{trials}, outputs feasible {output_feasible}/{returned}"
        ),
    ))
}

fn efficient_mode() -> Outcome {
    let (n, d, eta, beta) = (400usize, 20usize, 0.05, 0.05);
    let bound = C_EFF * efficient_rate(eta, d, n, 1.0);
    let prior = PriorSpec::isotropic(d, 1.0)?;
    let deltas = [2.0, 5.0, 10.0, 20.0];
    let (mut hits, mut reverified) = (0, 0);
    let trials = 100;
    for t in 0..trials {
        let mut rng = RngStream::new(104, t);
        let (_, clean) = sample_mean_instance(&prior, n, &mut rng)?;
        let adv = AdversarySpec::MixturePlant { delta: deltas[t as usize % deltas.len()], direction: None };
        let obs = corrupt(&clean, &adv, eta, &mut rng)?;
        let (est, cert) = robust_mean_filter(&obs.observed, eta, beta)?;
        if distance(&est, &clean.mean()) <= bound {
            hits += 1;
            if certify_weights(&obs.observed, &cert, DEFAULT_DIRECTIONS)?.passed {
                reverified += 1;
            }
        }
    }
    Ok((
        fraction(hits, trials as usize) >= 0.9 && reverified == hits,
        format!("{hits}/{trials} within {bound:.3}; certificates re-verified {reverified}/{hits}"),
    ))
}

fn dp_audit() -> Outcome {
    let (n, d, epsilon, beta, r_ball) = (500usize, 2usize, 2.0, 0.05, 2.0);
    let prior = PriorSpec::isotropic(d, 0.25)?;
    let gen = |rng: &mut RngStream| -> Result<(MeanDataset, MeanDataset)> {
        let (_, a) = sample_mean_instance(&prior, n, rng)?;
        let i = rng.index(n);
        let row = if rng.bernoulli(0.5) {
            privbayes::numerics::add(&a.mean(), &rng.normal_vec(d))
        } else {
            scaled(&rng.unit_vector(d), 50.0 * rng.uniform())
        };
        let b = a.with_row(i, &row)?;
        Ok((a, b))
    };
    let build = |x: &MeanDataset| mean_score_field(x, epsilon, beta, r_ball, MeanMode::Eff);
    let mut rng = RngStream::new(105, 0);
    let sens = sensitivity_audit(1000, &mut rng, gen, build)?;
    let (a, b) = gen(&mut rng)?;
    let (fa, fb) = (build(&a)?, build(&b)?);
    let audit = dp_ratio_audit(&fa, &fb, epsilon, 1_000_000, &mut rng)?;
    let exact_ok = audit.exact_max_log_ratio <= epsilon * audit.sensitivity as f64 + 1e-9;
    Ok((
        sens.max_change <= 1 && audit.passed && exact_ok,
        format!(
            "max score change {} over {} pairs {:?}; worst z {:.2} over {} cells; exact max log ratio {:.3}",
            sens.max_change,
            sens.pairs,
            sens.change_histogram,
            audit.worst_z,
            fa.len(),
            audit.exact_max_log_ratio
        ),
    ))
}

fn streaming_law() -> Outcome {
    let (n, d, k) = (50usize, 3usize, 64usize);
    let mut rng = RngStream::new(106, 0);
    let batches: Vec<MeanDataset> = (0..k)
        .map(|_| MeanDataset::new(Matrix::from_fn(n, d, |_, _| 1.0 + rng.standard_normal())))
        .collect::<Result<_>>()?;
    let mut state = StreamState::new(d, n, EpsilonSchedule::new(1.0, k)?)?;
    let mut worst: f64 = 0.0;
    let mut precision_ok = true;
    let mut sum = vec![0.0; d];
    for (t, b) in batches.iter().enumerate() {
        let (next, recs) = run_stream(state, std::slice::from_ref(b), BatchMode::Exact, &mut rng)?;
        state = next;
        precision_ok &= state.precision == (n * (t + 1)) as u64 && recs[0].t == t + 1;
        sum = privbayes::numerics::add(&sum, &b.mean());
        let avg = scaled(&sum, 1.0 / (t + 1) as f64);
        worst = worst.max(avg.iter().zip(&state.mu).map(|(a, m)| (a - m).abs()).fold(0.0, f64::max));
    }
    Ok((precision_ok && worst <= 1e-12, format!("precision = n·t for t ≤ {k}: {precision_ok}; max deviation {worst:.2e}")))
}

fn regression_identity() -> Outcome {
    let mut rng = RngStream::new(107, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = 1 + rng.index(8);
        let n = d + 1 + rng.index(200);
        let sigma2 = 0.01 + 4.0 * rng.uniform();
        let (_, data) = sample_regression_instance(sigma2, n, d, &mut rng)?;
        let u = scaled(&rng.normal_vec(d), 10.0 * rng.uniform());
        let got = posterior_identity(&data, sigma2, &u)?;
        let truth = posterior_mean_regression(&data, sigma2)?;
        worst = worst.max(distance(&got, &truth) / (1.0 + norm(&truth)));
    }
    Ok((worst <= 1e-9, format!("max relative deviation {worst:.2e}")))
}

fn weak_pipeline() -> Outcome {
    let (n, d, eta, sigma2, beta) = (3000usize, 10usize, 0.05, 1.0, 0.05);
    let target = regression_error_target(8.0, eta, d, n, 1.0);
    let trials = 100u64;
    let results: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = RngStream::new(108, t);
                let (_, clean) = sample_regression_instance(sigma2, n, d, &mut rng)?;
                let obs = corrupt(&clean, &AdversarySpec::response_replace_for(eta), eta, &mut rng)?;
                let est = weak_prior_pipeline(&obs.observed, sigma2, eta, beta)?;
                Ok(distance(&est.w_hat, &posterior_mean_regression(&clean, sigma2)?).powi(2))
            })
            .collect()
    };
    let errs: Vec<f64> = results.into_iter().map(|r| r.unwrap_or(f64::INFINITY)).collect();
    let hits = errs.iter().filter(|&&e| e <= target).count();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        fraction(hits, trials as usize) >= 0.9,
        format!("{hits}/{trials} with squared error ≤ {target:.4}; worst {worst:.4}"),
    ))
}

fn completion_closeness() -> Outcome {
    let (n, d, eta) = (20usize, 2usize, 0.1);
    let trials = 100u64;
    let (mut applicable, mut violations) = (0, 0);
    let mut worst_ratio: f64 = 0.0;
    for t in 0..trials {
        let mut rng = RngStream::new(109, t);
        let clean: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d)).collect();
        let (clean_res, _, clean_exact) = completion_resilience(&clean, eta, DEFAULT_EXACT_BUDGET)?;
        let tau = clean_res * (1.0 + 0.5 * rng.uniform());
        let dir = rng.unit_vector(d);
        let reach = 0.5 + 10.0 * rng.uniform();
        let mut obs = clean.clone();
        for (j, i) in rng.subset(n, 2).into_iter().enumerate() {
            let spread = if t % 2 == 0 { 1.0 } else { 1.0 + j as f64 };
            obs[i] = scaled(&dir, reach * spread);
        }
        if let Ok(c) = completion_mean(&obs, eta, tau) {
            if c.exact && clean_exact && c.resilience <= tau && clean_res <= tau {
                applicable += 1;
                let clean_mean = scaled(&clean.iter().fold(vec![0.0; d], |a, r| privbayes::numerics::add(&a, r)), 1.0 / n as f64);
                let ratio = distance(&c.mean, &clean_mean) / (2.0 * tau);
                worst_ratio = worst_ratio.max(ratio);
                if ratio > 1.0 + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    Ok((
        violations == 0 && applicable > 0,
        format!("{applicable}/{trials} trials with both certificates; {violations} violations; max distance/2τ {worst_ratio:.3}"),
    ))
}

fn hardness_identities() -> Outcome {
    let mut psi_worst: f64 = 0.0;
    for &theta in &[0.25, 0.5, 1.0, 2.0] {
        for e in 1..10 {
            let eta = 0.05 * e as f64;
            for yi in -200..=200 {
                psi_worst = psi_worst.max(psi_value(1, theta, eta, yi as f64 * 0.05).abs());
            }
        }
    }

    let mut var_z: f64 = 0.0;
    for (which, seed) in [(Hypothesis::Null, 0), (Hypothesis::Planted, 1)] {
        let mut rng = RngStream::new(110, seed);
        let inst = gen_mlr(0.1, 0.2, DEFAULT_K, 1_000_000, 2, which, &mut rng)?;
        let y = inst.samples().y();
        let m = y.len() as f64;
        let m2 = y.iter().map(|v| v * v).sum::<f64>() / m;
        let m4 = y.iter().map(|v| v.powi(4)).sum::<f64>() / m;
        let se = ((m4 - m2 * m2) / m).sqrt();
        var_z = var_z.max((m2 - inst.s * inst.s).abs() / se);
    }

    let rule = QuadratureRule::standard();
    let mut herm_worst: f64 = 0.0;
    for &eta in &[0.05, 0.1, 0.25, 0.4] {
        for &delta in &[0.5, 1.0, 2.0, 3.0] {
            for j in 0..=8 {
                let quad = (1.0 - eta) * rule.expect(|z| hermite_value(j, z - eta * delta))
                    + eta * rule.expect(|z| hermite_value(j, z + (1.0 - eta) * delta));
                herm_worst = herm_worst.max((quad - hermite_moment_mixture(eta, delta, j)?).abs());
            }
        }
    }

    let mut mehler_ok = true;
    for &c in &[1.0, 2.0, 5.0] {
        for k in 0..=12 {
            mehler_ok &= scaled_hermite_second_moment(k, c) <= 2.0 * (4.0 * c * c).powi(k as i32);
        }
    }
    Ok((
        psi_worst <= 1e-10 && var_z <= 3.0 && herm_worst <= 1e-7 && mehler_ok,
        format!(
            "max |ψ₁| {psi_worst:.1e}; y-variance max z {var_z:.2}; Hermite max error {herm_worst:.1e}; Mehler bound holds: {mehler_ok}"
        ),
    ))
}

fn reduction_sanity() -> Outcome {
    let (n, d, eta, beta) = (400usize, 20usize, 0.1, 0.05);
    let alpha = C_EFF * efficient_rate(eta, d, n, beta);
    let delta = 21.0 * alpha / eta;
    let trials = 200u64;
    let mut verdicts = [Vec::new(), Vec::new()];
    let mut reveals = 0;
    for (slot, which) in [Hypothesis::Null, Hypothesis::Planted].into_iter().enumerate() {
        for t in 0..trials {
            let mut rng = RngStream::new(111 + slot as u64, t);
            let inst = gen_mixture(eta, delta, n, d, which, &mut rng)?;
            verdicts[slot].push(mean_distinguisher(inst.samples(), |s| robust_mean_filter(s, eta, beta).map(|r| r.0), alpha));
            reveals += inst.reveal_count();
        }
    }
    let adv = advantage(&verdicts[0], &verdicts[1]);
    let null_rate = fraction(verdicts[0].iter().filter(|&&v| v == Hypothesis::Null).count(), trials as usize);
    Ok((
        adv >= 0.2 && null_rate >= 0.85 && reveals == 0,
        format!("α = {alpha:.3}, δ = {delta:.1}: advantage {adv:.3}, null verdict rate {null_rate:.3}"),
    ))
}

fn concentration_validators() -> Outcome {
    let slack = 2.0;
    let reports: Vec<(&str, BoundReport)> = vec![
        ("order_stat", validate_order_stat(0.1, 200, 0.05, 10_000, 112, slack)?),
        ("subset_sum", validate_subset_sum(0.1, 200, 0.05, 10_000, 113, slack)?),
        ("short_flat", validate_short_flat(1000, 0.05, 0.05, 1000, 114, slack)?),
        ("covariance", validate_covariance(20, 2000, 0.05, 1000, 115, slack)?),
        ("sparse_spectral", validate_sparse_spectral(4, 12, 3, 0.05, 1000, 116, slack)?),
    ];
    let (mut equal, mut exceed) = (0, 0);
    for t in 0..100 {
        let mut rng = RngStream::new(117, t);
        let x = Matrix::from_fn(4, 12, |_, _| rng.standard_normal());
        let heur = sparse_spectral_local_search(&x, 3)?.value;
        let exact = sparse_spectral_exact(&x, 3)?.value;
        if heur > exact * (1.0 + 1e-12) {
            exceed += 1;
        }
        if (heur - exact).abs() <= 1e-9 * exact.max(1.0) {
            equal += 1;
        }
    }
    let all = reports.iter().all(|(_, r)| r.passed);
    let detail = reports
        .iter()
        .map(|(name, r)| format!("{name} {:.3}/{:.3}", r.violation_rate, 0.05 * slack))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((
        all && exceed == 0 && equal >= 95,
        format!("violation rates {detail}; sparse heuristic = exhaustive in {equal}/100, exceeds in {exceed}"),
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("posterior mean matches quadrature", posterior_quadrature),
        ("shrinkage identity", shrinkage_identity),
        ("statistical robust mean", statistical_mode),
        ("efficient robust mean", efficient_mode),
        ("grid mechanism DP audit", dp_audit),
        ("streaming law", streaming_law),
        ("regression posterior identity", regression_identity),
        ("weak-prior regression pipeline", weak_pipeline),
        ("completion closeness", completion_closeness),
        ("hardness identities", hardness_identities),
        ("reduction sanity", reduction_sanity),
        ("concentration validators", concentration_validators),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2}. {name}: {detail} [{secs:.1}s]", if ok { "PASS" } else { "FAIL" }, i + 1);
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
