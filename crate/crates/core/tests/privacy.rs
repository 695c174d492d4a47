use privbayes::error::Error;
use privbayes::model::{sample_mean_instance, MeanDataset, PriorSpec};
use privbayes::numerics::{add, distance, RngStream};
use privbayes::privacy::{
    exp_mechanism_grid, field_difference, lattice_ball, mean_score_field, private_empirical_mean, quasi_convexity_check,
    sensitivity_audit, CellSampler, MeanMode, RateFunction, RateKind, ScoreField, ScoreParams, ScorePath,
};
use privbayes::robustmean::{FilterEstimator, MeanEstimator};

fn flat_field(scores: Vec<u32>) -> ScoreField {
    let indices = lattice_ball(1, 1.0, (scores.len() / 2) as f64, 1000).unwrap();
    assert_eq!(indices.len(), scores.len());
    ScoreField { center: vec![0.0], radius: (scores.len() / 2) as f64, cell: 1.0, n: 10, indices, scores }
}

#[test]
fn equal_scores_sample_uniformly() {
    let field = flat_field(vec![3; 11]);
    let sampler = CellSampler::new(&field, 1.0).unwrap();
    let mut rng = RngStream::new(1, 0);
    let draws = 100_000;
    let mut counts = [0f64; 11];
    for _ in 0..draws {
        counts[sampler.sample(&mut rng)] += 1.0;
    }
    let expect = draws as f64 / 11.0;
    let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
    // 10 degrees of freedom: P(χ² > 29.6) = 0.001
    assert!(chi2 < 29.6, "χ² = {chi2}");
}

#[test]
fn low_temperature_picks_the_zero_cell() {
    let mut scores = vec![5; 11];
    scores[7] = 0;
    let field = flat_field(scores);
    let mut rng = RngStream::new(2, 0);
    let hits = (0..10_000)
        .filter(|_| exp_mechanism_grid(&field, 50.0, &mut rng).unwrap() == field.cell_center(7))
        .count();
    assert!(hits >= 9_990);
}

#[test]
fn identical_datasets_have_zero_sensitivity() {
    let prior = PriorSpec::isotropic(2, 0.25).unwrap();
    let mut rng = RngStream::new(3, 0);
    let report = sensitivity_audit(
        4,
        &mut rng,
        |r| {
            let (_, a) = sample_mean_instance(&prior, 200, r)?;
            Ok((a.clone(), a))
        },
        |x: &MeanDataset| mean_score_field(x, 2.0, 0.05, 2.0, MeanMode::Eff),
    )
    .unwrap();
    assert_eq!(report.max_change, 0);
}

#[test]
fn statistical_score_is_stable_under_gaussian_swaps() {
    let prior = PriorSpec::isotropic(1, 0.25).unwrap();
    let mut rng = RngStream::new(4, 0);
    let report = sensitivity_audit(
        6,
        &mut rng,
        |r| {
            let (_, a) = sample_mean_instance(&prior, 100, r)?;
            let row = add(&a.mean(), &r.normal_vec(1));
            let b = a.with_row(r.index(100), &row)?;
            Ok((a, b))
        },
        |x: &MeanDataset| mean_score_field(x, 2.0, 0.05, 2.0, MeanMode::Stat),
    )
    .unwrap();
    assert!(report.max_change <= 1, "{report:?}");
}

#[test]
fn private_mean_is_within_a_constant_of_its_target() {
    let prior = PriorSpec::isotropic(1, 0.25).unwrap();
    let target = RateFunction::new(RateKind::MeanEff, 1, 500, 0.05).alpha_target(2.0);
    // the release is accurate up to a constant; empirically q95 ≈ 2.2·α_target
    let bound = 3.0 * target;
    let hits = (0..100)
        .filter(|&t| {
            let mut rng = RngStream::new(5, t);
            let (_, data) = sample_mean_instance(&prior, 500, &mut rng).unwrap();
            let out = private_empirical_mean(&data, 2.0, 0.05, 2.0, MeanMode::Eff, &mut rng).unwrap();
            distance(&out, &data.mean()) <= bound
        })
        .count();
    assert!(hits >= 90, "{hits}/100 within {bound}");
}

#[test]
fn huge_epsilon_lands_next_to_the_estimate() {
    let prior = PriorSpec::isotropic(2, 0.25).unwrap();
    let mut rng = RngStream::new(6, 0);
    let (_, data) = sample_mean_instance(&prior, 400, &mut rng).unwrap();
    let field = mean_score_field(&data, 1e6, 0.05, 2.0, MeanMode::Eff).unwrap();
    let out = exp_mechanism_grid(&field, 1e6, &mut rng).unwrap();
    assert!(distance(&out, &data.mean()) <= 2.0 * field.cell * 2f64.sqrt());
}

#[test]
fn scores_are_bounded_and_zero_at_the_estimate() {
    let prior = PriorSpec::isotropic(2, 0.25).unwrap();
    let mut rng = RngStream::new(7, 0);
    let (_, data) = sample_mean_instance(&prior, 300, &mut rng).unwrap();
    let rate = RateFunction::new(RateKind::MeanEff, 2, 300, 0.05);
    let params = ScoreParams::mean(rate, 2.0, 2.0);
    let est = FilterEstimator::default();
    let path = ScorePath::for_mean(&data, params, &est);
    assert_eq!(path.score(&est.estimate(&data, 0.0).unwrap()), 0);
    assert_eq!(path.score(&[1e9, 0.0]), 300);
    let field = ScoreField::from_path(&path, &[0.0, 0.0], 1_000_000).unwrap();
    assert!(field.scores.iter().all(|&s| s <= 300));
    assert_eq!(field.export().lines().count(), field.len());
    let qc = quasi_convexity_check(&path, &field, 64, 2, &mut rng).unwrap();
    assert_eq!(qc.violations, 0, "{qc:?}");
    let radii = params.radii(params.t_star());
    assert!(radii.windows(2).all(|w| w[1] > w[0]));
    assert!(field_difference(&field, &field).unwrap() == 0);
}

#[test]
fn grid_budget_is_enforced() {
    let data = MeanDataset::from_rows(&vec![vec![0.0; 6]; 50]).unwrap();
    let err = mean_score_field(&data, 0.01, 0.05, 100.0, MeanMode::Eff).unwrap_err();
    assert!(matches!(err, Error::GridTooLarge { .. }), "{err}");
}
