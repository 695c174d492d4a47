use privbayes::model::{corrupt, sample_mean_instance, AdversarySpec, MeanDataset, PriorSpec};
use privbayes::numerics::{distance, Matrix, RngStream};
use privbayes::robustmean::{
    certify_weights, resilience, resilience_exact, resilience_heuristic, robust_mean_filter, robust_mean_statistical,
    subset_deviation, DEFAULT_DIRECTIONS, DEFAULT_EXACT_BUDGET,
};
use proptest::prelude::*;

fn gaussian(seed: u64, n: usize, d: usize) -> MeanDataset {
    let mut rng = RngStream::new(seed, 0);
    MeanDataset::new(Matrix::from_fn(n, d, |_, _| rng.standard_normal())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filter_is_translation_equivariant(seed in any::<u64>(), shift in prop::collection::vec(-50.0f64..50.0, 3)) {
        let data = gaussian(seed, 120, 3);
        let moved = data.translate(&shift).unwrap();
        let (a, _) = robust_mean_filter(&data, 0.1, 0.05).unwrap();
        let (b, _) = robust_mean_filter(&moved, 0.1, 0.05).unwrap();
        let expect: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        prop_assert!(distance(&b, &expect) < 1e-9);
    }

    #[test]
    fn statistical_is_translation_equivariant(seed in any::<u64>(), shift in prop::collection::vec(-50.0f64..50.0, 2)) {
        let data = gaussian(seed, 20, 2);
        let moved = data.translate(&shift).unwrap();
        let a = robust_mean_statistical(&data, 0.1, 0.05, DEFAULT_EXACT_BUDGET);
        let b = robust_mean_statistical(&moved, 0.1, 0.05, DEFAULT_EXACT_BUDGET);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let expect: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
                prop_assert!(distance(&b, &expect) < 1e-9);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "feasibility changed under translation"),
        }
    }

    #[test]
    fn heuristic_resilience_never_exceeds_exact(seed in any::<u64>(), n in 6usize..16) {
        let data = gaussian(seed, n, 2);
        let exact = resilience_exact(&data, 0.15).unwrap();
        let heur = resilience_heuristic(&data, 0.15).unwrap();
        prop_assert!(exact.exact);
        prop_assert!(heur.worst_deviation <= exact.worst_deviation + 1e-12);
        prop_assert!((subset_deviation(&data, &exact.worst_subset) - exact.worst_deviation).abs() < 1e-10);
    }
}

#[test]
fn zero_corruption_gives_the_mean() {
    let data = gaussian(4, 50, 3);
    let m = data.mean();
    assert!(distance(&robust_mean_statistical(&data, 0.0, 0.05, DEFAULT_EXACT_BUDGET).unwrap(), &m) < 1e-15);
    let (f, cert) = robust_mean_filter(&data, 0.0, 0.05).unwrap();
    assert!(distance(&f, &m) < 1e-12);
    assert!(cert.weights.iter().all(|&w| w == 1.0));
}

#[test]
fn resilience_switches_to_heuristic_over_budget() {
    let data = gaussian(5, 200, 2);
    let r = resilience(&data, 0.1, 1000).unwrap();
    assert!(!r.exact);
    assert!(r.worst_subset.len() <= 40);
}

#[test]
fn filter_certificates_verify_under_attack() {
    let prior = PriorSpec::isotropic(10, 1.0).unwrap();
    for (t, adv) in [
        AdversarySpec::Gross { location: 30.0 },
        AdversarySpec::MixturePlant { delta: 6.0, direction: None },
        AdversarySpec::Shift { delta: 3.0, direction: {
            let mut e = vec![0.0; 10];
            e[0] = 1.0;
            e
        } },
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = RngStream::new(6, t as u64);
        let (_, clean) = sample_mean_instance(&prior, 400, &mut rng).unwrap();
        let obs = corrupt(&clean, &adv, 0.05, &mut rng).unwrap();
        let (est, cert) = robust_mean_filter(&obs.observed, 0.05, 0.05).unwrap();
        let report = certify_weights(&obs.observed, &cert, DEFAULT_DIRECTIONS).unwrap();
        assert!(report.passed, "{adv:?}: {report:?}");
        assert!(cert.mass >= 1.0 - 2.0 * 0.05 - 1e-12);
        assert!(distance(&est, &clean.mean()) <= cert.conclusion_bound());
    }
}

#[test]
fn gross_outliers_are_removed_by_the_statistical_estimator() {
    let prior = PriorSpec::isotropic(2, 1.0).unwrap();
    let mut rng = RngStream::new(8, 0);
    let (_, clean) = sample_mean_instance(&prior, 24, &mut rng).unwrap();
    let obs = corrupt(&clean, &AdversarySpec::Gross { location: 1e3 }, 1.0 / 12.0, &mut rng).unwrap();
    let est = robust_mean_statistical(&obs.observed, 1.0 / 12.0, 0.05, DEFAULT_EXACT_BUDGET).unwrap();
    assert!(distance(&est, &clean.mean()) < 1.0);
    assert!(distance(&obs.observed.mean(), &clean.mean()) > 50.0);
}
