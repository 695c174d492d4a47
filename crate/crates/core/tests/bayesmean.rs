use privbayes::bayesmean::{
    bucket_count, bucket_plan, contraction_recursion, frequentist_private_mean, private_posterior_mean, run_stream,
    BatchMode, EpsilonSchedule, StreamState,
};
use privbayes::model::{posterior_mean_mean_model, sample_mean_instance, shrinkage, MeanDataset, PriorSpec};
use privbayes::numerics::{distance, Matrix, RngStream, SymMatrix};
use privbayes::privacy::MeanMode;
use proptest::prelude::*;

fn diag_prior(s: &[f64]) -> PriorSpec {
    PriorSpec::general(SymMatrix::from_diag(s)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_bucket_means_reassemble_the_posterior_mean(
        seed in any::<u64>(),
        s in prop::collection::vec(1e-3f64..50.0, 1..6),
        n in 1usize..200,
        m in 1usize..40,
    ) {
        let d = s.len();
        let mut rng = RngStream::new(seed, 0);
        let prior = diag_prior(&s);
        let data = MeanDataset::new(Matrix::from_fn(n, d, |_, _| rng.standard_normal())).unwrap();
        let lam = shrinkage(&prior, n).unwrap();
        let plan = bucket_plan(&lam.squared(), m).unwrap();
        let parts: Vec<Vec<f64>> = (0..plan.buckets.len()).map(|b| plan.project(b, &data, 1.0).unwrap().mean()).collect();
        let mut got = plan.assemble(&parts, f64::sqrt).unwrap();
        // tail directions carry eigenvalues ≤ 2^{-M}‖Λ²‖ and are released as zero
        for &j in &plan.tail {
            let v = plan.eigen.vector(j);
            let c = plan.eigen.values[j].sqrt() * privbayes::numerics::dot(&data.mean(), &v);
            for (g, vk) in got.iter_mut().zip(&v) {
                *g += c * vk;
            }
        }
        let expect = posterior_mean_mean_model(&data, &prior).unwrap();
        prop_assert!(distance(&got, &expect) < 1e-9 * (1.0 + distance(&expect, &vec![0.0; d])));
    }

    #[test]
    fn buckets_partition_the_spectrum(s in prop::collection::vec(0.0f64..10.0, 1..8), m in 1usize..12) {
        let plan = bucket_plan(&SymMatrix::from_diag(&s), m).unwrap();
        let mut seen: Vec<usize> = plan.buckets.iter().flat_map(|b| b.indices.clone()).chain(plan.tail.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..s.len()).collect::<Vec<_>>());
        for b in &plan.buckets {
            for &j in &b.indices {
                let v = plan.eigen.values[j];
                prop_assert!(v > b.sigma2 && v <= 2.0 * b.sigma2 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn schedule_stays_within_twice_epsilon(eps in 0.01f64..10.0, k in 1usize..5000) {
        let s = EpsilonSchedule::new(eps, k).unwrap();
        prop_assert!(s.total() <= s.bound() * (1.0 + 1e-12));
        prop_assert!(s.bound() <= 2.0 * eps * (1.0 + 1e-12));
    }

    #[test]
    fn contraction_is_the_running_average(c in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        let e = contraction_recursion(&c);
        for t in 0..c.len() {
            let avg = c[..=t].iter().sum::<f64>() / (t + 1) as f64;
            prop_assert!((e[t] - avg).abs() < 1e-12);
        }
    }
}

#[test]
fn bucket_count_is_clipped() {
    assert_eq!(bucket_count(1, 1, 1e-300, 1.0), 1);
    assert_eq!(bucket_count(1_000_000, 1000, 1e6, 1e-6), 40);
    assert_eq!(bucket_count(1000, 2, 1.0, 1.0), 11);
}

#[test]
fn large_epsilon_recovers_the_posterior_mean() {
    let prior = diag_prior(&[1.0, 0.05]);
    let mut rng = RngStream::new(11, 0);
    let (_, data) = sample_mean_instance(&prior, 400, &mut rng).unwrap();
    let exact = posterior_mean_mean_model(&data, &prior).unwrap();
    let private = private_posterior_mean(&data, &prior, 20.0, 0.05, MeanMode::Eff, &mut rng).unwrap();
    assert!(distance(&private, &exact) < 0.05, "{private:?} vs {exact:?}");
}

#[test]
fn private_posterior_mean_rejects_improper_priors() {
    let data = MeanDataset::from_rows(&vec![vec![0.0, 1.0]; 10]).unwrap();
    let mut rng = RngStream::new(1, 0);
    assert!(private_posterior_mean(&data, &PriorSpec::improper(2), 1.0, 0.05, MeanMode::Eff, &mut rng).is_err());
}

#[test]
fn frequentist_release_reads_constant_directions_exactly() {
    let mut rng = RngStream::new(12, 0);
    let n = 300;
    let data = MeanDataset::new(Matrix::from_fn(n, 2, |_, j| if j == 0 { 0.7 } else { rng.standard_normal() })).unwrap();
    let lambda = SymMatrix::from_diag(&[0.0, 1.0]);
    let est = frequentist_private_mean(&data, &lambda, 3.0, 100.0, 0.05, MeanMode::Eff, &mut rng).unwrap();
    assert!((est[0] - 0.7).abs() < 1e-12);
    assert!((est[1] - data.mean()[1]).abs() < 0.1);
}

#[test]
fn exact_stream_is_the_pooled_mean() {
    let mut rng = RngStream::new(13, 0);
    let batches: Vec<MeanDataset> = (0..7)
        .map(|_| MeanDataset::new(Matrix::from_fn(20, 3, |_, _| 1.0 + rng.standard_normal())).unwrap())
        .collect();
    let state = StreamState::new(3, 20, EpsilonSchedule::new(1.0, 7).unwrap()).unwrap();
    let (end, records) = run_stream(state, &batches, BatchMode::Exact, &mut rng).unwrap();
    assert_eq!(end.t, 7);
    assert_eq!(end.precision, 140);
    let mut pooled = vec![0.0; 3];
    for b in &batches {
        for (p, m) in pooled.iter_mut().zip(b.mean()) {
            *p += m / 7.0;
        }
    }
    assert!(distance(&end.mu, &pooled) < 1e-12);
    assert_eq!(records.len(), 7);
    assert!(records.windows(2).all(|w| w[1].epsilon_i < w[0].epsilon_i));
    let line = records[0].to_json_line().unwrap();
    assert!(line.starts_with("{\"t\":1,"), "{line}");
}

#[test]
fn batch_size_is_checked() {
    let mut rng = RngStream::new(14, 0);
    let state = StreamState::new(1, 5, EpsilonSchedule::new(1.0, 2).unwrap()).unwrap();
    let bad = MeanDataset::from_rows(&vec![vec![0.0]; 4]).unwrap();
    assert!(run_stream(state, &[bad], BatchMode::Exact, &mut rng).is_err());
}
