use privbayes::model::{
    corrupt, posterior_mean_mean_model, posterior_mean_regression, sample_mean_instance, sample_regression_instance,
    shrinkage, AdversarySpec, MeanDataset, PriorSpec,
};
use privbayes::numerics::{distance, sym_eig, Matrix, RngStream, SymMatrix};
use proptest::prelude::*;

fn random_rotation(d: usize, rng: &mut RngStream) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.standard_normal());
    sym_eig(&a.gram()).unwrap().vectors
}

proptest! {
    #[test]
    fn diagonal_prior_shrinks_per_coordinate(
        seed in any::<u64>(),
        d in 1usize..5,
        n in 1usize..300,
        s in prop::collection::vec(0.01f64..20.0, 5),
    ) {
        let mut rng = RngStream::new(seed, 0);
        let data = MeanDataset::new(Matrix::from_fn(n, d, |_, _| rng.standard_normal())).unwrap();
        let prior = PriorSpec::general(SymMatrix::from_diag(&s[..d])).unwrap();
        let got = posterior_mean_mean_model(&data, &prior).unwrap();
        let xbar = data.mean();
        for j in 0..d {
            let expect = xbar[j] * n as f64 / (n as f64 + 1.0 / s[j]);
            prop_assert!((got[j] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn posterior_mean_is_rotation_equivariant(seed in any::<u64>(), d in 1usize..5, n in 1usize..100) {
        let mut rng = RngStream::new(seed, 1);
        let q = random_rotation(d, &mut rng);
        let diag: Vec<f64> = (0..d).map(|_| 0.1 + rng.uniform() * 5.0).collect();
        let sigma = SymMatrix::from_eigen(&diag, &q);
        let data = MeanDataset::new(Matrix::from_fn(n, d, |_, _| rng.standard_normal())).unwrap();
        let base = posterior_mean_mean_model(&data, &PriorSpec::general(SymMatrix::from_diag(&diag)).unwrap()).unwrap();
        let rotated = data.affine(&q, &vec![0.0; d]).unwrap();
        let got = posterior_mean_mean_model(&rotated, &PriorSpec::general(sigma).unwrap()).unwrap();
        let expect = q.matvec(&base).unwrap();
        prop_assert!(distance(&got, &expect) < 1e-9);
    }

    #[test]
    fn shrinkage_spectrum_lies_in_unit_interval(d in 1usize..6, n in 1usize..1000, sigma2 in 1e-4f64..1e4) {
        let l = shrinkage(&PriorSpec::isotropic(d, sigma2).unwrap(), n).unwrap();
        for &v in &l.eigen().values {
            prop_assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn corruption_touches_exactly_the_masked_rows(seed in any::<u64>(), n in 10usize..200, eta in 0.0f64..0.45) {
        let mut rng = RngStream::new(seed, 2);
        let (_, clean) = sample_mean_instance(&PriorSpec::isotropic(3, 1.0).unwrap(), n, &mut rng).unwrap();
        let c = corrupt(&clean, &AdversarySpec::Gross { location: 100.0 }, eta, &mut rng).unwrap();
        prop_assert_eq!(c.corrupted_count(), (eta * n as f64 + 1e-9).floor() as usize);
        for i in 0..n {
            if c.mask[i] {
                prop_assert!(c.observed.sample(i).iter().all(|&x| x == 100.0));
            } else {
                prop_assert_eq!(c.observed.sample(i), clean.sample(i));
            }
        }
    }
}

#[test]
fn regression_posterior_tends_to_least_squares() {
    let mut rng = RngStream::new(9, 0);
    let (_, data) = sample_regression_instance(1.0, 200, 4, &mut rng).unwrap();
    let ols = privbayes::model::ols(&data).unwrap();
    let flat = posterior_mean_regression(&data, 1e12).unwrap();
    assert!(distance(&ols, &flat) < 1e-9);
    let tight = posterior_mean_regression(&data, 1e-12).unwrap();
    assert!(tight.iter().all(|w| w.abs() < 1e-8));
}

#[test]
fn improper_prior_has_no_sample() {
    let mut rng = RngStream::new(1, 0);
    assert!(sample_mean_instance(&PriorSpec::improper(2), 10, &mut rng).is_err());
    assert!(PriorSpec::improper(2).covariance().is_none());
}
