use privbayes::hardness::{
    advantage, advantage_bound, gen_mixture, gen_mlr, hermite_moment_mixture, mean_distinguisher, psi_envelope, psi_norm,
    r0_density, r0_sample, regression_distinguisher, Hypothesis, LdlrMode, LdlrQuery,
};
use privbayes::error::Error;
use privbayes::numerics::{QuadratureRule, RngStream};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn r0_is_a_density(eta in 0.05f64..0.49, frac in 0.0f64..1.0) {
        // 1 − 1/s ≤ η  ⇔  s ≤ 1/(1−η)
        let s = 1.0 + frac * (1.0 / (1.0 - eta) - 1.0);
        let grid = 40_000;
        let (lo, hi) = (-12.0 * s, 12.0 * s);
        let h = (hi - lo) / grid as f64;
        let mut mass = 0.0;
        for i in 0..grid {
            let y = lo + (i as f64 + 0.5) * h;
            let p = r0_density(eta, s, y).unwrap();
            prop_assert!(p >= -1e-15);
            mass += p * h;
        }
        prop_assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mean_advantage_grows_with_sample_size(eta in 0.05f64..0.45, delta in 0.5f64..3.0, d in 50usize..5000) {
        let q = |n| LdlrQuery { n, d, degree: 8, eta, mode: LdlrMode::Mean { delta } };
        let a = advantage_bound(&q(10)).unwrap().bound;
        let b = advantage_bound(&q(1000)).unwrap().bound;
        prop_assert!(a >= 1.0);
        prop_assert!(b >= a);
    }

    #[test]
    fn hermite_moments_match_quadrature(eta in 0.05f64..0.45, delta in 0.1f64..2.0, j in 0usize..12) {
        let rule = QuadratureRule::standard();
        let ell = |c: f64| rule.expect(|z| privbayes::numerics::hermite_value(j, z + c));
        let direct = (1.0 - eta) * ell(-eta * delta) + eta * ell((1.0 - eta) * delta);
        let closed = hermite_moment_mixture(eta, delta, j).unwrap();
        prop_assert!((direct - closed).abs() < 1e-8 * (1.0 + closed.abs()));
    }
}

#[test]
fn r0_rejects_scales_that_make_it_negative() {
    assert!(r0_density(0.1, 2.0, 0.0).is_err());
    assert!(r0_density(0.1, 0.5, 0.0).is_err());
    let mut rng = RngStream::new(1, 0);
    assert!(r0_sample(0.5, 1.5, &mut rng).is_ok());
}

#[test]
fn r0_samples_have_the_right_variance() {
    // Var r₀ = (s² − (1−η))/η
    let (eta, s) = (0.3, 1.3);
    let mut rng = RngStream::new(2, 0);
    let m = 200_000;
    let v = (0..m).map(|_| r0_sample(eta, s, &mut rng).unwrap().powi(2)).sum::<f64>() / m as f64;
    let expect = (s * s - (1.0 - eta)) / eta;
    assert!((v - expect).abs() < 0.03 * expect, "{v} vs {expect}");
}

#[test]
fn reveals_are_counted() {
    let mut rng = RngStream::new(3, 0);
    let inst = gen_mixture(0.2, 3.0, 50, 4, Hypothesis::Planted, &mut rng).unwrap();
    assert_eq!(inst.reveal_count(), 0);
    let _ = inst.samples();
    assert_eq!(inst.reveal_count(), 0);
    assert!(inst.reveal_direction().is_some());
    let _ = inst.reveal_components();
    assert_eq!(inst.reveal_count(), 2);
    let null = gen_mlr(0.2, 0.3, 20.0, 30, 3, Hypothesis::Null, &mut rng).unwrap();
    assert!(null.reveal_direction().is_none());
    assert!(null.reveal_b().iter().all(|&b| !b));
    assert_eq!(null.reveal_count(), 2);
}

#[test]
fn planted_mixture_has_zero_mean_shift() {
    // (1−η)(−ηδ) + η(1−η)δ = 0
    let mut rng = RngStream::new(4, 0);
    let inst = gen_mixture(0.25, 4.0, 100_000, 1, Hypothesis::Planted, &mut rng).unwrap();
    let m = inst.samples().mean()[0];
    assert!(m.abs() < 0.03, "{m}");
    let var = inst.samples().rows().iter().map(|r| r[0] * r[0]).sum::<f64>() / 100_000.0;
    let expect = 1.0 + 0.25 * 0.75 * 16.0;
    assert!((var - expect).abs() < 0.05 * expect);
}

#[test]
fn estimator_failures_count_as_planted() {
    let mut rng = RngStream::new(5, 0);
    let inst = gen_mixture(0.1, 1.0, 10, 2, Hypothesis::Null, &mut rng).unwrap();
    let v = mean_distinguisher(inst.samples(), |_| Err(Error::Infeasible("nope".into())), 1.0);
    assert_eq!(v, Hypothesis::Planted);
    let v = mean_distinguisher(inst.samples(), |x| Ok(x.mean()), 0.0);
    assert_eq!(v, Hypothesis::Null);
    let reg = gen_mlr(0.2, 0.3, 20.0, 30, 3, Hypothesis::Null, &mut rng).unwrap();
    let v = regression_distinguisher(reg.samples(), |_| Err(Error::Infeasible("nope".into())), 1.0, 1.0);
    assert_eq!(v, Hypothesis::Planted);
}

#[test]
fn advantage_from_counts() {
    use Hypothesis::*;
    assert_eq!(advantage(&[Null, Null], &[Planted, Planted]), 1.0);
    assert_eq!(advantage(&[Planted, Planted], &[Planted, Planted]), 0.0);
    assert_eq!(advantage(&[Null, Planted], &[Planted, Null]), 0.0);
}

#[test]
fn psi_norm_stays_below_its_envelope() {
    for k in 2..=12 {
        for &(theta, eta) in &[(0.3, 0.1), (0.9, 0.25), (0.5, 0.4)] {
            let p = psi_norm(k, theta, eta).unwrap();
            assert!(!p.surrogate);
            assert!(p.value <= psi_envelope(k, theta, eta) * (1.0 + 1e-9), "k={k}");
        }
    }
}

#[test]
fn degree_below_two_gives_trivial_bound() {
    let q = LdlrQuery { n: 100, d: 10, degree: 1, eta: 0.1, mode: LdlrMode::Mean { delta: 1.0 } };
    assert_eq!(advantage_bound(&q).unwrap().bound, 1.0);
    let q = LdlrQuery { n: 100, d: 10, degree: 3, eta: 0.1, mode: LdlrMode::Regression { alpha: 0.1, k: 20.0 } };
    assert_eq!(advantage_bound(&q).unwrap().bound, 1.0);
}
