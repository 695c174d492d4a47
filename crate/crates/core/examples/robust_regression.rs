//! Robust Bayesian regression in the critical and weak-prior regimes.

use privbayes::bayesreg::{regime, robust_posterior};
use privbayes::model::{corrupt, posterior_mean_regression, sample_regression_instance, AdversarySpec};
use privbayes::numerics::{distance, RngStream};

fn main() -> privbayes::Result<()> {
    let (n, d, eta) = (4000, 5, 0.05);
    for sigma2 in [1.0 / n as f64, 2.0] {
        let mut rng = RngStream::new(9, 0);
        let (_, clean) = sample_regression_instance(sigma2, n, d, &mut rng)?;
        let obs = corrupt(&clean, &AdversarySpec::response_replace_for(eta), eta, &mut rng)?.observed;
        let est = robust_posterior(&obs, sigma2, eta, 0.05)?;
        let exact = posterior_mean_regression(&clean, sigma2)?;
        let naive = posterior_mean_regression(&obs, sigma2)?;
        println!(
            "{:?}: robust {:.4}, naive {:.4}, kept {}/{n}, certificates verify: {}",
            regime(sigma2, n),
            distance(&est.w_hat, &exact),
            distance(&naive, &exact),
            est.kept_count(),
            est.verify(&obs)
        );
    }
    Ok(())
}
