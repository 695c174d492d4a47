//! Filter and statistical estimators on contaminated Gaussian data.

use privbayes::model::{corrupt, sample_mean_instance, AdversarySpec, PriorSpec};
use privbayes::numerics::{distance, RngStream};
use privbayes::robustmean::{certify_weights, robust_mean_filter, robust_mean_statistical, DEFAULT_DIRECTIONS, DEFAULT_EXACT_BUDGET};

fn main() -> privbayes::Result<()> {
    let mut rng = RngStream::new(3, 0);
    let eta = 0.05;
    let (_, clean) = sample_mean_instance(&PriorSpec::isotropic(10, 1.0)?, 2000, &mut rng)?;
    let obs = corrupt(&clean, &AdversarySpec::MixturePlant { delta: 8.0, direction: None }, eta, &mut rng)?;
    let truth = clean.mean();
    let (est, cert) = robust_mean_filter(&obs.observed, eta, 0.05)?;
    println!("sample mean error  {:.4}", distance(&obs.observed.mean(), &truth));
    println!("filter error       {:.4} (certified ≤ {:.4})", distance(&est, &truth), cert.conclusion_bound());
    println!("certificate        {:?}", certify_weights(&obs.observed, &cert, DEFAULT_DIRECTIONS)?.passed);

    let (_, small) = sample_mean_instance(&PriorSpec::isotropic(2, 1.0)?, 30, &mut rng)?;
    let obs = corrupt(&small, &AdversarySpec::Gross { location: 40.0 }, 0.1, &mut rng)?;
    let est = robust_mean_statistical(&obs.observed, 0.1, 0.05, DEFAULT_EXACT_BUDGET)?;
    println!("statistical error  {:.4} (n = 30)", distance(&est, &small.mean()));
    Ok(())
}
