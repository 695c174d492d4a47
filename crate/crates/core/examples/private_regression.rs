//! Private Bayesian linear regression.

use privbayes::bayesreg::{private_regression, RegMode};
use privbayes::model::{posterior_mean_regression, sample_regression_instance};
use privbayes::numerics::{distance, RngStream};

fn main() -> privbayes::Result<()> {
    let (n, d, sigma2) = (3000, 2, 0.5);
    let mut rng = RngStream::new(12, 0);
    let (w, data) = sample_regression_instance(sigma2, n, d, &mut rng)?;
    let exact = posterior_mean_regression(&data, sigma2)?;
    let private = private_regression(&data, sigma2, 2.0, 0.05, RegMode::Weak, &mut rng)?;
    println!("truth      {w:.4?}\nposterior  {exact:.4?}\nprivate    {private:.4?}");
    println!("error to posterior {:.4}", distance(&private, &exact));
    Ok(())
}
