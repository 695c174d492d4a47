//! Posterior mean of a Gaussian mean under an anisotropic prior.

use privbayes::model::{posterior_mean_mean_model, sample_mean_instance, shrinkage, PriorSpec};
use privbayes::numerics::{RngStream, SymMatrix};

fn main() -> privbayes::Result<()> {
    let prior = PriorSpec::general(SymMatrix::from_diag(&[4.0, 0.01, 0.5]))?;
    let mut rng = RngStream::new(7, 0);
    let (mu, data) = sample_mean_instance(&prior, 50, &mut rng)?;
    let lam = shrinkage(&prior, data.n())?;
    println!("true mean       {mu:.3?}");
    println!("sample mean     {:.3?}", data.mean());
    println!("posterior mean  {:.3?}", posterior_mean_mean_model(&data, &prior)?);
    println!("Λ spectrum      {:.3?}", lam.eigen().values);
    Ok(())
}
