//! Private posterior mean with dyadic eigenvalue buckets.

use privbayes::bayesmean::{bucket_plan, private_posterior_mean};
use privbayes::model::{posterior_mean_mean_model, sample_mean_instance, shrinkage, PriorSpec};
use privbayes::numerics::{distance, RngStream, SymMatrix};
use privbayes::privacy::MeanMode;

fn main() -> privbayes::Result<()> {
    let n = 500;
    let prior = PriorSpec::general(SymMatrix::from_diag(&[1.0, 0.004, 0.0005]))?;
    let plan = bucket_plan(&shrinkage(&prior, n)?.squared(), 12)?;
    for b in &plan.buckets {
        println!("level {:>2}: {} direction(s)", b.level, b.indices.len());
    }
    let mut rng = RngStream::new(2, 0);
    let (_, data) = sample_mean_instance(&prior, n, &mut rng)?;
    let exact = posterior_mean_mean_model(&data, &prior)?;
    let private = private_posterior_mean(&data, &prior, 2.0, 0.05, MeanMode::Eff, &mut rng)?;
    println!("posterior {exact:.4?}\nprivate   {private:.4?}\nerror     {:.4}", distance(&exact, &private));
    Ok(())
}
