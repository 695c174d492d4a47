//! Private empirical mean through the grid exponential mechanism.

use privbayes::model::{sample_mean_instance, PriorSpec};
use privbayes::numerics::{distance, RngStream};
use privbayes::privacy::{private_empirical_mean, MeanMode, RateFunction, RateKind};

fn main() -> privbayes::Result<()> {
    let (n, d, beta) = (2000, 2, 0.05);
    let mut rng = RngStream::new(11, 0);
    let (_, data) = sample_mean_instance(&PriorSpec::isotropic(d, 0.5)?, n, &mut rng)?;
    for epsilon in [0.5, 1.0, 4.0] {
        let out = private_empirical_mean(&data, epsilon, beta, 3.0, MeanMode::Eff, &mut rng)?;
        let target = RateFunction::new(RateKind::MeanEff, d, n, beta).alpha_target(epsilon);
        println!("ε = {epsilon:<4} error {:.4}  target {target:.4}", distance(&out, &data.mean()));
    }
    Ok(())
}
