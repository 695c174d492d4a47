//! Planted Gaussian mixtures: an accurate robust estimator distinguishes
//! them, and the low-degree advantage bound stays bounded.

use privbayes::hardness::{advantage, advantage_bound, gen_mixture, mean_distinguisher, Hypothesis, LdlrMode, LdlrQuery};
use privbayes::numerics::RngStream;
use privbayes::robustmean::{efficient_rate, robust_mean_filter, C_EFF};

fn main() -> privbayes::Result<()> {
    let (eta, n, d, beta) = (0.1, 400, 20, 0.05);
    let alpha = C_EFF * efficient_rate(eta, d, n, beta);
    let delta = 21.0 * alpha / eta;
    let mut null = Vec::new();
    let mut planted = Vec::new();
    for t in 0..20 {
        let mut rng = RngStream::new(6, t);
        for (which, out) in [(Hypothesis::Null, &mut null), (Hypothesis::Planted, &mut planted)] {
            let inst = gen_mixture(eta, delta, n, d, which, &mut rng)?;
            out.push(mean_distinguisher(inst.samples(), |x| Ok(robust_mean_filter(x, eta, beta)?.0), alpha));
        }
    }
    println!("α = {alpha:.3}, δ = {delta:.1}: empirical advantage {:.2}", advantage(&null, &planted));
    for degree in [4, 8, 12] {
        let q = LdlrQuery { n, d, degree, eta, mode: LdlrMode::Mean { delta: 1.0 } };
        println!("δ = 1, D = {degree:>2}: Adv² ≤ {:.4}", advantage_bound(&q)?.bound);
    }
    Ok(())
}
