//! A small rate sweep through the experiment harness.

use privbayes::harness::{run, ExperimentConfig};

fn main() -> privbayes::Result<()> {
    let config = ExperimentConfig::from_toml(
        r#"
        task = "mean"
        trials = 20
        [grid]
        n = [250, 1000, 4000]
        epsilon = [inf, 2.0]
        "#,
    )?;
    let out = run(&config)?;
    for s in &out.report.settings {
        println!("n = {:>5} ε = {:<4} q50 {:.4} q90 {:.4}", s.setting.n, s.setting.epsilon, s.q50, s.q90);
    }
    for g in &out.report.fits {
        println!("ε = {:<4} exponent {:.3} ± {:.3}", g.epsilon, g.fit.exponent, g.fit.exponent_se);
    }
    Ok(())
}
