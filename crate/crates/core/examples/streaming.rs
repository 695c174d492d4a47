//! Streaming private posterior mean with a decaying budget schedule.

use privbayes::bayesmean::{run_stream, BatchMode, EpsilonSchedule, StreamState};
use privbayes::model::MeanDataset;
use privbayes::numerics::{distance, Matrix, RngStream};
use privbayes::privacy::MeanMode;

fn main() -> privbayes::Result<()> {
    let (k, n, d) = (8, 500, 2);
    let mu = [0.3, -0.2];
    let mut rng = RngStream::new(4, 0);
    let batches = (0..k)
        .map(|_| MeanDataset::new(Matrix::from_fn(n, d, |_, j| mu[j] + rng.standard_normal())))
        .collect::<privbayes::Result<Vec<_>>>()?;
    let schedule = EpsilonSchedule::new(4.0, k)?;
    println!("total budget {:.3} ≤ {:.3}", schedule.total(), schedule.bound());
    let mode = BatchMode::Private { mode: MeanMode::Eff, beta: 0.05, r_ball: 2.0 };
    let (_, records) = run_stream(StreamState::new(d, n, schedule)?, &batches, mode, &mut rng)?;
    for r in records {
        println!("t = {} ε_t = {:.3} error {:.4}", r.t, r.epsilon_i, distance(&r.estimate, &mu));
    }
    Ok(())
}
