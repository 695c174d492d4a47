//! Concentration bounds against their empirical counterparts.

use privbayes::concentration::{max_subset_square_sum, short_flat_decompose, sparse_spectral_norm, subset_sum_bound};
use privbayes::numerics::{Matrix, RngStream};

fn main() -> privbayes::Result<()> {
    let mut rng = RngStream::new(5, 0);
    let (d, eta) = (2000, 0.05);
    let v = rng.normal_vec(d);
    let k = (eta * d as f64) as usize;
    println!("top-{k} square sum {:.1} ≤ bound {:.1}", max_subset_square_sum(&v, k), subset_sum_bound(eta, d, 0.05)?);

    let dec = short_flat_decompose(&v, eta)?;
    println!("short part ‖z1‖² = {:.1}, flat part ‖z2‖∞² = {:.2}", dec.norm_z1_sq, dec.norm_z2_inf_sq);

    let x = Matrix::from_fn(4, 200, |_, _| rng.standard_normal());
    let s = sparse_spectral_norm(&x, 10, 1_000_000)?;
    println!("10-sparse spectral norm {:.3} (exact: {})", s.value, s.exact);
    Ok(())
}
