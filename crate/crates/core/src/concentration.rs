//! Concentration bounds used by the feasibility arguments, their exact or
//! heuristic evaluators, and Monte Carlo validators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{binomial, ceil_tol, Matrix, RngStream, SymMatrix};

/// Constant of the maximal-subset bound.
pub const C_SS: f64 = 3.0;
/// Short-flat constant shared with the regression programs.
pub const CHI: f64 = 4.0;
/// Constant of the covariance deviation bound.
pub const C_COV: f64 = 3.0;
/// Constant of the sparse spectral norm bound.
pub const C_SP: f64 = 1.0;
/// Restarts of the sparse spectral local search.
pub const SPARSE_RESTARTS: usize = 16;

const SPARSE_SEED: u64 = 0x5ba5_e000;

/// Monte Carlo check of a high-probability bound.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub theoretical: f64,
    /// Empirical quantile at level `1 − slack·β`.
    pub empirical_quantile: f64,
    pub trials: usize,
    pub violation_rate: f64,
    pub passed: bool,
}

impl BoundReport {
    /// `passed` holds iff the `1 − slack·β` quantile is at most the bound,
    /// i.e. at most a `slack·β` fraction of values (rounded down) exceed it.
    pub fn from_values(theoretical: f64, values: &[f64], beta: f64, slack: f64) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let t = v.len();
        let level = (1.0 - slack * beta).clamp(0.0, 1.0);
        let idx = ceil_tol(level * t as f64).clamp(1, t.max(1)) - 1;
        let q = v.get(idx).copied().unwrap_or(f64::NAN);
        let violations = v.iter().filter(|&&x| x > theoretical).count();
        BoundReport {
            theoretical,
            empirical_quantile: q,
            trials: t,
            violation_rate: violations as f64 / t.max(1) as f64,
            passed: q <= theoretical,
        }
    }
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
    }
    Ok(())
}

/// `2 log(e/η) + (2/(ηd)) log(1/β)`.
pub fn order_stat_bound(eta: f64, d: usize, beta: f64) -> Result<f64> {
    check_unit(eta, "η")?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("β must lie in (0, 1]"));
    }
    Ok(2.0 * (std::f64::consts::E / eta).ln() + 2.0 / (eta * d as f64) * (1.0 / beta).ln())
}

/// `C_SS·(ηd log(e/η) + log(1/β))`; the first term vanishes at `η = 0`.
pub fn subset_sum_bound(eta: f64, d: usize, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid("η must lie in [0, 1)"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("β must lie in (0, 1]"));
    }
    let head = if eta == 0.0 { 0.0 } else { eta * d as f64 * (std::f64::consts::E / eta).ln() };
    Ok(C_SS * (head + (1.0 / beta).ln()))
}

/// Squared coordinates in nonincreasing order.
pub fn sorted_squares(v: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = v.iter().map(|x| x * x).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// `max_{|S| = k} Σ_{i∈S} v_i²`, the sum of the `k` largest squares.
pub fn max_subset_square_sum(v: &[f64], k: usize) -> f64 {
    sorted_squares(v).iter().take(k).sum()
}

/// `√(d + log 1/β)·C_COV/√n`.
pub fn covariance_bound(d: usize, n: usize, beta: f64) -> f64 {
    C_COV * ((d as f64 + (1.0 / beta).ln()) / n as f64).sqrt()
}

/// `‖(1/n)XXᵀ − I‖_op` for a `d × n` matrix with samples as columns.
pub fn covariance_deviation(x: &Matrix) -> Result<f64> {
    let n = x.cols();
    if n == 0 {
        return Err(Error::invalid("covariance_deviation needs n ≥ 1"));
    }
    x.gram().scale(1.0 / n as f64).add_diagonal(-1.0).op_norm()
}

/// `C_SP(√d + √(k log(en/k)) + √log(1/β))`.
pub fn sparse_spectral_bound(d: usize, n: usize, k: usize, beta: f64) -> f64 {
    let kf = k as f64;
    C_SP * ((d as f64).sqrt()
        + (kf * (std::f64::consts::E * n as f64 / kf).ln()).sqrt()
        + (1.0 / beta).ln().max(0.0).sqrt())
}

/// Result of a sparse spectral norm evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpectral {
    pub value: f64,
    pub subset: Vec<usize>,
    pub exact: bool,
}

fn sub_gram_norm(gram: &Matrix, s: &[usize]) -> f64 {
    let k = s.len();
    let g = Matrix::from_fn(k, k, |a, b| gram[(s[a], s[b])]);
    SymMatrix::new(g)
        .and_then(|m| m.op_norm())
        .map(|v| v.max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}

fn full_gram(x: &Matrix) -> Matrix {
    x.transpose().gram().into_matrix()
}

fn check_k(x: &Matrix, k: usize) -> Result<()> {
    if k == 0 || k > x.cols() {
        return Err(Error::invalid("sparse spectral norm needs 1 ≤ k ≤ n"));
    }
    Ok(())
}

/// Exhaustive maximum of `‖X_S‖_op` over `|S| = k` (equal to the maximum
/// over `|S| ≤ k`, since adding columns never lowers the norm).
pub fn sparse_spectral_exact(x: &Matrix, k: usize) -> Result<SparseSpectral> {
    check_k(x, k)?;
    let gram = full_gram(x);
    let n = x.cols();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = SparseSpectral { value: f64::NEG_INFINITY, subset: idx.clone(), exact: true };
    loop {
        let v = sub_gram_norm(&gram, &idx);
        if v > best.value {
            best.value = v;
            best.subset = idx.clone();
        }
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Column-swap local search with [`SPARSE_RESTARTS`] restarts; restart 0
/// starts from the `k` longest columns, the others from seeded random sets.
pub fn sparse_spectral_local_search(x: &Matrix, k: usize) -> Result<SparseSpectral> {
    check_k(x, k)?;
    let gram = full_gram(x);
    let n = x.cols();
    let mut best = SparseSpectral { value: f64::NEG_INFINITY, subset: Vec::new(), exact: false };
    for r in 0..SPARSE_RESTARTS {
        let mut s: Vec<usize> = if r == 0 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| gram[(b, b)].partial_cmp(&gram[(a, a)]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            order[..k].to_vec()
        } else {
            RngStream::new(SPARSE_SEED, r as u64).subset(n, k)
        };
        s.sort_unstable();
        let mut cur = sub_gram_norm(&gram, &s);
        loop {
            let mut step: Option<(f64, usize, usize)> = None;
            for a in 0..k {
                for b in 0..n {
                    if s.contains(&b) {
                        continue;
                    }
                    let mut t = s.clone();
                    t[a] = b;
                    let v = sub_gram_norm(&gram, &t);
                    if v > cur + 1e-12 && step.is_none_or(|(bv, _, _)| v > bv) {
                        step = Some((v, a, b));
                    }
                }
            }
            match step {
                Some((v, a, b)) => {
                    s[a] = b;
                    s.sort_unstable();
                    cur = v;
                }
                None => break,
            }
        }
        if cur > best.value {
            best.value = cur;
            best.subset = s;
        }
    }
    Ok(best)
}

/// `max_{|S| ≤ k} ‖X_S‖_op`, exact when `C(n, k) ≤ exact_budget`.
pub fn sparse_spectral_norm(x: &Matrix, k: usize, exact_budget: u64) -> Result<SparseSpectral> {
    check_k(x, k)?;
    if binomial(x.cols() as u64, k as u64) <= exact_budget {
        sparse_spectral_exact(x, k)
    } else {
        sparse_spectral_local_search(x, k)
    }
}

/// Split of a vector into a sparse part on its largest entries and a flat rest.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ShortFlatDecomposition {
    /// Support of `z₁`, ascending.
    pub support: Vec<usize>,
    /// Values of `z₁` on its support.
    pub z1_values: Vec<f64>,
    pub z2: Vec<f64>,
    pub eta: f64,
    pub norm_z1_sq: f64,
    pub norm_z2_inf_sq: f64,
}

impl ShortFlatDecomposition {
    pub fn len(&self) -> usize {
        self.z2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z2.is_empty()
    }

    pub fn z1_dense(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.z2.len()];
        for (&i, &v) in self.support.iter().zip(&self.z1_values) {
            z[i] = v;
        }
        z
    }

    /// `z₁ + z₂`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut z = self.z2.clone();
        for (&i, &v) in self.support.iter().zip(&self.z1_values) {
            z[i] += v;
        }
        z
    }

    /// Exact reconstruction of `y` and declared norms matching recomputation.
    pub fn verify(&self, y: &[f64]) -> bool {
        let z1 = self.z1_values.iter().map(|v| v * v).sum::<f64>();
        let z2 = self.z2.iter().map(|v| v * v).fold(0.0, f64::max);
        self.reconstruct() == y
            && (z1 - self.norm_z1_sq).abs() <= 1e-10 * z1.max(1.0)
            && (z2 - self.norm_z2_inf_sq).abs() <= 1e-10 * z2.max(1.0)
    }
}

/// Puts the `k` largest-magnitude entries (ties by lowest index) in `z₁`.
pub fn short_flat_decompose_k(y: &[f64], k: usize, eta: f64) -> ShortFlatDecomposition {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[b].abs().partial_cmp(&y[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut support: Vec<usize> = order.into_iter().take(k.min(y.len())).collect();
    support.sort_unstable();
    let mut z2 = y.to_vec();
    let z1_values: Vec<f64> = support.iter().map(|&i| std::mem::replace(&mut z2[i], 0.0)).collect();
    ShortFlatDecomposition {
        norm_z1_sq: z1_values.iter().map(|v| v * v).sum(),
        norm_z2_inf_sq: z2.iter().map(|v| v * v).fold(0.0, f64::max),
        support,
        z1_values,
        z2,
        eta,
    }
}

/// Short-flat split with `⌈ηn⌉` entries in `z₁`.
pub fn short_flat_decompose(y: &[f64], eta: f64) -> Result<ShortFlatDecomposition> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::invalid("short_flat_decompose needs 0 < η < 1/2"));
    }
    Ok(short_flat_decompose_k(y, ceil_tol(eta * y.len() as f64), eta))
}

/// Bounds on `‖z₁‖²` and `‖z₂‖²_∞` for standard Gaussian vectors of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ShortFlatBounds {
    pub z1_sq: f64,
    pub z2_inf_sq: f64,
}

impl ShortFlatBounds {
    /// `χ(ηn log(1/η) + log(1/β))` and `χ log(1/η) + χ log(1/β)/(ηn)`.
    pub fn gaussian(n: usize, eta: f64, beta: f64) -> Self {
        let lb = (1.0 / beta).ln();
        let en = eta * n as f64;
        ShortFlatBounds {
            z1_sq: CHI * (en * (1.0 / eta).ln() + lb),
            z2_inf_sq: CHI * (1.0 / eta).ln() + CHI * lb / en,
        }
    }

    pub fn admits(&self, dec: &ShortFlatDecomposition) -> bool {
        dec.norm_z1_sq <= self.z1_sq && dec.norm_z2_inf_sq <= self.z2_inf_sq
    }
}

fn run_trials(trials: usize, seed: u64, f: impl Fn(&mut RngStream) -> f64 + Sync) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|t| f(&mut RngStream::new(seed, t as u64)))
        .collect()
}

/// Checks [`order_stat_bound`] against the `⌈ηd⌉`-th largest squared coordinate.
pub fn validate_order_stat(eta: f64, d: usize, beta: f64, trials: usize, seed: u64, slack: f64) -> Result<BoundReport> {
    let bound = order_stat_bound(eta, d, beta)?;
    let k = ceil_tol(eta * d as f64).max(1);
    let vals = run_trials(trials, seed, |rng| sorted_squares(&rng.normal_vec(d))[k - 1]);
    Ok(BoundReport::from_values(bound, &vals, beta, slack))
}

/// Checks [`subset_sum_bound`] against the top-`⌈ηd⌉` square sum.
pub fn validate_subset_sum(eta: f64, d: usize, beta: f64, trials: usize, seed: u64, slack: f64) -> Result<BoundReport> {
    let bound = subset_sum_bound(eta, d, beta)?;
    let k = ceil_tol(eta * d as f64);
    let vals = run_trials(trials, seed, |rng| max_subset_square_sum(&rng.normal_vec(d), k));
    Ok(BoundReport::from_values(bound, &vals, beta, slack))
}

/// Checks [`covariance_bound`] on Gaussian `d × n` designs.
pub fn validate_covariance(d: usize, n: usize, beta: f64, trials: usize, seed: u64, slack: f64) -> Result<BoundReport> {
    let bound = covariance_bound(d, n, beta);
    let vals = run_trials(trials, seed, |rng| {
        let x = Matrix::from_fn(d, n, |_, _| rng.standard_normal());
        covariance_deviation(&x).unwrap_or(f64::INFINITY)
    });
    Ok(BoundReport::from_values(bound, &vals, beta, slack))
}

/// Checks [`sparse_spectral_bound`] on Gaussian `d × n` designs.
pub fn validate_sparse_spectral(d: usize, n: usize, k: usize, beta: f64, trials: usize, seed: u64, slack: f64) -> Result<BoundReport> {
    let bound = sparse_spectral_bound(d, n, k, beta);
    let vals = run_trials(trials, seed, |rng| {
        let x = Matrix::from_fn(d, n, |_, _| rng.standard_normal());
        sparse_spectral_norm(&x, k, crate::robustmean::DEFAULT_EXACT_BUDGET).map_or(f64::INFINITY, |r| r.value)
    });
    Ok(BoundReport::from_values(bound, &vals, beta, slack))
}

/// Checks both short-flat bounds on standard Gaussian vectors; the reported
/// statistic is the larger of the two ratios value/bound, against bound 1.
pub fn validate_short_flat(n: usize, eta: f64, beta: f64, trials: usize, seed: u64, slack: f64) -> Result<BoundReport> {
    let b = ShortFlatBounds::gaussian(n, eta, beta);
    short_flat_decompose(&[0.0], eta)?;
    let vals = run_trials(trials, seed, |rng| {
        let dec = short_flat_decompose_k(&rng.normal_vec(n), ceil_tol(eta * n as f64), eta);
        (dec.norm_z1_sq / b.z1_sq).max(dec.norm_z2_inf_sq / b.z2_inf_sq)
    });
    Ok(BoundReport::from_values(1.0, &vals, beta, slack))
}
