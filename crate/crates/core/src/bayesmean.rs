//! Private Bayesian mean estimation. The shrinkage matrix is split into
//! dyadic eigenvalue buckets, each bucket is released with the isotropic
//! grid mechanism and the pieces are reassembled through Λ. Also hosts the
//! frequentist wrapper and the streaming estimator.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{shrinkage, MeanDataset, PriorSpec};
use crate::numerics::{sym_eig, Matrix, RngStream, SymEigen, SymMatrix};
use crate::privacy::{check_private_args, private_empirical_mean, MeanMode, RateFunction, MAX_GRID_DIM};

/// Largest bucket count `M`.
pub const MAX_BUCKETS: usize = 40;

/// One dyadic eigenvalue bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    /// Level `i`: eigenvalues of Λ² lie in `(2^{-i}, 2^{-(i-1)}]·‖Λ²‖`.
    pub level: usize,
    /// Eigen-indices into the plan's eigenbasis.
    pub indices: Vec<usize>,
    /// `2^{-i}·‖Λ²‖`.
    pub sigma2: f64,
}

/// Dyadic partition of the spectrum of Λ².
#[derive(Debug, Clone)]
pub struct BucketPlan {
    pub m: usize,
    /// Non-empty buckets by increasing level.
    pub buckets: Vec<Bucket>,
    /// Indices at or below `2^{-M}‖Λ²‖`.
    pub tail: Vec<usize>,
    /// `‖Λ²‖_op`.
    pub top: f64,
    /// Eigenbasis of Λ², values clamped at 0.
    pub eigen: SymEigen,
}

/// Buckets the spectrum of `lambda2` into `m` dyadic levels plus a tail.
pub fn bucket_plan(lambda2: &SymMatrix, m: usize) -> Result<BucketPlan> {
    if m == 0 {
        return Err(Error::invalid("bucket plan needs M ≥ 1"));
    }
    let mut eigen = sym_eig(lambda2)?;
    let top = eigen.values.first().copied().unwrap_or(0.0).max(0.0);
    for v in &mut eigen.values {
        if *v < 0.0 {
            if *v < -1e-10 * top.max(1.0) {
                return Err(Error::invalid("Λ² must be positive semidefinite"));
            }
            *v = 0.0;
        }
    }
    let d = eigen.values.len();
    if top == 0.0 {
        return Ok(BucketPlan { m, buckets: Vec::new(), tail: (0..d).collect(), top, eigen });
    }
    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut tail = Vec::new();
    for (j, &v) in eigen.values.iter().enumerate() {
        let r = v / top;
        if r <= 0.5f64.powi(m as i32) {
            tail.push(j);
            continue;
        }
        // smallest i with r > 2^{-i}
        let mut i = 1;
        while r <= 0.5f64.powi(i as i32) {
            i += 1;
        }
        levels[i - 1].push(j);
    }
    let buckets = levels
        .into_iter()
        .enumerate()
        .filter(|(_, idx)| !idx.is_empty())
        .map(|(k, indices)| Bucket { level: k + 1, indices, sigma2: top * 0.5f64.powi(k as i32 + 1) })
        .collect();
    Ok(BucketPlan { m, buckets, tail, top, eigen })
}

/// `M = ⌈log₂(n·d·ε/α)⌉` clipped to `[1, 40]`.
pub fn bucket_count(n: usize, d: usize, epsilon: f64, alpha: f64) -> usize {
    let x = (n as f64 * d as f64 * epsilon / alpha).log2().ceil();
    if x.is_nan() {
        return 1;
    }
    x.clamp(1.0, MAX_BUCKETS as f64) as usize
}

impl BucketPlan {
    /// Per-bucket privacy budget: `ε` divided by the number of released buckets.
    pub fn epsilon_split(&self, epsilon: f64) -> f64 {
        epsilon / self.buckets.len().max(1) as f64
    }

    /// Eigenvectors of bucket `b` as columns.
    pub fn basis(&self, b: usize) -> Matrix {
        self.eigen.vectors.select_columns(&self.buckets[b].indices)
    }

    /// Rows `V_bᵀx_i`, scaled by `scale`.
    pub fn project(&self, b: usize, data: &MeanDataset, scale: f64) -> Result<MeanDataset> {
        let z = data.samples().matmul(&self.basis(b))?;
        MeanDataset::new(z.scale(scale))
    }

    /// `Σ_b V_b·(w_b ∘ z_b)` where `w_b` holds `weight(eigenvalue of Λ²)`.
    pub fn assemble(&self, parts: &[Vec<f64>], weight: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if parts.len() != self.buckets.len() {
            return Err(Error::DimensionMismatch {
                context: "bucket assembly",
                expected: self.buckets.len(),
                found: parts.len(),
            });
        }
        let d = self.eigen.values.len();
        let mut out = vec![0.0; d];
        for (bucket, z) in self.buckets.iter().zip(parts) {
            if z.len() != bucket.indices.len() {
                return Err(Error::DimensionMismatch {
                    context: "bucket assembly",
                    expected: bucket.indices.len(),
                    found: z.len(),
                });
            }
            for (&j, &zj) in bucket.indices.iter().zip(z) {
                let c = weight(self.eigen.values[j]) * zj;
                for (k, o) in out.iter_mut().enumerate() {
                    *o += self.eigen.vectors[(k, j)] * c;
                }
            }
        }
        Ok(out)
    }

    pub fn max_bucket_dim(&self) -> usize {
        self.buckets.iter().map(|b| b.indices.len()).max().unwrap_or(0)
    }
}

fn bucket_alpha(mode: MeanMode, d: usize, n: usize, beta: f64, epsilon: f64) -> f64 {
    RateFunction::new(mode.rate_kind(), d, n, beta).alpha_target(epsilon)
}

fn check_bucket_dims(plan: &BucketPlan) -> Result<()> {
    let db = plan.max_bucket_dim();
    if db > MAX_GRID_DIM {
        return Err(Error::invalid(format!(
            "bucket dimension {db} exceeds the grid limit {MAX_GRID_DIM}"
        )));
    }
    Ok(())
}

/// ε-DP estimate of the posterior mean `Λx̄` under a proper Gaussian prior.
///
/// Each bucket is released at an equal share of `ε` over the ball of radius
/// `√((σ²_max + 1/n)(d_b + 2 log 1/β))`, which holds for the prior-predictive
/// law of the bucket mean with probability `≥ 1 − β`.
pub fn private_posterior_mean(
    obs: &MeanDataset,
    prior: &PriorSpec,
    epsilon: f64,
    beta: f64,
    mode: MeanMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_private_args(epsilon, beta, 1.0)?;
    let (n, d) = (obs.n(), obs.dim());
    if prior.dim() != d {
        return Err(Error::DimensionMismatch { context: "prior", expected: d, found: prior.dim() });
    }
    if prior.covariance().is_none() {
        return Err(Error::invalid("the private posterior mean needs a proper prior"));
    }
    let lam = shrinkage(prior, n)?;
    let m = bucket_count(n, d, epsilon, bucket_alpha(mode, d, n, beta, epsilon));
    let plan = bucket_plan(&lam.squared(), m)?;
    check_bucket_dims(&plan)?;
    let eps_b = plan.epsilon_split(epsilon);
    let beta_b = beta / plan.buckets.len().max(1) as f64;
    let nf = n as f64;
    let base = rng.fork();
    let parts = (0..plan.buckets.len())
        .into_par_iter()
        .map(|b| {
            let bucket = &plan.buckets[b];
            let l_max = bucket.indices.iter().map(|&j| plan.eigen.values[j].sqrt()).fold(0.0, f64::max);
            let sigma2_max = l_max / (nf * (1.0 - l_max).max(1e-300));
            let db = bucket.indices.len() as f64;
            let r = ((sigma2_max + 1.0 / nf) * (db + 2.0 * (1.0 / beta_b).ln())).sqrt();
            let z = plan.project(b, obs, 1.0)?;
            let mut r_b = base.with_stream(b as u64);
            private_empirical_mean(&z, eps_b, beta_b, r, mode, &mut r_b)
        })
        .collect::<Result<Vec<_>>>()?;
    plan.assemble(&parts, f64::sqrt)
}

/// ε-DP estimate of `μ` from `N(μ, Λ²)` samples under the promise `‖x̄‖ ≤ R`.
///
/// Buckets are whitened by their largest standard deviation. Tail
/// directions with positive variance form one extra bucket at the cutoff
/// scale; exactly constant directions are read off by the coordinate median.
pub fn frequentist_private_mean(
    obs: &MeanDataset,
    lambda: &SymMatrix,
    r_ball: f64,
    epsilon: f64,
    beta: f64,
    mode: MeanMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_private_args(epsilon, beta, r_ball)?;
    let (n, d) = (obs.n(), obs.dim());
    if lambda.dim() != d {
        return Err(Error::DimensionMismatch { context: "covariance root", expected: d, found: lambda.dim() });
    }
    let lambda2 = SymMatrix::new(lambda.as_matrix().matmul(lambda.as_matrix())?)?;
    let m = bucket_count(n, d, epsilon, bucket_alpha(mode, d, n, beta, epsilon));
    let mut plan = bucket_plan(&lambda2, m)?;
    let tol = 1e-14 * plan.top.max(f64::MIN_POSITIVE);
    let (flat, constant): (Vec<usize>, Vec<usize>) = plan.tail.iter().partition(|&&j| plan.eigen.values[j] > tol);
    let mut scales: Vec<f64> = plan
        .buckets
        .iter()
        .map(|b| b.indices.iter().map(|&j| plan.eigen.values[j]).fold(0.0, f64::max).sqrt())
        .collect();
    if !flat.is_empty() {
        let cutoff = plan.top * 0.5f64.powi(m as i32);
        plan.buckets.push(Bucket { level: m + 1, indices: flat, sigma2: cutoff });
        scales.push(cutoff.sqrt());
    }
    check_bucket_dims(&plan)?;
    let eps_b = plan.epsilon_split(epsilon);
    let beta_b = beta / plan.buckets.len().max(1) as f64;
    let base = rng.fork();
    let parts = (0..plan.buckets.len())
        .into_par_iter()
        .map(|b| {
            let s = scales[b];
            let z = plan.project(b, obs, 1.0 / s)?;
            let mut r_b = base.with_stream(b as u64);
            let est = private_empirical_mean(&z, eps_b, beta_b, r_ball / s, mode, &mut r_b)?;
            Ok(est.into_iter().map(|v| v * s).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut out = plan.assemble(&parts, |_| 1.0)?;
    for &j in &constant {
        let v = plan.eigen.vector(j);
        let mut proj: Vec<f64> = (0..n).map(|i| crate::numerics::dot(obs.sample(i), &v)).collect();
        proj.sort_by(f64::total_cmp);
        let med = if n % 2 == 1 { proj[n / 2] } else { 0.5 * (proj[n / 2 - 1] + proj[n / 2]) };
        for (o, vk) in out.iter_mut().zip(&v) {
            *o += med * vk;
        }
    }
    Ok(out)
}

/// Per-batch budgets `ε_i = ε/(i·log k)` with `log k` floored at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub k: usize,
}

impl EpsilonSchedule {
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0) || k == 0 {
            return Err(Error::invalid("schedule needs ε > 0 and k ≥ 1"));
        }
        Ok(EpsilonSchedule { epsilon, k })
    }

    fn log_k(&self) -> f64 {
        (self.k as f64).ln().max(1.0)
    }

    /// Budget of batch `i ∈ 1..=k`.
    pub fn epsilon_i(&self, i: usize) -> f64 {
        self.epsilon / (i.max(1) as f64 * self.log_k())
    }

    /// `Σ_{i≤k} ε_i`.
    pub fn total(&self) -> f64 {
        (1..=self.k).map(|i| self.epsilon_i(i)).sum()
    }

    /// `ε(1 + ln k)/log k`, itself at most `2ε`.
    pub fn bound(&self) -> f64 {
        self.epsilon * (1.0 + (self.k as f64).ln()) / self.log_k()
    }
}

/// How each batch mean is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchMode {
    Exact,
    Private { mode: MeanMode, beta: f64, r_ball: f64 },
}

/// Published state of the streaming estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub n: usize,
    pub t: usize,
    pub mu: Vec<f64>,
    /// Posterior precision `n·t`.
    pub precision: u64,
    pub schedule: EpsilonSchedule,
}

/// One published line of the stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamRecord {
    pub t: usize,
    pub estimate: Vec<f64>,
    pub epsilon_i: f64,
}

impl StreamRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl StreamState {
    /// Improper-prior start for `k` batches of size `n` in dimension `d`.
    pub fn new(d: usize, n: usize, schedule: EpsilonSchedule) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::invalid("stream needs d ≥ 1 and n ≥ 1"));
        }
        Ok(StreamState { n, t: 0, mu: vec![0.0; d], precision: 0, schedule })
    }

    /// Budget of the next batch.
    pub fn next_epsilon(&self) -> f64 {
        self.schedule.epsilon_i(self.t + 1)
    }
}

/// `μ_{t+1} = μ_t/(1 + σ_t²n) + x̂_t/(1 + 1/(σ_t²n))` with `σ_t⁻² = nt`, i.e.
/// the running average of the batch estimates.
pub fn stream_update(
    state: &StreamState,
    batch: &MeanDataset,
    epsilon_i: f64,
    mode: BatchMode,
    rng: &mut RngStream,
) -> Result<(StreamState, StreamRecord)> {
    if batch.n() != state.n {
        return Err(Error::DimensionMismatch { context: "batch size", expected: state.n, found: batch.n() });
    }
    if batch.dim() != state.mu.len() {
        return Err(Error::DimensionMismatch { context: "batch dimension", expected: state.mu.len(), found: batch.dim() });
    }
    let xhat = match mode {
        BatchMode::Exact => batch.mean(),
        BatchMode::Private { mode, beta, r_ball } => {
            let mut r = rng.with_stream(state.t as u64 + 1);
            private_empirical_mean(batch, epsilon_i, beta, r_ball, mode, &mut r)?
        }
    };
    let t = state.t as f64;
    let mu: Vec<f64> = state.mu.iter().zip(&xhat).map(|(m, x)| (t * m + x) / (t + 1.0)).collect();
    let next = StreamState {
        t: state.t + 1,
        precision: state.precision + state.n as u64,
        mu: mu.clone(),
        ..state.clone()
    };
    let record = StreamRecord { t: next.t, estimate: mu, epsilon_i };
    Ok((next, record))
}

/// Runs the stream over `batches` with the state's schedule.
pub fn run_stream(
    mut state: StreamState,
    batches: &[MeanDataset],
    mode: BatchMode,
    rng: &mut RngStream,
) -> Result<(StreamState, Vec<StreamRecord>)> {
    let mut records = Vec::with_capacity(batches.len());
    for b in batches {
        let eps = state.next_epsilon();
        let (next, rec) = stream_update(&state, b, eps, mode, rng)?;
        state = next;
        records.push(rec);
    }
    Ok((state, records))
}

/// Error recursion `E_1 = c_1`, `E_{t+1} = (t/(t+1))E_t + c_{t+1}/(t+1)`.
pub fn contraction_recursion(per_batch: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(per_batch.len());
    let mut e = 0.0;
    for (t, &c) in per_batch.iter().enumerate() {
        let t = t as f64;
        e = (t * e + c) / (t + 1.0);
        out.push(e);
    }
    out
}
