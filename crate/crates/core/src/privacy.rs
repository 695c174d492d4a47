//! Robustness-to-privacy: an integer robust-distance score over a lattice in
//! a ball, the exponential mechanism on that lattice, and empirical audits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::MeanDataset;
use crate::numerics::{distance, RngStream};
use crate::robustmean::{
    declared_alphas, effective_dim, eta_log, eta_sqrt_log, FilterEstimator, MeanEstimator, StatisticalEstimator,
    C_EFF, C_STAT, DEFAULT_EXACT_BUDGET,
};

/// Frozen constant of the regression rates.
pub const C_REG: f64 = 8.0;
/// Default cap on the number of lattice cells.
pub const DEFAULT_GRID_BUDGET: u64 = 4_000_000;
/// Largest dimension the grid mechanism accepts.
pub const MAX_GRID_DIM: usize = 6;

/// Which error rate `α(η)` drives the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    MeanStat,
    MeanEff,
    RegCritical,
    RegWeak,
}

/// `α(η)` at fixed `(d, n, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction {
    pub kind: RateKind,
    pub constant: f64,
    pub d: usize,
    pub n: usize,
    pub beta: f64,
}

impl RateFunction {
    /// Rate with its frozen constant.
    pub fn new(kind: RateKind, d: usize, n: usize, beta: f64) -> Self {
        let constant = match kind {
            RateKind::MeanStat => C_STAT,
            RateKind::MeanEff => C_EFF,
            RateKind::RegCritical | RateKind::RegWeak => C_REG,
        };
        RateFunction { kind, constant, d, n, beta }
    }

    pub fn alpha(&self, eta: f64) -> f64 {
        let eta = eta.max(0.0);
        let l = (effective_dim(self.d, self.beta) / self.n as f64).sqrt();
        let core = match self.kind {
            RateKind::MeanStat => eta_sqrt_log(eta) + eta.sqrt() * l,
            RateKind::MeanEff => eta_sqrt_log(eta) + (eta * l).sqrt(),
            RateKind::RegCritical | RateKind::RegWeak => {
                let el = eta_log(eta);
                (el * el + el * l).sqrt()
            }
        };
        self.constant * core
    }

    /// Largest corruption level the matching estimator accepts (exclusive).
    pub fn max_eta(&self) -> f64 {
        match self.kind {
            RateKind::MeanStat => 1.0 / 3.0,
            _ => 1.0 / 6.0,
        }
    }

    /// Corruption level the privacy budget buys, `(d + log 1/β)/(εn)`,
    /// clamped to `[1/n, η_max]`.
    pub fn private_eta(&self, epsilon: f64) -> f64 {
        let n = self.n as f64;
        (effective_dim(self.d, self.beta) / (epsilon * n)).clamp(1.0 / n, self.max_eta())
    }

    /// Accuracy target of the private release.
    pub fn alpha_target(&self, epsilon: f64) -> f64 {
        self.alpha(self.private_eta(epsilon))
    }
}

/// Parameters of the robust-distance score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    pub rate: RateFunction,
    /// Grid pitch.
    pub h: f64,
    /// Public radius promise.
    pub r_ball: f64,
    /// Per-step radius growth times `n`.
    pub kappa: f64,
}

impl ScoreParams {
    /// `h = α_target/(2√d)` and `κ = 2√2(√d + 3)`.
    pub fn mean(rate: RateFunction, epsilon: f64, r_ball: f64) -> Self {
        let d = rate.d as f64;
        ScoreParams {
            rate,
            h: rate.alpha_target(epsilon) / (2.0 * d.sqrt()),
            r_ball,
            kappa: 2.0 * 2f64.sqrt() * (d.sqrt() + 3.0),
        }
    }

    /// `h = α_target/(2√d)` and `κ = 2(√d + 3)(4R + 4)`.
    pub fn regression(rate: RateFunction, epsilon: f64, r_ball: f64) -> Self {
        let d = rate.d as f64;
        ScoreParams {
            rate,
            h: rate.alpha_target(epsilon) / (2.0 * d.sqrt()),
            r_ball,
            kappa: 2.0 * (d.sqrt() + 3.0) * (4.0 * r_ball + 4.0),
        }
    }

    /// Largest budget `T` with `T/n` below the estimator's limit.
    pub fn t_star(&self) -> usize {
        let n = self.rate.n;
        let lim = self.rate.max_eta();
        let mut t = (lim * n as f64).floor() as usize;
        while t > 0 && t as f64 / n as f64 >= lim {
            t -= 1;
        }
        t.min(n)
    }

    /// Growth of the radius from budget `T` to `T + 1`: `κ/n`, plus for the
    /// filter the largest mean shift one kept row can cause,
    /// `√((1 + α₀(T/n))/n)`.
    pub fn step(&self, t: usize) -> f64 {
        let n = self.rate.n as f64;
        let shift = match self.rate.kind {
            RateKind::MeanEff => {
                let (a0, _, _) = declared_alphas(t as f64 / n, self.rate.d, self.rate.n, self.rate.beta);
                ((1.0 + a0) / n).sqrt()
            }
            _ => 0.0,
        };
        self.kappa / n + shift
    }

    /// `r(T) = h√d/2 + Σ_{t<T} step(t) + α(T/n)` up to `T*`, linear beyond.
    pub fn radius(&self, t: usize) -> f64 {
        self.radii(t).pop().unwrap_or(0.0)
    }

    /// `r(0), …, r(T)`.
    pub fn radii(&self, t: usize) -> Vec<f64> {
        let n = self.rate.n as f64;
        let ts = self.t_star();
        let base = self.h * (self.rate.d as f64).sqrt() / 2.0;
        let mut grown = 0.0;
        let mut out = Vec::with_capacity(t + 1);
        for s in 0..=t.min(ts) {
            out.push(base + grown + self.rate.alpha(s as f64 / n));
            grown += self.step(s);
        }
        if t > ts {
            let last = out[ts];
            let slope = self.tail_slope();
            out.extend((ts + 1..=t).map(|s| last + (s - ts) as f64 * slope));
        }
        out
    }

    /// `step(T*) + 6R/(n − T*)`.
    pub fn tail_slope(&self) -> f64 {
        let n = self.rate.n as f64;
        self.step(self.t_star()) + 6.0 * self.r_ball / (n - self.t_star() as f64).max(1.0)
    }
}

/// Robust estimates at every budget `T ≤ T*`, the raw material of the score.
#[derive(Debug, Clone)]
pub struct ScorePath {
    pub params: ScoreParams,
    /// `estimates[T]`; `None` where the estimator reported failure.
    pub estimates: Vec<Option<Vec<f64>>>,
    /// `r(T)` for `T ≤ T*`.
    pub radii: Vec<f64>,
}

impl ScorePath {
    /// Runs `estimate(T/n)` for `T = 0..=T*` in parallel.
    pub fn build<F>(params: ScoreParams, estimate: F) -> Self
    where
        F: Fn(f64) -> Result<Vec<f64>> + Sync,
    {
        let n = params.rate.n as f64;
        let estimates = (0..=params.t_star())
            .into_par_iter()
            .map(|t| estimate(t as f64 / n).ok())
            .collect();
        let radii = params.radii(params.t_star());
        ScorePath { params, estimates, radii }
    }

    pub fn for_mean(data: &MeanDataset, params: ScoreParams, estimator: &dyn MeanEstimator) -> Self {
        ScorePath::build(params, |eta| estimator.estimate(data, eta))
    }

    /// Smallest `T` with `‖θ − est_T‖ ≤ r(T)`, scanning `T ≤ T*` and then
    /// extending linearly from the last estimate; saturates at `n`. A failed
    /// estimate is replaced by the last successful one.
    pub fn score(&self, theta: &[f64]) -> u32 {
        let n = self.params.rate.n;
        let mut last: Option<&Vec<f64>> = None;
        for (t, e) in self.estimates.iter().enumerate() {
            last = e.as_ref().or(last);
            if let Some(e) = last {
                if distance(theta, e) <= self.radii[t] {
                    return t as u32;
                }
            }
        }
        let Some(e) = last else { return n as u32 };
        let t0 = self.estimates.len() - 1;
        let excess = distance(theta, e) - self.radii[t0];
        let extra = (excess / self.params.tail_slope()).ceil().max(1.0);
        let t = t0 as f64 + extra;
        if t >= n as f64 {
            n as u32
        } else {
            t as u32
        }
    }

    /// The budget-0 estimate, if available.
    pub fn base_estimate(&self) -> Option<&[f64]> {
        self.estimates.first().and_then(|e| e.as_deref())
    }
}

/// Integer scores on the lattice `center + h·ℤ^d` inside radius `2R + h√d/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    pub center: Vec<f64>,
    pub radius: f64,
    pub cell: f64,
    pub n: usize,
    /// Lattice indices in lexicographic order.
    pub indices: Vec<Vec<i64>>,
    pub scores: Vec<u32>,
}

fn unit_ball_volume(d: usize) -> f64 {
    let d = d as f64;
    std::f64::consts::PI.powf(d / 2.0) / half_integer_gamma(d / 2.0 + 1.0)
}

fn half_integer_gamma(x: f64) -> f64 {
    // Γ at half-integers by recursion from Γ(1) = 1 and Γ(1/2) = √π
    let mut g = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut t = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { 0.5 };
    while t < x - 1e-12 {
        g *= t;
        t += 1.0;
    }
    g
}

/// Lattice indices `i` with `‖h·i‖ ≤ rho`, lexicographic.
pub fn lattice_ball(d: usize, h: f64, rho: f64, budget: u64) -> Result<Vec<Vec<i64>>> {
    if d == 0 || d > MAX_GRID_DIM {
        return Err(Error::invalid(format!("grid mechanism supports 1 ≤ d ≤ {MAX_GRID_DIM}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("grid pitch must be positive"));
    }
    let m = (rho / h).floor() as i64;
    let estimate = unit_ball_volume(d) * ((m as f64 + 1.0).powi(d as i32)) * 1.0;
    if estimate > 2.0 * budget as f64 {
        return Err(Error::GridTooLarge { required: estimate.ceil() as u64, budget });
    }
    let lim = (rho / h).powi(2) + 1e-9;
    let mut out = Vec::new();
    let mut cur = vec![0i64; d];
    fn rec(k: usize, acc: f64, m: i64, lim: f64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>, budget: u64) -> bool {
        if k == cur.len() {
            out.push(cur.clone());
            return (out.len() as u64) <= budget;
        }
        for i in -m..=m {
            let a = acc + (i * i) as f64;
            if a > lim {
                continue;
            }
            cur[k] = i;
            if !rec(k + 1, a, m, lim, cur, out, budget) {
                return false;
            }
        }
        true
    }
    if !rec(0, 0.0, m, lim, &mut cur, &mut out, budget) {
        return Err(Error::GridTooLarge { required: estimate.ceil() as u64, budget });
    }
    Ok(out)
}

impl ScoreField {
    /// Tabulates the path's score on the lattice around `center`.
    pub fn from_path(path: &ScorePath, center: &[f64], budget: u64) -> Result<Self> {
        let p = &path.params;
        let d = center.len();
        let rho = 2.0 * p.r_ball + p.h * (d as f64).sqrt() / 2.0;
        let indices = lattice_ball(d, p.h, rho, budget)?;
        let field = ScoreField {
            center: center.to_vec(),
            radius: p.r_ball,
            cell: p.h,
            n: p.rate.n,
            scores: Vec::new(),
            indices,
        };
        let scores = field
            .indices
            .par_iter()
            .map(|i| path.score(&field.point(i)))
            .collect();
        Ok(ScoreField { scores, ..field })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn point(&self, idx: &[i64]) -> Vec<f64> {
        self.center.iter().zip(idx).map(|(c, &i)| c + self.cell * i as f64).collect()
    }

    /// Center of cell `k`.
    pub fn cell_center(&self, k: usize) -> Vec<f64> {
        self.point(&self.indices[k])
    }

    pub fn min_score(&self) -> u32 {
        self.scores.iter().copied().min().unwrap_or(0)
    }

    /// Exact selection probabilities `∝ exp(−ε·score/2)`.
    pub fn probabilities(&self, epsilon: f64) -> Vec<f64> {
        let smin = self.min_score() as f64;
        let w: Vec<f64> = self.scores.iter().map(|&s| (-epsilon * (s as f64 - smin) / 2.0).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Textual export, one `i₀,…,i_{d−1},score` line per cell.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for (idx, sc) in self.indices.iter().zip(&self.scores) {
            for i in idx {
                s.push_str(&i.to_string());
                s.push(',');
            }
            s.push_str(&sc.to_string());
            s.push('\n');
        }
        s
    }
}

/// Inverse-CDF sampler over the cells of a field.
#[derive(Debug, Clone)]
pub struct CellSampler {
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(field: &ScoreField, epsilon: f64) -> Result<Self> {
        if field.is_empty() {
            return Err(Error::invalid("score field is empty"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid("ε must be positive"));
        }
        let mut acc = 0.0;
        let cumulative = field
            .probabilities(epsilon)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(CellSampler { cumulative })
    }

    /// Index of a sampled cell.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Exponential mechanism on the grid; returns the chosen cell center.
pub fn exp_mechanism_grid(field: &ScoreField, epsilon: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let k = CellSampler::new(field, epsilon)?.sample(rng);
    Ok(field.cell_center(k))
}

/// Robust estimator selection for the mean mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanMode {
    Stat,
    Eff,
}

impl MeanMode {
    pub fn rate_kind(self) -> RateKind {
        match self {
            MeanMode::Stat => RateKind::MeanStat,
            MeanMode::Eff => RateKind::MeanEff,
        }
    }

    pub fn estimator(self, beta: f64) -> Box<dyn MeanEstimator> {
        match self {
            MeanMode::Stat => Box::new(StatisticalEstimator { beta, budget: DEFAULT_EXACT_BUDGET }),
            MeanMode::Eff => Box::new(FilterEstimator { beta }),
        }
    }
}

/// Score field for the private empirical mean over the ball of radius `R`
/// around the origin.
pub fn mean_score_field(obs: &MeanDataset, epsilon: f64, beta: f64, r_ball: f64, mode: MeanMode) -> Result<ScoreField> {
    check_private_args(epsilon, beta, r_ball)?;
    let rate = RateFunction::new(mode.rate_kind(), obs.dim(), obs.n(), beta);
    let params = ScoreParams::mean(rate, epsilon, r_ball);
    let est = mode.estimator(beta);
    let path = ScorePath::for_mean(obs, params, est.as_ref());
    ScoreField::from_path(&path, &vec![0.0; obs.dim()], DEFAULT_GRID_BUDGET)
}

pub(crate) fn check_private_args(epsilon: f64, beta: f64, r_ball: f64) -> Result<()> {
    if !(epsilon > 0.0) || !(beta > 0.0 && beta < 1.0) || !(r_ball > 0.0) {
        return Err(Error::invalid("private release needs ε > 0, β ∈ (0,1), R > 0"));
    }
    Ok(())
}

/// ε-DP estimate of the empirical mean, given the public promise `‖x̄‖ ≤ R`.
pub fn private_empirical_mean(
    obs: &MeanDataset,
    epsilon: f64,
    beta: f64,
    r_ball: f64,
    mode: MeanMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let field = mean_score_field(obs, epsilon, beta, r_ball, mode)?;
    exp_mechanism_grid(&field, epsilon, rng)
}

/// Largest per-cell score change found by a sensitivity audit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SensitivityReport {
    pub pairs: usize,
    pub max_change: u32,
    /// Number of pairs whose maximal change was exactly `k`, for `k = 0, 1, …`.
    pub change_histogram: Vec<usize>,
}

/// Per-cell `max |s − s'|` between two fields on the same grid.
pub fn field_difference(a: &ScoreField, b: &ScoreField) -> Result<u32> {
    if a.indices != b.indices {
        return Err(Error::invalid("score fields are on different grids"));
    }
    Ok(a.scores.iter().zip(&b.scores).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0))
}

/// Builds fields for `pairs` adjacent datasets produced by `gen_pair` and
/// reports the largest per-cell score difference. Pairs are drawn
/// sequentially from `rng`; fields are built in parallel.
pub fn sensitivity_audit<D, G, B>(pairs: usize, rng: &mut RngStream, mut gen_pair: G, build: B) -> Result<SensitivityReport>
where
    D: Send + Sync,
    G: FnMut(&mut RngStream) -> Result<(D, D)>,
    B: Fn(&D) -> Result<ScoreField> + Sync,
{
    if pairs == 0 {
        return Err(Error::invalid("sensitivity audit needs at least one pair"));
    }
    let data = (0..pairs).map(|_| gen_pair(rng)).collect::<Result<Vec<_>>>()?;
    let changes = data
        .par_iter()
        .map(|(a, b)| field_difference(&build(a)?, &build(b)?))
        .collect::<Result<Vec<u32>>>()?;
    let max_change = changes.iter().copied().max().unwrap_or(0);
    let mut change_histogram = vec![0; max_change as usize + 1];
    for c in changes {
        change_histogram[c as usize] += 1;
    }
    Ok(SensitivityReport { pairs, max_change, change_histogram })
}

/// Result of an empirical probability-ratio audit between adjacent fields.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DpAuditReport {
    pub draws: usize,
    pub sensitivity: u32,
    /// Largest exact ratio `p(cell)/p'(cell)` in either direction.
    pub exact_max_log_ratio: f64,
    /// Largest `(p̂ − e^{εΔ}p̂')/SE` over cells and both directions.
    pub worst_z: f64,
    pub passed: bool,
}

/// Draws `draws` samples from each field's mechanism and checks
/// `p̂(cell) − e^{εΔ}·p̂'(cell) ≤ 3·SE` on every cell, both directions.
pub fn dp_ratio_audit(a: &ScoreField, b: &ScoreField, epsilon: f64, draws: usize, rng: &mut RngStream) -> Result<DpAuditReport> {
    let delta = field_difference(a, b)?;
    let pa = a.probabilities(epsilon);
    let pb = b.probabilities(epsilon);
    let exact_max_log_ratio = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x / y).ln().abs())
        .fold(0.0, f64::max);
    let count = |f: &ScoreField, rng: &mut RngStream| -> Result<Vec<f64>> {
        let s = CellSampler::new(f, epsilon)?;
        let mut c = vec![0.0; f.len()];
        for _ in 0..draws {
            c[s.sample(rng)] += 1.0;
        }
        Ok(c.into_iter().map(|x| x / draws as f64).collect())
    };
    let ha = count(a, rng)?;
    let hb = count(b, rng)?;
    let bound = (epsilon * delta as f64).exp();
    let nd = draws as f64;
    let mut worst_z = f64::NEG_INFINITY;
    for (p, q) in [(&ha, &hb), (&hb, &ha)] {
        for (x, y) in p.iter().zip(q.iter()) {
            let se = (x * (1.0 - x) / nd + bound * bound * y * (1.0 - y) / nd).sqrt();
            let diff = x - bound * y;
            let z = if se > 0.0 { diff / se } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
            worst_z = worst_z.max(z);
        }
    }
    Ok(DpAuditReport {
        draws,
        sensitivity: delta,
        exact_max_log_ratio,
        worst_z,
        passed: worst_z <= 3.0,
    })
}

/// Outcome of the segment test for quasi-convexity of the score.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QuasiConvexReport {
    pub segments: usize,
    pub violations: usize,
    /// Largest `max segment score − max endpoint score`.
    pub worst_excess: i64,
}

/// Scores 33 evenly spaced points on `segments` random segments between
/// cells whose score is within `low` of the field minimum; a violation is a
/// point exceeding the larger endpoint score by more than 1.
pub fn quasi_convexity_check(path: &ScorePath, field: &ScoreField, segments: usize, low: u32, rng: &mut RngStream) -> Result<QuasiConvexReport> {
    let cutoff = field.min_score() + low;
    let pool: Vec<usize> = (0..field.len()).filter(|&k| field.scores[k] <= cutoff).collect();
    if pool.len() < 2 {
        return Ok(QuasiConvexReport { segments: 0, violations: 0, worst_excess: 0 });
    }
    let mut violations = 0;
    let mut worst_excess = i64::MIN;
    for _ in 0..segments {
        let a = field.cell_center(pool[rng.index(pool.len())]);
        let b = field.cell_center(pool[rng.index(pool.len())]);
        let ends = path.score(&a).max(path.score(&b)) as i64;
        let top = (0..=32)
            .map(|s| {
                let t = s as f64 / 32.0;
                let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
                path.score(&p) as i64
            })
            .max()
            .unwrap_or(0);
        worst_excess = worst_excess.max(top - ends);
        if top > ends + 1 {
            violations += 1;
        }
    }
    Ok(QuasiConvexReport { segments, violations, worst_excess })
}
