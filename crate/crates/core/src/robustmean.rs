//! Robust estimation of the clean empirical mean under η-contamination.
//!
//! Two estimators share one interface: a search over replacement sets that
//! keeps any reconstruction with small subset deviations, and a spectral
//! soft filter whose output weights come with a checkable certificate.

use crate::error::{Error, Result};
use crate::model::MeanDataset;
use crate::numerics::{
    axpy, binomial, ceil_tol, dot, floor_tol, norm, scaled, sub, top_eigen, Matrix, RngStream,
    SymMatrix,
};

/// Frozen constant of the statistical rate.
pub const C_STAT: f64 = 6.0;
/// Frozen constant of the efficient rate.
pub const C_EFF: f64 = 8.0;
/// Constant in the subset-deviation feasibility constraint.
pub const C_FEAS: f64 = 2.0;
/// Constant in the declared α₀, α₁, α₂.
pub const ALPHA_CONST: f64 = 4.0;
/// Default number of subset evaluations allowed for exact searches.
pub const DEFAULT_EXACT_BUDGET: u64 = 2_000_000;
/// Largest number of replacement sets the statistical search enumerates.
pub const MAX_REPLACEMENT_SETS: u64 = 20_000;
/// Random directions probed by [`certify_weights`] by default.
pub const DEFAULT_DIRECTIONS: usize = 256;

const CERT_SEED: u64 = 0x5eed_ce27;

/// `η ln(1/η)`, continuous at 0.
pub fn eta_log(eta: f64) -> f64 {
    if eta <= 0.0 {
        0.0
    } else {
        eta * (1.0 / eta).ln()
    }
}

/// `η √ln(1/η)`, continuous at 0.
pub fn eta_sqrt_log(eta: f64) -> f64 {
    if eta <= 0.0 {
        0.0
    } else {
        eta * (1.0 / eta).ln().sqrt()
    }
}

/// `d + ln(1/β)`.
pub fn effective_dim(d: usize, beta: f64) -> f64 {
    d as f64 + (1.0 / beta).ln().max(0.0)
}

/// `η√log(1/η) + √η·√((d + log 1/β)/n)`; `β = 1` gives the `√(d/n)` form.
pub fn statistical_rate(eta: f64, d: usize, n: usize, beta: f64) -> f64 {
    let l = effective_dim(d, beta);
    eta_sqrt_log(eta) + eta.max(0.0).sqrt() * (l / n as f64).sqrt()
}

/// `η√log(1/η) + √(η·√((d + log 1/β)/n))`.
pub fn efficient_rate(eta: f64, d: usize, n: usize, beta: f64) -> f64 {
    let l = effective_dim(d, beta);
    eta_sqrt_log(eta) + (eta.max(0.0) * (l / n as f64).sqrt()).sqrt()
}

/// Worst small-subset deviation of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceReport {
    pub eta: f64,
    pub worst_subset: Vec<usize>,
    pub worst_deviation: f64,
    pub exact: bool,
}

/// Normalization of a subset sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SubsetScale {
    /// Divide by `|S|`.
    Size,
    /// Divide by `n − |S|`, the size of the complement.
    Complement,
    /// Divide by a fixed count.
    Fixed(usize),
}

impl SubsetScale {
    fn factor(self, size: usize, n: usize) -> f64 {
        match self {
            SubsetScale::Size => 1.0 / size as f64,
            SubsetScale::Complement => 1.0 / (n - size).max(1) as f64,
            SubsetScale::Fixed(m) => 1.0 / m.max(1) as f64,
        }
    }
}

pub(crate) fn centered_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        axpy(&mut m, 1.0, r);
    }
    let m = scaled(&m, 1.0 / rows.len() as f64);
    rows.iter().map(|r| sub(r, &m)).collect()
}

fn subset_value(c: &[Vec<f64>], s: &[usize], scale: SubsetScale) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let mut acc = vec![0.0; c[0].len()];
    for &i in s {
        axpy(&mut acc, 1.0, &c[i]);
    }
    norm(&acc) * scale.factor(s.len(), c.len())
}

/// `‖(1/|S|)Σ_{i∈S}(y_i − ȳ)‖₂`.
pub fn subset_deviation(data: &MeanDataset, subset: &[usize]) -> f64 {
    subset_value(&centered_rows(&data.rows()), subset, SubsetScale::Size)
}

/// Exact maximum over nonempty subsets of size ≤ m by depth-first enumeration.
pub(crate) fn max_subset_exact(c: &[Vec<f64>], m: usize, scale: SubsetScale) -> (f64, Vec<usize>) {
    let n = c.len();
    let d = c[0].len();
    let m = m.min(n);
    let mut best = (0.0, Vec::new());
    let mut stack: Vec<usize> = Vec::with_capacity(m);
    let mut sums = vec![vec![0.0; d]; m + 1];
    fn rec(
        c: &[Vec<f64>],
        m: usize,
        start: usize,
        stack: &mut Vec<usize>,
        sums: &mut Vec<Vec<f64>>,
        scale: SubsetScale,
        best: &mut (f64, Vec<usize>),
    ) {
        let n = c.len();
        for i in start..n {
            let depth = stack.len();
            let (lo, hi) = sums.split_at_mut(depth + 1);
            hi[0].copy_from_slice(&lo[depth]);
            axpy(&mut hi[0], 1.0, &c[i]);
            stack.push(i);
            let v = norm(&hi[0]) * scale.factor(stack.len(), n);
            if v > best.0 {
                *best = (v, stack.clone());
            }
            if stack.len() < m {
                rec(c, m, i + 1, stack, sums, scale, best);
            }
            stack.pop();
        }
    }
    if m > 0 {
        rec(c, m, 0, &mut stack, &mut sums, scale, &mut best);
    }
    best
}

/// Indices sorted by projection descending, ties by lowest index.
fn order_by_projection(c: &[Vec<f64>], u: &[f64]) -> Vec<usize> {
    let p: Vec<f64> = c.iter().map(|x| dot(x, u)).collect();
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Best prefix of the projection order over sizes 1..=m.
fn best_prefix(c: &[Vec<f64>], u: &[f64], m: usize, scale: SubsetScale) -> (f64, Vec<usize>, Vec<f64>) {
    let order = order_by_projection(c, u);
    let mut acc = vec![0.0; c[0].len()];
    let mut best = (f64::NEG_INFINITY, 0usize, acc.clone());
    for (k, &i) in order.iter().take(m).enumerate() {
        axpy(&mut acc, 1.0, &c[i]);
        let v = norm(&acc) * scale.factor(k + 1, c.len());
        if v > best.0 {
            best = (v, k + 1, acc.clone());
        }
    }
    let mut s: Vec<usize> = order[..best.1].to_vec();
    s.sort_unstable();
    (best.0, s, best.2)
}

fn top_k_along(c: &[Vec<f64>], u: &[f64], k: usize) -> Vec<usize> {
    let mut s: Vec<usize> = order_by_projection(c, u)[..k].to_vec();
    s.sort_unstable();
    s
}

/// Swap local search at fixed size; first improvement, lowest indices first.
fn swap_refine(c: &[Vec<f64>], s: &mut [usize], scale: SubsetScale) -> f64 {
    let n = c.len();
    let mut cur = subset_value(c, s, scale);
    for _ in 0..4 * n {
        let mut improved = false;
        'outer: for a in 0..s.len() {
            for b in 0..n {
                if s.contains(&b) {
                    continue;
                }
                let old = s[a];
                s[a] = b;
                let v = subset_value(c, s, scale);
                if v > cur + 1e-15 {
                    cur = v;
                    s.sort_unstable();
                    improved = true;
                    break 'outer;
                }
                s[a] = old;
            }
        }
        if !improved {
            break;
        }
    }
    cur
}

/// Lower bound on the subset maximum by alternating direction search, with
/// per-size swap refinement on small inputs.
pub(crate) fn max_subset_heuristic(c: &[Vec<f64>], m: usize, scale: SubsetScale) -> (f64, Vec<usize>) {
    let n = c.len();
    let d = c[0].len();
    let m = m.min(n);
    if m == 0 {
        return (0.0, Vec::new());
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let cov = {
        let mut g = Matrix::zeros(d, d);
        for x in c {
            for i in 0..d {
                for j in 0..d {
                    g[(i, j)] += x[i] * x[j];
                }
            }
        }
        SymMatrix::new(g).ok()
    };
    if let Some(cov) = cov {
        if let Ok(e) = cov.eig() {
            for k in 0..d.min(3) {
                starts.push(e.vector(k));
            }
        }
    }
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        starts.push(e);
    }
    if n <= 64 {
        for x in c {
            let r = norm(x);
            if r > 0.0 {
                starts.push(scaled(x, 1.0 / r));
            }
        }
    }
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(2 * starts.len());
    for s in starts {
        all.push(scaled(&s, -1.0));
        all.push(s);
    }

    let mut best = (0.0, Vec::new());
    for u0 in &all {
        let mut u = u0.clone();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..50 {
            let (v, s, sum) = best_prefix(c, &u, m, scale);
            if v > best.0 {
                best = (v, s.clone());
            }
            let r = norm(&sum);
            if r == 0.0 || v <= last + 1e-15 {
                break;
            }
            last = v;
            u = scaled(&sum, 1.0 / r);
        }
    }

    if n <= 64 {
        for k in 1..=m {
            let mut size_best = (f64::NEG_INFINITY, Vec::new());
            for u0 in &all {
                let mut u = u0.clone();
                let mut prev: Vec<usize> = Vec::new();
                for _ in 0..50 {
                    let s = top_k_along(c, &u, k);
                    if s == prev {
                        break;
                    }
                    let mut sum = vec![0.0; d];
                    for &i in &s {
                        axpy(&mut sum, 1.0, &c[i]);
                    }
                    let v = norm(&sum) * scale.factor(k, n);
                    if v > size_best.0 {
                        size_best = (v, s.clone());
                    }
                    let r = norm(&sum);
                    if r == 0.0 {
                        break;
                    }
                    u = scaled(&sum, 1.0 / r);
                    prev = s;
                }
            }
            let mut s = size_best.1;
            let v = swap_refine(c, &mut s, scale);
            if v > best.0 {
                best = (v, s);
            }
        }
    }
    best
}

/// Subset maximum, exact when `C(n, m) ≤ budget`.
pub(crate) fn max_subset(c: &[Vec<f64>], m: usize, scale: SubsetScale, budget: u64) -> (f64, Vec<usize>, bool) {
    let n = c.len() as u64;
    if binomial(n, (m as u64).min(n)) <= budget {
        let (v, s) = max_subset_exact(c, m, scale);
        (v, s, true)
    } else {
        let (v, s) = max_subset_heuristic(c, m, scale);
        (v, s, false)
    }
}

fn check_eta(eta: f64, hi: f64, what: &str) -> Result<()> {
    if !(eta >= 0.0 && eta < hi) {
        return Err(Error::invalid(format!("{what} needs 0 ≤ η < {hi:.4}")));
    }
    Ok(())
}

/// Worst `‖(1/|S|)Σ_S(y_i − ȳ)‖` over `|S| ≤ ⌈2ηn⌉`.
pub fn resilience(data: &MeanDataset, eta: f64, exact_budget: u64) -> Result<ResilienceReport> {
    check_eta(eta, 0.5, "resilience")?;
    let m = ceil_tol(2.0 * eta * data.n() as f64);
    let c = centered_rows(&data.rows());
    let (v, s, exact) = max_subset(&c, m, SubsetScale::Size, exact_budget);
    Ok(ResilienceReport { eta, worst_subset: s, worst_deviation: v, exact })
}

/// Exhaustive resilience regardless of cost.
pub fn resilience_exact(data: &MeanDataset, eta: f64) -> Result<ResilienceReport> {
    resilience(data, eta, u64::MAX)
}

/// Heuristic resilience (a lower bound), flagged inexact.
pub fn resilience_heuristic(data: &MeanDataset, eta: f64) -> Result<ResilienceReport> {
    check_eta(eta, 0.5, "resilience")?;
    let m = ceil_tol(2.0 * eta * data.n() as f64);
    let c = centered_rows(&data.rows());
    let (v, s) = max_subset_heuristic(&c, m, SubsetScale::Size);
    Ok(ResilienceReport { eta, worst_subset: s, worst_deviation: v, exact: false })
}

/// Right side of the subset-deviation constraint, `C·√((d + log 1/β)/(ηn) + log 1/η)`.
pub fn feasibility_threshold(eta: f64, d: usize, n: usize, beta: f64) -> f64 {
    let l = effective_dim(d, beta);
    C_FEAS * (l / (eta * n as f64) + (1.0 / eta).ln()).sqrt()
}

fn coordinate_median(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
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

/// Mean of the rows outside `drop`; replacing the dropped rows by this value
/// leaves the overall mean equal to it.
fn kept_mean(rows: &[Vec<f64>], drop: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    let mut cnt = 0usize;
    for (i, r) in rows.iter().enumerate() {
        if !drop.contains(&i) {
            axpy(&mut m, 1.0, r);
            cnt += 1;
        }
    }
    scaled(&m, 1.0 / cnt as f64)
}

fn reconstruction_feasible(rows: &[Vec<f64>], drop: &[usize], m: usize, threshold: f64, budget: u64) -> Option<Vec<f64>> {
    let fill = kept_mean(rows, drop);
    let y: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| if drop.contains(&i) { fill.clone() } else { r.clone() })
        .collect();
    let c = centered_rows(&y);
    let (v, _, _) = max_subset(&c, m, SubsetScale::Fixed(m), budget);
    (v <= threshold).then_some(fill)
}

/// Inefficient estimator: the mean of the first reconstruction, changing at
/// most `⌊ηn⌋` rows, for which `‖Σ_{i∈S}(y_i − ȳ)‖/m ≤` [`feasibility_threshold`]
/// for every `|S| ≤ m = ⌈2ηn⌉`. Candidates are tried by size, then by
/// distance from the coordinate-wise median (largest first).
pub fn robust_mean_statistical(obs: &MeanDataset, eta: f64, beta: f64, budget: u64) -> Result<Vec<f64>> {
    check_eta(eta, 1.0 / 3.0, "statistical robust mean")?;
    if eta == 0.0 {
        return Ok(obs.mean());
    }
    let n = obs.n();
    let rows = obs.rows();
    let max_drop = floor_tol(eta * n as f64);
    let m = ceil_tol(2.0 * eta * n as f64);
    let threshold = feasibility_threshold(eta, obs.dim(), n, beta);
    let med = coordinate_median(&rows);
    let score: Vec<f64> = rows.iter().map(|r| norm(&sub(r, &med))).collect();

    let total: u64 = (0..=max_drop).map(|k| binomial(n as u64, k as u64)).fold(0, u64::saturating_add);
    if total <= MAX_REPLACEMENT_SETS {
        for k in 0..=max_drop {
            let mut cands: Vec<(f64, Vec<usize>)> = Vec::new();
            combinations(n, k, |s| cands.push((s.iter().map(|&i| score[i]).sum(), s.to_vec())));
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            for (_, drop) in cands {
                if let Some(est) = reconstruction_feasible(&rows, &drop, m, threshold, budget) {
                    return Ok(est);
                }
            }
        }
    } else {
        let mut drop: Vec<usize> = Vec::new();
        for _ in 0..=max_drop {
            if let Some(est) = reconstruction_feasible(&rows, &drop, m, threshold, budget) {
                return Ok(est);
            }
            let center = kept_mean(&rows, &drop);
            let next = (0..n)
                .filter(|i| !drop.contains(i))
                .map(|i| (norm(&sub(&rows[i], &center)), i))
                .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
            drop.push(next.1);
        }
    }
    Err(Error::Infeasible(format!(
        "no reconstruction changing at most {max_drop} rows meets the deviation bound {threshold:.4}"
    )))
}

/// Weights standing in for the relaxation's solution, with declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCertificate {
    pub weights: Vec<f64>,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `Σa/n`.
    pub mass: f64,
    pub candidate_mean: Vec<f64>,
    pub eta: f64,
}

/// Declared `(α₀, α₁, α₂)` at the given parameters.
pub fn declared_alphas(eta: f64, d: usize, n: usize, beta: f64) -> (f64, f64, f64) {
    let l = effective_dim(d, beta) / n as f64;
    let a0 = ALPHA_CONST * (l.sqrt() + eta_log(eta));
    let a1 = ALPHA_CONST * ((eta * l).sqrt() + eta_sqrt_log(eta));
    (a0, a1, a0)
}

impl WeightCertificate {
    /// Certificate for given weights with the declared α's and the weighted mean.
    pub fn from_weights(data: &MeanDataset, weights: Vec<f64>, eta: f64, beta: f64) -> Result<Self> {
        if weights.len() != data.n() {
            return Err(Error::DimensionMismatch {
                context: "WeightCertificate::from_weights",
                expected: data.n(),
                found: weights.len(),
            });
        }
        let (alpha0, alpha1, alpha2) = declared_alphas(eta, data.dim(), data.n(), beta);
        let total: f64 = weights.iter().sum();
        let candidate_mean = weighted_mean(data, &weights);
        Ok(WeightCertificate {
            mass: total / data.n() as f64,
            weights,
            alpha0,
            alpha1,
            alpha2,
            candidate_mean,
            eta,
        })
    }

    /// `α₁ + √(8η(α₀+α₂) + 8ηα₁² + 8η²(α₀+α₂))`.
    pub fn conclusion_bound(&self) -> f64 {
        isotropic_conclusion_bound(self.eta, self.alpha0, self.alpha1, self.alpha2)
    }
}

/// Error bound implied by certified moment bounds.
pub fn isotropic_conclusion_bound(eta: f64, a0: f64, a1: f64, a2: f64) -> f64 {
    a1 + (8.0 * eta * (a0 + a2) + 8.0 * eta * a1 * a1 + 8.0 * eta * eta * (a0 + a2)).sqrt()
}

fn weighted_mean(data: &MeanDataset, w: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; data.dim()];
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return m;
    }
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            axpy(&mut m, wi, data.sample(i));
        }
    }
    scaled(&m, 1.0 / total)
}

fn weighted_cov(data: &MeanDataset, w: &[f64], center: &[f64]) -> SymMatrix {
    let d = data.dim();
    let total: f64 = w.iter().sum();
    let mut g = Matrix::zeros(d, d);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let x = sub(data.sample(i), center);
        for a in 0..d {
            let s = wi * x[a];
            for b in a..d {
                g[(a, b)] += s * x[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = g[(a, b)] / total.max(f64::MIN_POSITIVE);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    SymMatrix::new(g).expect("weighted covariance is symmetric by construction")
}

/// Efficient estimator: multiplicative-weights filtering along the top
/// eigenvector of the weighted covariance until it is at most `1 + α₀`.
pub fn robust_mean_filter(obs: &MeanDataset, eta: f64, beta: f64) -> Result<(Vec<f64>, WeightCertificate)> {
    check_eta(eta, 1.0 / 6.0, "filter")?;
    let n = obs.n();
    let mut w = vec![1.0; n];
    if eta == 0.0 {
        let cert = WeightCertificate::from_weights(obs, w, eta, beta)?;
        return Ok((cert.candidate_mean.clone(), cert));
    }
    let (alpha0, _, _) = declared_alphas(eta, obs.dim(), n, beta);
    let budget = 3.0 * eta * n as f64;
    for _ in 0..=n {
        let mu = weighted_mean(obs, &w);
        let cov = weighted_cov(obs, &w, &mu);
        let (lambda, v) = top_eigen(&cov)?;
        if lambda <= 1.0 + alpha0 {
            break;
        }
        let tau: Vec<f64> = (0..n)
            .map(|i| {
                let p = dot(&sub(obs.sample(i), &mu), &v);
                p * p
            })
            .collect();
        let tmax = (0..n).filter(|&i| w[i] > 0.0).map(|i| tau[i]).fold(0.0, f64::max);
        if tmax <= 0.0 {
            break;
        }
        for i in 0..n {
            w[i] *= (1.0 - tau[i] / tmax).max(0.0);
        }
        let removed = n as f64 - w.iter().sum::<f64>();
        if removed > budget {
            return Err(Error::BudgetExceeded { removed, budget });
        }
    }
    let cert = WeightCertificate::from_weights(obs, w, eta, beta)?;
    Ok((cert.candidate_mean.clone(), cert))
}

/// Outcome of re-checking a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub passed: bool,
    pub mass_ok: bool,
    pub observed_alpha0: f64,
    pub observed_alpha1: f64,
    pub observed_alpha2: f64,
}

/// `max |(1/n)Σ b_i p_i|` over `0 ≤ b ≤ a` removing at most `ηn` mass.
fn worst_removal(a: &[f64], p: &[f64], remove: f64, n: usize) -> f64 {
    let base: f64 = a.iter().zip(p).map(|(ai, pi)| ai * pi).sum();
    let mut idx: Vec<usize> = (0..p.len()).filter(|&i| a[i] > 0.0).collect();
    idx.sort_by(|&x, &y| p[x].partial_cmp(&p[y]).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y)));
    let shift = |order: &mut dyn Iterator<Item = usize>, sign: f64| {
        let mut left = remove;
        let mut s = base;
        for i in order {
            if left <= 0.0 || sign * p[i] >= 0.0 {
                break;
            }
            let take = a[i].min(left);
            s -= take * p[i];
            left -= take;
        }
        s
    };
    let hi = shift(&mut idx.iter().copied(), 1.0);
    let lo = shift(&mut idx.iter().rev().copied(), -1.0);
    hi.abs().max(lo.abs()) / n as f64
}

/// Re-verifies a certificate along the top weighted-covariance eigenvector,
/// the direction of the weighted first moment, and `directions` random unit
/// vectors from a fixed stream.
pub fn certify_weights(data: &MeanDataset, cert: &WeightCertificate, directions: usize) -> Result<CertificationReport> {
    let n = data.n();
    let d = data.dim();
    if cert.weights.len() != n || cert.candidate_mean.len() != d {
        return Err(Error::DimensionMismatch {
            context: "certify_weights",
            expected: n,
            found: cert.weights.len(),
        });
    }
    if cert.weights.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
        return Err(Error::invalid("certificate weights must lie in [0, 1]"));
    }
    let a = &cert.weights;
    let mass = a.iter().sum::<f64>() / n as f64;
    let mass_ok = mass >= 1.0 - 2.0 * cert.eta - 1e-12;

    let wm = weighted_mean(data, a);
    let cov = weighted_cov(data, a, &wm);
    let (lambda, top) = top_eigen(&cov)?;
    let observed_alpha0 = (lambda - 1.0).max(0.0);

    let centered: Vec<Vec<f64>> = (0..n).map(|i| sub(data.sample(i), &cert.candidate_mean)).collect();
    let mut dirs = vec![top];
    let mut first = vec![0.0; d];
    for (i, c) in centered.iter().enumerate() {
        axpy(&mut first, a[i], c);
    }
    let r = norm(&first);
    if r > 0.0 {
        dirs.push(scaled(&first, 1.0 / r));
    }
    let mut rng = RngStream::new(CERT_SEED, 0);
    for _ in 0..directions {
        dirs.push(rng.unit_vector(d));
    }
    let remove = cert.eta * n as f64;
    let mut observed_alpha1: f64 = 0.0;
    let mut observed_alpha2: f64 = 0.0;
    for v in &dirs {
        let p: Vec<f64> = centered.iter().map(|c| dot(c, v)).collect();
        let q: Vec<f64> = p.iter().map(|x| x * x - 1.0).collect();
        observed_alpha1 = observed_alpha1.max(worst_removal(a, &p, remove, n));
        observed_alpha2 = observed_alpha2.max(worst_removal(a, &q, remove, n));
    }
    let passed = mass_ok
        && observed_alpha0 <= cert.alpha0
        && observed_alpha1 <= cert.alpha1
        && observed_alpha2 <= cert.alpha2;
    Ok(CertificationReport {
        passed,
        mass_ok,
        observed_alpha0,
        observed_alpha1,
        observed_alpha2,
    })
}

/// A robust estimator of the clean empirical mean at a given corruption level.
pub trait MeanEstimator: Sync {
    fn estimate(&self, data: &MeanDataset, eta: f64) -> Result<Vec<f64>>;
    /// Largest corruption level the estimator accepts.
    fn max_eta(&self) -> f64;
    fn name(&self) -> &'static str;
}

/// [`robust_mean_statistical`] as a [`MeanEstimator`].
#[derive(Debug, Clone, Copy)]
pub struct StatisticalEstimator {
    pub beta: f64,
    pub budget: u64,
}

impl Default for StatisticalEstimator {
    fn default() -> Self {
        StatisticalEstimator { beta: 0.05, budget: DEFAULT_EXACT_BUDGET }
    }
}

impl MeanEstimator for StatisticalEstimator {
    fn estimate(&self, data: &MeanDataset, eta: f64) -> Result<Vec<f64>> {
        robust_mean_statistical(data, eta, self.beta, self.budget)
    }
    fn max_eta(&self) -> f64 {
        1.0 / 3.0
    }
    fn name(&self) -> &'static str {
        "statistical"
    }
}

/// [`robust_mean_filter`] as a [`MeanEstimator`].
#[derive(Debug, Clone, Copy)]
pub struct FilterEstimator {
    pub beta: f64,
}

impl Default for FilterEstimator {
    fn default() -> Self {
        FilterEstimator { beta: 0.05 }
    }
}

impl MeanEstimator for FilterEstimator {
    fn estimate(&self, data: &MeanDataset, eta: f64) -> Result<Vec<f64>> {
        robust_mean_filter(data, eta, self.beta).map(|(m, _)| m)
    }
    fn max_eta(&self) -> f64 {
        1.0 / 6.0
    }
    fn name(&self) -> &'static str {
        "filter"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(v: &[f64]) -> MeanDataset {
        MeanDataset::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn resilience_example() {
        let r = resilience(&one_d(&[0.0, 0.0, 0.0, 0.0, 10.0]), 0.2, DEFAULT_EXACT_BUDGET).unwrap();
        assert!(r.exact);
        assert_eq!(r.worst_subset, vec![4]);
        assert!((r.worst_deviation - 8.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_have_zero_resilience() {
        let r = resilience(&one_d(&[1.5; 7]), 0.2, DEFAULT_EXACT_BUDGET).unwrap();
        assert!(r.worst_deviation.abs() < 1e-15);
    }

    #[test]
    fn statistical_eta_zero_is_empirical_mean() {
        let data = one_d(&[1.0, 2.0, 6.0]);
        assert_eq!(robust_mean_statistical(&data, 0.0, 0.05, DEFAULT_EXACT_BUDGET).unwrap(), data.mean());
    }

    #[test]
    fn filter_kills_single_outlier() {
        let mut rng = RngStream::new(4, 0);
        let mut rows: Vec<Vec<f64>> = (0..100).map(|_| rng.normal_vec(3)).collect();
        rows[17] = vec![1e3, 0.0, 0.0];
        let data = MeanDataset::from_rows(&rows).unwrap();
        let (_, cert) = robust_mean_filter(&data, 0.05, 0.05).unwrap();
        assert!(cert.weights[17] < 0.01);
    }

    #[test]
    fn low_mass_certificate_fails() {
        let mut rng = RngStream::new(5, 0);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| rng.normal_vec(2)).collect();
        let data = MeanDataset::from_rows(&rows).unwrap();
        let w: Vec<f64> = (0..50).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        let cert = WeightCertificate::from_weights(&data, w, 0.1, 0.05).unwrap();
        let rep = certify_weights(&data, &cert, 16).unwrap();
        assert!(!rep.mass_ok && !rep.passed);
    }

    #[test]
    fn worst_removal_matches_brute_force() {
        let a = [1.0, 1.0, 0.5, 1.0];
        let p = [2.0, -1.0, 3.0, -4.0];
        // base sum −1.5; dropping mass 1 from the top entries (3 at weight ½, then 2) gives −4
        let v = worst_removal(&a, &p, 1.0, 4);
        assert!((v - 1.0).abs() < 1e-15);
    }
}
