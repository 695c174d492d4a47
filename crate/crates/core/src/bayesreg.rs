//! Robust and private Bayesian linear regression.
//!
//! Each constraint system is realized by alternating trimming: fit on the
//! kept set, evaluate the certificates, drop the worst violators of the
//! first failing certificate and repeat, within a total budget of `3ηn`
//! points. Dropped points contribute nothing to `Xy` sums.

use serde::Serialize;

use crate::concentration::{short_flat_decompose, ShortFlatBounds, CHI};
pub use crate::concentration::ShortFlatDecomposition;
use crate::error::{Error, Result};
use crate::model::{solve_normal_equations, RegressionDataset};
use crate::numerics::{axpy, ceil_tol, dot, floor_tol, scaled, sub, Matrix, RngStream, SymMatrix};
use crate::privacy::{check_private_args, exp_mechanism_grid, RateFunction, RateKind, ScoreField, ScoreParams, ScorePath, DEFAULT_GRID_BUDGET};
use crate::robustmean::{centered_rows, effective_dim, eta_log, max_subset, SubsetScale, DEFAULT_EXACT_BUDGET};

/// Constant of the small-set resilience bound behind the completion radius.
pub const C_RES: f64 = 3.0;

/// Which estimator produced a [`RegressionEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Prior,
    Rough,
    Refined,
    Posterior,
    TwoStage,
    Critical,
}

/// The vector a short-flat certificate decomposes, restricted to kept points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertKind {
    /// `y_i − ⟨x_i, w⟩`.
    Residual { w: Vec<f64> },
    /// `⟨x_i, u⟩`.
    Projection { u: Vec<f64> },
}

impl CertKind {
    fn values(&self, obs: &RegressionDataset, kept: &[usize]) -> Vec<f64> {
        match self {
            CertKind::Residual { w } => kept.iter().map(|&i| obs.y()[i] - column_dot(obs.x(), i, w)).collect(),
            CertKind::Projection { u } => kept.iter().map(|&i| column_dot(obs.x(), i, u)).collect(),
        }
    }
}

/// A short-flat certificate with the bounds it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertKind,
    pub decomposition: ShortFlatDecomposition,
    pub z1_bound: f64,
    /// `∞` when only the sparse part is constrained.
    pub z2_inf_bound: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.decomposition.norm_z1_sq <= self.z1_bound && self.decomposition.norm_z2_inf_sq <= self.z2_inf_bound
    }
}

/// Output of the robust regression estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionEstimate {
    pub w_hat: Vec<f64>,
    pub stage: Stage,
    pub kept_mask: Vec<bool>,
    pub certificates: Vec<Certificate>,
    /// `‖(1/n)Σ_{kept} x_i x_iᵀ − I‖`.
    pub cov_deviation: f64,
}

impl RegressionEstimate {
    pub fn kept_count(&self) -> usize {
        self.kept_mask.iter().filter(|&&k| k).count()
    }

    /// Recomputes every certificate from the kept observations.
    pub fn verify(&self, obs: &RegressionDataset) -> bool {
        if self.kept_mask.len() != obs.n() {
            return false;
        }
        let kept = kept_indices(&self.kept_mask);
        let cov_ok = match kept_cov_deviation(obs.x(), &kept) {
            Ok(v) => (v - self.cov_deviation).abs() <= 1e-10 * v.max(1.0),
            Err(_) => false,
        };
        cov_ok
            && self.certificates.iter().all(|c| {
                let v = c.kind.values(obs, &kept);
                c.holds() && c.decomposition.verify(&v)
            })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn column_dot(x: &Matrix, i: usize, w: &[f64]) -> f64 {
    (0..x.rows()).map(|r| x[(r, i)] * w[r]).sum()
}

fn kept_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect()
}

fn kept_gram(x: &Matrix, kept: &[usize]) -> SymMatrix {
    let d = x.rows();
    let mut g = Matrix::zeros(d, d);
    for &i in kept {
        for a in 0..d {
            let xa = x[(a, i)];
            for b in a..d {
                g[(a, b)] += xa * x[(b, i)];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    SymMatrix::new(g).expect("symmetric by construction")
}

fn kept_xv(x: &Matrix, kept: &[usize], v: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; x.rows()];
    for &i in kept {
        let vi = v(i);
        for (r, o) in out.iter_mut().enumerate() {
            *o += x[(r, i)] * vi;
        }
    }
    out
}

fn kept_cov_deviation(x: &Matrix, kept: &[usize]) -> Result<f64> {
    kept_gram(x, kept).scale(1.0 / x.cols() as f64).add_diagonal(-1.0).op_norm()
}

fn kept_ols(obs: &RegressionDataset, kept: &[usize]) -> Result<Vec<f64>> {
    let g = kept_gram(obs.x(), kept);
    solve_normal_equations(&g, &kept_xv(obs.x(), kept, |i| obs.y()[i]))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0 / 6.0).contains(&eta) {
        return Err(Error::invalid("regression estimators need 0 ≤ η < 1/6"));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("β must lie in (0, 1)"));
    }
    Ok(())
}

/// Short-flat check of a variance-`scale` vector.
enum Check {
    Full { scale: f64 },
    SparseOnly { scale: f64 },
}

/// Shared trimming state.
struct Trimmer<'a> {
    obs: &'a RegressionDataset,
    eta: f64,
    beta: f64,
    kept: Vec<bool>,
    dropped: usize,
    budget: usize,
    step: usize,
}

impl<'a> Trimmer<'a> {
    fn new(obs: &'a RegressionDataset, eta: f64, beta: f64) -> Self {
        let n = obs.n() as f64;
        Trimmer {
            obs,
            eta,
            beta,
            kept: vec![true; obs.n()],
            dropped: 0,
            budget: floor_tol(3.0 * eta * n),
            step: ceil_tol(eta * n / 4.0).max(1),
        }
    }

    fn kept(&self) -> Vec<usize> {
        kept_indices(&self.kept)
    }

    /// Drops up to `step` kept points with the largest `key`, ties by lowest index.
    fn drop_worst(&mut self, kept: &[usize], key: &[f64]) -> Result<()> {
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
        for &k in order.iter().take(self.step) {
            self.kept[kept[k]] = false;
            self.dropped += 1;
        }
        if self.dropped > self.budget {
            return Err(Error::BudgetExceeded { removed: self.dropped as f64, budget: self.budget as f64 });
        }
        Ok(())
    }

    fn cov_threshold(&self) -> f64 {
        let n = self.obs.n();
        CHI * (effective_dim(self.obs.dim(), self.beta) / n as f64).sqrt() + self.dropped as f64 / n as f64
    }

    /// Covariance certificate; on failure drops the highest-leverage points.
    fn cov_check(&mut self) -> Result<Option<f64>> {
        let kept = self.kept();
        let x = self.obs.x();
        let dev = kept_cov_deviation(x, &kept)?;
        if dev <= self.cov_threshold() {
            return Ok(Some(dev));
        }
        let g = kept_gram(x, &kept);
        let lev: Vec<f64> = kept
            .iter()
            .map(|&i| {
                let xi = x.column(i);
                match g.solve_spd(&xi) {
                    Ok(s) => dot(&xi, &s),
                    Err(_) => dot(&xi, &xi),
                }
            })
            .collect();
        self.drop_worst(&kept, &lev)?;
        Ok(None)
    }

    /// Short-flat certificate of `kind`; on failure drops the largest magnitudes.
    fn short_flat(&mut self, kind: CertKind, check: Check) -> Result<Option<Certificate>> {
        let kept = self.kept();
        let v = kind.values(self.obs, &kept);
        let dec = short_flat_decompose(&v, self.eta)?;
        let b = ShortFlatBounds::gaussian(kept.len(), self.eta, self.beta);
        let (z1_bound, z2_inf_bound) = match check {
            Check::Full { scale } => (b.z1_sq * scale, b.z2_inf_sq * scale),
            Check::SparseOnly { scale } => (b.z1_sq * scale, f64::INFINITY),
        };
        let cert = Certificate { kind, decomposition: dec, z1_bound, z2_inf_bound };
        if cert.holds() {
            return Ok(Some(cert));
        }
        let mag: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        self.drop_worst(&kept, &mag)?;
        Ok(None)
    }
}

fn untrimmed(obs: &RegressionDataset, w_hat: Vec<f64>, stage: Stage) -> Result<RegressionEstimate> {
    let kept: Vec<usize> = (0..obs.n()).collect();
    Ok(RegressionEstimate {
        w_hat,
        stage,
        kept_mask: vec![true; obs.n()],
        certificates: Vec::new(),
        cov_deviation: kept_cov_deviation(obs.x(), &kept)?,
    })
}

/// Robust estimate of the simplified posterior statistic `(1/σ² + n)⁻¹Xy`
/// in the critical regime `0.1/n ≤ σ² ≤ 10/n`.
pub fn critical_posterior_estimate(obs: &RegressionDataset, sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    check_beta(beta)?;
    let n = obs.n() as f64;
    if !(sigma2 >= 0.1 / n && sigma2 <= 10.0 / n) {
        return Err(Error::invalid("critical estimator needs 0.1/n ≤ σ² ≤ 10/n"));
    }
    let shrink = 1.0 / (1.0 / sigma2 + n);
    if eta == 0.0 {
        return untrimmed(obs, scaled(&obs.xy(), shrink), Stage::Critical);
    }
    let d = obs.dim();
    let mut t = Trimmer::new(obs, eta, beta);
    loop {
        let Some(cov) = t.cov_check()? else { continue };
        let kind = CertKind::Residual { w: vec![0.0; d] };
        let Some(cert) = t.short_flat(kind, Check::Full { scale: 1.0 + sigma2 * d as f64 })? else { continue };
        let kept = t.kept();
        let w_hat = scaled(&kept_xv(obs.x(), &kept, |i| obs.y()[i]), shrink);
        return Ok(RegressionEstimate {
            w_hat,
            stage: Stage::Critical,
            kept_mask: t.kept,
            certificates: vec![cert],
            cov_deviation: cov,
        });
    }
}

/// Constant-error estimate by alternating trimmed least squares.
pub fn rough_regression(obs: &RegressionDataset, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    check_beta(beta)?;
    if eta == 0.0 {
        return untrimmed(obs, kept_ols(obs, &(0..obs.n()).collect::<Vec<_>>())?, Stage::Rough);
    }
    let l = effective_dim(obs.dim(), beta);
    if (obs.n() as f64) < l / eta {
        return Err(Error::invalid("rough regression needs n ≥ (d + log 1/β)/η"));
    }
    let mut t = Trimmer::new(obs, eta, beta);
    loop {
        let Some(cov) = t.cov_check()? else { continue };
        let w = kept_ols(obs, &t.kept())?;
        let Some(cert) = t.short_flat(CertKind::Residual { w: w.clone() }, Check::Full { scale: 1.0 })? else { continue };
        return Ok(RegressionEstimate {
            w_hat: w,
            stage: Stage::Rough,
            kept_mask: t.kept,
            certificates: vec![cert],
            cov_deviation: cov,
        });
    }
}

/// Refinement from a constant-error start: least squares on a kept set
/// certified by the residual and by the shift `Xᵀ(w − w_init)`.
pub fn refine_regression(obs: &RegressionDataset, w_init: &[f64], eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    check_beta(beta)?;
    if w_init.len() != obs.dim() {
        return Err(Error::DimensionMismatch { context: "w_init", expected: obs.dim(), found: w_init.len() });
    }
    if eta == 0.0 {
        return untrimmed(obs, kept_ols(obs, &(0..obs.n()).collect::<Vec<_>>())?, Stage::Refined);
    }
    let mut t = Trimmer::new(obs, eta, beta);
    loop {
        let Some(cov) = t.cov_check()? else { continue };
        let w = kept_ols(obs, &t.kept())?;
        let Some(res) = t.short_flat(CertKind::Residual { w: w.clone() }, Check::Full { scale: 1.0 })? else { continue };
        let u = sub(&w, w_init);
        let shift = dot(&u, &u);
        let Some(b) = t.short_flat(CertKind::Projection { u }, Check::SparseOnly { scale: shift })? else { continue };
        return Ok(RegressionEstimate {
            w_hat: w,
            stage: Stage::Refined,
            kept_mask: t.kept,
            certificates: vec![res, b],
            cov_deviation: cov,
        });
    }
}

/// `(1 + 1/(nσ²))⁻¹w₁ + (n + 1/σ²)⁻¹X_K(y_K − X_Kᵀw₁)` on a certified kept set.
pub fn posterior_refine(obs: &RegressionDataset, w1: &[f64], sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    check_beta(beta)?;
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("posterior refinement needs σ² > 0"));
    }
    if w1.len() != obs.dim() {
        return Err(Error::DimensionMismatch { context: "w1", expected: obs.dim(), found: w1.len() });
    }
    let n = obs.n() as f64;
    let assemble = |kept: &[usize]| {
        let r = kept_xv(obs.x(), kept, |i| obs.y()[i] - column_dot(obs.x(), i, w1));
        let mut w = scaled(w1, 1.0 / (1.0 + 1.0 / (n * sigma2)));
        axpy(&mut w, 1.0 / (n + 1.0 / sigma2), &r);
        w
    };
    if eta == 0.0 {
        let all: Vec<usize> = (0..obs.n()).collect();
        return untrimmed(obs, assemble(&all), Stage::Posterior);
    }
    let mut t = Trimmer::new(obs, eta, beta);
    loop {
        let Some(cov) = t.cov_check()? else { continue };
        let Some(res) = t.short_flat(CertKind::Residual { w: w1.to_vec() }, Check::Full { scale: 1.0 })? else { continue };
        let w_hat = assemble(&t.kept());
        return Ok(RegressionEstimate {
            w_hat,
            stage: Stage::Posterior,
            kept_mask: t.kept,
            certificates: vec![res],
            cov_deviation: cov,
        });
    }
}

/// Rough, refine and posterior stages in sequence on the same data. The
/// rough stage runs at `max(η, (d + log 1/β)/n)` so its sample condition
/// holds whenever `η > 0`.
pub fn weak_prior_pipeline(obs: &RegressionDataset, sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    let rough_eta = if eta == 0.0 { 0.0 } else { eta.max(effective_dim(obs.dim(), beta) / obs.n() as f64) };
    if rough_eta >= 1.0 / 6.0 {
        return Err(Error::invalid("too few samples for the weak-prior pipeline"));
    }
    let rough = rough_regression(obs, rough_eta, beta)?;
    let refined = refine_regression(obs, &rough.w_hat, eta, beta)?;
    posterior_refine(obs, &refined.w_hat, sigma2, eta, beta)
}

/// Prior-strength regimes relative to `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `σ² < 0.1/n`: the prior mean 0 is already accurate.
    Prior,
    Critical,
    Weak,
}

pub fn regime(sigma2: f64, n: usize) -> Regime {
    let n = n as f64;
    if sigma2 < 0.1 / n {
        Regime::Prior
    } else if sigma2 <= 10.0 / n {
        Regime::Critical
    } else {
        Regime::Weak
    }
}

/// Dispatches on [`regime`].
pub fn robust_posterior(obs: &RegressionDataset, sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    match regime(sigma2, obs.n()) {
        Regime::Prior => {
            check_eta(eta)?;
            untrimmed(obs, vec![0.0; obs.dim()], Stage::Prior)
        }
        Regime::Critical => critical_posterior_estimate(obs, sigma2, eta, beta),
        Regime::Weak => weak_prior_pipeline(obs, sigma2, eta, beta),
    }
}

/// Result of mean estimation by replacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    pub mean: Vec<f64>,
    /// Replaced indices, ascending.
    pub replaced: Vec<usize>,
    /// Resilience of the replaced sequence.
    pub resilience: f64,
    /// Whether the resilience was computed by exhaustive search.
    pub exact: bool,
}

/// `max_{|S| ≤ ⌊2ηn⌋} ‖Σ_{i∈S}(v_i − v̄)‖/(n − |S|)`, i.e. the largest
/// distance between `v̄` and the mean of a `(1 − 2η)` fraction.
pub fn completion_resilience(vs: &[Vec<f64>], eta: f64, budget: u64) -> Result<(f64, Vec<usize>, bool)> {
    check_vectors(vs)?;
    let m = floor_tol(2.0 * eta * vs.len() as f64).min(vs.len() - 1);
    Ok(max_subset(&centered_rows(vs), m, SubsetScale::Complement, budget))
}

fn check_vectors(vs: &[Vec<f64>]) -> Result<()> {
    if vs.is_empty() || vs[0].is_empty() {
        return Err(Error::invalid("need at least one nonempty vector"));
    }
    if let Some(v) = vs.iter().find(|v| v.len() != vs[0].len()) {
        return Err(Error::DimensionMismatch { context: "vector sequence", expected: vs[0].len(), found: v.len() });
    }
    Ok(())
}

/// Replaces at most `⌊ηn⌋` vectors by the mean of the others until the
/// resilience is at most `τ`, and returns the resulting mean. When the clean
/// sequence is also `τ`-resilient the output is within `2τ` of its mean.
pub fn completion_mean(vs: &[Vec<f64>], eta: f64, tau: f64) -> Result<Completion> {
    check_vectors(vs)?;
    if !(tau > 0.0) {
        return Err(Error::invalid("completion needs τ > 0"));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::invalid("completion needs 0 ≤ η < 1/2"));
    }
    let n = vs.len();
    let cap = floor_tol(eta * n as f64);
    let step = (floor_tol(eta * n as f64 / 16.0)).max(1);
    let mut cur = vs.to_vec();
    let mut replaced = vec![false; n];
    let mut count = 0;
    loop {
        let c = centered_rows(&cur);
        let m = floor_tol(2.0 * eta * n as f64).min(n - 1);
        let (value, worst, exact) = max_subset(&c, m, SubsetScale::Complement, DEFAULT_EXACT_BUDGET);
        if value <= tau {
            let mean = scaled(&cur.iter().fold(vec![0.0; vs[0].len()], |mut a, v| {
                axpy(&mut a, 1.0, v);
                a
            }), 1.0 / n as f64);
            return Ok(Completion {
                mean,
                replaced: kept_indices(&replaced),
                resilience: value,
                exact,
            });
        }
        let mut dir = vec![0.0; c[0].len()];
        for &i in &worst {
            axpy(&mut dir, 1.0, &c[i]);
        }
        let mut cand: Vec<usize> = worst.into_iter().filter(|&i| !replaced[i]).collect();
        cand.sort_by(|&a, &b| dot(&c[b], &dir).total_cmp(&dot(&c[a], &dir)).then(a.cmp(&b)));
        cand.truncate(step.min(cap.saturating_sub(count)));
        if cand.is_empty() {
            return Err(Error::Infeasible(format!(
                "no replacement of at most {cap} vectors reaches resilience {tau:.4} (current {value:.4})"
            )));
        }
        for &i in &cand {
            replaced[i] = true;
            count += 1;
        }
        let keep: Vec<&Vec<f64>> = (0..n).filter(|&i| !replaced[i]).map(|i| &vs[i]).collect();
        let mut fill = vec![0.0; vs[0].len()];
        for v in &keep {
            axpy(&mut fill, 1.0, v);
        }
        let fill = scaled(&fill, 1.0 / keep.len() as f64);
        for i in 0..n {
            if replaced[i] {
                cur[i] = fill.clone();
            }
        }
    }
}

/// Completion radius `τ = 2ηδ₀ + C_RES(1 + δ₀)(√(η log 1/η)·√(L/n) + η log 1/η)`
/// with `δ₀ = 3(√(L/n) + η)` and `L = d + log 1/β`.
pub fn completion_tau(eta: f64, d: usize, n: usize, beta: f64) -> f64 {
    let l = (effective_dim(d, beta) / n as f64).sqrt();
    let delta0 = 3.0 * (l + eta);
    let el = eta_log(eta);
    2.0 * eta * delta0 + C_RES * (1.0 + delta0) * (el.sqrt() * l + el)
}

/// Two-stage estimator: a robust least-squares start `w̃`, then the robust
/// mean `ĝ` of `x_i(y_i − ⟨x_i, w̃⟩)` and `ŵ = w̃ + (ĝ − λw̃)/(1 + λ)` with
/// `λ = 1/(nσ²)`.
pub fn two_stage_posterior(obs: &RegressionDataset, sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
    check_eta(eta)?;
    check_beta(beta)?;
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("two-stage estimator needs σ² > 0"));
    }
    let rough_eta = if eta == 0.0 { 0.0 } else { eta.max(effective_dim(obs.dim(), beta) / obs.n() as f64) };
    if rough_eta >= 1.0 / 6.0 {
        return Err(Error::invalid("too few samples for the two-stage estimator"));
    }
    let rough = rough_regression(obs, rough_eta, beta)?;
    let stage1 = refine_regression(obs, &rough.w_hat, eta, beta)?;
    let w_tilde = stage1.w_hat.clone();
    let vs: Vec<Vec<f64>> = (0..obs.n())
        .map(|i| scaled(&obs.covariate(i), obs.y()[i] - column_dot(obs.x(), i, &w_tilde)))
        .collect();
    let tau = completion_tau(eta, obs.dim(), obs.n(), beta);
    let comp = completion_mean(&vs, eta, tau)?;
    let lambda = 1.0 / (obs.n() as f64 * sigma2);
    let mut w_hat = w_tilde.clone();
    let g = sub(&comp.mean, &scaled(&w_tilde, lambda));
    axpy(&mut w_hat, 1.0 / (1.0 + lambda), &g);
    let mut kept_mask = vec![true; obs.n()];
    for &i in &comp.replaced {
        kept_mask[i] = false;
    }
    let kept = kept_indices(&kept_mask);
    Ok(RegressionEstimate {
        w_hat,
        stage: Stage::TwoStage,
        cov_deviation: kept_cov_deviation(obs.x(), &kept)?,
        kept_mask,
        certificates: Vec::new(),
    })
}

/// `u + (A + λI)⁻¹(g(u) − λu)` with `A = XXᵀ/n`, `g(u) = X(y − Xᵀu)/n`;
/// equals the posterior mean for every `u`.
pub fn posterior_identity(obs: &RegressionDataset, sigma2: f64, u: &[f64]) -> Result<Vec<f64>> {
    let n = obs.n() as f64;
    let lambda = 1.0 / (n * sigma2);
    let resid = sub(obs.y(), &obs.predict(u)?);
    let g = scaled(&kept_xv(obs.x(), &(0..obs.n()).collect::<Vec<_>>(), |i| resid[i]), 1.0 / n);
    let a = obs.gram().scale(1.0 / n).add_diagonal(lambda);
    let rhs = sub(&g, &scaled(u, lambda));
    let step = a.solve_spd(&rhs)?;
    Ok(crate::numerics::add(u, &step))
}

/// Robust estimator behind the private regression mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegMode {
    Critical,
    Weak,
    Inefficient,
}

impl RegMode {
    pub fn rate_kind(self) -> RateKind {
        match self {
            RegMode::Critical => RateKind::RegCritical,
            RegMode::Weak | RegMode::Inefficient => RateKind::RegWeak,
        }
    }

    pub fn estimate(self, obs: &RegressionDataset, sigma2: f64, eta: f64, beta: f64) -> Result<RegressionEstimate> {
        match self {
            RegMode::Critical => critical_posterior_estimate(obs, sigma2, eta, beta),
            RegMode::Weak => weak_prior_pipeline(obs, sigma2, eta, beta),
            RegMode::Inefficient => two_stage_posterior(obs, sigma2, eta, beta),
        }
    }
}

/// Public radius `σ(√d + √(2 log 1/β))` of the prior.
pub fn regression_radius(sigma2: f64, d: usize, beta: f64) -> f64 {
    sigma2.sqrt() * ((d as f64).sqrt() + (2.0 * (1.0 / beta).ln()).sqrt())
}

/// Score field of the private regression mechanism.
pub fn regression_score_field(obs: &RegressionDataset, sigma2: f64, epsilon: f64, beta: f64, mode: RegMode) -> Result<ScoreField> {
    let r_ball = regression_radius(sigma2, obs.dim(), beta);
    check_private_args(epsilon, beta, r_ball)?;
    let rate = RateFunction::new(mode.rate_kind(), obs.dim(), obs.n(), beta);
    let params = ScoreParams::regression(rate, epsilon, r_ball);
    let path = ScorePath::build(params, |eta| Ok(mode.estimate(obs, sigma2, eta, beta)?.w_hat));
    ScoreField::from_path(&path, &vec![0.0; obs.dim()], DEFAULT_GRID_BUDGET)
}

/// ε-DP estimate of the regression posterior mean.
pub fn private_regression(
    obs: &RegressionDataset,
    sigma2: f64,
    epsilon: f64,
    beta: f64,
    mode: RegMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let field = regression_score_field(obs, sigma2, epsilon, beta, mode)?;
    exp_mechanism_grid(&field, epsilon, rng)
}

/// Squared-error target `C(η log(1/η)·√(L/n) + η² log²(1/η))`.
pub fn regression_error_target(constant: f64, eta: f64, d: usize, n: usize, beta: f64) -> f64 {
    let el = eta_log(eta);
    constant * (el * (effective_dim(d, beta) / n as f64).sqrt() + el * el)
}
