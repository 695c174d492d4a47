//! Hardness instances, estimation-to-distinguishing reductions, and the
//! Hermite and low-degree evaluators behind the lower bounds.
//!
//! Instances keep their hidden directions behind accessors that count
//! reveals; distinguishers only ever receive the sample data.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::model::{MeanDataset, RegressionDataset};
use crate::numerics::{
    distance, hermite_value, ln_binomial, scaled, Matrix, QuadratureRule, RngStream,
};

/// Which law an instance was drawn from, or a distinguisher's guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Planted,
}

/// Default signal multiplier in the regression mixture.
pub const DEFAULT_K: f64 = 20.0;
/// Constant in the overlap moment bound `E|γ|^m ≤ (Cm/d)^{m/2}`.
pub const OVERLAP_C: f64 = 2.0;

fn check_eta_open(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::invalid("hardness instances need 0 < η < 1/2"));
    }
    Ok(())
}

/// Draws from the null or the planted `(η, δ)` Gaussian mixture.
#[derive(Debug)]
pub struct MixtureInstance {
    pub which: Hypothesis,
    pub eta: f64,
    pub delta: f64,
    samples: MeanDataset,
    hidden_v: Option<Vec<f64>>,
    outlier: Vec<bool>,
    reveals: Cell<usize>,
}

impl MixtureInstance {
    pub fn samples(&self) -> &MeanDataset {
        &self.samples
    }

    /// Hidden direction, for evaluation only.
    pub fn reveal_direction(&self) -> Option<&[f64]> {
        self.reveals.set(self.reveals.get() + 1);
        self.hidden_v.as_deref()
    }

    /// Which samples came from the `η`-weight component, for evaluation only.
    pub fn reveal_components(&self) -> &[bool] {
        self.reveals.set(self.reveals.get() + 1);
        &self.outlier
    }

    /// Number of times hidden fields were read.
    pub fn reveal_count(&self) -> usize {
        self.reveals.get()
    }
}

/// Null: `N(0, I)`. Planted: `(1−η)N(−ηδv, I) + η N((1−η)δv, I)` with `v`
/// uniform on the sphere; the component is drawn per sample.
pub fn gen_mixture(
    eta: f64,
    delta: f64,
    n: usize,
    d: usize,
    which: Hypothesis,
    rng: &mut RngStream,
) -> Result<MixtureInstance> {
    check_eta_open(eta)?;
    if n == 0 || d == 0 {
        return Err(Error::invalid("gen_mixture needs n, d ≥ 1"));
    }
    let (hidden_v, outlier, samples) = match which {
        Hypothesis::Null => {
            let s = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
            (None, vec![false; n], s)
        }
        Hypothesis::Planted => {
            let v = rng.unit_vector(d);
            let mut out = vec![false; n];
            let mut s = Matrix::zeros(n, d);
            for i in 0..n {
                out[i] = rng.bernoulli(eta);
                let shift = if out[i] { (1.0 - eta) * delta } else { -eta * delta };
                for j in 0..d {
                    s[(i, j)] = shift * v[j] + rng.standard_normal();
                }
            }
            (Some(v), out, s)
        }
    };
    Ok(MixtureInstance {
        which,
        eta,
        delta,
        samples: MeanDataset::new(samples)?,
        hidden_v,
        outlier,
        reveals: Cell::new(0),
    })
}

/// Draws from the null or planted mixture of linear regressions.
#[derive(Debug)]
pub struct MlrInstance {
    pub which: Hypothesis,
    pub eta: f64,
    pub alpha: f64,
    pub k: f64,
    /// `√(1 + K²α²)`.
    pub s: f64,
    /// `−Kα/(ηs²)`.
    pub a: f64,
    samples: RegressionDataset,
    hidden_u: Option<Vec<f64>>,
    b_draws: Vec<bool>,
    reveals: Cell<usize>,
}

impl MlrInstance {
    pub fn samples(&self) -> &RegressionDataset {
        &self.samples
    }

    /// Hidden direction, for evaluation only.
    pub fn reveal_direction(&self) -> Option<&[f64]> {
        self.reveals.set(self.reveals.get() + 1);
        self.hidden_u.as_deref()
    }

    /// Per-sample outlier indicators `B`, for evaluation only.
    pub fn reveal_b(&self) -> &[bool] {
        self.reveals.set(self.reveals.get() + 1);
        &self.b_draws
    }

    pub fn reveal_count(&self) -> usize {
        self.reveals.get()
    }
}

/// Null: `x = g`, `y = s·z`. Planted: `y = Kα⟨g,u⟩ + z`, and with probability
/// `η` the covariate becomes `g + a·y·u`.
pub fn gen_mlr(
    eta: f64,
    alpha: f64,
    k: f64,
    n: usize,
    d: usize,
    which: Hypothesis,
    rng: &mut RngStream,
) -> Result<MlrInstance> {
    check_eta_open(eta)?;
    if !(alpha > 0.0) || alpha * alpha > eta {
        return Err(Error::invalid("gen_mlr needs 0 < α with α² ≤ η"));
    }
    if n == 0 || d == 0 || !(k > 0.0) {
        return Err(Error::invalid("gen_mlr needs n, d ≥ 1 and K > 0"));
    }
    let s = (1.0 + k * k * alpha * alpha).sqrt();
    let a = -k * alpha / (eta * s * s);
    let mut x = Matrix::zeros(d, n);
    let mut y = vec![0.0; n];
    let mut b = vec![false; n];
    let hidden_u = match which {
        Hypothesis::Null => {
            for i in 0..n {
                for j in 0..d {
                    x[(j, i)] = rng.standard_normal();
                }
                y[i] = s * rng.standard_normal();
            }
            None
        }
        Hypothesis::Planted => {
            let u = rng.unit_vector(d);
            for i in 0..n {
                let g = rng.normal_vec(d);
                let gu: f64 = g.iter().zip(&u).map(|(p, q)| p * q).sum();
                y[i] = k * alpha * gu + rng.standard_normal();
                b[i] = rng.bernoulli(eta);
                for j in 0..d {
                    x[(j, i)] = g[j] + if b[i] { a * y[i] * u[j] } else { 0.0 };
                }
            }
            Some(u)
        }
    };
    Ok(MlrInstance {
        which,
        eta,
        alpha,
        k,
        s,
        a,
        samples: RegressionDataset::new(x, y)?,
        hidden_u,
        b_draws: b,
        reveals: Cell::new(0),
    })
}

fn phi(y: f64, s: f64) -> f64 {
    (-0.5 * (y / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

fn check_r0(eta: f64, s: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) || !(s >= 1.0) {
        return Err(Error::invalid("r0 needs 0 < η ≤ 1 and s ≥ 1"));
    }
    if 1.0 - 1.0 / s > eta + 1e-15 {
        return Err(Error::invalid(format!(
            "r0 is negative somewhere: 1 − 1/s = {:.4} exceeds η = {eta}",
            1.0 - 1.0 / s
        )));
    }
    Ok(())
}

/// `r₀(y) = (φ_s(y) − (1−η)φ₁(y))/η`.
pub fn r0_density(eta: f64, s: f64, y: f64) -> Result<f64> {
    check_r0(eta, s)?;
    Ok((phi(y, s) - (1.0 - eta) * phi(y, 1.0)) / eta)
}

/// Rejection sampler for `r₀` with proposal `N(0, s²)`.
pub fn r0_sample(eta: f64, s: f64, rng: &mut RngStream) -> Result<f64> {
    check_r0(eta, s)?;
    loop {
        let y = s * rng.standard_normal();
        let accept = 1.0 - (1.0 - eta) * phi(y, 1.0) / phi(y, s);
        if rng.uniform() < accept {
            return Ok(y);
        }
    }
}

/// Guesses null iff the robust estimate is within `α` of the sample mean.
/// An estimator failure counts as a planted verdict.
pub fn mean_distinguisher<F>(samples: &MeanDataset, estimator: F, alpha: f64) -> Hypothesis
where
    F: FnOnce(&MeanDataset) -> Result<Vec<f64>>,
{
    match estimator(samples) {
        Ok(mu) if distance(&mu, &samples.mean()) <= alpha => Hypothesis::Null,
        _ => Hypothesis::Planted,
    }
}

/// `(n + 1/σ²)⁻¹Xy`.
pub fn simplified_posterior(samples: &RegressionDataset, sigma2: f64) -> Vec<f64> {
    scaled(&samples.xy(), 1.0 / (samples.n() as f64 + 1.0 / sigma2))
}

/// Guesses planted iff the estimate is at least `2α` from `(n + 1/σ²)⁻¹Xy`.
/// An estimator failure counts as a planted verdict.
pub fn regression_distinguisher<F>(samples: &RegressionDataset, estimator: F, alpha: f64, sigma2: f64) -> Hypothesis
where
    F: FnOnce(&RegressionDataset) -> Result<Vec<f64>>,
{
    let w_obs = simplified_posterior(samples, sigma2);
    match estimator(samples) {
        Ok(w) if distance(&w, &w_obs) < 2.0 * alpha => Hypothesis::Null,
        _ => Hypothesis::Planted,
    }
}

/// `P(correct | planted) + P(correct | null) − 1` from verdict counts.
pub fn advantage(null_verdicts: &[Hypothesis], planted_verdicts: &[Hypothesis]) -> f64 {
    let rate = |v: &[Hypothesis], h| v.iter().filter(|&&x| x == h).count() as f64 / v.len().max(1) as f64;
    rate(planted_verdicts, Hypothesis::Planted) + rate(null_verdicts, Hypothesis::Null) - 1.0
}

fn ln_factorial(j: usize) -> f64 {
    (1..=j).map(|i| (i as f64).ln()).sum()
}

/// Hermite coefficient `E_A[h_j]` of the hidden univariate mixture,
/// `(1−η)(−ηδ)^j/√j! + η((1−η)δ)^j/√j!`.
pub fn hermite_moment_mixture(eta: f64, delta: f64, j: usize) -> Result<f64> {
    if j > 32 {
        return Err(Error::invalid("hermite_moment_mixture supports j ≤ 32"));
    }
    let inv = (-0.5 * ln_factorial(j)).exp();
    Ok(((1.0 - eta) * (-eta * delta).powi(j as i32) + eta * ((1.0 - eta) * delta).powi(j as i32)) * inv)
}

/// `ψ_k(y) = θ^k((1−η)h_k(y) + η h_k((1 − 1/η)y))`.
pub fn psi_value(k: usize, theta: f64, eta: f64, y: f64) -> f64 {
    theta.powi(k as i32) * ((1.0 - eta) * hermite_value(k, y) + eta * hermite_value(k, (1.0 - 1.0 / eta) * y))
}

/// `a_k = ‖ψ_k‖²` and whether the closed-form envelope replaced quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiNorm {
    pub value: f64,
    pub surrogate: bool,
}

/// `2θ^{2k}(1 + 2η²(4(1 − 1/η)²)^k)`.
pub fn psi_envelope(k: usize, theta: f64, eta: f64) -> f64 {
    let c2 = (1.0 - 1.0 / eta).powi(2);
    2.0 * theta.powi(2 * k as i32) * (1.0 + 2.0 * eta * eta * (4.0 * c2).powi(k as i32))
}

/// `‖ψ_k‖²` under `N(0,1)` by Gauss–Hermite quadrature; falls back to
/// [`psi_envelope`] if the quadrature overflows.
pub fn psi_norm(k: usize, theta: f64, eta: f64) -> Result<PsiNorm> {
    if k > 24 {
        return Err(Error::invalid("psi_norm supports k ≤ 24"));
    }
    check_eta_open(eta)?;
    let rule = QuadratureRule::standard();
    let v = rule.expect(|y| psi_value(k, theta, eta, y).powi(2));
    if v.is_finite() {
        Ok(PsiNorm { value: v, surrogate: false })
    } else {
        Ok(PsiNorm { value: psi_envelope(k, theta, eta), surrogate: true })
    }
}

/// `E[h_k(cY)²]` for `Y ∼ N(0,1)` by quadrature.
pub fn scaled_hermite_second_moment(k: usize, c: f64) -> f64 {
    QuadratureRule::standard().expect(|y| hermite_value(k, c * y).powi(2))
}

/// Which hidden problem an advantage query refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LdlrMode {
    /// Gaussian mixture with separation `delta`.
    Mean { delta: f64 },
    /// Mixture of linear regressions with signal `alpha` and multiplier `k`.
    Regression { alpha: f64, k: f64 },
}

/// A degree-D advantage query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdlrQuery {
    pub n: usize,
    pub d: usize,
    pub degree: usize,
    pub eta: f64,
    pub mode: LdlrMode,
}

/// Upper bound on `Adv²_{≤D}` with evaluation metadata.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AdvantageReport {
    pub bound: f64,
    /// Largest total hidden degree kept in the sum.
    pub truncation: usize,
    pub surrogate_used: bool,
    pub caveat: Option<String>,
}

/// `(Cm/d)^{m/2}`.
pub fn overlap_moment_bound(m: usize, d: usize) -> f64 {
    (OVERLAP_C * m as f64 / d as f64).powf(m as f64 / 2.0)
}

/// Evaluates `1 + Σ_ℓ C(n,ℓ) Σ_{k₁+…+k_ℓ ≤ K, k_j ≥ 2} Π a_{k_j} E|γ|^{Σk}`.
///
/// Regression uses `a_k = ‖ψ_k‖²` and `K = ⌊D/2⌋`, since each term has total
/// degree `2k`. The mean problem uses squared mixture Hermite coefficients,
/// whose terms have degree `k`, so there `K = D`.
pub fn advantage_bound(query: &LdlrQuery) -> Result<AdvantageReport> {
    if query.degree > 24 {
        return Err(Error::invalid("advantage_bound supports D ≤ 24"));
    }
    if query.d == 0 {
        return Err(Error::invalid("advantage_bound needs d ≥ 1"));
    }
    check_eta_open(query.eta)?;
    let (kmax, coeffs, surrogate_used, caveat) = match query.mode {
        LdlrMode::Regression { alpha, k } => {
            if !(alpha > 0.0 && k > 0.0) {
                return Err(Error::invalid("regression advantage needs α, K > 0"));
            }
            let s = (1.0 + k * k * alpha * alpha).sqrt();
            let theta = k * alpha / s;
            let kmax = query.degree / 2;
            let mut a = vec![0.0; kmax + 1];
            let mut sur = false;
            for (j, slot) in a.iter_mut().enumerate().skip(2) {
                let p = psi_norm(j, theta, query.eta)?;
                sur |= p.surrogate;
                *slot = p.value;
            }
            (kmax, a, sur, None)
        }
        LdlrMode::Mean { delta } => {
            if !(delta > 0.0) {
                return Err(Error::invalid("mean advantage needs δ > 0"));
            }
            let kmax = query.degree;
            let mut a = vec![0.0; kmax + 1];
            for (j, slot) in a.iter_mut().enumerate().skip(2) {
                *slot = hermite_moment_mixture(query.eta, delta, j)?.powi(2);
            }
            let note = "bound omits polynomial-in-D factors of the general low-degree estimate".to_string();
            (kmax, a, false, Some(note))
        }
    };
    if query.n == 0 || kmax < 2 {
        return Ok(AdvantageReport { bound: 1.0, truncation: kmax, surrogate_used, caveat });
    }
    // comp[l][m]: sum over compositions of m into l parts ≥ 2 of the product of coefficients
    let lmax = kmax / 2;
    let mut comp = vec![vec![0.0; kmax + 1]; lmax + 1];
    comp[0][0] = 1.0;
    for l in 1..=lmax {
        for m in 2 * l..=kmax {
            comp[l][m] = (2..=m - 2 * (l - 1)).map(|k| coeffs[k] * comp[l - 1][m - k]).sum();
        }
    }
    let mut total = 1.0;
    for (l, row) in comp.iter().enumerate().skip(1) {
        if l > query.n {
            break;
        }
        let binom = ln_binomial(query.n as u64, l as u64).exp();
        let inner: f64 = (2 * l..=kmax).map(|m| row[m] * overlap_moment_bound(m, query.d)).sum();
        total += binom * inner;
    }
    Ok(AdvantageReport { bound: total, truncation: kmax, surrogate_used, caveat })
}
