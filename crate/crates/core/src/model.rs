//! Gaussian-prior mean and regression models, closed-form posterior means,
//! instance samplers and the contamination adversaries.

use crate::error::{Error, Result};
use crate::hardness::r0_sample;
use crate::numerics::{
    axpy, dot, floor_tol, norm, scaled, sym_eig, Matrix, RngStream, SymEigen, SymMatrix,
};

/// Prior on the unknown parameter.
#[derive(Debug, Clone)]
pub enum PriorSpec {
    /// `N(0, σ²I)`; `σ² = 0` is the point mass at zero.
    Isotropic { dim: usize, sigma2: f64 },
    /// `N(0, Σ)` with Σ positive semidefinite.
    General(SymMatrix),
    /// Flat prior; the posterior mean is the empirical mean.
    ImproperUniform { dim: usize },
}

impl PriorSpec {
    pub fn isotropic(dim: usize, sigma2: f64) -> Result<Self> {
        if dim == 0 || !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("isotropic prior needs dim ≥ 1 and finite σ² ≥ 0"));
        }
        Ok(PriorSpec::Isotropic { dim, sigma2 })
    }

    pub fn general(sigma: SymMatrix) -> Result<Self> {
        let e = sym_eig(&sigma)?;
        let top = e.values[0].abs().max(1.0);
        if e.values.last().copied().unwrap_or(0.0) < -1e-10 * top {
            return Err(Error::invalid("prior covariance must be positive semidefinite"));
        }
        Ok(PriorSpec::General(sigma))
    }

    pub fn improper(dim: usize) -> Self {
        PriorSpec::ImproperUniform { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Isotropic { dim, .. } | PriorSpec::ImproperUniform { dim } => *dim,
            PriorSpec::General(s) => s.dim(),
        }
    }

    /// Prior covariance; `None` for the improper prior.
    pub fn covariance(&self) -> Option<SymMatrix> {
        match self {
            PriorSpec::Isotropic { dim, sigma2 } => Some(SymMatrix::scaled_identity(*dim, *sigma2)),
            PriorSpec::General(s) => Some(s.clone()),
            PriorSpec::ImproperUniform { .. } => None,
        }
    }
}

/// The posterior map `Λ = (I + Σ⁻¹/n)⁻¹`.
#[derive(Debug, Clone)]
pub struct ShrinkageMatrix {
    lambda: SymMatrix,
    eigen: SymEigen,
    n: usize,
}

impl ShrinkageMatrix {
    pub fn lambda(&self) -> &SymMatrix {
        &self.lambda
    }

    /// Eigendecomposition of Λ (shared eigenvectors with Σ).
    pub fn eigen(&self) -> &SymEigen {
        &self.eigen
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.lambda.matvec(v)
    }

    /// `Λ²`, built on the same eigenvectors.
    pub fn squared(&self) -> SymMatrix {
        self.eigen.map(|v| v * v)
    }
}

/// Builds Λ; prior eigenvalue λ maps to `λ/(λ + 1/n)` and kernel directions to 0.
pub fn shrinkage(prior: &PriorSpec, n: usize) -> Result<ShrinkageMatrix> {
    if n == 0 {
        return Err(Error::invalid("shrinkage needs n ≥ 1"));
    }
    let nf = n as f64;
    let (values, vectors) = match prior {
        PriorSpec::Isotropic { dim, sigma2 } => {
            let l = nf * sigma2 / (nf * sigma2 + 1.0);
            (vec![l; *dim], Matrix::identity(*dim))
        }
        PriorSpec::ImproperUniform { dim } => (vec![1.0; *dim], Matrix::identity(*dim)),
        PriorSpec::General(sigma) => {
            let e = sym_eig(sigma)?;
            let tol = 1e-14 * e.values[0].abs().max(f64::MIN_POSITIVE);
            let vals = e
                .values
                .iter()
                .map(|&l| if l > tol { nf * l / (nf * l + 1.0) } else { 0.0 })
                .collect();
            (vals, e.vectors)
        }
    };
    let lambda = SymMatrix::from_eigen(&values, &vectors);
    Ok(ShrinkageMatrix {
        lambda,
        eigen: SymEigen { values, vectors },
        n,
    })
}

/// `n × d` sample matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDataset {
    samples: Matrix,
}

impl MeanDataset {
    pub fn new(samples: Matrix) -> Result<Self> {
        if samples.rows() == 0 || samples.cols() == 0 {
            return Err(Error::invalid("mean dataset needs n ≥ 1 and d ≥ 1"));
        }
        Ok(MeanDataset { samples })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        MeanDataset::new(Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.samples.rows()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.sample(i).to_vec()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for i in 0..self.n() {
            axpy(&mut m, 1.0, self.sample(i));
        }
        scaled(&m, 1.0 / self.n() as f64)
    }

    /// Dataset with row `i` replaced.
    pub fn with_row(&self, i: usize, row: &[f64]) -> Result<Self> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "MeanDataset::with_row",
                expected: self.dim(),
                found: row.len(),
            });
        }
        let mut s = self.samples.clone();
        s.row_mut(i).copy_from_slice(row);
        Ok(MeanDataset { samples: s })
    }

    /// Applies `x ↦ Q·x + c` to every sample.
    pub fn affine(&self, q: &Matrix, c: &[f64]) -> Result<Self> {
        let rows = (0..self.n())
            .map(|i| Ok(crate::numerics::add(&q.matvec(self.sample(i))?, c)))
            .collect::<Result<Vec<_>>>()?;
        MeanDataset::from_rows(&rows)
    }

    pub fn translate(&self, c: &[f64]) -> Result<Self> {
        self.affine(&Matrix::identity(self.dim()), c)
    }
}

/// Regression data: design `X` is `d × n` with samples as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    x: Matrix,
    y: Vec<f64>,
    w_star: Option<Vec<f64>>,
}

impl RegressionDataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.cols() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "RegressionDataset::new",
                expected: x.cols(),
                found: y.len(),
            });
        }
        if x.cols() == 0 || x.rows() == 0 {
            return Err(Error::invalid("regression dataset needs n ≥ 1 and d ≥ 1"));
        }
        Ok(RegressionDataset { x, y, w_star: None })
    }

    pub fn with_truth(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "RegressionDataset::with_truth",
                expected: self.dim(),
                found: w.len(),
            });
        }
        self.w_star = Some(w);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w_star(&self) -> Option<&[f64]> {
        self.w_star.as_deref()
    }

    /// Covariate `x_i` (column `i` of X).
    pub fn covariate(&self, i: usize) -> Vec<f64> {
        self.x.column(i)
    }

    /// `Xy`.
    pub fn xy(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| dot(self.x.row(r), &self.y)).collect()
    }

    /// `XXᵀ`.
    pub fn gram(&self) -> SymMatrix {
        self.x.gram()
    }

    /// `Xᵀw`, the fitted responses.
    pub fn predict(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.x.tr_matvec(w)
    }

    pub fn with_sample(&self, i: usize, xi: &[f64], yi: f64) -> Result<Self> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "RegressionDataset::with_sample",
                expected: self.dim(),
                found: xi.len(),
            });
        }
        let mut out = self.clone();
        out.x.set_column(i, xi);
        out.y[i] = yi;
        Ok(out)
    }

    /// Rotates covariates by `Q` (and the truth, if present).
    pub fn rotate(&self, q: &Matrix) -> Result<Self> {
        let x = q.matmul(&self.x)?;
        let mut out = RegressionDataset::new(x, self.y.clone())?;
        if let Some(w) = &self.w_star {
            out.w_star = Some(q.matvec(w)?);
        }
        Ok(out)
    }
}

/// Observed data with its evaluation-only clean counterpart.
#[derive(Debug, Clone)]
pub struct ContaminatedDataset<D> {
    pub observed: D,
    pub clean: Option<D>,
    /// `true` marks a replaced row.
    pub mask: Vec<bool>,
    pub eta: f64,
}

impl<D: Clone> ContaminatedDataset<D> {
    /// Uncorrupted wrapper with an all-false mask.
    pub fn clean(data: D, n: usize, eta: f64) -> Self {
        ContaminatedDataset {
            observed: data.clone(),
            clean: Some(data),
            mask: vec![false; n],
            eta,
        }
    }

    pub fn corrupted_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// The closed catalogue of adversaries.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversarySpec {
    /// Mean data: replacements at `x̄_clean + δv`. Regression: responses of the
    /// replaced rows follow the shifted regressor `ŵ + δv` plus fresh noise.
    Shift { delta: f64, direction: Vec<f64> },
    /// Mean data: replacements drawn from `N(x̄_clean + δv, I)`, the planted
    /// component seen from the clean one. Regression: `x_i ← x_i + a·y_i·v`
    /// with `a` chosen so the replaced rows move `(1/n)Xy` by `−δv`.
    MixturePlant { delta: f64, direction: Option<Vec<f64>> },
    /// Regression only: responses resampled from the r₀ density with
    /// parameter `s`, scaled to the clean response RMS.
    ResponseReplace { s: f64 },
    /// Replacements at a fixed far point: every coordinate (mean data) or
    /// the response (regression) set to `location`.
    Gross { location: f64 },
}

impl AdversarySpec {
    /// Response replacement with the largest `s` allowed at this `η`.
    pub fn response_replace_for(eta: f64) -> Self {
        AdversarySpec::ResponseReplace { s: 1.0 / (1.0 - eta) }
    }
}

/// Datasets the adversaries know how to corrupt.
pub trait Corruptible: Clone + Sized {
    fn sample_count(&self) -> usize;
    fn apply_adversary(
        &self,
        rows: &[usize],
        adversary: &AdversarySpec,
        eta: f64,
        rng: &mut RngStream,
    ) -> Result<Self>;
}

fn direction_or_random(dir: &Option<Vec<f64>>, d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    match dir {
        Some(v) => unit(v, d),
        None => Ok(rng.unit_vector(d)),
    }
}

fn unit(v: &[f64], d: usize) -> Result<Vec<f64>> {
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            context: "adversary direction",
            expected: d,
            found: v.len(),
        });
    }
    let r = norm(v);
    if r == 0.0 {
        return Err(Error::invalid("adversary direction must be nonzero"));
    }
    Ok(scaled(v, 1.0 / r))
}

impl Corruptible for MeanDataset {
    fn sample_count(&self) -> usize {
        self.n()
    }

    fn apply_adversary(
        &self,
        rows: &[usize],
        adversary: &AdversarySpec,
        _eta: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let d = self.dim();
        let center = self.mean();
        let mut s = self.samples.clone();
        match adversary {
            AdversarySpec::Shift { delta, direction } => {
                let v = unit(direction, d)?;
                let p = crate::numerics::add(&center, &scaled(&v, *delta));
                for &i in rows {
                    s.row_mut(i).copy_from_slice(&p);
                }
            }
            AdversarySpec::MixturePlant { delta, direction } => {
                let v = direction_or_random(direction, d, rng)?;
                let p = crate::numerics::add(&center, &scaled(&v, *delta));
                for &i in rows {
                    let g = rng.normal_vec(d);
                    s.row_mut(i).copy_from_slice(&crate::numerics::add(&p, &g));
                }
            }
            AdversarySpec::Gross { location } => {
                for &i in rows {
                    s.row_mut(i).iter_mut().for_each(|x| *x = *location);
                }
            }
            AdversarySpec::ResponseReplace { .. } => {
                return Err(Error::invalid("response-replace applies to regression data only"));
            }
        }
        MeanDataset::new(s)
    }
}

impl Corruptible for RegressionDataset {
    fn sample_count(&self) -> usize {
        self.n()
    }

    fn apply_adversary(
        &self,
        rows: &[usize],
        adversary: &AdversarySpec,
        eta: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let d = self.dim();
        let n = self.n() as f64;
        let mut out = self.clone();
        match adversary {
            AdversarySpec::Shift { delta, direction } => {
                let v = unit(direction, d)?;
                let w_ref = scaled(&self.xy(), 1.0 / n);
                let w_adv = crate::numerics::add(&w_ref, &scaled(&v, *delta));
                for &i in rows {
                    let xi = self.covariate(i);
                    out.y[i] = dot(&xi, &w_adv) + rng.standard_normal();
                }
            }
            AdversarySpec::MixturePlant { delta, direction } => {
                let v = direction_or_random(direction, d, rng)?;
                let msq = self.y.iter().map(|y| y * y).sum::<f64>() / n;
                if msq == 0.0 || eta <= 0.0 {
                    return Ok(out);
                }
                let a = -delta / (eta * msq);
                for &i in rows {
                    let mut xi = self.covariate(i);
                    axpy(&mut xi, a * self.y[i], &v);
                    out.x.set_column(i, &xi);
                }
            }
            AdversarySpec::ResponseReplace { s } => {
                let rms = (self.y.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
                for &i in rows {
                    out.y[i] = rms * r0_sample(eta, *s, rng)?;
                }
            }
            AdversarySpec::Gross { location } => {
                for &i in rows {
                    out.y[i] = *location;
                }
            }
        }
        Ok(out)
    }
}

/// Replaces exactly `⌊ηn⌋` uniformly chosen rows according to the adversary.
pub fn corrupt<D: Corruptible>(
    clean: &D,
    adversary: &AdversarySpec,
    eta: f64,
    rng: &mut RngStream,
) -> Result<ContaminatedDataset<D>> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::invalid("corruption level must lie in [0, 1/2)"));
    }
    let n = clean.sample_count();
    let m = floor_tol(eta * n as f64);
    if m == 0 {
        return Ok(ContaminatedDataset::clean(clean.clone(), n, eta));
    }
    let rows = rng.subset(n, m);
    let observed = clean.apply_adversary(&rows, adversary, eta, rng)?;
    let mut mask = vec![false; n];
    for &i in &rows {
        mask[i] = true;
    }
    Ok(ContaminatedDataset {
        observed,
        clean: Some(clean.clone()),
        mask,
        eta,
    })
}

/// `Λx̄`.
pub fn posterior_mean_mean_model(data: &MeanDataset, prior: &PriorSpec) -> Result<Vec<f64>> {
    if prior.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            context: "posterior_mean_mean_model",
            expected: prior.dim(),
            found: data.dim(),
        });
    }
    shrinkage(prior, data.n())?.apply(&data.mean())
}

/// `(σ⁻²I + XXᵀ)⁻¹Xy`.
pub fn posterior_mean_regression(data: &RegressionDataset, sigma2: f64) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("posterior needs σ² > 0"));
    }
    data.gram().add_diagonal(1.0 / sigma2).solve_spd(&data.xy())
}

/// `(XXᵀ)⁻¹Xy`; rank-deficient designs are rejected.
pub fn ols(data: &RegressionDataset) -> Result<Vec<f64>> {
    solve_normal_equations(&data.gram(), &data.xy())
}

pub(crate) fn solve_normal_equations(gram: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let e = sym_eig(gram)?;
    let d = gram.dim();
    let top = e.values[0];
    let rank = e.values.iter().filter(|&&v| v > 1e-10 * top && v > 0.0).count();
    if rank < d {
        return Err(Error::RankDeficient { rank, dim: d });
    }
    let mut w = vec![0.0; d];
    for k in 0..d {
        let vk = e.vector(k);
        axpy(&mut w, dot(&vk, rhs) / e.values[k], &vk);
    }
    Ok(w)
}

/// Draws `μ ∼ N(0, Σ)` and `n` samples from `N(μ, I)`.
pub fn sample_mean_instance(
    prior: &PriorSpec,
    n: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, MeanDataset)> {
    if n == 0 {
        return Err(Error::invalid("sample_mean_instance needs n ≥ 1"));
    }
    let d = prior.dim();
    let mu = match prior {
        PriorSpec::Isotropic { sigma2, .. } => scaled(&rng.normal_vec(d), sigma2.sqrt()),
        PriorSpec::General(sigma) => {
            let root = sym_eig(sigma)?.map(|v| v.max(0.0).sqrt());
            crate::numerics::gauss_vector(rng, &vec![0.0; d], root.as_matrix())?
        }
        PriorSpec::ImproperUniform { .. } => {
            return Err(Error::invalid("cannot sample a parameter from the improper prior"))
        }
    };
    let samples = Matrix::from_fn(n, d, |_, j| mu[j] + rng.standard_normal());
    Ok((mu, MeanDataset::new(samples)?))
}

/// Draws `w ∼ N(0, σ²I)`, Gaussian design and `y = Xᵀw + ξ`.
pub fn sample_regression_instance(
    sigma2: f64,
    n: usize,
    d: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, RegressionDataset)> {
    if n == 0 || d == 0 || !(sigma2 >= 0.0) {
        return Err(Error::invalid("sample_regression_instance needs n, d ≥ 1 and σ² ≥ 0"));
    }
    let w = scaled(&rng.normal_vec(d), sigma2.sqrt());
    let x = Matrix::from_fn(d, n, |_, _| rng.standard_normal());
    let mut y = x.tr_matvec(&w)?;
    for yi in y.iter_mut() {
        *yi += rng.standard_normal();
    }
    let data = RegressionDataset::new(x, y)?.with_truth(w.clone())?;
    Ok((w, data))
}
