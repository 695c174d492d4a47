//! Numeric kernels: a small dense matrix type, a cyclic Jacobi
//! eigensolver, seeded Gaussian streams, orthonormal Hermite polynomials
//! and Gauss–Hermite quadrature for the standard normal measure.
//!
//! Everything here is deterministic. Any function taking an [`RngStream`]
//! is a pure function of its inputs and the stream state.

use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius tolerance of the Jacobi iteration, relative to ‖m‖_F.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Sweep limit of the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Node count of the default Gauss–Hermite rule.
pub const DEFAULT_QUADRATURE_ORDER: usize = 160;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "Matrix::from_rows",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        Ok(Matrix::from_rows(cols)?.transpose())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "Matrix::matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Computes `self · v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix::matvec",
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Computes `selfᵀ · v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "Matrix::tr_matvec",
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(&mut out, vi, self.row(i));
        }
        Ok(out)
    }

    /// `self · selfᵀ`.
    pub fn gram(&self) -> SymMatrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        SymMatrix(g)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix elementwise",
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Submatrix made of the listed columns.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A square matrix known to be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Validates symmetry to 1e-12 relative tolerance and symmetrizes exactly.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() || m.rows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix::new",
                expected: m.rows().max(1),
                found: m.cols(),
            });
        }
        let scale = m.max_abs().max(1.0);
        let n = m.rows();
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(SymMatrix::symmetrize(m))
    }

    fn symmetrize(mut m: Matrix) -> Self {
        let n = m.rows();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        SymMatrix(Matrix::identity(n).scale(s))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        SymMatrix(Matrix::from_diag(diag))
    }

    /// V·diag(values)·Vᵀ for a matrix V of column vectors.
    pub fn from_eigen(values: &[f64], vectors: &Matrix) -> Self {
        let n = vectors.rows();
        let mut m = Matrix::zeros(n, n);
        for (k, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = lam * vectors[(i, k)];
                for j in 0..n {
                    m[(i, j)] += a * vectors[(j, k)];
                }
            }
        }
        SymMatrix::symmetrize(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(v)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        Ok(SymMatrix(self.0.add(&other.0)?))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        Ok(SymMatrix(self.0.sub(&other.0)?))
    }

    pub fn add_diagonal(&self, s: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.rows() {
            m[(i, i)] += s;
        }
        SymMatrix(m)
    }

    pub fn eig(&self) -> Result<SymEigen> {
        sym_eig(self)
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> Result<f64> {
        let e = sym_eig(self)?;
        Ok(e.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }

    /// Solves `self · x = b` by Cholesky factorization.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix::solve_spd",
                expected: n,
                found: b.len(),
            });
        }
        let a = &self.0;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if !(s > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = s.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= l[(i, k)] * z[k];
            }
            z[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= l[(k, i)] * z[k];
            }
            z[i] /= l[(i, i)];
        }
        Ok(z)
    }
}

/// Eigendecomposition `m = V·diag(values)·Vᵀ`; eigenvectors are the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_eigen(&self.values, &self.vectors)
    }

    /// Applies a scalar function to the spectrum.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let vals: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        SymMatrix::from_eigen(&vals, &self.vectors)
    }
}

/// Cyclic Jacobi eigendecomposition. Eigenvalues are sorted descending.
pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let target = JACOBI_TOLERANCE * a.frobenius();
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut residual = off(&a);
    let mut sweeps = 0;
    while residual > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        residual = off(&a);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue and its unit eigenvector.
pub fn top_eigen(m: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    let e = sym_eig(m)?;
    Ok((e.values[0], e.vector(0)))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a·x`.
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `ln C(n, k)` via the log-gamma-free product form.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// `C(n, k)` saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// `⌈x⌉` that ignores floating noise just above an integer.
pub fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// `⌊x⌋` that ignores floating noise just below an integer.
pub fn floor_tol(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Seeded ChaCha stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream with the same seed and another id.
    pub fn with_stream(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    /// Independent child stream keyed by a value drawn from this one.
    pub fn fork(&mut self) -> RngStream {
        let seed = self.rng.random::<u64>();
        RngStream::new(seed, self.stream_id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.standard_normal()).collect()
    }

    /// Uniform point on the unit sphere.
    pub fn unit_vector(&mut self, d: usize) -> Vec<f64> {
        loop {
            let g = self.normal_vec(d);
            let r = norm(&g);
            if r > 1e-300 {
                return scaled(&g, 1.0 / r);
            }
        }
    }

    /// Uniform `k`-subset of `0..n`, sorted.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + self.index(n - i);
            idx.swap(i, j);
        }
        let mut out = idx[..k.min(n)].to_vec();
        out.sort_unstable();
        out
    }
}

/// `mean + cov_sqrt·g` with `g` standard normal.
pub fn gauss_vector(rng: &mut RngStream, mean: &[f64], cov_sqrt: &Matrix) -> Result<Vec<f64>> {
    if cov_sqrt.rows() != mean.len() {
        return Err(Error::DimensionMismatch {
            context: "gauss_vector",
            expected: mean.len(),
            found: cov_sqrt.rows(),
        });
    }
    let g = rng.normal_vec(cov_sqrt.cols());
    Ok(add(mean, &cov_sqrt.matvec(&g)?))
}

/// Orthonormal probabilist's Hermite polynomial `h_j(x)`.
pub fn hermite_value(j: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..j {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[h_0(x), …, h_jmax(x)]`.
pub fn hermite_all(jmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(jmax + 1);
    out.push(1.0);
    if jmax >= 1 {
        out.push(x);
    }
    for k in 1..jmax {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Gauss–Hermite rule for the standard normal measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// Golub–Welsch nodes (eigenvalues of the Jacobi matrix with
    /// off-diagonals √k), polished by Newton steps on `h_order`. Weights use
    /// the Christoffel identity `w_k = 1 / Σ_j h_j(x_k)²`, which equals the
    /// squared first eigenvector component but is accurate to full precision.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature order must be positive"));
        }
        let mut j = Matrix::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = sym_eig(&SymMatrix(j))?;
        let mut nodes = eig.values.clone();
        nodes.sort_by(|a, b| a.total_cmp(b));
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let h = hermite_all(order, *x);
                let deriv = (order as f64).sqrt() * h[order - 1];
                if deriv == 0.0 {
                    break;
                }
                *x -= h[order] / deriv;
            }
        }
        let raw: Vec<f64> = nodes
            .iter()
            .map(|&x| 1.0 / hermite_all(order - 1, x).iter().map(|h| h * h).sum::<f64>())
            .collect();
        let total: f64 = raw.iter().sum();
        Ok(QuadratureRule {
            nodes,
            weights: raw.iter().map(|w| w / total).collect(),
            order,
        })
    }

    /// Shared 160-node rule.
    pub fn standard() -> &'static QuadratureRule {
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| {
            QuadratureRule::gauss_hermite(DEFAULT_QUADRATURE_ORDER)
                .expect("Jacobi converges on the Hermite Jacobi matrix")
        })
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        quad_expect(f, self)
    }
}

/// `Σ w_i f(node_i)`, approximating `E_{N(0,1)} f`.
pub fn quad_expect(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f(x))
        .sum()
}
