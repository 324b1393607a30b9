//! Truncated Fourier interpolation of sampled functions on a periodic box
//! `[start, start + L)^d`.
//!
//! The model is `f(x) = sum_k theta_k exp(2 pi i k . x / L)`, which is
//! `exp(i pi k . x)` on the period-2 domain `[-1, 1)`, with each frequency
//! component `k_a` drawn from a symmetric band around zero. Along one axis
//! with `p` retained modes, storage slot `j` holds frequency `j` for
//! `j < ceil(p/2)` and `j - p` otherwise (the usual FFT ordering). For odd
//! `p = 2m + 1` this is exactly the band `-m..=m`.
//!
//! Multi-dimensional samples and coefficients are flattened row-major, so
//! the feature matrix is the Kronecker power of the 1-D feature block.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{pinv_solve, weighted_minnorm_dense};

/// Signed frequency stored in slot `j` of a `p`-mode axis.
pub fn signed_frequency(j: usize, p: usize) -> i64 {
    if j < p.div_ceil(2) {
        j as i64
    } else {
        j as i64 - p as i64
    }
}

/// Inverse of [`signed_frequency`]; `None` if `k` is outside the band.
pub fn frequency_slot(k: i64, p: usize) -> Option<usize> {
    let hi = p.div_ceil(2) as i64;
    let lo = hi - p as i64;
    if k >= hi || k < lo {
        None
    } else if k >= 0 {
        Some(k as usize)
    } else {
        Some((k + p as i64) as usize)
    }
}

/// Periodic box `[start, start + period)` shared by every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub start: f64,
    pub period: f64,
}

impl Domain {
    /// `[-1, 1)`.
    pub const SYMMETRIC: Domain = Domain {
        start: -1.0,
        period: 2.0,
    };
    /// `[0, 1)`.
    pub const UNIT: Domain = Domain {
        start: 0.0,
        period: 1.0,
    };

    /// `exp(2 pi i k x / L)`.
    #[inline]
    pub fn basis(&self, k: i64, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / self.period)
    }

    /// Equispaced sample coordinates along one axis.
    pub fn sample_axis(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| self.start + self.period * j as f64 / n as f64)
            .collect()
    }

    /// Midpoint grid with `m` points per axis.
    pub fn evaluation_grid(&self, m: usize, d: usize) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = (0..m)
            .map(|i| self.start + self.period * (i as f64 + 0.5) / m as f64)
            .collect();
        tensor_points(&axis, d)
    }
}

/// Weight family `Sigma_[k]` on multi-indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TensorWeight {
    /// `prod_a (1 + |k_a|)^-1`.
    #[default]
    Separable,
    /// `(1 + ||k||_2)^-1`.
    Euclidean,
}

impl TensorWeight {
    pub fn value(&self, k: &[i64]) -> f64 {
        match self {
            TensorWeight::Separable => k.iter().map(|&v| 1.0 / (1.0 + v.abs() as f64)).product(),
            TensorWeight::Euclidean => {
                let norm = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
                1.0 / (1.0 + norm)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LeastSquares,
    PlainMinNorm,
    WeightedMinNorm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LeastSquares => "least_squares",
            Method::PlainMinNorm => "plain_min_norm",
            Method::WeightedMinNorm => "weighted_min_norm",
        }
    }
}

/// Built-in target functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinTarget {
    /// `-1` on `[-1, 0)`, `1` on `[0, 1]`.
    Stage1d,
    /// `2.5 (x^3 - x)`.
    Cubic1d,
    /// `cos(6.28 (2x + 3y))`.
    Cos2d,
}

impl BuiltinTarget {
    pub fn dimension(&self) -> usize {
        match self {
            BuiltinTarget::Stage1d | BuiltinTarget::Cubic1d => 1,
            BuiltinTarget::Cos2d => 2,
        }
    }

    /// `[-1, 1)` for the 1-D targets, the unit square for `cos2d`.
    pub fn domain(&self) -> Domain {
        match self {
            BuiltinTarget::Stage1d | BuiltinTarget::Cubic1d => Domain::SYMMETRIC,
            BuiltinTarget::Cos2d => Domain::UNIT,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinTarget::Stage1d => {
                if x[0] < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            BuiltinTarget::Cubic1d => 2.5 * (x[0].powi(3) - x[0]),
            // 6.28 as stated for this target, not 2 pi
            #[allow(clippy::approx_constant)]
            BuiltinTarget::Cos2d => (6.28 * (2.0 * x[0] + 3.0 * x[1])).cos(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinTarget::Stage1d => "stage1d",
            BuiltinTarget::Cubic1d => "cubic1d",
            BuiltinTarget::Cos2d => "cos2d",
        }
    }
}

/// Looks up a built-in target by name.
pub fn builtin_targets(name: &str) -> Result<BuiltinTarget> {
    match name {
        "stage1d" => Ok(BuiltinTarget::Stage1d),
        "cubic1d" => Ok(BuiltinTarget::Cubic1d),
        "cos2d" => Ok(BuiltinTarget::Cos2d),
        other => Err(Error::UnknownTarget(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Builtin(BuiltinTarget),
    /// Row-major samples on the equispaced grid.
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationProblem {
    pub dimension: usize,
    /// Samples per axis; `n = n_axis^d`.
    pub n_axis: usize,
    /// Retained modes per axis; `p = p_axis^d`.
    pub p_axis: usize,
    /// Ambient modes per axis.
    pub dim_axis: usize,
    pub q: f64,
    pub domain: Domain,
    pub target: Target,
    /// Noise standard deviation relative to the largest absolute sample.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub weight: TensorWeight,
}

impl InterpolationProblem {
    pub fn builtin(target: BuiltinTarget, n_axis: usize, p_axis: usize, dim_axis: usize, q: f64) -> Self {
        Self {
            dimension: target.dimension(),
            n_axis,
            p_axis,
            dim_axis,
            q,
            domain: target.domain(),
            target: Target::Builtin(target),
            noise_sigma: 0.0,
            noise_seed: 0,
            weight: TensorWeight::Separable,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.dimension > 3 {
            return Err(Error::InvalidConfiguration(format!(
                "dimension must be 1, 2 or 3, got {}",
                self.dimension
            )));
        }
        if self.n_axis == 0 || self.p_axis == 0 {
            return Err(Error::InvalidConfiguration(
                "samples and modes per axis must be positive".into(),
            ));
        }
        if self.p_axis > self.dim_axis {
            return Err(Error::InvalidConfiguration(format!(
                "p_axis={} exceeds D_axis={}",
                self.p_axis, self.dim_axis
            )));
        }
        if !(self.domain.period > 0.0 && self.domain.period.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "domain period must be positive, got {}",
                self.domain.period
            )));
        }
        if !(self.q.is_finite() && self.q >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfiguration(
                "q and noise_sigma must be nonnegative".into(),
            ));
        }
        match &self.target {
            Target::Builtin(t) if t.dimension() != self.dimension => {
                Err(Error::InvalidConfiguration(format!(
                    "target {} is {}-dimensional, problem is {}-dimensional",
                    t.name(),
                    t.dimension(),
                    self.dimension
                )))
            }
            Target::Samples(s) if s.len() != self.n_axis.pow(self.dimension as u32) => {
                Err(Error::InvalidConfiguration(format!(
                    "{} samples given, expected {}",
                    s.len(),
                    self.n_axis.pow(self.dimension as u32)
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.n_axis.pow(self.dimension as u32)
    }

    pub fn mode_count(&self) -> usize {
        self.p_axis.pow(self.dimension as u32)
    }

    /// Sample coordinates, row-major.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        tensor_points(&self.domain.sample_axis(self.n_axis), self.dimension)
    }

    /// Clean target values at the sample points.
    pub fn clean_samples(&self) -> Vec<f64> {
        match &self.target {
            Target::Builtin(t) => self.sample_points().iter().map(|x| t.eval(x)).collect(),
            Target::Samples(s) => s.clone(),
        }
    }

    /// Observations with noise applied.
    pub fn observations(&self) -> Vec<f64> {
        let clean = self.clean_samples();
        if self.noise_sigma == 0.0 {
            return clean;
        }
        let amplitude = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sd = self.noise_sigma * amplitude;
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        clean
            .into_iter()
            .map(|v| {
                let g: f64 = StandardNormal.sample(&mut rng);
                v + sd * g
            })
            .collect()
    }

    fn multi_indices(&self) -> Vec<Vec<i64>> {
        let axis: Vec<f64> = (0..self.p_axis)
            .map(|j| signed_frequency(j, self.p_axis) as f64)
            .collect();
        tensor_points(&axis, self.dimension)
            .into_iter()
            .map(|k| k.into_iter().map(|v| v as i64).collect())
            .collect()
    }

    /// Weight `Sigma_[k]` for every stored coefficient, row-major.
    pub fn weights(&self) -> Vec<f64> {
        self.multi_indices()
            .iter()
            .map(|k| self.weight.value(k))
            .collect()
    }
}

/// Cartesian power of `axis`, row-major.
pub fn tensor_points(axis: &[f64], d: usize) -> Vec<Vec<f64>> {
    let m = axis.len();
    let total = m.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; d];
            for a in (0..d).rev() {
                x[a] = axis[flat % m];
                flat /= m;
            }
            x
        })
        .collect()
}

/// 1-D feature block: `F[j, s] = exp(2 pi i k(s) x_j / L)`.
pub fn axis_features(domain: &Domain, n: usize, p: usize) -> DMatrix<Complex64> {
    let xs = domain.sample_axis(n);
    DMatrix::from_fn(n, p, |j, s| domain.basis(signed_frequency(s, p), xs[j]))
}

/// Dense Kronecker power of the 1-D feature block.
pub fn tensor_features(domain: &Domain, n: usize, p: usize, d: usize) -> DMatrix<Complex64> {
    let f = axis_features(domain, n, p);
    let mut h = f.clone();
    for _ in 1..d {
        h = h.kronecker(&f);
    }
    h
}

/// Applies `mat` along `axis` of a row-major tensor with the given shape.
fn mode_product(
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    mat: &DMatrix<Complex64>,
) -> (Vec<Complex64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (rows, cols) = mat.shape();
    debug_assert_eq!(cols, shape[axis]);
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            for c in 0..cols {
                let m = mat[(r, c)];
                let src = (o * cols + c) * inner;
                let dst = (o * rows + r) * inner;
                for i in 0..inner {
                    out[dst + i] += m * data[src + i];
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// How a fit was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitPath {
    /// Direct dense solve (1-D, or non-separable weights).
    Dense,
    /// Per-axis pseudoinverses applied through the Kronecker identity.
    Kronecker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantFit {
    pub dimension: usize,
    pub p_axis: usize,
    pub domain: Domain,
    /// Row-major coefficient tensor of shape `[p_axis; d]`.
    pub coefficients: Vec<Complex64>,
    pub method: Method,
    pub path: FitPath,
    /// `||H theta - y||`.
    pub residual: f64,
}

/// Fits a truncated Fourier model with the requested estimator.
pub fn fit_interpolant(problem: &InterpolationProblem, method: Method) -> Result<InterpolantFit> {
    problem.validate()?;
    let (n, p, d) = (problem.n_axis, problem.p_axis, problem.dimension);
    match method {
        Method::LeastSquares if p > n => {
            return Err(Error::WrongRegime(format!(
                "least squares needs p_axis <= n_axis, got {p} > {n}"
            )))
        }
        Method::PlainMinNorm | Method::WeightedMinNorm if p < n => {
            return Err(Error::WrongRegime(format!(
                "min-norm interpolation needs p_axis >= n_axis, got {p} < {n}"
            )))
        }
        _ => {}
    }
    let y: Vec<Complex64> = problem
        .observations()
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let q = match method {
        Method::WeightedMinNorm => problem.q,
        _ => 0.0,
    };
    let separable = d == 1 || q == 0.0 || problem.weight == TensorWeight::Separable;
    let domain = problem.domain;
    let (coefficients, path) = if d == 1 {
        let f = axis_features(&domain, n, p);
        let theta = if method == Method::LeastSquares {
            pinv_solve(f, &y)?
        } else {
            weighted_minnorm_dense(&f, &problem.weights(), q, &y)?
        };
        (theta, FitPath::Dense)
    } else if separable {
        (kronecker_solve(problem, q, &y)?, FitPath::Kronecker)
    } else {
        let h = tensor_features(&domain, n, p, d);
        (
            weighted_minnorm_dense(&h, &problem.weights(), q, &y)?,
            FitPath::Dense,
        )
    };
    let fitted = apply_tensor_features(&domain, n, p, d, &coefficients);
    let residual = fitted
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(InterpolantFit {
        dimension: d,
        p_axis: p,
        domain,
        coefficients,
        method,
        path,
        residual,
    })
}

/// `(A_1 x ... x A_d)^+ = A_1^+ x ... x A_d^+` with
/// `A = F diag(w)^q` per axis.
fn kronecker_solve(problem: &InterpolationProblem, q: f64, y: &[Complex64]) -> Result<Vec<Complex64>> {
    let (n, p, d) = (problem.n_axis, problem.p_axis, problem.dimension);
    let scale: Vec<f64> = (0..p)
        .map(|s| TensorWeight::Separable.value(&[signed_frequency(s, p)]).powf(q))
        .collect();
    let mut weighted = axis_features(&problem.domain, n, p);
    for (mut col, s) in weighted.column_iter_mut().zip(&scale) {
        col *= Complex64::new(*s, 0.0);
    }
    let (rows, cols) = weighted.shape();
    let svd = weighted.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let pinv = svd
        .pseudo_inverse(smax * rows.max(cols) as f64 * f64::EPSILON)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    let mut per_axis = pinv;
    for (mut row, s) in per_axis.row_iter_mut().zip(&scale) {
        row *= Complex64::new(*s, 0.0);
    }
    let mut data = y.to_vec();
    let mut shape = vec![n; d];
    for axis in 0..d {
        (data, shape) = mode_product(&data, &shape, axis, &per_axis);
    }
    Ok(data)
}

/// `H theta` at the training samples, by per-axis products.
pub fn apply_tensor_features(
    domain: &Domain,
    n: usize,
    p: usize,
    d: usize,
    theta: &[Complex64],
) -> Vec<Complex64> {
    let f = axis_features(domain, n, p);
    let mut data = theta.to_vec();
    let mut shape = vec![p; d];
    for axis in 0..d {
        (data, shape) = mode_product(&data, &shape, axis, &f);
    }
    data
}

impl InterpolantFit {
    /// Synthesizes the truncated series at arbitrary points.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Vec<Complex64> {
        evaluate_interpolant(&self.domain, &self.coefficients, self.p_axis, self.dimension, points)
    }

    /// `||Sigma^-q theta||` under the given weights.
    pub fn weighted_norm(&self, weights: &[f64], q: f64) -> f64 {
        self.coefficients
            .iter()
            .zip(weights)
            .map(|(c, w)| (c / w.powf(q)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn plain_norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// `sum_k theta_k exp(2 pi i k . x / L)` at each point.
pub fn evaluate_interpolant(
    domain: &Domain,
    coefficients: &[Complex64],
    p_axis: usize,
    dimension: usize,
    points: &[Vec<f64>],
) -> Vec<Complex64> {
    points
        .iter()
        .map(|x| {
            let bases: Vec<Vec<Complex64>> = x
                .iter()
                .map(|&xa| {
                    (0..p_axis)
                        .map(|s| domain.basis(signed_frequency(s, p_axis), xa))
                        .collect()
                })
                .collect();
            // contract the last axis first
            let mut data = coefficients.to_vec();
            for a in (0..dimension).rev() {
                let basis = &bases[a];
                data = data
                    .chunks(p_axis)
                    .map(|chunk| chunk.iter().zip(basis).map(|(c, b)| c * b).sum())
                    .collect();
            }
            data[0]
        })
        .collect()
}

/// Root-mean-square error of the real part against a built-in target.
pub fn rmse(fit: &InterpolantFit, target: BuiltinTarget, points: &[Vec<f64>]) -> f64 {
    let values = fit.evaluate(points);
    let sum: f64 = values
        .iter()
        .zip(points)
        .map(|(v, x)| (v.re - target.eval(x)).powi(2))
        .sum();
    (sum / points.len() as f64).sqrt()
}
