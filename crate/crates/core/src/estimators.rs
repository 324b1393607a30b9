//! Plain/weighted minimum-norm and least-squares estimators for the
//! equispaced Fourier model.
//!
//! The weighted estimator solves
//! `min ||Sigma_T^-q theta_T||  s.t.  F_T theta_T = y`, `theta_{T^c} = 0`,
//! whose closed form is `Sigma_T^2q F_T^* (F_T Sigma_T^2q F_T^*)^-1 y`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circulant::{check_spectrum, circulant_solve, feature_matrix, CirculantGram, Side};
use crate::error::{Error, Result};
use crate::model::{decay_pow, GridConfig, Spectrum};

/// How an estimate was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverPath {
    /// SVD pseudoinverse of the weighted feature block.
    DenseSvd,
    /// Diagonalization of the circulant Gram matrix by FFT.
    CirculantFft,
    /// `F_T^* F_T = n I` for `p <= n`.
    NormalEquations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    /// Length `D`; entries outside `[0, p)` are exactly zero.
    pub theta_hat: Vec<Complex64>,
    pub q_used: f64,
    pub path: SolverPath,
    /// `||F_T theta_T - y||`.
    pub residual: f64,
}

/// `(F theta)_j = sum_k exp(-2 pi i j k / n) theta_k`, by folding aliased
/// columns and one forward FFT.
pub fn apply_features(n: usize, theta: &[Complex64]) -> Vec<Complex64> {
    let mut folded = vec![Complex64::new(0.0, 0.0); n];
    for (k, &v) in theta.iter().enumerate() {
        folded[k % n] += v;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut folded);
    folded
}

/// `(F^* z)_k` for `k in 0..cols`.
pub fn apply_adjoint(n: usize, z: &[Complex64], cols: usize) -> Vec<Complex64> {
    let mut buf = z.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    (0..cols).map(|k| buf[k % n]).collect()
}

fn check_y(y: &[Complex64], grid: &GridConfig) -> Result<()> {
    if y.len() != grid.n {
        return Err(Error::InvalidDimension(format!(
            "y has length {} but n={}",
            y.len(),
            grid.n
        )));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "weight exponent q must be finite and nonnegative, got {q}"
        )));
    }
    Ok(())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(n: usize, theta_t: &[Complex64], y: &[Complex64]) -> f64 {
    let fit = apply_features(n, theta_t);
    fit.iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn embed(theta_t: Vec<Complex64>, dim: usize) -> Vec<Complex64> {
    let mut theta = theta_t;
    theta.resize(dim, Complex64::new(0.0, 0.0));
    theta
}

/// Weighted (`q > 0`) or plain (`q = 0`) minimum-norm interpolant.
pub fn weighted_minnorm(
    y: &[Complex64],
    spectrum: &Spectrum,
    grid: &GridConfig,
    q: f64,
    path: SolverPath,
) -> Result<EstimatorResult> {
    check_spectrum(spectrum, grid)?;
    check_y(y, grid)?;
    check_q(q)?;
    if grid.p < grid.n {
        return Err(Error::WrongRegime(format!(
            "min-norm estimation needs p >= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let theta_t = match path {
        SolverPath::CirculantFft => {
            if grid.l.is_none() {
                return Err(Error::StructureViolation(format!(
                    "circulant path needs p to be a multiple of n (p={}, n={})",
                    grid.p, grid.n
                )));
            }
            let gram = CirculantGram::gram(spectrum, grid, 2.0 * q, Side::T)?;
            let z = circulant_solve(&gram, y)?;
            let mut theta = apply_adjoint(grid.n, &z, grid.p);
            for (k, v) in theta.iter_mut().enumerate() {
                *v *= spectrum.pow(k, 2.0 * q);
            }
            theta
        }
        SolverPath::DenseSvd => {
            let f = feature_matrix(grid, 0..grid.p)?.dense();
            let weights: Vec<f64> = (0..grid.p).map(|k| spectrum.pow(k, 1.0)).collect();
            weighted_minnorm_dense(&f, &weights, q, y)?
        }
        SolverPath::NormalEquations => {
            return Err(Error::WrongRegime(
                "normal equations apply to least squares only".into(),
            ))
        }
    };
    let residual = residual(grid.n, &theta_t, y);
    Ok(EstimatorResult {
        theta_hat: embed(theta_t, grid.dim),
        q_used: q,
        path,
        residual,
    })
}

/// Least-squares fit for `p <= n`. The weight exponent has no influence
/// here, since equispaced features satisfy `F_T^* F_T = n I`.
pub fn least_squares(y: &[Complex64], grid: &GridConfig) -> Result<EstimatorResult> {
    check_y(y, grid)?;
    if grid.p > grid.n {
        return Err(Error::WrongRegime(format!(
            "least squares needs p <= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let inv_n = 1.0 / grid.n as f64;
    let theta_t: Vec<Complex64> = apply_adjoint(grid.n, y, grid.p)
        .into_iter()
        .map(|v| v * inv_n)
        .collect();
    let residual = residual(grid.n, &theta_t, y);
    Ok(EstimatorResult {
        theta_hat: embed(theta_t, grid.dim),
        q_used: 0.0,
        path: SolverPath::NormalEquations,
        residual,
    })
}

/// Norm of the part of `Sigma_T^-2q theta_T` outside the row space of
/// `F_T`. Zero (to rounding) certifies stationarity of the weighted norm
/// on the affine set of interpolants.
pub fn minnorm_kkt_check(
    result: &EstimatorResult,
    grid: &GridConfig,
    spectrum: &Spectrum,
    q: f64,
) -> f64 {
    let p = grid.p.min(result.theta_hat.len());
    let v: Vec<Complex64> = result.theta_hat[..p]
        .iter()
        .enumerate()
        .map(|(k, z)| z / spectrum.pow(k, 2.0 * q))
        .collect();
    let off = row_space_complement(grid.n, &v);
    norm(&off)
}

/// `v - F^* (F F^*)^-1 F v` for the first `v.len()` equispaced features.
/// `F F^*` is circulant for any contiguous column block starting at 0.
pub(crate) fn row_space_complement(n: usize, v: &[Complex64]) -> Vec<Complex64> {
    let p = v.len();
    let counts: Vec<Complex64> = (0..n)
        .map(|s| {
            let c = if s < p { (p - s).div_ceil(n) } else { 0 };
            Complex64::new((n * c) as f64, 0.0)
        })
        .collect();
    let fv = apply_features(n, v);
    let proj = match CirculantGram::from_eigenvalues(counts)
        .and_then(|g| circulant_solve(&g, &fv))
    {
        Ok(w) => apply_adjoint(n, &w, p),
        // p < n: F F^* is singular, fall back to the dense projector
        Err(_) => {
            let f = DMatrix::from_fn(n, p, |j, k| crate::circulant::root_of_unity(j * k, n));
            let vv = DVector::from_column_slice(v);
            let svd = f.adjoint().svd(true, false);
            let u = svd.u.unwrap();
            let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
            let u = u.columns(0, rank);
            (u * (u.adjoint() * &vv)).iter().copied().collect()
        }
    };
    v.iter().zip(&proj).map(|(a, b)| a - b).collect()
}

/// Dense weighted minimum-norm solve for an arbitrary feature matrix:
/// `theta = W^q (F W^q)^+ y`, with the pseudoinverse taken by SVD.
pub fn weighted_minnorm_dense(
    features: &DMatrix<Complex64>,
    weights: &[f64],
    q: f64,
    y: &[Complex64],
) -> Result<Vec<Complex64>> {
    if weights.len() != features.ncols() || y.len() != features.nrows() {
        return Err(Error::InvalidDimension(format!(
            "features {}x{}, weights {}, y {}",
            features.nrows(),
            features.ncols(),
            weights.len(),
            y.len()
        )));
    }
    let scale: Vec<f64> = weights.iter().map(|w| w.powf(q)).collect();
    let mut weighted = features.clone();
    for (mut col, s) in weighted.column_iter_mut().zip(&scale) {
        col *= Complex64::new(*s, 0.0);
    }
    let beta = pinv_solve(weighted, y)?;
    Ok(beta.iter().zip(&scale).map(|(b, s)| b * *s).collect())
}

/// Minimum-norm least-squares solution `A^+ b` via SVD.
pub fn pinv_solve(a: DMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let (m, n) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let eps = smax * m.max(n) as f64 * f64::EPSILON;
    let rhs = DVector::from_column_slice(b);
    let x = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// Weight vector `t_k` for the first `p` features, used with `q` as
/// `Sigma_T^q`.
pub fn decay_weights(p: usize) -> Vec<f64> {
    (0..p).map(|k| decay_pow(k, 1.0)).collect()
}
