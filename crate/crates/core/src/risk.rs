//! Exact and asymptotic risk expressions.
//!
//! Every closed form here is paired with a dense trace evaluation that
//! forms the matrices explicitly; the two routes share no code beyond the
//! spectrum itself.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::circulant::{check_spectrum, feature_matrix};
use crate::error::{Error, Result};
use crate::model::{GridConfig, Spectrum};

/// Dimension at and above which inner sums switch to compensated
/// summation.
pub const COMPENSATED_SUM_MIN_DIM: usize = 1 << 16;

/// Negative risks down to this value are rounding noise and reported as 0.
pub const NEGATIVE_RISK_TOLERANCE: f64 = 1e-10;

/// `risk = tr(K) - 2 P_q + Q_{q,1} + Q_{q,2}` with `tr(K) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskBreakdown {
    pub p_q: f64,
    pub q_q1: f64,
    pub q_q2: f64,
    pub risk: f64,
    /// Set when a tiny negative value was clamped to zero.
    pub clamped: bool,
}

impl RiskBreakdown {
    fn from_terms(p_q: f64, q_q1: f64, q_q2: f64) -> Result<Self> {
        let (risk, clamped) = clamp_risk(1.0 - 2.0 * p_q + q_q1 + q_q2)?;
        Ok(Self {
            p_q,
            q_q1,
            q_q2,
            risk,
            clamped,
        })
    }
}

/// Clamps `[-1e-10, 0)` to zero and rejects anything more negative.
pub fn clamp_risk(value: f64) -> Result<(f64, bool)> {
    if !value.is_finite() {
        return Err(Error::NumericalInconsistency(format!(
            "non-finite risk {value}"
        )));
    }
    if value >= 0.0 {
        Ok((value, false))
    } else if value >= -NEGATIVE_RISK_TOLERANCE {
        Ok((0.0, true))
    } else {
        Err(Error::NumericalInconsistency(format!(
            "risk evaluated to {value}"
        )))
    }
}

/// Sum that switches to Kahan compensation for very long accumulations.
fn accumulate(values: impl Iterator<Item = f64>, compensated: bool) -> f64 {
    if !compensated {
        return values.sum();
    }
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

fn require_over_aligned(spectrum: &Spectrum, grid: &GridConfig) -> Result<(usize, usize)> {
    check_spectrum(spectrum, grid)?;
    let (tau, l) = grid.require_aligned()?;
    if l > tau {
        return Err(Error::InvalidConfiguration(format!(
            "p={} exceeds D={}",
            grid.p, grid.dim
        )));
    }
    Ok((tau, l))
}

/// Closed form of the weighted min-norm risk on an aligned grid.
pub fn risk_over_closed(spectrum: &Spectrum, grid: &GridConfig, q: f64) -> Result<RiskBreakdown> {
    check_exponent("q", q)?;
    let (tau, l) = require_over_aligned(spectrum, grid)?;
    let n = grid.n;
    let r = spectrum.decay_r();
    let compensated = grid.dim >= COMPENSATED_SUM_MIN_DIM;
    let inner = |k: usize, nus: std::ops::Range<usize>, u: f64| {
        accumulate(nus.map(|nu| spectrum.pow(k + n * nu, u)), compensated)
    };
    let mut p_terms = Vec::with_capacity(n);
    let mut q1_terms = Vec::with_capacity(n);
    let mut q2_terms = Vec::with_capacity(n);
    for k in 0..n {
        let a_2q = inner(k, 0..l, 2.0 * q);
        let a_2q2r = inner(k, 0..l, 2.0 * q + 2.0 * r);
        let a_4q = inner(k, 0..l, 4.0 * q);
        let a_2r = inner(k, 0..l, 2.0 * r);
        let c_2r = inner(k, l..tau, 2.0 * r);
        p_terms.push(a_2q2r / a_2q);
        let ratio = a_4q / (a_2q * a_2q);
        q1_terms.push(ratio * a_2r);
        q2_terms.push(ratio * c_2r);
    }
    let c_r = spectrum.c_r();
    let p_q = c_r * accumulate(p_terms.into_iter(), compensated);
    let q_q1 = c_r * accumulate(q1_terms.into_iter(), compensated);
    let q_q2 = c_r * accumulate(q2_terms.into_iter(), compensated);
    RiskBreakdown::from_terms(p_q, q_q1, q_q2)
}

/// Plain (`q = 0`) min-norm risk `1 - n/p + (2n/p) c_r sum_{j>=p} t_j^2r`.
pub fn risk_over_plain(spectrum: &Spectrum, grid: &GridConfig) -> Result<f64> {
    require_over_aligned(spectrum, grid)?;
    let ratio = grid.n as f64 / grid.p as f64;
    let tail = spectrum.tail_sum(grid.p..grid.dim, 2.0 * spectrum.decay_r());
    let value = 1.0 - ratio + 2.0 * ratio * spectrum.c_r() * tail;
    Ok(clamp_risk(value)?.0)
}

/// Dense trace-form risk for any `p >= n`, including grids where `n` does
/// not divide `p`.
///
/// Builds the estimator operator `W = Sigma^q (F_T Sigma^q)^+` from an SVD
/// of the weighted feature block rather than inverting the Gram matrix
/// `F_T Sigma^2q F_T^*`, whose condition number is the square of the
/// block's and reaches ~1e12 for strong weights. Then `P_q = tr(W F_T K_T)`,
/// `Q_{q,1} = tr(W F_T K_T F_T^* W^*)` and
/// `Q_{q,2} = tr(W F_Tc K_Tc F_Tc^* W^*)`.
pub fn risk_trace_over(spectrum: &Spectrum, grid: &GridConfig, q: f64) -> Result<RiskBreakdown> {
    check_exponent("q", q)?;
    check_spectrum(spectrum, grid)?;
    if grid.p < grid.n {
        return Err(Error::WrongRegime(format!(
            "trace-form over risk needs p >= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let r = spectrum.decay_r();
    let c_r = spectrum.c_r();
    let (p, dim) = (grid.p, grid.dim);
    let kdiag = |k: usize| c_r * spectrum.pow(k, 2.0 * r);
    let f_t = feature_matrix(grid, 0..p)?.dense();
    let mut block = f_t.clone();
    for (k, mut col) in block.column_iter_mut().enumerate() {
        col *= Complex64::new(spectrum.pow(k, q), 0.0);
    }
    let svd = block.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&v| v <= smax * p as f64 * f64::EPSILON) {
        return Err(Error::SingularSystem(
            "weighted feature block is rank deficient".into(),
        ));
    }
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s_inv = DMatrix::from_diagonal(&svd.singular_values.map(|v| Complex64::new(1.0 / v, 0.0)));
    let mut w = v_t.adjoint() * s_inv * u.adjoint();
    for (k, mut row) in w.row_iter_mut().enumerate() {
        row *= Complex64::new(spectrum.pow(k, q), 0.0);
    }

    let wf = &w * &f_t;
    let (mut p_q, mut q_q1) = (0.0, 0.0);
    for (k, col) in wf.column_iter().enumerate() {
        p_q += kdiag(k) * col[k].re;
        q_q1 += kdiag(k) * col.norm_squared();
    }
    let q_q2 = if p < dim {
        let wc = &w * feature_matrix(grid, p..dim)?.dense();
        wc.column_iter()
            .enumerate()
            .map(|(i, col)| kdiag(p + i) * col.norm_squared())
            .sum()
    } else {
        0.0
    };
    RiskBreakdown::from_terms(p_q, q_q1, q_q2)
}

/// Least-squares risk for `p <= n` on grids with `D = tau n`.
pub fn risk_under_closed(spectrum: &Spectrum, grid: &GridConfig) -> Result<f64> {
    check_spectrum(spectrum, grid)?;
    if grid.p > grid.n {
        return Err(Error::WrongRegime(format!(
            "underparameterized risk needs p <= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let tau = grid.tau.ok_or_else(|| {
        Error::StructureViolation(format!("n={} does not divide D={}", grid.n, grid.dim))
    })?;
    let two_r = 2.0 * spectrum.decay_r();
    let compensated = grid.dim >= COMPENSATED_SUM_MIN_DIM;
    let discarded = spectrum.tail_sum(grid.p..grid.dim, two_r);
    let aliased = accumulate(
        (1..tau).flat_map(|k| (0..grid.p).map(move |j| k * grid.n + j))
            .map(|j| spectrum.pow(j, two_r)),
        compensated,
    );
    Ok(clamp_risk(spectrum.c_r() * (discarded + aliased))?.0)
}

/// Dense trace-form least-squares risk; needs no divisibility.
pub fn risk_trace_under(spectrum: &Spectrum, grid: &GridConfig) -> Result<f64> {
    check_spectrum(spectrum, grid)?;
    if grid.p > grid.n {
        return Err(Error::WrongRegime(format!(
            "underparameterized risk needs p <= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let (p, dim) = (grid.p, grid.dim);
    if p == dim {
        return Ok(0.0);
    }
    let two_r = 2.0 * spectrum.decay_r();
    let c_r = spectrum.c_r();
    let k_c: Vec<f64> = (p..dim).map(|k| c_r * spectrum.pow(k, two_r)).collect();
    let f_t = feature_matrix(grid, 0..p)?.dense();
    let f_c = feature_matrix(grid, p..dim)?.dense();
    let normal = f_t.adjoint() * &f_t;
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("F_T^* F_T is singular".into()))?;
    // W = (F_T^* F_T)^-1 F_T^* F_Tc; the cross term is tr(W^* W K_Tc)
    let w = chol.solve(&(f_t.adjoint() * &f_c));
    let cross: f64 = w
        .column_iter()
        .zip(&k_c)
        .map(|(col, k)| k * col.norm_squared())
        .sum();
    let own: f64 = k_c.iter().rev().sum();
    Ok(clamp_risk(own + cross)?.0)
}

/// Constants of the asymptotic rate bound for `q = r > 1/2`, `l >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub a: f64,
    pub b: f64,
    pub d_r: f64,
    /// `a n^(-2r+1) + b n^(-2r) p^(-2r+1)`.
    pub bound: f64,
    /// `2 n^(-2r+1) + 2/(2r-1) (2n)^(-2r) p^(-2r+1)`.
    pub large_d_bound: f64,
}

pub fn asymptotic_bound(spectrum: &Spectrum, grid: &GridConfig) -> Result<BoundReport> {
    let r = spectrum.decay_r();
    if !(r > 0.5) {
        return Err(Error::OutOfRegime(format!(
            "rate bound needs q = r > 1/2, got r={r}"
        )));
    }
    let (_, l) = require_over_aligned(spectrum, grid)?;
    if l < 2 {
        return Err(Error::OutOfRegime(format!("rate bound needs l >= 2, got l={l}")));
    }
    let (n, p, dim) = (grid.n as f64, grid.p as f64, grid.dim as f64);
    let e = -2.0 * r + 1.0;
    let d_r = (2f64.powf(e) - (l as f64 + 1.0).powf(e)) / (2.0 * r - 1.0);
    let dn = d_r * n.powf(-2.0 * r);
    let denom = (1.0 + dn) * (1.0 - (dim + 1.0).powf(e));
    let a = (2.0 + dn) / denom;
    let b = d_r / denom;
    let bound = a * n.powf(e) + b * n.powf(-2.0 * r) * p.powf(e);
    let large_d_bound =
        2.0 * n.powf(e) + 2.0 / (2.0 * r - 1.0) * (2.0 * n).powf(-2.0 * r) * p.powf(e);
    Ok(BoundReport {
        a,
        b,
        d_r,
        bound,
        large_d_bound,
    })
}

/// `(T_q, tail)` of the sub-Gaussian deviation bound; `tail` is the raw
/// `2 exp(-min(t^2/T_q^2, t/T_q))` and may exceed 1.
pub fn concentration_bound(r: f64, q: f64, t: f64) -> Result<(f64, f64)> {
    if 4.0 * q - 1.0 <= 0.0 || 2.0 * q - 1.0 == 0.0 || !q.is_finite() {
        return Err(Error::SingularConstant(format!(
            "T_q is undefined at q={q}"
        )));
    }
    if q < 0.5 || r < q {
        return Err(Error::OutOfRegime(format!(
            "concentration bound needs r >= q > 1/2, got r={r} q={q}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidConfiguration(format!("t must be nonnegative, got {t}")));
    }
    let inner = q * (24.0 * q * q - 17.0 * q + 3.0)
        / ((2.0 * q - 1.0).powi(2) * (4.0 * q - 1.0));
    let t_q = 4.0 * (2.0 * r - 1.0) * inner.sqrt();
    let x = t / t_q;
    let tail = 2.0 * (-(x * x).min(x)).exp();
    Ok((t_q, tail))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowestRisks {
    /// Lowest least-squares risk, attained at `p = n`.
    pub under_star: f64,
    /// Lowest weighted min-norm risk over aligned `p = l n`, `l >= 2`.
    pub over_star: f64,
    pub argmin_p_over: usize,
}

pub fn lowest_risks(spectrum: &Spectrum, n: usize, q: f64) -> Result<LowestRisks> {
    let dim = spectrum.dim();
    let boundary = GridConfig::classify(dim, n, n)?;
    let tau = boundary.tau.ok_or_else(|| {
        Error::StructureViolation(format!("n={n} does not divide D={dim}"))
    })?;
    if tau < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "no aligned p > n exists for D={dim}, n={n}"
        )));
    }
    let under_star = 2.0 * spectrum.c_r() * spectrum.tail_sum(n..dim, 2.0 * spectrum.decay_r());
    let mut best = (f64::INFINITY, 0usize);
    for l in 2..=tau {
        let grid = GridConfig::classify(dim, n, l * n)?;
        let risk = risk_over_closed(spectrum, &grid, q)?.risk;
        if risk < best.0 {
            best = (risk, l * n);
        }
    }
    Ok(LowestRisks {
        under_star,
        over_star: best.0,
        argmin_p_over: best.1,
    })
}

/// Risk of the estimator matching the regime: least squares for `p < n`,
/// weighted min-norm on aligned `p >= n`.
pub fn theoretical_risk(spectrum: &Spectrum, grid: &GridConfig, q: f64) -> Result<f64> {
    if grid.p < grid.n {
        risk_under_closed(spectrum, grid)
    } else {
        Ok(risk_over_closed(spectrum, grid, q)?.risk)
    }
}
