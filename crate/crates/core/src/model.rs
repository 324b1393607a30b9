//! Spectral model: decay sequence, normalizer, coefficient covariance and
//! the `(D, n, p)` grid structure.
//!
//! Indexing is 0-based throughout. Feature `j` in `0..D` carries the decay
//! value `t_j = 1 / (j + 1)`, and the coefficient covariance is diagonal
//! with entries `c_r * t_j^(2r)` where `c_r` normalizes the trace to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay sequence `t_j = (j+1)^-1` together with the normalizer `c_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    dim: usize,
    decay_r: f64,
    t: Vec<f64>,
    c_r: f64,
}

impl Spectrum {
    /// Builds the spectrum for `dim` features and decay exponent `r`.
    ///
    /// `c_r` is summed smallest-term-first.
    pub fn new(dim: usize, r: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("D must be at least 1".into()));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "decay exponent r must be finite and nonnegative, got {r}"
            )));
        }
        let t: Vec<f64> = (0..dim).map(|j| 1.0 / (j + 1) as f64).collect();
        let total: f64 = (0..dim).rev().map(|j| decay_pow(j, 2.0 * r)).sum();
        Ok(Self {
            dim,
            decay_r: r,
            t,
            c_r: 1.0 / total,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decay_r(&self) -> f64 {
        self.decay_r
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn c_r(&self) -> f64 {
        self.c_r
    }

    /// `t_j^u`, evaluated as `(j+1)^-u`.
    #[inline]
    pub fn pow(&self, j: usize, u: f64) -> f64 {
        decay_pow(j, u)
    }

    /// Diagonal of the coefficient covariance, `c_r * t_j^(2r)`.
    pub fn covariance_diag(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| self.c_r * decay_pow(j, 2.0 * self.decay_r))
            .collect()
    }

    /// `sum_{j in range} t_j^u`, accumulated smallest term first.
    pub fn tail_sum(&self, range: std::ops::Range<usize>, u: f64) -> f64 {
        range.rev().map(|j| decay_pow(j, u)).sum()
    }
}

#[inline]
pub(crate) fn decay_pow(j: usize, u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        ((j + 1) as f64).powf(-u)
    }
}

/// Closed-form sandwich `(lower, upper)` around `c_r`, valid for `r > 1/2`.
pub fn cr_bounds(dim: usize, r: f64) -> Result<(f64, f64)> {
    if dim == 0 {
        return Err(Error::InvalidDimension("D must be at least 1".into()));
    }
    if !(r > 0.5) || !r.is_finite() {
        return Err(Error::OutOfRegime(format!(
            "c_r bounds need r > 1/2, got {r}"
        )));
    }
    let d = dim as f64;
    let e = -2.0 * r + 1.0;
    let lower = (2.0 * r - 1.0) / (2.0 * r - d.powf(e));
    let upper = (2.0 * r - 1.0) / (1.0 - (d + 1.0).powf(e));
    Ok((lower, upper))
}

/// Which side of the interpolation threshold a configuration lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `p <= n`.
    Under,
    /// `p = l n` with `l >= 2`.
    OverAligned,
    /// `p > n` and `n` does not divide `p`.
    OverGeneral,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Under => "under",
            Regime::OverAligned => "over_aligned",
            Regime::OverGeneral => "over_general",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The `(D, n, p)` triple with its divisibility structure.
///
/// `tau` is present iff `n | D`; `l` is present iff `n | p`. The boundary
/// `p = n` is tagged [`Regime::Under`] but still carries `l = 1`, so the
/// overparameterized formulas accept it as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub p: usize,
    pub tau: Option<usize>,
    pub l: Option<usize>,
    pub regime: Regime,
}

impl GridConfig {
    pub fn classify(dim: usize, n: usize, p: usize) -> Result<Self> {
        if dim == 0 || n == 0 || p == 0 {
            return Err(Error::InvalidConfiguration(format!(
                "D, n and p must be positive (D={dim}, n={n}, p={p})"
            )));
        }
        if p > dim {
            return Err(Error::InvalidConfiguration(format!(
                "p={p} exceeds D={dim}"
            )));
        }
        if n > dim {
            return Err(Error::InvalidConfiguration(format!(
                "n={n} exceeds D={dim}"
            )));
        }
        let tau = dim.is_multiple_of(n).then_some(dim / n);
        let l = p.is_multiple_of(n).then_some(p / n);
        let regime = if p <= n {
            Regime::Under
        } else if l.is_some() {
            Regime::OverAligned
        } else {
            Regime::OverGeneral
        };
        Ok(Self {
            dim,
            n,
            p,
            tau,
            l,
            regime,
        })
    }

    /// `(tau, l)` when both `D = tau n` and `p = l n` hold.
    pub fn aligned(&self) -> Option<(usize, usize)> {
        Some((self.tau?, self.l?))
    }

    pub fn require_aligned(&self) -> Result<(usize, usize)> {
        self.aligned().ok_or_else(|| {
            Error::StructureViolation(format!(
                "need D = tau n and p = l n, got D={}, n={}, p={}",
                self.dim, self.n, self.p
            ))
        })
    }

    pub fn is_over(&self) -> bool {
        self.p >= self.n
    }
}

/// Modeled coefficient covariance `K = c_r Sigma^(2r)` paired with the
/// estimation weight exponent `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCovariance {
    pub spectrum: Spectrum,
    pub q_weight: f64,
}

impl CoefficientCovariance {
    pub fn new(spectrum: Spectrum, q_weight: f64) -> Result<Self> {
        if !(q_weight.is_finite() && q_weight >= 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "weight exponent q must be finite and nonnegative, got {q_weight}"
            )));
        }
        Ok(Self {
            spectrum,
            q_weight,
        })
    }

    pub fn diag(&self) -> Vec<f64> {
        self.spectrum.covariance_diag()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().rev().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn decay_sequence_definition() {
        let s = Spectrum::new(4, 0.7).unwrap();
        assert_eq!(s.t(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
        assert!(s.t().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn normalizer_small_cases() {
        assert_eq!(Spectrum::new(1, 1.0).unwrap().c_r(), 1.0);
        // 1 + 1/4 + 1/9 + 1/16 = 205/144
        assert_relative_eq!(
            Spectrum::new(4, 1.0).unwrap().c_r(),
            144.0 / 205.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(Spectrum::new(10, 0.0).unwrap().c_r(), 0.1);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            Spectrum::new(0, 1.0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn normalization_identity() {
        for &d in &[1usize, 7, 64, 1000] {
            for &r in &[0.0, 0.3, 0.5, 1.0, 2.0] {
                let s = Spectrum::new(d, r).unwrap();
                let sum: f64 = s.t().iter().rev().map(|t| t.powf(2.0 * r)).sum();
                assert!((s.c_r() * sum - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bounds_small_cases() {
        let (lo, hi) = cr_bounds(1, 1.0).unwrap();
        assert_relative_eq!(lo, 1.0);
        assert_relative_eq!(hi, 2.0);
        let (lo, hi) = cr_bounds(4, 1.0).unwrap();
        assert!(lo <= 144.0 / 205.0 && 144.0 / 205.0 <= hi);
        let s = Spectrum::new(1024, 0.6).unwrap();
        let (lo, hi) = cr_bounds(1024, 0.6).unwrap();
        assert!(lo < s.c_r() && s.c_r() < hi);
    }

    #[test]
    fn bounds_reject_small_r() {
        assert!(matches!(cr_bounds(8, 0.5), Err(Error::OutOfRegime(_))));
        assert!(matches!(cr_bounds(8, 0.2), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn classify_examples() {
        let g = GridConfig::classify(8, 2, 4).unwrap();
        assert_eq!(g.regime, Regime::OverAligned);
        assert_eq!((g.tau, g.l), (Some(4), Some(2)));
        assert_eq!(GridConfig::classify(8, 4, 3).unwrap().regime, Regime::Under);
        assert_eq!(
            GridConfig::classify(8, 3, 5).unwrap().regime,
            Regime::OverGeneral
        );
        assert!(GridConfig::classify(8, 2, 9).is_err());
        assert!(GridConfig::classify(8, 9, 2).is_err());
        assert!(GridConfig::classify(8, 0, 2).is_err());
    }

    #[test]
    fn covariance_has_unit_trace() {
        let cov = CoefficientCovariance::new(Spectrum::new(300, 0.8).unwrap(), 1.0).unwrap();
        assert!((cov.trace() - 1.0).abs() < 1e-14);
        assert!(CoefficientCovariance::new(Spectrum::new(3, 1.0).unwrap(), -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn bounds_sandwich_normalizer(d in 1usize..3000, r in 0.51f64..4.0) {
            let s = Spectrum::new(d, r).unwrap();
            let (lo, hi) = cr_bounds(d, r).unwrap();
            proptest::prop_assert!(lo <= s.c_r() * (1.0 + 1e-14));
            proptest::prop_assert!(s.c_r() <= hi * (1.0 + 1e-14));
        }

        #[test]
        fn classification_is_consistent(d in 1usize..200, n_frac in 0.0f64..1.0, p_frac in 0.0f64..1.0) {
            let n = 1 + ((d - 1) as f64 * n_frac) as usize;
            let p = 1 + ((d - 1) as f64 * p_frac) as usize;
            let g = GridConfig::classify(d, n, p).unwrap();
            match g.regime {
                Regime::Under => proptest::prop_assert!(p <= n),
                Regime::OverAligned => proptest::prop_assert!(p > n && p.is_multiple_of(n)),
                Regime::OverGeneral => proptest::prop_assert!(p > n && !p.is_multiple_of(n)),
            }
            proptest::prop_assert_eq!(g.l.is_some(), p.is_multiple_of(n));
        }
    }
}
