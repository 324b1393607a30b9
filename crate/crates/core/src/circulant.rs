//! Equispaced Fourier features and the circulant Gram matrices they induce.
//!
//! Feature entries are `F[j, k] = exp(-2 pi i j k / n)`. Columns `k` and
//! `k + n` coincide, so for `p = l n` the Gram matrix
//! `A_u = F_T Sigma_T^u F_T^*` is circulant and diagonalized by the
//! feature columns themselves: column `s` is an eigenvector with eigenvalue
//! `n * sum_nu t_{s + n nu}^u`. The opposite sign convention conjugates
//! every entry and leaves all Gram matrices and risks unchanged.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{GridConfig, Spectrum};

/// `exp(-2 pi i m / n)` with `m` reduced modulo `n` first.
#[inline]
pub fn root_of_unity(m: usize, n: usize) -> Complex64 {
    let phase = -2.0 * PI * ((m % n) as f64) / n as f64;
    Complex64::from_polar(1.0, phase)
}

/// Equispaced Fourier feature block restricted to a column range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierFeatures {
    pub n: usize,
    pub cols: Range<usize>,
}

impl FourierFeatures {
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        root_of_unity(row * col, self.n)
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// Materializes the `n x |cols|` matrix.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let start = self.cols.start;
        DMatrix::from_fn(self.n, self.cols.len(), |j, k| {
            root_of_unity(j * (start + k), self.n)
        })
    }
}

/// Feature block for columns `cols` of the `n x D` equispaced model.
pub fn feature_matrix(grid: &GridConfig, cols: Range<usize>) -> Result<FourierFeatures> {
    if cols.is_empty() {
        return Err(Error::InvalidRange(format!(
            "empty column range {}..{}",
            cols.start, cols.end
        )));
    }
    if cols.end > grid.dim {
        return Err(Error::InvalidRange(format!(
            "column range {}..{} exceeds D={}",
            cols.start, cols.end, grid.dim
        )));
    }
    Ok(FourierFeatures { n: grid.n, cols })
}

/// Which block of the model a Gram matrix is formed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Retained features `T = [0, p)`.
    T,
    /// Discarded features `T^c = [p, D)`.
    Tc,
}

/// Eigenvalues of `A_u` (side `T`) or `C_u` (side `Tc`), indexed by DFT
/// frequency `s = 0..n` without sorting.
pub fn gram_eigenvalues(
    spectrum: &Spectrum,
    grid: &GridConfig,
    u: f64,
    side: Side,
) -> Result<Vec<f64>> {
    check_spectrum(spectrum, grid)?;
    let n = grid.n;
    let nu_range = match side {
        Side::T => {
            let l = grid.l.ok_or_else(|| {
                Error::StructureViolation(format!("p={} is not a multiple of n={n}", grid.p))
            })?;
            0..l
        }
        Side::Tc => {
            let (tau, l) = grid.require_aligned()?;
            l..tau
        }
    };
    Ok((0..n)
        .map(|s| {
            let sum: f64 = nu_range
                .clone()
                .map(|nu| spectrum.pow(s + n * nu, u))
                .sum();
            n as f64 * sum
        })
        .collect())
}

pub(crate) fn check_spectrum(spectrum: &Spectrum, grid: &GridConfig) -> Result<()> {
    if spectrum.dim() != grid.dim {
        return Err(Error::InvalidConfiguration(format!(
            "spectrum has D={} but grid has D={}",
            spectrum.dim(),
            grid.dim
        )));
    }
    Ok(())
}

/// A circulant matrix `C[j1, j2] = c[(j1 - j2) mod n]` stored through its
/// first column and its eigenvalues.
///
/// `eigenvalues[s]` belongs to the eigenvector `(exp(-2 pi i s j / n))_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantGram {
    pub n: usize,
    pub first_column: Vec<Complex64>,
    pub eigenvalues: Vec<Complex64>,
}

impl CirculantGram {
    pub fn from_first_column(first_column: Vec<Complex64>) -> Result<Self> {
        let n = first_column.len();
        if n == 0 {
            return Err(Error::InvalidDimension("empty circulant".into()));
        }
        let mut eigenvalues = first_column.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut eigenvalues);
        Ok(Self {
            n,
            first_column,
            eigenvalues,
        })
    }

    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::InvalidDimension("empty circulant".into()));
        }
        let mut first_column = eigenvalues.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut first_column);
        let scale = 1.0 / n as f64;
        first_column.iter_mut().for_each(|c| *c *= scale);
        Ok(Self {
            n,
            first_column,
            eigenvalues,
        })
    }

    /// The Gram matrix `A_u` or `C_u` of an aligned grid.
    pub fn gram(spectrum: &Spectrum, grid: &GridConfig, u: f64, side: Side) -> Result<Self> {
        let eig = gram_eigenvalues(spectrum, grid, u, side)?;
        Self::from_eigenvalues(eig.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn dense(&self) -> DMatrix<Complex64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j1, j2| self.first_column[(j1 + n - j2) % n])
    }

    /// Eigenvalues as reals, rejecting any with a non-negligible imaginary
    /// part.
    pub fn real_eigenvalues(&self) -> Result<Vec<f64>> {
        let scale = self
            .eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        self.eigenvalues
            .iter()
            .map(|z| {
                if z.im.abs() <= 1e-10 * scale {
                    Ok(z.re)
                } else {
                    Err(Error::NumericalInconsistency(format!(
                        "eigenvalue {z} is not real"
                    )))
                }
            })
            .collect()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x)?;
        let mut planner = FftPlanner::new();
        let mut buf = x.to_vec();
        planner.plan_fft_inverse(self.n).process(&mut buf);
        for (b, lam) in buf.iter_mut().zip(&self.eigenvalues) {
            *b *= lam;
        }
        planner.plan_fft_forward(self.n).process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|b| *b *= scale);
        Ok(buf)
    }

    fn check_len(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidDimension(format!(
                "vector of length {} for circulant of order {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Solves `gram * x = rhs` by transforming into the eigenbasis, dividing by
/// the eigenvalues and transforming back.
pub fn circulant_solve(gram: &CirculantGram, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    gram.check_len(rhs)?;
    let scale = gram
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if let Some(s) = gram
        .eigenvalues
        .iter()
        .position(|z| z.norm() <= f64::EPSILON * scale || z.norm() == 0.0)
    {
        return Err(Error::SingularSystem(format!(
            "circulant eigenvalue {s} is zero"
        )));
    }
    let mut planner = FftPlanner::new();
    let mut buf = rhs.to_vec();
    planner.plan_fft_inverse(gram.n).process(&mut buf);
    for (b, lam) in buf.iter_mut().zip(&gram.eigenvalues) {
        *b /= lam;
    }
    planner.plan_fft_forward(gram.n).process(&mut buf);
    let inv_n = 1.0 / gram.n as f64;
    buf.iter_mut().for_each(|b| *b *= inv_n);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn dft2_block() {
        let grid = GridConfig::classify(4, 2, 2).unwrap();
        let f = feature_matrix(&grid, 0..2).unwrap().dense();
        let expected = [[1.0, 1.0], [1.0, -1.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((f[(j, k)] - c(expected[j][k], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn aligned_rows_are_orthogonal() {
        for (d, n, p) in [(4, 2, 4), (3, 3, 3), (12, 3, 9), (20, 5, 10)] {
            let grid = GridConfig::classify(d, n, p).unwrap();
            let f = feature_matrix(&grid, 0..p).unwrap().dense();
            let g = &f * f.adjoint();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { p as f64 } else { 0.0 };
                    assert!((g[(i, j)] - c(want, 0.0)).norm() < 1e-10, "{d} {n} {p}");
                }
            }
            assert!(f.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn empty_or_out_of_bounds_range_rejected() {
        let grid = GridConfig::classify(8, 2, 4).unwrap();
        assert!(matches!(feature_matrix(&grid, 3..3), Err(Error::InvalidRange(_))));
        assert!(matches!(feature_matrix(&grid, 4..9), Err(Error::InvalidRange(_))));
    }

    #[test]
    fn small_gram_eigenvalues() {
        let s = Spectrum::new(4, 1.0).unwrap();
        let grid = GridConfig::classify(4, 2, 2).unwrap();
        let t = gram_eigenvalues(&s, &grid, 2.0, Side::T).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-15 && (t[1] - 0.5).abs() < 1e-15);
        let tc = gram_eigenvalues(&s, &grid, 2.0, Side::Tc).unwrap();
        assert!((tc[0] - 2.0 / 9.0).abs() < 1e-15 && (tc[1] - 0.125).abs() < 1e-15);
        let flat = gram_eigenvalues(&s, &GridConfig::classify(4, 2, 4).unwrap(), 0.0, Side::T)
            .unwrap();
        assert!(flat.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn misaligned_grid_rejected() {
        let s = Spectrum::new(8, 1.0).unwrap();
        let g = GridConfig::classify(8, 3, 5).unwrap();
        assert!(matches!(
            gram_eigenvalues(&s, &g, 1.0, Side::T),
            Err(Error::StructureViolation(_))
        ));
        let g = GridConfig::classify(7, 2, 4).unwrap();
        assert!(gram_eigenvalues(&s, &g, 1.0, Side::T).is_err());
        let s7 = Spectrum::new(7, 1.0).unwrap();
        assert!(gram_eigenvalues(&s7, &g, 1.0, Side::T).is_ok());
        assert!(matches!(
            gram_eigenvalues(&s7, &g, 1.0, Side::Tc),
            Err(Error::StructureViolation(_))
        ));
    }

    #[test]
    fn eigenvalues_match_dense_gram() {
        for (d, n, p) in [(8, 2, 4), (12, 3, 6), (16, 4, 4), (30, 5, 15), (14, 7, 7)] {
            let grid = GridConfig::classify(d, n, p).unwrap();
            for r in [0.3, 1.0] {
                let s = Spectrum::new(d, r).unwrap();
                for q in [0.5, 1.0] {
                    for u in [0.0, 2.0 * q, 4.0 * q, 2.0 * q + 2.0 * r] {
                        for (side, cols) in [(Side::T, 0..p), (Side::Tc, p..d)] {
                            if cols.is_empty() {
                                continue;
                            }
                            let f = feature_matrix(&grid, cols.clone()).unwrap().dense();
                            let w = DMatrix::from_diagonal(&DVector::from_iterator(
                                cols.len(),
                                cols.clone().map(|k| c(s.pow(k, u), 0.0)),
                            ));
                            let dense = &f * w * f.adjoint();
                            let mut want: Vec<f64> =
                                dense.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
                            want.sort_by(f64::total_cmp);
                            let eig = gram_eigenvalues(&s, &grid, u, side).unwrap();
                            let mut got = eig.clone();
                            got.sort_by(f64::total_cmp);
                            for (a, b) in got.iter().zip(&want) {
                                assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
                            }
                            // positional check through the feature eigenvectors
                            let fft_gram = CirculantGram::from_first_column(
                                dense.column(0).iter().copied().collect(),
                            )
                            .unwrap();
                            let real = fft_gram.real_eigenvalues().unwrap();
                            for (a, b) in real.iter().zip(&eig) {
                                assert!((a - b).abs() <= 1e-9 * b.abs());
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 8, 12, 17] {
            let col = random_vec(&mut rng, n);
            let g = CirculantGram::from_first_column(col).unwrap();
            let x = random_vec(&mut rng, n);
            let want: Vec<Complex64> =
                (g.dense() * DVector::from_vec(x.clone())).iter().copied().collect();
            assert!(rel_err(&g.matvec(&x).unwrap(), &want) < 1e-10);
        }
    }

    #[test]
    fn solve_identity_and_scaled_identity() {
        let rhs = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0)];
        let id = CirculantGram::from_first_column(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(rel_err(&circulant_solve(&id, &rhs).unwrap(), &rhs) < 1e-15);
        let scaled =
            CirculantGram::from_first_column(vec![c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let want: Vec<Complex64> = rhs.iter().map(|z| z / 4.0).collect();
        assert!(rel_err(&circulant_solve(&scaled, &rhs).unwrap(), &want) < 1e-15);
    }

    #[test]
    fn solve_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut col = random_vec(&mut rng, 8);
            col[0] += c(6.0, 0.0);
            let g = CirculantGram::from_first_column(col).unwrap();
            let rhs = random_vec(&mut rng, 8);
            let want = g.dense().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            let want: Vec<Complex64> = want.iter().copied().collect();
            assert!(rel_err(&circulant_solve(&g, &rhs).unwrap(), &want) < 1e-9);
        }
    }

    #[test]
    fn solve_recovers_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Spectrum::new(60, 1.0).unwrap();
        let grid = GridConfig::classify(60, 12, 36).unwrap();
        let g = CirculantGram::gram(&s, &grid, 2.0, Side::T).unwrap();
        let x = random_vec(&mut rng, 12);
        let b = g.matvec(&x).unwrap();
        assert!(rel_err(&circulant_solve(&g, &b).unwrap(), &x) < 1e-9);
    }

    #[test]
    fn singular_circulant_rejected() {
        // all-ones first column has eigenvalues (n, 0, ..., 0)
        let g = CirculantGram::from_first_column(vec![c(1.0, 0.0); 4]).unwrap();
        assert!(matches!(
            circulant_solve(&g, &[c(1.0, 0.0); 4]),
            Err(Error::SingularSystem(_))
        ));
    }
}
