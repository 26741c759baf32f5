//! Common frequency grid and the multi-frequency algebra built on it.
//!
//! Every periodic signal in the receiver is represented by its Fourier
//! coefficients on a base frequency `f_base = gcd(f1, f2)`. Coefficient
//! vectors and the matrices acting on them share one fixed ordering:
//! position 0 holds harmonic `+K`, the middle holds DC and the last
//! position holds `-K`. That ordering is part of the public contract.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Largest M1 (and M2) accepted when rationalizing the two frequencies.
pub const DEFAULT_MAX_M1: u64 = 4000;
/// Relative error allowed when rounding each frequency to integer Hz.
pub const DEFAULT_RATIONALIZATION_TOLERANCE: f64 = 1e-6;
/// Imaginary residue allowed in [`evaluate_waveform`], relative to the
/// largest coefficient magnitude.
pub const NON_REAL_TOLERANCE: f64 = 1e-9;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Harmonic bookkeeping for the rectifier frequency `f1 = m1·f_base` and
/// the converter switching frequency `f2 = m2·f_base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyGrid {
    f_base: f64,
    m1: u32,
    m2: u32,
    k_max: usize,
}

/// Builds the coarsest grid holding both frequencies, using the default
/// `M1` limit. See [`FrequencyGrid::with_limits`].
pub fn build_frequency_grid(f1: f64, f2: f64, tolerance: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::with_limits(f1, f2, tolerance, DEFAULT_MAX_M1)
}

impl FrequencyGrid {
    pub fn new(f1: f64, f2: f64) -> Result<Self> {
        build_frequency_grid(f1, f2, DEFAULT_RATIONALIZATION_TOLERANCE)
    }

    /// Rounds both frequencies to integer Hz and takes their gcd as the base
    /// frequency. State truncation defaults to `K = 2·m1`.
    pub fn with_limits(f1: f64, f2: f64, tolerance: f64, max_m1: u64) -> Result<Self> {
        if !(f1.is_finite() && f1 > 0.0) {
            return Err(invalid("f1", format!("must be positive, got {f1}")));
        }
        if !(f2.is_finite() && f2 > 0.0) {
            return Err(invalid("f2", format!("must be positive, got {f2}")));
        }
        let r1 = f1.round();
        let r2 = f2.round();
        let rel_error = ((r1 - f1).abs() / f1).max((r2 - f2).abs() / f2);
        let fail = |m1: u64| Error::RationalizationFailure {
            f1,
            f2,
            m1,
            max_m1,
            rel_error,
        };
        if r1 < 1.0 || r2 < 1.0 || rel_error > tolerance {
            return Err(fail(0));
        }
        let (i1, i2) = (r1 as u64, r2 as u64);
        let g = gcd(i1, i2);
        let (m1, m2) = (i1 / g, i2 / g);
        // Limit both multipliers so the check is symmetric in f1 and f2.
        if m1.max(m2) > max_m1 {
            return Err(fail(m1));
        }
        Ok(Self {
            f_base: g as f64,
            m1: m1 as u32,
            m2: m2 as u32,
            k_max: 2 * m1 as usize,
        })
    }

    /// Same grid with a different state truncation order.
    pub fn with_truncation(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn f_base(&self) -> f64 {
        self.f_base
    }
    pub fn m1(&self) -> u32 {
        self.m1
    }
    pub fn m2(&self) -> u32 {
        self.m2
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn f1(&self) -> f64 {
        self.m1 as f64 * self.f_base
    }
    pub fn f2(&self) -> f64 {
        self.m2 as f64 * self.f_base
    }
    /// `|m1 - m2|`; zero for synchronized stages.
    pub fn beat_index(&self) -> u32 {
        self.m1.abs_diff(self.m2)
    }
    pub fn beat_frequency(&self) -> f64 {
        self.beat_index() as f64 * self.f_base
    }
    pub fn base_period(&self) -> f64 {
        1.0 / self.f_base
    }
    /// Number of harmonics held by a state vector, `2K + 1`.
    pub fn len(&self) -> usize {
        2 * self.k_max + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Fourier coefficients of one real periodic signal for `k = -K..=K`, stored
/// in the order `+K, …, 0, …, -K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicVector {
    coeffs: Vec<Complex64>,
    k_max: usize,
    f_base: f64,
}

impl HarmonicVector {
    pub fn zeros(k_max: usize, f_base: f64) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1],
            k_max,
            f_base,
        }
    }

    pub fn from_fn(k_max: usize, f_base: f64, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let kk = k_max as i64;
        let coeffs = (0..=2 * kk).map(|p| f(kk - p)).collect();
        Self {
            coeffs,
            k_max,
            f_base,
        }
    }

    /// Wraps coefficients already in `+K..-K` order.
    pub fn from_ordered(coeffs: Vec<Complex64>, f_base: f64) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(invalid(
                "coeffs",
                format!("length must be odd (2K+1), got {}", coeffs.len()),
            ));
        }
        let k_max = coeffs.len() / 2;
        Ok(Self {
            coeffs,
            k_max,
            f_base,
        })
    }

    pub fn from_dvector(v: &DVector<Complex64>, f_base: f64) -> Result<Self> {
        Self::from_ordered(v.iter().copied().collect(), f_base)
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coeffs)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn f_base(&self) -> f64 {
        self.f_base
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn position(&self, k: i64) -> Option<usize> {
        (k.unsigned_abs() as usize <= self.k_max).then(|| (self.k_max as i64 - k) as usize)
    }

    pub fn get(&self, k: i64) -> Option<Complex64> {
        self.position(k).map(|p| self.coeffs[p])
    }

    /// Coefficient at `k`, zero outside the stored range.
    pub fn at(&self, k: i64) -> Complex64 {
        self.get(k).unwrap_or_default()
    }

    pub fn checked_get(&self, k: i64) -> Result<Complex64> {
        self.get(k).ok_or(Error::IndexOutOfGrid {
            k,
            k_max: self.k_max,
        })
    }

    /// Panics if `k` lies outside the grid.
    pub fn set(&mut self, k: i64, value: Complex64) {
        let p = self
            .position(k)
            .unwrap_or_else(|| panic!("harmonic {k} outside |k| <= {}", self.k_max));
        self.coeffs[p] = value;
    }

    /// `(k, coefficient)` pairs in storage order.
    pub fn harmonics(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let kk = self.k_max as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(p, c)| (kk - p as i64, *c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|c[-k] - conj(c[k])|` relative to the largest coefficient.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.coeffs.len();
        (0..=self.k_max)
            .map(|p| (self.coeffs[n - 1 - p] - self.coeffs[p].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// Copy truncated or zero-padded to a new order.
    pub fn resized(&self, k_max: usize) -> Self {
        Self::from_fn(k_max, self.f_base, |k| self.at(k))
    }

    /// Real-signal amplitude of line `k`: `2|c_k|` for `k != 0`, `|c_0|` at DC.
    pub fn line_amplitude(&self, k: i64) -> Result<f64> {
        let c = self.checked_get(k)?;
        Ok(if k == 0 { c.norm() } else { 2.0 * c.norm() })
    }
}

/// Diagonal of the differentiation operator, `i·2πk·f_base` in storage order.
pub fn differentiation_diagonal(grid: &FrequencyGrid, k_max: usize) -> Vec<Complex64> {
    let kk = k_max as i64;
    (0..=2 * kk)
        .map(|p| Complex64::new(0.0, 2.0 * PI * (kk - p) as f64 * grid.f_base()))
        .collect()
}

/// `(2K+1)×(2K+1)` diagonal matrix mapping coefficients of a signal to the
/// coefficients of its time derivative.
pub fn differentiation_matrix(grid: &FrequencyGrid, k_max: usize) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_vec(differentiation_diagonal(grid, k_max)))
}

/// Toeplitz matrix `T[r][c] = spectrum⟨k_r - k_c⟩` of size `(2K+1)²`.
///
/// `T·x` holds the coefficients of the product of the two time signals,
/// truncated to `|k| <= K`. Entries of `spectrum` beyond its own order are
/// taken as zero.
pub fn convolution_matrix(spectrum: &HarmonicVector, k_max: usize) -> DMatrix<Complex64> {
    let n = 2 * k_max + 1;
    let kk = k_max as i64;
    // k_r - k_c = c - r, so diagonal d = c - r carries spectrum<d>.
    let diag: Vec<Complex64> = (-(2 * kk)..=2 * kk).map(|d| spectrum.at(d)).collect();
    DMatrix::from_fn(n, n, |r, c| diag[(c as i64 - r as i64 + 2 * kk) as usize])
}

/// Real value of `Σ c_k·exp(i2πk·f_base·t)`.
pub fn evaluate_waveform(h: &HarmonicVector, t: f64) -> Result<f64> {
    // Reduce the phase first so large t does not cost precision.
    let cycle = (h.f_base * t).rem_euclid(1.0);
    let sum: Complex64 = h
        .harmonics()
        .map(|(k, c)| c * Complex64::cis(2.0 * PI * ((k as f64 * cycle).rem_euclid(1.0))))
        .sum();
    let limit = NON_REAL_TOLERANCE * h.max_abs();
    if sum.im.abs() > limit {
        return Err(Error::NonRealResult {
            residue: sum.im.abs(),
            limit,
        });
    }
    Ok(sum.re)
}
