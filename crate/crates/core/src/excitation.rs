//! Receiver parameters and the closed-form spectra of its sources: the coil
//! current, the half-wave rectified current and the buck switching function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectral::{FrequencyGrid, HarmonicVector};

/// Physical parameters of the two-stage receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Coil current amplitude `I_Ls` (A).
    pub i_ls_amplitude: f64,
    /// Rectifier (transmission) frequency (Hz).
    pub f1: f64,
    /// Buck switching frequency (Hz).
    pub f2: f64,
    /// Buck duty cycle, `0 < D < 1`.
    pub duty: f64,
    /// DC-link capacitance (F).
    pub c_dc: f64,
    /// Buck inductance (H).
    pub l: f64,
    /// Output capacitance (F).
    pub c_o: f64,
    /// Load resistance (Ω).
    pub r_load: f64,
    /// Delay of the switch-on edge as a fraction of the switching period.
    #[serde(default)]
    pub switch_phase: f64,
}

impl CircuitParams {
    /// Operating point used throughout the multi-frequency model validation:
    /// 1.4 A at 200 kHz into a 185 kHz buck, D = 0.5, 1 µF / 33 µH / 50 µF / 6 Ω.
    pub fn paper_default() -> Self {
        Self {
            i_ls_amplitude: 1.4,
            f1: 200e3,
            f2: 185e3,
            duty: 0.5,
            c_dc: 1e-6,
            l: 33e-6,
            c_o: 50e-6,
            r_load: 6.0,
            switch_phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("i_ls_amplitude", self.i_ls_amplitude),
            ("f1", self.f1),
            ("f2", self.f2),
            ("c_dc", self.c_dc),
            ("l", self.l),
            ("c_o", self.c_o),
            ("r_load", self.r_load),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(invalid("duty", format!("must lie in (0, 1), got {}", self.duty)));
        }
        if !self.switch_phase.is_finite() {
            return Err(invalid("switch_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.f1, self.f2)
    }

    /// DC of the rectified current, `I_Ls/π`.
    pub fn rectified_dc(&self) -> f64 {
        self.i_ls_amplitude / PI
    }

    /// Lossless averaged operating point `(v_dc, i_l, v_o)`: the load power
    /// `v_o²/R` equals the input power `v_dc·I_Ls/π` and `v_o = D·v_dc`.
    pub fn averaged_operating_point(&self) -> (f64, f64, f64) {
        let v_o = self.rectified_dc() * self.r_load / self.duty;
        (v_o / self.duty, v_o / self.r_load, v_o)
    }
}

/// `i_Ls(t) = I_Ls·sin(2π f1 t)`: lines `∓i·I_Ls/2` at `k = ±M1`.
pub fn coil_current_spectrum(params: &CircuitParams, grid: &FrequencyGrid) -> HarmonicVector {
    let m1 = grid.m1() as i64;
    let half = 0.5 * params.i_ls_amplitude;
    HarmonicVector::from_fn(grid.k_max(), grid.f_base(), |k| match k {
        k if k == m1 => Complex64::new(0.0, -half),
        k if k == -m1 => Complex64::new(0.0, half),
        _ => Complex64::default(),
    })
}

/// Half-wave rectified coil current truncated to `2·f1`:
/// `I_Ls/π` at DC, `∓i·I_Ls/4` at `±M1`, `-I_Ls/(3π)` at `±2M1`.
pub fn rectified_current_spectrum(params: &CircuitParams, grid: &FrequencyGrid) -> HarmonicVector {
    let m1 = grid.m1() as i64;
    let i = params.i_ls_amplitude;
    HarmonicVector::from_fn(grid.k_max(), grid.f_base(), |k| {
        if k == 0 {
            Complex64::new(i / PI, 0.0)
        } else if k.abs() == m1 {
            Complex64::new(0.0, -0.25 * i * k.signum() as f64)
        } else if k.abs() == 2 * m1 {
            Complex64::new(-i / (3.0 * PI), 0.0)
        } else {
            Complex64::default()
        }
    })
}

/// Truncation order of the switching spectrum, twice the state order so
/// the convolution matrix is fully populated.
fn switching_order(grid: &FrequencyGrid) -> usize {
    2 * grid.k_max()
}

/// Switching function spectrum to `|k| <= 2K` with the on-edge at `t = n/f2`.
pub fn switching_spectrum(duty: f64, grid: &FrequencyGrid) -> HarmonicVector {
    switching_spectrum_shifted(duty, 0.0, grid)
}

/// Switching function spectrum with the on-edge delayed by `phase/f2`.
///
/// For `k = j·M2, j > 0`: `(M2/(2πik))·(1 - exp(-i2πjD))`, times the shift
/// factor `exp(-i2πj·phase)`. Negative multiples are the conjugates.
pub fn switching_spectrum_shifted(duty: f64, phase: f64, grid: &FrequencyGrid) -> HarmonicVector {
    let m2 = grid.m2() as i64;
    HarmonicVector::from_fn(switching_order(grid), grid.f_base(), |k| {
        if k == 0 {
            return Complex64::new(duty, 0.0);
        }
        if k % m2 != 0 {
            return Complex64::default();
        }
        let j = k.abs() / m2;
        let jf = j as f64;
        let line = (1.0 - Complex64::cis(-2.0 * PI * jf * duty))
            / Complex64::new(0.0, 2.0 * PI * jf)
            * Complex64::cis(-2.0 * PI * jf * phase);
        if k > 0 {
            line
        } else {
            line.conj()
        }
    })
}

/// Entrywise derivative of [`switching_spectrum`] with respect to the duty.
pub fn switching_spectrum_derivative(duty: f64, grid: &FrequencyGrid) -> HarmonicVector {
    switching_spectrum_derivative_shifted(duty, 0.0, grid)
}

/// `d/dD` of [`switching_spectrum_shifted`]: 1 at DC and
/// `exp(-i2πj(D + phase))` at `k = j·M2` (conjugates for `j < 0`).
pub fn switching_spectrum_derivative_shifted(
    duty: f64,
    phase: f64,
    grid: &FrequencyGrid,
) -> HarmonicVector {
    let m2 = grid.m2() as i64;
    HarmonicVector::from_fn(switching_order(grid), grid.f_base(), |k| {
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else if k % m2 != 0 {
            Complex64::default()
        } else {
            let j = (k / m2) as f64;
            Complex64::cis(-2.0 * PI * j * (duty + phase))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::evaluate_waveform;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn paper() -> (CircuitParams, FrequencyGrid) {
        let p = CircuitParams::paper_default();
        (p, p.grid().unwrap())
    }

    /// Midpoint-rule Fourier coefficient of `f` over one base period.
    fn numeric_coefficient(f: impl Fn(f64) -> f64, f_base: f64, k: i64, samples: usize) -> Complex64 {
        let period = 1.0 / f_base;
        let dt = period / samples as f64;
        (0..samples)
            .map(|n| {
                let t = (n as f64 + 0.5) * dt;
                f(t) * Complex64::cis(-2.0 * PI * k as f64 * f_base * t)
            })
            .sum::<Complex64>()
            / samples as f64
    }

    fn square_wave(duty: f64, f2: f64) -> impl Fn(f64) -> f64 {
        move |t: f64| if (t * f2).rem_euclid(1.0) < duty { 1.0 } else { 0.0 }
    }

    #[test]
    fn coil_current_lines() {
        let (p, g) = paper();
        let s = coil_current_spectrum(&p, &g);
        assert_eq!(s.get(40).unwrap(), Complex64::new(0.0, -0.7));
        assert_eq!(s.get(-40).unwrap(), Complex64::new(0.0, 0.7));
        assert_eq!(s.get(0).unwrap(), Complex64::default());
        assert_relative_eq!(
            evaluate_waveform(&s, 1.0 / (4.0 * p.f1)).unwrap(),
            1.4,
            epsilon = 1e-12
        );
        let zero = CircuitParams {
            i_ls_amplitude: 0.0,
            ..p
        };
        assert_eq!(coil_current_spectrum(&zero, &g).max_abs(), 0.0);
    }

    #[test]
    fn rectified_current_lines() {
        let (p, g) = paper();
        let s = rectified_current_spectrum(&p, &g);
        assert_eq!(s.get(40).unwrap(), Complex64::new(0.0, -0.35));
        assert_relative_eq!(s.get(80).unwrap().re, -0.148_544_1, epsilon = 1e-6);
        assert_eq!(s.get(0).unwrap().re * PI, 1.4);
        assert!(s.conjugate_symmetry_error() == 0.0);
    }

    #[test]
    fn rectified_dc_matches_numeric_average() {
        let (p, g) = paper();
        let i_r = |t: f64| {
            let x = (p.i_ls_amplitude * (2.0 * PI * p.f1 * t).sin()).max(0.0);
            x
        };
        let dc = numeric_coefficient(i_r, g.f1(), 0, 200_000).re;
        assert_relative_eq!(dc, 0.445_633_8, epsilon = 1e-6);
        let s = rectified_current_spectrum(&p, &g);
        assert_relative_eq!(s.get(0).unwrap().re, dc, epsilon = 1e-8);
    }

    #[test]
    fn rectified_waveform_peaks_and_blocks() {
        let (p, g) = paper();
        let s = rectified_current_spectrum(&p, &g);
        let peak = evaluate_waveform(&s, 1.0 / (4.0 * p.f1)).unwrap();
        assert!((peak - 1.4).abs() <= 0.1, "peak {peak}");
        for frac in [0.6, 0.75, 0.9] {
            let v = evaluate_waveform(&s, frac / p.f1).unwrap();
            assert!(v.abs() <= 0.12 * 1.4, "blocking value {v} at {frac}");
        }
    }

    #[test]
    fn switching_spectrum_half_duty() {
        let (_, g) = paper();
        let s = switching_spectrum(0.5, &g);
        assert_eq!(s.k_max(), 160);
        assert_relative_eq!(s.get(37).unwrap().im, -1.0 / PI, epsilon = 1e-15);
        assert!(s.get(37).unwrap().re.abs() < 1e-15);
        assert!(s.get(74).unwrap().norm() < 1e-15);
        assert_eq!(s.get(1).unwrap(), Complex64::default());
        // Numeric Fourier integral of the square wave.
        let num = numeric_coefficient(square_wave(0.5, g.f2()), g.f_base(), 37, 370_000);
        assert!((num - s.get(37).unwrap()).norm() < 1e-5);
    }

    #[test]
    fn switching_spectrum_matches_quadrature_off_half_duty() {
        let (_, g) = paper();
        let d = 0.3;
        let s = switching_spectrum(d, &g);
        for k in [0, 37, -37, 74, 111, 148, 40] {
            let num = numeric_coefficient(square_wave(d, g.f2()), g.f_base(), k, 370_000);
            assert!((num - s.at(k)).norm() < 1e-5, "k = {k}");
        }
    }

    #[test]
    fn shifted_spectrum_matches_quadrature() {
        let (_, g) = paper();
        let (d, phase) = (0.4, 0.25);
        let s = switching_spectrum_shifted(d, phase, &g);
        let wave = |t: f64| if (t * g.f2() - phase).rem_euclid(1.0) < d { 1.0 } else { 0.0 };
        for k in [37, -74, 111] {
            let num = numeric_coefficient(wave, g.f_base(), k, 370_000);
            assert!((num - s.at(k)).norm() < 1e-5, "k = {k}");
        }
    }

    #[test]
    fn always_on_limit() {
        let (_, g) = paper();
        let s = switching_spectrum(1.0 - 1e-12, &g);
        assert_relative_eq!(s.get(0).unwrap().re, 1.0, epsilon = 1e-11);
        assert!(s.harmonics().filter(|(k, _)| *k != 0).all(|(_, c)| c.norm() < 1e-11));
    }

    #[test]
    fn derivative_values() {
        let (_, g) = paper();
        let ds = switching_spectrum_derivative(0.5, &g);
        assert_eq!(ds.get(0).unwrap(), Complex64::new(1.0, 0.0));
        assert_relative_eq!(ds.get(37).unwrap().re, -1.0, epsilon = 1e-15);
        assert!(ds.get(37).unwrap().im.abs() < 1e-15);
        assert_eq!(ds.get(38).unwrap(), Complex64::default());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let (_, g) = paper();
        let (d, h) = (0.4, 1e-6);
        let plus = switching_spectrum(d + h, &g);
        let minus = switching_spectrum(d - h, &g);
        let ds = switching_spectrum_derivative(d, &g);
        for (k, exact) in ds.harmonics() {
            let fd = (plus.at(k) - minus.at(k)) / (2.0 * h);
            let err = (fd - exact).norm();
            assert!(err <= 1e-6 * exact.norm().max(1e-300) || err < 1e-12, "k = {k}");
        }
    }

    proptest! {
        #[test]
        fn spectra_are_conjugate_symmetric(d in 0.01f64..0.99, phase in 0.0f64..1.0, i in 0.1f64..5.0) {
            let g = FrequencyGrid::new(200e3, 185e3).unwrap();
            let p = CircuitParams { i_ls_amplitude: i, duty: d, ..CircuitParams::paper_default() };
            prop_assert!(coil_current_spectrum(&p, &g).conjugate_symmetry_error() < 1e-15);
            prop_assert!(rectified_current_spectrum(&p, &g).conjugate_symmetry_error() < 1e-15);
            prop_assert!(switching_spectrum_shifted(d, phase, &g).conjugate_symmetry_error() < 1e-14);
            prop_assert!(switching_spectrum_derivative_shifted(d, phase, &g).conjugate_symmetry_error() < 1e-14);
        }

        /// Mean of s² is D; the partial Parseval sum approaches it from below.
        #[test]
        fn parseval_converges_from_below(d in 0.2f64..0.8) {
            let g = FrequencyGrid::new(200e3, 185e3).unwrap().with_truncation(40 * 37);
            let s = switching_spectrum(d, &g);
            let energy: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
            prop_assert!(energy <= d + 1e-12);
            prop_assert!((d - energy) / d <= 0.02, "{} vs {}", energy, d);
        }
    }

    #[test]
    fn validation_names_fields() {
        let p = CircuitParams {
            duty: 1.0,
            ..CircuitParams::paper_default()
        };
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("duty"), "{msg}");
        let p = CircuitParams {
            c_o: 0.0,
            ..CircuitParams::paper_default()
        };
        assert!(p.validate().unwrap_err().to_string().contains("c_o"));
    }
}
