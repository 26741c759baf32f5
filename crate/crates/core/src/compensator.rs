//! Output-voltage compensators: a type II integrator/zero/pole stage and a
//! resonant stage tuned to the beat frequency, in continuous form for loop
//! analysis and bilinear-discretized form for the per-cycle duty update.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// How the type II and resonant stages combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `G_c + G_b`, both fed by the error.
    #[default]
    Parallel,
    /// `G_c·(1 + G_b)`.
    Cascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorParams {
    pub k_c: f64,
    /// Zero of the type II stage (Hz).
    pub f_z: f64,
    /// High-frequency pole of the type II stage (Hz).
    pub f_p: f64,
    pub k_b: f64,
    /// Centre of the resonant stage (Hz).
    pub f_b_target: f64,
    /// Output voltage reference (V).
    pub v_ref: f64,
    #[serde(default)]
    pub topology: Topology,
}

impl CompensatorParams {
    /// Type II plus 15 kHz resonant stage used with the default receiver.
    pub fn paper_default(v_ref: f64) -> Self {
        Self {
            k_c: 138.2,
            f_z: 100.0,
            f_p: 10e3,
            k_b: 700.0,
            f_b_target: 15e3,
            v_ref,
            topology: Topology::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("k_c", self.k_c),
            ("f_z", self.f_z),
            ("f_p", self.f_p),
            ("f_b_target", self.f_b_target),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.k_b.is_finite() && self.k_b >= 0.0) {
            return Err(invalid("k_b", format!("must be finite and >= 0, got {}", self.k_b)));
        }
        if self.f_z >= self.f_p {
            return Err(invalid("f_z", "the zero must sit below the pole f_p"));
        }
        if self.f_p >= self.f_b_target {
            return Err(invalid("f_p", "the pole must sit below the beat frequency"));
        }
        if !self.v_ref.is_finite() {
            return Err(invalid("v_ref", "must be finite"));
        }
        Ok(())
    }

    /// `G_c(s) = k_c·(1 + s/ω_z) / (s·(1 + s/ω_p))`.
    pub fn type_ii(&self, s: Complex64) -> Complex64 {
        let wz = 2.0 * PI * self.f_z;
        let wp = 2.0 * PI * self.f_p;
        self.k_c * (1.0 + s / wz) / (s * (1.0 + s / wp))
    }

    /// `G_b(s) = k_b·s / (s² + ω_b²)`.
    pub fn resonant(&self, s: Complex64) -> Complex64 {
        let wb = 2.0 * PI * self.f_b_target;
        self.k_b * s / (s * s + wb * wb)
    }

    pub fn transfer(&self, s: Complex64) -> Complex64 {
        match self.topology {
            Topology::Parallel => self.type_ii(s) + self.resonant(s),
            Topology::Cascade => self.type_ii(s) * (1.0 + self.resonant(s)),
        }
    }

    /// Bilinear discretization at `sample_hz`; the resonant stage is
    /// pre-warped so its peak stays at `f_b_target`.
    pub fn discretize(&self, sample_hz: f64) -> DiscreteCompensator {
        let plain = 2.0 * sample_hz;
        let wz = 2.0 * PI * self.f_z;
        let wp = 2.0 * PI * self.f_p;
        let wb = 2.0 * PI * self.f_b_target;
        let warped = wb / (wb / (2.0 * sample_hz)).tan();
        DiscreteCompensator {
            type_ii: Biquad::bilinear(
                [0.0, self.k_c / wz, self.k_c],
                [1.0 / wp, 1.0, 0.0],
                plain,
            ),
            resonant: Biquad::bilinear([0.0, self.k_b, 0.0], [1.0, 0.0, wb * wb], warped),
            topology: self.topology,
        }
    }
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a[0]` is normalized to 1.
    pub a: [f64; 3],
    s1: f64,
    s2: f64,
}

impl Biquad {
    /// Substitutes `s = c·(1 - z⁻¹)/(1 + z⁻¹)` into
    /// `(n[0]s² + n[1]s + n[2]) / (d[0]s² + d[1]s + d[2])`.
    pub fn bilinear(num: [f64; 3], den: [f64; 3], c: f64) -> Self {
        let map = |p: [f64; 3]| {
            let (q2, q1, q0) = (p[0] * c * c, p[1] * c, p[2]);
            [q2 + q1 + q0, 2.0 * (q0 - q2), q2 - q1 + q0]
        };
        let n = map(num);
        let d = map(den);
        Self {
            b: [n[0] / d[0], n[1] / d[0], n[2] / d[0]],
            a: [1.0, d[1] / d[0], d[2] / d[0]],
            s1: 0.0,
            s2: 0.0,
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[1] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[2] * y;
        y
    }

    /// Frequency response at `z = exp(iθ)`.
    pub fn response(&self, theta: f64) -> Complex64 {
        let z1 = Complex64::cis(-theta);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Sets the state so a zero input holds the output at `y`. Only valid
    /// for sections with a pole at `z = 1`.
    pub fn preload(&mut self, y: f64) {
        debug_assert!((1.0 + self.a[1] + self.a[2]).abs() < 1e-9);
        self.s1 = y;
        self.s2 = -self.a[2] * y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteCompensator {
    pub type_ii: Biquad,
    pub resonant: Biquad,
    pub topology: Topology,
}

impl DiscreteCompensator {
    pub fn step(&mut self, error: f64) -> f64 {
        match self.topology {
            Topology::Parallel => self.type_ii.step(error) + self.resonant.step(error),
            Topology::Cascade => {
                let r = self.resonant.step(error);
                self.type_ii.step(error + r)
            }
        }
    }

    /// Starts the integrator at output `u` (the initial duty).
    pub fn preload(&mut self, u: f64) {
        self.type_ii.preload(u);
    }
}
