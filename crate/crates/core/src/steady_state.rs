//! Multi-frequency model of the receiver and its periodic steady state.
//!
//! The three state equations
//!
//! ```text
//! C_DC·dv_dc/dt = i_r - s_sw·i_L
//! L·di_L/dt     = s_sw·v_dc - v_o
//! C_o·dv_o/dt   = i_L - v_o/R
//! ```
//!
//! become, on the harmonic grid, `dX/dt = A·X + b` with `X = [V_DC; I_L; V_o]`.
//! Time products turn into Toeplitz convolutions with the switching
//! spectrum and `d/dt` adds `-Ω` on the diagonal. The steady state is the
//! single solve `X = -A⁻¹·b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{rectified_current_spectrum, switching_spectrum_shifted, CircuitParams};
use crate::linalg::LuFactors;
use crate::spectral::{convolution_matrix, differentiation_diagonal, FrequencyGrid, HarmonicVector};

/// Solves with a condition estimate above this are rejected as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// The state signals carried by the harmonic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    VDc,
    IL,
    VO,
}

impl Signal {
    pub const ALL: [Signal; 3] = [Signal::VDc, Signal::IL, Signal::VO];

    pub fn name(self) -> &'static str {
        match self {
            Signal::VDc => "v_dc",
            Signal::IL => "i_l",
            Signal::VO => "v_o",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Signal::IL => "A",
            _ => "V",
        }
    }

    pub fn block(self) -> usize {
        match self {
            Signal::VDc => 0,
            Signal::IL => 1,
            Signal::VO => 2,
        }
    }
}

/// Assembled linear system; each block is `(2K+1)` square.
#[derive(Debug, Clone)]
pub struct HarmonicSystem {
    pub a: DMatrix<Complex64>,
    pub b: DVector<Complex64>,
    pub grid: FrequencyGrid,
}

impl HarmonicSystem {
    pub fn block_len(&self) -> usize {
        self.grid.len()
    }

    /// Block `(row, col)` of `A`, zero-based.
    pub fn block(&self, row: usize, col: usize) -> DMatrix<Complex64> {
        let n = self.block_len();
        self.a.view((row * n, col * n), (n, n)).into_owned()
    }
}

pub fn assemble_system(params: &CircuitParams, grid: &FrequencyGrid) -> Result<HarmonicSystem> {
    params.validate()?;
    let k = grid.k_max();
    let n = grid.len();
    let s_sw = convolution_matrix(
        &switching_spectrum_shifted(params.duty, params.switch_phase, grid),
        k,
    );
    let omega = differentiation_diagonal(grid, k);
    let real = |x: f64| Complex64::new(x, 0.0);

    let mut a = DMatrix::<Complex64>::zeros(3 * n, 3 * n);
    a.view_mut((0, n), (n, n)).copy_from(&(&s_sw * real(-1.0 / params.c_dc)));
    a.view_mut((n, 0), (n, n)).copy_from(&(&s_sw * real(1.0 / params.l)));
    for (i, w) in omega.iter().enumerate() {
        a[(i, i)] = -w;
        a[(n + i, n + i)] = -w;
        a[(2 * n + i, 2 * n + i)] = -w - real(1.0 / (params.r_load * params.c_o));
        a[(n + i, 2 * n + i)] = real(-1.0 / params.l);
        a[(2 * n + i, n + i)] = real(1.0 / params.c_o);
    }

    let i_r = rectified_current_spectrum(params, grid);
    let mut b = DVector::<Complex64>::zeros(3 * n);
    for (i, c) in i_r.coeffs().iter().enumerate() {
        b[i] = c / params.c_dc;
    }
    Ok(HarmonicSystem {
        a,
        b,
        grid: *grid,
    })
}

/// Fourier coefficients of the periodic steady state.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateSolution {
    pub v_dc: HarmonicVector,
    pub i_l: HarmonicVector,
    pub v_o: HarmonicVector,
    /// `‖A·x + b‖ / ‖b‖`.
    pub residual_norm: f64,
    pub condition_estimate: f64,
    pub grid: FrequencyGrid,
}

impl SteadyStateSolution {
    pub fn signal(&self, signal: Signal) -> &HarmonicVector {
        match signal {
            Signal::VDc => &self.v_dc,
            Signal::IL => &self.i_l,
            Signal::VO => &self.v_o,
        }
    }

    pub fn stacked(&self) -> DVector<Complex64> {
        let parts: Vec<Complex64> = Signal::ALL
            .iter()
            .flat_map(|s| self.signal(*s).coeffs().iter().copied())
            .collect();
        DVector::from_vec(parts)
    }

    /// DC value of a signal.
    pub fn dc(&self, signal: Signal) -> f64 {
        self.signal(signal).at(0).re
    }
}

fn split(x: &DVector<Complex64>, grid: &FrequencyGrid) -> Result<[HarmonicVector; 3]> {
    let n = grid.len();
    let part = |s: Signal| {
        let b = s.block();
        HarmonicVector::from_ordered(x.rows(b * n, n).iter().copied().collect(), grid.f_base())
    };
    Ok([part(Signal::VDc)?, part(Signal::IL)?, part(Signal::VO)?])
}

/// Factors the assembled `A`, rejecting numerically singular systems.
pub(crate) fn factor(system: &HarmonicSystem) -> Result<(LuFactors, f64)> {
    let lu = LuFactors::new(&system.a);
    let condition = lu.condition_estimate();
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    Ok((lu, condition))
}

pub fn solve_steady_state(params: &CircuitParams, grid: &FrequencyGrid) -> Result<SteadyStateSolution> {
    let system = assemble_system(params, grid)?;
    let (lu, condition) = factor(&system)?;
    let x = -lu.solve(&system.b);
    let residual_norm = (&system.a * &x + &system.b).norm() / system.b.norm();
    let [v_dc, i_l, v_o] = split(&x, grid)?;
    Ok(SteadyStateSolution {
        v_dc,
        i_l,
        v_o,
        residual_norm,
        condition_estimate: condition,
        grid: *grid,
    })
}

/// Amplitude of line `k` of one signal: `2|c_k|`, or `|c_0|` at DC.
pub fn line_amplitude(sol: &SteadyStateSolution, signal: Signal, k: i64) -> Result<f64> {
    sol.signal(signal).line_amplitude(k)
}
