//! Small-signal duty-to-output model around the harmonic steady state, and
//! loop-gain metrics with the output compensators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::compensator::CompensatorParams;
use crate::error::{invalid, Error, Result};
use crate::excitation::{switching_spectrum_derivative_shifted, CircuitParams};
use crate::exec::Exec;
use crate::linalg::{LuFactors, Resolvent};
use crate::spectral::{convolution_matrix, FrequencyGrid};
use crate::steady_state::{assemble_system, solve_steady_state, Signal, SteadyStateSolution};

/// `ẋ = A·x + B·Δd` with `y = C·x` the DC line of `v_o`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub a: DMatrix<Complex64>,
    pub b: DVector<Complex64>,
    pub c: DVector<Complex64>,
    pub steady: SteadyStateSolution,
}

impl Linearization {
    /// `-C·A⁻¹·B`, the response to a constant duty step.
    pub fn dc_gain(&self) -> Result<Complex64> {
        let lu = LuFactors::new(&self.a);
        if lu.is_singular() {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        Ok(-self.c.dot(&lu.solve(&self.b)))
    }

    /// Steady-state sensitivity `dx/dD = -A⁻¹·B` of every harmonic.
    pub fn state_sensitivity(&self) -> DVector<Complex64> {
        -LuFactors::new(&self.a).solve(&self.b)
    }

    pub fn resolvent(&self) -> Resolvent {
        Resolvent::new(&self.a, &self.b, &self.c)
    }
}

pub fn linearize(params: &CircuitParams, grid: &FrequencyGrid) -> Result<Linearization> {
    let steady = solve_steady_state(params, grid)?;
    let system = assemble_system(params, grid)?;
    let n = grid.len();
    let ds = switching_spectrum_derivative_shifted(params.duty, params.switch_phase, grid);
    let conv = convolution_matrix(&ds, grid.k_max());
    let b_vdc = &conv * steady.i_l.to_dvector() * Complex64::new(-1.0 / params.c_dc, 0.0);
    let b_il = &conv * steady.v_dc.to_dvector() * Complex64::new(1.0 / params.l, 0.0);
    let mut b = DVector::<Complex64>::zeros(3 * n);
    b.rows_mut(Signal::VDc.block() * n, n).copy_from(&b_vdc);
    b.rows_mut(Signal::IL.block() * n, n).copy_from(&b_il);
    let mut c = DVector::<Complex64>::zeros(3 * n);
    c[Signal::VO.block() * n + grid.k_max()] = Complex64::new(1.0, 0.0);
    Ok(Linearization {
        a: system.a,
        b,
        c,
        steady,
    })
}

/// Sampled complex frequency response.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyResponse {
    pub freqs: Vec<f64>,
    pub gains: Vec<Complex64>,
    /// Input and output of the response, e.g. `"d -> v_o<0> (V)"`.
    pub description: String,
}

impl FrequencyResponse {
    pub fn gain_db(&self) -> Vec<f64> {
        self.gains.iter().map(|g| 20.0 * g.norm().log10()).collect()
    }

    pub fn phase_deg(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g.arg().to_degrees()).collect()
    }
}

fn check_freqs(freqs: &[f64]) -> Result<()> {
    if freqs.iter().any(|f| !f.is_finite()) || freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("freqs", "must be finite and strictly increasing"));
    }
    Ok(())
}

/// Logarithmic grid from `f_lo` to `f_hi` inclusive.
pub fn log_scan(f_lo: f64, f_hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (f_hi / f_lo).log10();
    let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| f_lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// Default Bode band: 1 Hz to 100 kHz, capped below `f2/2`.
pub fn default_scan(params: &CircuitParams) -> Vec<f64> {
    log_scan(1.0, 100e3_f64.min(0.5 * params.f2 * (1.0 - 1e-9)), 200)
}

fn jw(f: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * f)
}

/// `G(jω) = C·(jωI - A)⁻¹·B` from duty to the DC line of `v_o`.
pub fn duty_to_output_response(
    params: &CircuitParams,
    grid: &FrequencyGrid,
    freqs: &[f64],
    exec: Exec,
) -> Result<FrequencyResponse> {
    check_freqs(freqs)?;
    let lin = linearize(params, grid)?;
    let res = lin.resolvent();
    Ok(FrequencyResponse {
        freqs: freqs.to_vec(),
        gains: exec.map(freqs, |&f| res.eval(jw(f))),
        description: "d -> v_o<0> (V)".into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopMetrics {
    /// First frequency where `|T|` falls through 0 dB.
    pub crossover_hz: f64,
    /// `180° + ∠T` at the crossover.
    pub phase_margin_deg: f64,
    /// Every unity crossing in the scan, either direction.
    pub crossings_hz: Vec<f64>,
    pub gain_db_at: Vec<(f64, f64)>,
    /// `-1` when the plant's DC gain is negative and the error is taken as
    /// `v_o - v_ref`.
    pub loop_sign: f64,
    pub loop_gain: FrequencyResponse,
}

/// Loop gain `T = sign·C(s)·G(s)` over `scan`, with its crossover, phase
/// margin and the gain at each of `probes`.
pub fn loop_metrics(
    params: &CircuitParams,
    grid: &FrequencyGrid,
    comp: &CompensatorParams,
    scan: &[f64],
    probes: &[f64],
    exec: Exec,
) -> Result<LoopMetrics> {
    comp.validate()?;
    check_freqs(scan)?;
    if scan.len() < 2 {
        return Err(invalid("scan", "needs at least two frequencies"));
    }
    let lin = linearize(params, grid)?;
    let sign = lin.dc_gain()?.re.signum();
    let res = lin.resolvent();
    let t_at = |f: f64| sign * comp.transfer(jw(f)) * res.eval(jw(f));
    let gains = exec.map(scan, |&f| t_at(f));
    let db: Vec<f64> = gains.iter().map(|g| 20.0 * g.norm().log10()).collect();

    let mut crossings = Vec::new();
    let mut crossover = None;
    for i in 1..scan.len() {
        let (a, b) = (db[i - 1], db[i]);
        if (a >= 0.0) != (b >= 0.0) && a.is_finite() && b.is_finite() {
            let (la, lb) = (scan[i - 1].ln(), scan[i].ln());
            let f = (la + (lb - la) * a / (a - b)).exp();
            crossings.push(f);
            if crossover.is_none() && a > b {
                crossover = Some(f);
            }
        }
    }
    let crossover_hz = crossover.ok_or(Error::NoCrossover {
        f_lo: scan[0],
        f_hi: scan[scan.len() - 1],
    })?;
    let phase_margin_deg = 180.0 + t_at(crossover_hz).arg().to_degrees();
    let gain_db_at = probes
        .iter()
        .map(|&f| (f, 20.0 * t_at(f).norm().log10()))
        .collect();
    Ok(LoopMetrics {
        crossover_hz,
        phase_margin_deg,
        crossings_hz: crossings,
        gain_db_at,
        loop_sign: sign,
        loop_gain: FrequencyResponse {
            freqs: scan.to_vec(),
            gains,
            description: "loop gain T".into(),
        },
    })
}
