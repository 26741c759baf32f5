//! Reduced-order beat analysis: the closed-form beat lines of `v_dc` and
//! `v_o`, the critical beat frequency where their shared denominator is
//! smallest, parameter sweeps, capacitor sizing and frequency planning.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::excitation::CircuitParams;
use crate::exec::Exec;
use crate::small_signal::log_scan;
use crate::spectral::FrequencyGrid;
use crate::steady_state::{solve_steady_state, Signal};
use crate::time_sim::{SimConfig, Simulator};

/// `|Den|` below this fraction of the sum of its term magnitudes is
/// flagged as near-singular.
pub const NEAR_SINGULAR: f64 = 1e-9;
/// Largest `M1` for which a sweep point runs the full harmonic solve.
pub const FULL_SOLVE_MAX_M1: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatComponents {
    pub v_dc: Complex64,
    pub v_o: Complex64,
    pub den: Complex64,
    pub near_singular: bool,
}

fn den_terms(p: &CircuitParams, fb: f64) -> [Complex64; 11] {
    let i = Complex64::i();
    let e2 = Complex64::cis(2.0 * PI * p.duty);
    let e4 = Complex64::cis(4.0 * PI * p.duty);
    let (d, f1, r, l, cdc, co) = (p.duty, p.f1, p.r_load, p.l, p.c_dc, p.c_o);
    let (pi2, pi3, pi4, pi5) = (PI.powi(2), PI.powi(3), PI.powi(4), PI.powi(5));
    [
        Complex64::new(fb, 0.0),
        -2.0 * fb * e2,
        fb * e4,
        2.0 * i * PI * co * r * fb * fb,
        -4.0 * d * d * f1 * pi2 * e2,
        -4.0 * i * PI * co * r * fb * fb * e2,
        2.0 * i * PI * co * r * fb * fb * e4,
        16.0 * cdc * l * f1 * fb * fb * pi4 * e2,
        -8.0 * i * cdc * r * f1 * fb * pi3 * e2,
        -8.0 * i * co * d * d * r * f1 * fb * pi3 * e2,
        32.0 * i * cdc * co * l * r * f1 * fb.powi(3) * pi5 * e2,
    ]
}

fn den(p: &CircuitParams, fb: f64) -> Complex64 {
    den_terms(p, fb).iter().sum()
}

/// Closed-form beat lines of `v_dc` and `v_o` at beat frequency `f_b`.
///
/// Only `f1`, the duty and the passive values enter; `f2` is implied by
/// `f1 - f_b`.
pub fn beat_component_closed_form(params: &CircuitParams, f_b: f64) -> Result<BeatComponents> {
    params.validate()?;
    if !(f_b > 0.0 && f_b.is_finite()) {
        return Err(invalid("f_b", format!("must be finite and > 0, got {f_b}")));
    }
    let p = params;
    let i = Complex64::i();
    let e2 = Complex64::cis(2.0 * PI * p.duty);
    let num_vdc = p.duty * p.i_ls_amplitude * e2 * (1.0 + 2.0 * i * PI * p.c_o * p.r_load * f_b) * (e2 - 1.0) * i
        / (4.0 * p.c_dc);
    let num_vo = PI * p.i_ls_amplitude * p.r_load * f_b * e2 * (e2 - 1.0);
    let terms = den_terms(p, f_b);
    let den: Complex64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    Ok(BeatComponents {
        v_dc: num_vdc / den,
        v_o: num_vo / den,
        den,
        near_singular: den.norm() < NEAR_SINGULAR * scale,
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Beat frequency minimizing `|Den|`, searched over `[10 Hz, f1/2]`.
pub fn critical_frequency(params: &CircuitParams) -> Result<f64> {
    params.validate()?;
    let (lo, hi) = (10.0, 0.5 * params.f1);
    if hi <= lo {
        return Err(Error::NoResonance { f_lo: lo, f_hi: hi });
    }
    let scan = log_scan(lo, hi, 400);
    let mags: Vec<f64> = scan.iter().map(|&f| den(params, f).norm()).collect();
    let best = mags
        .iter()
        .enumerate()
        .fold(0, |b, (i, m)| if *m < mags[b] { i } else { b });
    if best == 0 || best == scan.len() - 1 {
        return Err(Error::NoResonance { f_lo: lo, f_hi: hi });
    }
    let x = golden_min(
        |u| den(params, u.exp()).norm(),
        scan[best - 1].ln(),
        scan[best + 1].ln(),
        1e-12,
    );
    Ok(x.exp())
}

/// One configuration of a sweep: the base parameters or the base with a
/// single field overridden.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSeries {
    pub param_name: Option<String>,
    pub param_value: Option<f64>,
    pub f_cr: Option<f64>,
    /// `|V_DC_beat|` from the closed form (V).
    pub v_dc_beat: Vec<f64>,
    /// `|V_o_beat|` from the closed form (V).
    pub v_o_beat: Vec<f64>,
    /// `|V_o_beat|` over the averaged DC output `I_Ls·R/(πD)`.
    pub v_o_beat_norm: Vec<f64>,
    pub near_singular: Vec<bool>,
    /// Beat line amplitudes `(v_dc, v_o)` from the full harmonic solve with
    /// `f2 = f1 - f_b`, when requested.
    pub full: Vec<std::result::Result<(f64, f64), String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// Beat frequencies (Hz).
    pub axis: Vec<f64>,
    pub series: Vec<SweepSeries>,
}

/// Field of [`CircuitParams`] by name, for overrides.
pub fn set_param(params: &mut CircuitParams, name: &str, value: f64) -> Result<()> {
    let slot = match name {
        "i_ls_amplitude" => &mut params.i_ls_amplitude,
        "f1" => &mut params.f1,
        "f2" => &mut params.f2,
        "duty" => &mut params.duty,
        "c_dc" => &mut params.c_dc,
        "l" => &mut params.l,
        "c_o" => &mut params.c_o,
        "r_load" => &mut params.r_load,
        "switch_phase" => &mut params.switch_phase,
        _ => return Err(invalid("param_name", format!("unknown circuit parameter `{name}`"))),
    };
    *slot = value;
    Ok(())
}

/// Full-solve beat line amplitudes `(v_dc, v_o)` for the given parameters.
pub fn full_beat_lines(params: &CircuitParams) -> Result<(f64, f64)> {
    let grid = FrequencyGrid::new(params.f1, params.f2)?;
    if grid.m1() > FULL_SOLVE_MAX_M1 {
        return Err(invalid("f_b", format!("grid too fine for a full solve (M1 = {})", grid.m1())));
    }
    let sol = solve_steady_state(params, &grid)?;
    let k = grid.beat_index() as i64;
    Ok((sol.v_dc.line_amplitude(k)?, sol.v_o.line_amplitude(k)?))
}

/// Evaluates the closed form over `f_b` for the base parameters (when
/// `overrides` is empty) or for every `(name, value)` override in turn.
/// Point failures are recorded, never fatal.
pub fn sweep_beat(
    params: &CircuitParams,
    f_b: &[f64],
    overrides: &[(String, Vec<f64>)],
    with_full_solve: bool,
    exec: Exec,
) -> Result<SweepResult> {
    params.validate()?;
    if f_b.is_empty() || f_b.iter().any(|f| !(*f > 0.0)) {
        return Err(invalid("f_b", "sweep axis must be non-empty and positive"));
    }
    let mut configs = Vec::new();
    if overrides.is_empty() {
        configs.push((None, None, *params));
    }
    for (name, values) in overrides {
        if values.is_empty() {
            return Err(invalid("parameter_overrides", format!("no values for `{name}`")));
        }
        for &v in values {
            let mut p = *params;
            set_param(&mut p, name, v)?;
            p.validate()?;
            configs.push((Some(name.clone()), Some(v), p));
        }
    }

    let points: Vec<(usize, f64)> = (0..configs.len())
        .flat_map(|c| f_b.iter().map(move |&f| (c, f)))
        .collect();
    let evaluated = exec.map(&points, |&(c, fb)| {
        let p = configs[c].2;
        let cf = beat_component_closed_form(&p, fb);
        let full = with_full_solve.then(|| {
            full_beat_lines(&CircuitParams { f2: p.f1 - fb, ..p }).map_err(|e| e.to_string())
        });
        (cf, full)
    });

    let mut series = Vec::with_capacity(configs.len());
    for (c, (name, value, p)) in configs.iter().enumerate() {
        let v_o0 = p.averaged_operating_point().2;
        let mut s = SweepSeries {
            param_name: name.clone(),
            param_value: *value,
            f_cr: critical_frequency(p).ok(),
            v_dc_beat: Vec::new(),
            v_o_beat: Vec::new(),
            v_o_beat_norm: Vec::new(),
            near_singular: Vec::new(),
            full: Vec::new(),
        };
        for (cf, full) in &evaluated[c * f_b.len()..(c + 1) * f_b.len()] {
            let cf = cf.clone()?;
            s.v_dc_beat.push(cf.v_dc.norm());
            s.v_o_beat.push(cf.v_o.norm());
            s.v_o_beat_norm.push(cf.v_o.norm() / v_o0);
            s.near_singular.push(cf.near_singular);
            if let Some(full) = full {
                s.full.push(full.clone());
            }
        }
        series.push(s);
    }
    Ok(SweepResult {
        axis: f_b.to_vec(),
        series,
    })
}

/// Beat line amplitudes `(v_dc, v_o)` read from an open-loop simulation.
pub fn simulated_beat_lines(params: &CircuitParams, cfg: &SimConfig) -> Result<(f64, f64)> {
    let grid = params.grid()?;
    let trace = Simulator::open_loop(params, cfg)?.run()?;
    let f_b = grid.beat_frequency();
    Ok((
        2.0 * trace.line(Signal::VDc, f_b)?.norm(),
        2.0 * trace.line(Signal::VO, f_b)?.norm(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Allowed beat amplitude on `v_dc` as a fraction of its DC value.
    pub x_dc: f64,
    /// DC-link operating voltage (V).
    pub v_dc0: f64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_dc > 0.0 && self.x_dc < 1.0) {
            return Err(invalid("x_dc", format!("must lie in (0, 1), got {}", self.x_dc)));
        }
        if !(self.v_dc0 > 0.0 && self.v_dc0.is_finite()) {
            return Err(invalid("v_dc0", format!("must be finite and > 0, got {}", self.v_dc0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitorDesign {
    pub c_dc_min: f64,
    /// Bound set by the rectified-current ripple.
    pub c_dc_rectifier: f64,
    /// Bound set by the buck input-current ripple.
    pub c_dc_switching: f64,
    /// `C_o` placing the output LC corner below the beat; 0 when `f1 = f2`.
    pub c_o_min: f64,
    /// Set when `f1 = f2`, so there is no beat to filter.
    pub zero_beat: bool,
}

pub fn design_capacitors(params: &CircuitParams, spec: &DesignSpec) -> Result<CapacitorDesign> {
    params.validate()?;
    spec.validate()?;
    let c_dc_rectifier = params.i_ls_amplitude / (2.0 * spec.x_dc * spec.v_dc0 * PI * params.f1);
    let c_dc_switching = params.duty / (2.0 * spec.x_dc * params.r_load * params.f2);
    let f_b = (params.f1 - params.f2).abs();
    let zero_beat = f_b <= 1e-9 * params.f1;
    let c_o_min = if zero_beat {
        0.0
    } else {
        1.0 / (4.0 * PI * PI * f_b * f_b * params.l)
    };
    Ok(CapacitorDesign {
        c_dc_min: c_dc_rectifier.max(c_dc_switching),
        c_dc_rectifier,
        c_dc_switching,
        c_o_min,
        zero_beat,
    })
}

/// Separation ratio beyond which the beat is considered filtered.
pub const SEPARATION_RATIO: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanClass {
    Synchronized,
    Separated,
    AtRisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "remedy", rename_all = "snake_case")]
pub enum Remedy {
    LowerSwitchingFrequency { f2_below: f64 },
    RaiseSwitchingFrequency { f2_above: f64 },
    Synchronize { f2: f64 },
}

impl fmt::Display for Remedy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Remedy::LowerSwitchingFrequency { f2_below } => {
                write!(f, "lower the switching frequency below {f2_below} Hz")
            }
            Remedy::RaiseSwitchingFrequency { f2_above } => {
                write!(f, "raise the switching frequency above {f2_above} Hz")
            }
            Remedy::Synchronize { f2 } => write!(f, "synchronize switching to {f2} Hz"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPlan {
    pub f1: f64,
    pub f2: f64,
    pub f_b: f64,
    pub class: PlanClass,
    pub remedies: Vec<Remedy>,
}

pub fn recommend_frequency_plan(f1: f64, f2: f64) -> Result<FrequencyPlan> {
    for (field, v) in [("f1", f1), ("f2", f2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(field, format!("must be finite and > 0, got {v}")));
        }
    }
    let f_b = (f1 - f2).abs();
    let class = if f_b <= 1e-9 * f1.max(f2) {
        PlanClass::Synchronized
    } else if f1 > SEPARATION_RATIO * f2 || f2 > SEPARATION_RATIO * f1 {
        PlanClass::Separated
    } else {
        PlanClass::AtRisk
    };
    let remedies = if class == PlanClass::AtRisk {
        vec![
            Remedy::LowerSwitchingFrequency {
                f2_below: f1 / SEPARATION_RATIO,
            },
            Remedy::RaiseSwitchingFrequency {
                f2_above: f1 * SEPARATION_RATIO,
            },
            Remedy::Synchronize { f2: f1 },
        ]
    } else {
        Vec::new()
    };
    Ok(FrequencyPlan {
        f1,
        f2,
        f_b: if class == PlanClass::Synchronized { 0.0 } else { f_b },
        class,
        remedies,
    })
}
