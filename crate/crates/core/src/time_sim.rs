//! Switched time-domain simulation of the receiver.
//!
//! The state `(v_dc, i_l, v_o)` is integrated with fixed-step RK4 on a grid
//! of `1/(f2·steps_per_switch_period)`. Switch edges and rectifier
//! commutations are known in advance, so steps are split exactly at them
//! and each sub-step sees a linear time-invariant circuit.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::compensator::{CompensatorParams, DiscreteCompensator};
use crate::error::{invalid, Error, Result};
use crate::excitation::CircuitParams;
use crate::spectral::{evaluate_waveform, FrequencyGrid, HarmonicVector};
use crate::steady_state::{solve_steady_state, Signal, SteadyStateSolution};

/// Duty limits applied by the closed-loop controller.
pub const DUTY_BOUNDS: (f64, f64) = (0.02, 0.98);
/// Consecutive saturated switching periods tolerated before giving up.
pub const MAX_SATURATED_PERIODS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Periodic steady state from the harmonic solver at `t = 0`.
    #[default]
    Harmonic,
    /// Lossless averaged operating point.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub steps_per_switch_period: usize,
    /// Cap on the settling run, in settle blocks (one base period on
    /// grids of 5 kHz and below).
    pub settle_base_periods: usize,
    /// Length of the recorded window, in base periods.
    pub capture_base_periods: usize,
    /// Allow negative inductor current (synchronous switch) when true.
    pub ccm_assumption: bool,
    /// Settled once every state's window RMS moves by less than this.
    pub relative_settle_tolerance: f64,
    /// Keep every n-th grid sample in the trace.
    pub record_stride: usize,
    pub initial_state: InitialState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps_per_switch_period: 200,
            settle_base_periods: 400,
            capture_base_periods: 1,
            ccm_assumption: true,
            relative_settle_tolerance: 1e-4,
            record_stride: 1,
            initial_state: InitialState::Harmonic,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_switch_period < 4 {
            return Err(invalid("steps_per_switch_period", "must be at least 4"));
        }
        if self.capture_base_periods == 0 {
            return Err(invalid("capture_base_periods", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        if !(self.relative_settle_tolerance > 0.0) {
            return Err(invalid("relative_settle_tolerance", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SwitchOn,
    SwitchOff,
    RectifierCommutation,
    DcmClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SimState {
    pub v_dc: f64,
    pub i_l: f64,
    pub v_o: f64,
}

impl SimState {
    pub fn get(&self, signal: Signal) -> f64 {
        match signal {
            Signal::VDc => self.v_dc,
            Signal::IL => self.i_l,
            Signal::VO => self.v_o,
        }
    }
}

/// Energy bookkeeping over the recorded window (J).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyAudit {
    /// `∫ v_dc·i_r dt`.
    pub input: f64,
    /// `∫ v_o²/R dt`.
    pub load: f64,
    /// Change of the energy stored in `C_DC`, `L` and `C_o`.
    pub stored_change: f64,
}

impl EnergyAudit {
    /// `|input - load - stored_change|` relative to the larger side.
    pub fn relative_imbalance(&self) -> f64 {
        let rhs = self.load + self.stored_change;
        (self.input - rhs).abs() / self.input.abs().max(rhs.abs())
    }
}

/// Uniformly sampled window of a simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    /// Time of the first sample (s).
    pub t0: f64,
    pub dt: f64,
    pub v_dc: Vec<f64>,
    pub i_l: Vec<f64>,
    pub v_o: Vec<f64>,
    pub i_r: Vec<f64>,
    pub s_sw: Vec<f64>,
    pub events: Vec<Event>,
    /// Duty applied in each switching period that started in the window.
    pub duty: Vec<f64>,
    pub energy: EnergyAudit,
    /// Time spent settling before the window (s).
    pub settle_time: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.v_o.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_o.is_empty()
    }

    pub fn window(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn samples(&self, signal: Signal) -> &[f64] {
        match signal {
            Signal::VDc => &self.v_dc,
            Signal::IL => &self.i_l,
            Signal::VO => &self.v_o,
        }
    }

    pub fn mean(&self, signal: Signal) -> f64 {
        let x = self.samples(signal);
        x.iter().sum::<f64>() / x.len() as f64
    }

    pub fn peak_to_peak(&self, signal: Signal) -> f64 {
        peak_to_peak(self.samples(signal))
    }

    /// Largest peak-to-peak found inside a single switching period.
    pub fn switching_ripple(&self, signal: Signal, f2: f64) -> f64 {
        let per = (1.0 / (f2 * self.dt)).round().max(1.0) as usize;
        self.samples(signal)
            .chunks(per)
            .filter(|c| c.len() == per)
            .map(peak_to_peak)
            .fold(0.0, f64::max)
    }

    /// Complex coefficient of `exp(i2πf t)`, normalized like [`spectrum_of`].
    /// The window must hold a whole number of cycles of `f`.
    pub fn line(&self, signal: Signal, f: f64) -> Result<Complex64> {
        check_window(self.window(), f)?;
        let x = self.samples(signal);
        let w = -2.0 * PI * f * self.dt;
        let sum: Complex64 = x
            .iter()
            .enumerate()
            .map(|(n, &v)| v * Complex64::cis(w * n as f64))
            .sum();
        Ok(sum / x.len() as f64 * Complex64::cis(-2.0 * PI * (f * self.t0).rem_euclid(1.0)))
    }
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn check_window(window: f64, f: f64) -> Result<f64> {
    let cycles = window * f;
    if f == 0.0 {
        return Ok(0.0);
    }
    if (cycles - cycles.round()).abs() > 1e-6 || cycles.round() < 1.0 {
        return Err(Error::WindowMismatch {
            window_s: window,
            period_s: 1.0 / f,
        });
    }
    Ok(cycles.round())
}

/// Per-period duty source.
pub trait DutyLaw {
    /// Duty used before the first controlled edge.
    fn initial(&self) -> f64;
    /// Duty for the switching period starting at `t_on`; `state` is sampled
    /// at that instant.
    fn duty(&mut self, t_on: f64, state: &SimState) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDuty(pub f64);

impl DutyLaw for ConstantDuty {
    fn initial(&self) -> f64 {
        self.0
    }

    fn duty(&mut self, _: f64, _: &SimState) -> Result<f64> {
        Ok(self.0)
    }
}

/// `d = d0 + a·sin(2π f t)` read at each period's nominal off-edge, which
/// is where pulse-width modulation takes effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedDuty {
    pub d0: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub f2: f64,
}

impl DutyLaw for PerturbedDuty {
    fn initial(&self) -> f64 {
        self.d0
    }

    fn duty(&mut self, t_on: f64, _: &SimState) -> Result<f64> {
        let t = t_on + self.d0 / self.f2;
        let d = self.d0 + self.amplitude * (2.0 * PI * (self.frequency * t).rem_euclid(1.0)).sin();
        Ok(d.clamp(0.0, 1.0))
    }
}

/// Output-voltage regulation by the discretized compensator.
///
/// The receiver's duty-to-output gain is negative (`v_o ≈ I_Ls·R/(πD)`), so
/// the error fed to the compensator is `v_o - v_ref`.
#[derive(Debug, Clone)]
pub struct ClosedLoopDuty {
    pub v_ref: f64,
    controller: DiscreteCompensator,
    initial: f64,
    saturated: usize,
}

impl ClosedLoopDuty {
    pub fn new(comp: &CompensatorParams, f2: f64, initial_duty: f64) -> Self {
        let mut controller = comp.discretize(f2);
        controller.preload(initial_duty);
        Self {
            v_ref: comp.v_ref,
            controller,
            initial: initial_duty,
            saturated: 0,
        }
    }
}

impl DutyLaw for ClosedLoopDuty {
    fn initial(&self) -> f64 {
        self.initial
    }

    fn duty(&mut self, _: f64, state: &SimState) -> Result<f64> {
        let u = self.controller.step(state.v_o - self.v_ref);
        let (lo, hi) = DUTY_BOUNDS;
        let d = u.clamp(lo, hi);
        if d != u || !u.is_finite() {
            self.saturated += 1;
            if self.saturated > MAX_SATURATED_PERIODS {
                return Err(Error::UnstableLoop {
                    bound: if u < lo { lo } else { hi },
                    periods: self.saturated,
                });
            }
        } else {
            self.saturated = 0;
        }
        Ok(d)
    }
}

const N_STATE: usize = 5;
const MIN_INITIAL_HARMONICS: usize = 64;
/// Shortest stretch compared by the settle test (s).
pub const MIN_SETTLE_BLOCK: f64 = 200e-6;
type X = [f64; N_STATE];

struct Recorder {
    trace: Trace,
}

/// Stateful integrator; windows are run back to back so the reference of
/// a closed-loop law can be changed between them.
#[derive(Debug, Clone)]
pub struct Simulator<L: DutyLaw> {
    params: CircuitParams,
    cfg: SimConfig,
    law: L,
    h: f64,
    steps_per_window: u64,
    window_hz: f64,
    j: u64,
    /// `v_dc, i_l, v_o, ∫v_dc·i_r, ∫v_o²/R`.
    x: X,
    on: bool,
    conducting: bool,
    clamped: bool,
    next_period: i64,
    t_on: f64,
    t_off: f64,
    next_half: i64,
    t_comm: f64,
}

impl Simulator<ConstantDuty> {
    pub fn open_loop(params: &CircuitParams, cfg: &SimConfig) -> Result<Self> {
        let grid = params.grid()?;
        Self::new(params, cfg, ConstantDuty(params.duty), grid.f_base())
    }
}

impl<L: DutyLaw> Simulator<L> {
    /// `window_hz` sets the settle/capture window; it must divide `f2`.
    pub fn new(params: &CircuitParams, cfg: &SimConfig, law: L, window_hz: f64) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let ratio = params.f2 / window_hz;
        if !(window_hz > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::WindowMismatch {
                window_s: 1.0 / window_hz,
                period_s: 1.0 / params.f2,
            });
        }
        let steps_per_window = ratio.round() as u64 * cfg.steps_per_switch_period as u64;
        let start = initial_state(params, cfg, law.initial())?;
        let phase = params.switch_phase.rem_euclid(1.0);
        let d = law.initial();
        let mut sim = Self {
            params: *params,
            cfg: *cfg,
            law,
            h: 1.0 / (params.f2 * cfg.steps_per_switch_period as f64),
            steps_per_window,
            window_hz,
            j: 0,
            x: [start.v_dc, start.i_l, start.v_o, 0.0, 0.0],
            // The period that started before t = 0 is still on if its
            // off-edge lies ahead.
            on: phase > 0.0 && phase - 1.0 + d > 0.0,
            conducting: true,
            clamped: false,
            next_period: 0,
            t_on: phase / params.f2,
            t_off: (phase - 1.0 + d) / params.f2,
            next_half: 0,
            t_comm: 0.0,
        };
        sim.fire_events(0.0, None)?;
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.j as f64 * self.h
    }

    pub fn state(&self) -> SimState {
        SimState {
            v_dc: self.x[0],
            i_l: self.x[1],
            v_o: self.x[2],
        }
    }

    pub fn law(&self) -> &L {
        &self.law
    }

    pub fn law_mut(&mut self) -> &mut L {
        &mut self.law
    }

    pub fn window_hz(&self) -> f64 {
        self.window_hz
    }

    fn i_r(&self, t: f64) -> f64 {
        if self.conducting {
            self.params.i_ls_amplitude * (2.0 * PI * self.params.f1 * t).sin().max(0.0)
        } else {
            0.0
        }
    }

    fn deriv(&self, t: f64, x: &X) -> X {
        let p = &self.params;
        let s = if self.on { 1.0 } else { 0.0 };
        let i_r = self.i_r(t);
        let di = if self.clamped {
            0.0
        } else {
            (s * x[0] - x[2]) / p.l
        };
        [
            (i_r - s * x[1]) / p.c_dc,
            di,
            (x[1] - x[2] / p.r_load) / p.c_o,
            x[0] * i_r,
            x[2] * x[2] / p.r_load,
        ]
    }

    fn rk4(&mut self, t: f64, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let x = self.x;
        let add = |a: &X, b: &X, s: f64| -> X { std::array::from_fn(|i| a[i] + s * b[i]) };
        let k1 = self.deriv(t, &x);
        let k2 = self.deriv(t + 0.5 * dt, &add(&x, &k1, 0.5 * dt));
        let k3 = self.deriv(t + 0.5 * dt, &add(&x, &k2, 0.5 * dt));
        let k4 = self.deriv(t + dt, &add(&x, &k3, dt));
        self.x = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]));
    }

    /// Earliest pending event; off-edges sort before commutations before
    /// on-edges when they coincide.
    fn next_event(&self) -> (f64, EventKind) {
        let mut best = (self.t_comm, EventKind::RectifierCommutation);
        if self.on && self.t_off <= best.0 {
            best = (self.t_off, EventKind::SwitchOff);
        }
        if self.t_on < best.0 {
            best = (self.t_on, EventKind::SwitchOn);
        }
        best
    }

    fn fire_events(&mut self, t: f64, mut rec: Option<&mut Recorder>) -> Result<()> {
        let snap = 1e-6 * self.h;
        loop {
            let (te, kind) = self.next_event();
            if te > t + snap {
                return Ok(());
            }
            match kind {
                EventKind::SwitchOff => self.on = false,
                EventKind::RectifierCommutation => {
                    self.conducting = self.next_half % 2 == 0;
                    self.next_half += 1;
                    self.t_comm = self.next_half as f64 / (2.0 * self.params.f1);
                }
                EventKind::SwitchOn => {
                    let n = self.next_period as f64 + self.params.switch_phase.rem_euclid(1.0);
                    let d = self.law.duty(te, &self.state())?;
                    self.on = true;
                    self.clamped = false;
                    self.t_off = (n + d) / self.params.f2;
                    self.next_period += 1;
                    self.t_on = (n + 1.0) / self.params.f2;
                    if let Some(r) = rec.as_deref_mut() {
                        r.trace.duty.push(d);
                    }
                }
                EventKind::DcmClamp => unreachable!(),
            }
            if let Some(r) = rec.as_deref_mut() {
                r.trace.events.push(Event { t: te, kind });
            }
        }
    }

    fn integrate(&mut self, t: f64, dt: f64, rec: Option<&mut Recorder>) {
        self.rk4(t, dt);
        if !self.cfg.ccm_assumption && !self.on && !self.clamped && self.x[1] < 0.0 {
            self.x[1] = 0.0;
            self.clamped = true;
            if let Some(r) = rec {
                r.trace.events.push(Event {
                    t: t + dt,
                    kind: EventKind::DcmClamp,
                });
            }
        }
    }

    fn step(&mut self, mut rec: Option<&mut Recorder>) -> Result<()> {
        let ta = self.time();
        let tb = (self.j + 1) as f64 * self.h;
        let snap = 1e-6 * self.h;
        let mut t = ta;
        loop {
            let (te, _) = self.next_event();
            if te <= tb + snap {
                let te = if (te - tb).abs() <= snap { tb } else { te.max(t) };
                self.integrate(t, te - t, rec.as_deref_mut());
                t = te;
                self.fire_events(te, rec.as_deref_mut())?;
            } else {
                self.integrate(t, tb - t, rec.as_deref_mut());
                break;
            }
        }
        self.j += 1;
        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(invalid("state", "integration diverged"));
        }
        Ok(())
    }

    fn stored_energy(&self) -> f64 {
        let p = &self.params;
        0.5 * (p.c_dc * self.x[0] * self.x[0] + p.l * self.x[1] * self.x[1] + p.c_o * self.x[2] * self.x[2])
    }

    /// Runs `windows` windows and returns the RMS of each state over them.
    fn run_windows(&mut self, windows: u64, mut rec: Option<&mut Recorder>) -> Result<[f64; 3]> {
        let stride = self.cfg.record_stride as u64;
        let mut sumsq = [0.0; 3];
        let total = windows * self.steps_per_window;
        for n in 0..total {
            for (acc, v) in sumsq.iter_mut().zip(&self.x[..3]) {
                *acc += v * v;
            }
            if let Some(r) = rec.as_deref_mut() {
                if n % stride == 0 {
                    let t = self.time();
                    let tr = &mut r.trace;
                    tr.v_dc.push(self.x[0]);
                    tr.i_l.push(self.x[1]);
                    tr.v_o.push(self.x[2]);
                    tr.i_r.push(self.i_r(t));
                    tr.s_sw.push(if self.on { 1.0 } else { 0.0 });
                }
            }
            self.step(rec.as_deref_mut())?;
        }
        Ok(sumsq.map(|s| (s / total as f64).sqrt()))
    }

    /// Integrates block by block until the RMS of every state settles,
    /// where a block is the fewest whole windows lasting at least
    /// [`MIN_SETTLE_BLOCK`]. Returns the number of windows run.
    pub fn settle(&mut self) -> Result<u64> {
        let per_block = (MIN_SETTLE_BLOCK * self.window_hz).ceil().max(1.0) as u64;
        let cap = self.cfg.settle_base_periods.max(2) as u64;
        let tol = self.cfg.relative_settle_tolerance;
        let mut prev = self.run_windows(per_block, None)?;
        let mut last_change = f64::INFINITY;
        for n in 1..cap {
            let rms = self.run_windows(per_block, None)?;
            last_change = rms
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
                .fold(0.0, f64::max);
            prev = rms;
            if last_change < tol {
                return Ok((n + 1) * per_block);
            }
        }
        let base_periods = cap as f64 * per_block as f64 * self.params.grid()?.f_base() / self.window_hz;
        Err(Error::NoConvergence {
            base_periods: base_periods.round() as usize,
            last_change,
        })
    }

    /// Records `windows` consecutive windows from the current time.
    pub fn capture(&mut self, windows: u64) -> Result<Trace> {
        let t0 = self.time();
        let mut rec = Recorder {
            trace: Trace {
                t0,
                dt: self.h * self.cfg.record_stride as f64,
                v_dc: Vec::new(),
                i_l: Vec::new(),
                v_o: Vec::new(),
                i_r: Vec::new(),
                s_sw: Vec::new(),
                events: Vec::new(),
                duty: Vec::new(),
                energy: EnergyAudit::default(),
                settle_time: t0,
            },
        };
        let e0 = self.stored_energy();
        self.x[3] = 0.0;
        self.x[4] = 0.0;
        self.run_windows(windows, Some(&mut rec))?;
        rec.trace.energy = EnergyAudit {
            input: self.x[3],
            load: self.x[4],
            stored_change: self.stored_energy() - e0,
        };
        Ok(rec.trace)
    }

    /// Settles, then captures `capture_base_periods` windows.
    pub fn run(&mut self) -> Result<Trace> {
        self.settle()?;
        self.capture(self.cfg.capture_base_periods as u64)
    }
}

fn initial_state(params: &CircuitParams, cfg: &SimConfig, duty: f64) -> Result<SimState> {
    let p = CircuitParams { duty, ..*params };
    let (v_dc, i_l, v_o) = p.averaged_operating_point();
    let averaged = SimState { v_dc, i_l, v_o };
    if cfg.initial_state == InitialState::Averaged {
        return Ok(averaged);
    }
    // Coarse grids (synchronized or nearly so) get extra harmonics so the
    // start is close to the periodic orbit.
    let solved = p.grid().and_then(|g| {
        let g = g.with_truncation(g.k_max().max(MIN_INITIAL_HARMONICS));
        solve_steady_state(&p, &g)
    });
    match solved {
        Ok(sol) => Ok(SimState {
            v_dc: evaluate_waveform(&sol.v_dc, 0.0)?,
            i_l: evaluate_waveform(&sol.i_l, 0.0)?,
            v_o: evaluate_waveform(&sol.v_o, 0.0)?,
        }),
        Err(e) if e.is_numerical() => Ok(averaged),
        Err(e) => Err(e),
    }
}

/// Open-loop simulation at the fixed duty of `params`.
pub fn simulate(params: &CircuitParams, cfg: &SimConfig) -> Result<Trace> {
    Simulator::open_loop(params, cfg)?.run()
}

/// Simulation with the duty updated once per switching period by the
/// discretized compensator, starting from the duty in `params`.
pub fn simulate_closed_loop(
    params: &CircuitParams,
    comp: &CompensatorParams,
    cfg: &SimConfig,
) -> Result<Trace> {
    comp.validate()?;
    let grid = params.grid()?;
    let law = ClosedLoopDuty::new(comp, params.f2, params.duty);
    Simulator::new(params, cfg, law, grid.f_base())?.run()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Measured `ΔV_o / Δd` at `frequency` (integer Hz) from a sinusoidal duty
/// perturbation of the given amplitude around the duty of `params`.
pub fn measure_duty_response(
    params: &CircuitParams,
    cfg: &SimConfig,
    frequency: f64,
    amplitude: f64,
) -> Result<Complex64> {
    let grid = params.grid()?;
    if !(frequency > 0.0) || frequency.fract() != 0.0 || grid.f_base().fract() != 0.0 {
        return Err(invalid("frequency", "needs integer-Hz perturbation and grid"));
    }
    let window_hz = gcd(grid.f_base() as u64, frequency as u64) as f64;
    let law = PerturbedDuty {
        d0: params.duty,
        amplitude,
        frequency,
        f2: params.f2,
    };
    let trace = Simulator::new(params, cfg, law, window_hz)?.run()?;
    // The duty reference sin(ωt) has coefficient -i/2 at +ω.
    let out = trace.line(Signal::VO, frequency)?;
    Ok(out / Complex64::new(0.0, -0.5 * amplitude))
}

/// Fourier coefficients of one state over the trace window, indexed on
/// `grid` and normalized so `A·sin(2πk f_base t)` gives `|⟨k⟩| = A/2`.
pub fn spectrum_of(trace: &Trace, signal: Signal, grid: &FrequencyGrid) -> Result<HarmonicVector> {
    spectrum_of_samples(trace.samples(signal), trace.t0, trace.dt, grid)
}

pub fn spectrum_of_samples(x: &[f64], t0: f64, dt: f64, grid: &FrequencyGrid) -> Result<HarmonicVector> {
    let n = x.len();
    let periods = check_window(n as f64 * dt, grid.f_base())? as usize;
    if n <= 2 * grid.k_max() * periods {
        return Err(invalid("trace", "too few samples for the grid's harmonic order"));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(HarmonicVector::from_fn(grid.k_max(), grid.f_base(), |k| {
        let bin = (k * periods as i64).rem_euclid(n as i64) as usize;
        let phase = -2.0 * PI * (k as f64 * grid.f_base() * t0).rem_euclid(1.0);
        buf[bin] * scale * Complex64::cis(phase)
    }))
}

/// One spectral line compared between the harmonic solution and a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineCheck {
    pub signal: Signal,
    pub k: i64,
    pub f_hz: f64,
    pub model: f64,
    pub simulated: f64,
    pub relative_error: f64,
}

/// Compares every line `k >= 0` whose model amplitude is at least
/// `min_fraction` of the signal's DC value.
pub fn cross_check(sol: &SteadyStateSolution, trace: &Trace, min_fraction: f64) -> Result<Vec<LineCheck>> {
    let mut out = Vec::new();
    for signal in Signal::ALL {
        let model = sol.signal(signal);
        let sim = spectrum_of(trace, signal, &sol.grid)?;
        let dc = model.at(0).norm();
        for k in 0..=model.k_max() as i64 {
            let m = model.line_amplitude(k)?;
            if m < min_fraction * dc {
                continue;
            }
            let s = sim.line_amplitude(k)?;
            out.push(LineCheck {
                signal,
                k,
                f_hz: k as f64 * sol.grid.f_base(),
                model: m,
                simulated: s,
                relative_error: (s - m).abs() / m,
            });
        }
    }
    Ok(out)
}
