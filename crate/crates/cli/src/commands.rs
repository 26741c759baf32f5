use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use beatosc::beat_analysis::{design_capacitors, recommend_frequency_plan, sweep_beat};
use beatosc::report::{write_bode_csv, write_harmonic_csv, write_sweep_csv, write_trace_csv};
use beatosc::small_signal::{default_scan, duty_to_output_response, linearize, log_scan, loop_metrics};
use beatosc::steady_state::solve_steady_state;
use beatosc::time_sim::{cross_check, simulate, simulate_closed_loop, spectrum_of, LineCheck, Trace};
use beatosc::{Exec, Signal};
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};

/// Share of the DC value above which a line takes part in `verify`.
const DOMINANT_LINE: f64 = 0.01;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    VerifyFailed,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::VerifyFailed => 3,
        }
    }
}

impl From<beatosc::Error> for Failure {
    fn from(e: beatosc::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(format!("i/o: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub format: Format,
    pub exec: Exec,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))
    }

    fn csv(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Outcome {
        if self.format.csv() {
            let mut w = self.create(name)?;
            f(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Outcome {
        if self.format.json() {
            let mut w = self.create(name)?;
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Validation(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
        Ok(())
    }
}

pub fn solve(ctx: &Context) -> Outcome {
    let p = &ctx.cfg.circuit;
    p.validate()?;
    let grid = p.grid()?;
    let sol = solve_steady_state(p, &grid)?;
    for s in Signal::ALL {
        ctx.csv(&format!("solve_{}.csv", s.name()), |w| {
            write_harmonic_csv(sol.signal(s), s.unit(), w)
        })?;
    }
    let k_b = grid.beat_index() as i64;
    let beat = if k_b == 0 {
        None
    } else {
        Some(json!({
            "k": k_b,
            "f_hz": grid.beat_frequency(),
            "v_dc": sol.v_dc.line_amplitude(k_b)?,
            "i_l": sol.i_l.line_amplitude(k_b)?,
            "v_o": sol.v_o.line_amplitude(k_b)?,
        }))
    };
    ctx.json(
        "solve.json",
        &json!({
            "grid": grid,
            "residual_norm": sol.residual_norm,
            "condition_estimate": sol.condition_estimate,
            "dc": {"v_dc": sol.dc(Signal::VDc), "i_l": sol.dc(Signal::IL), "v_o": sol.dc(Signal::VO)},
            "beat_line": beat,
        }),
    )?;
    println!(
        "grid f_base = {} Hz, K = {}; v_dc<0> = {:.4} V, i_l<0> = {:.4} A, v_o<0> = {:.4} V",
        grid.f_base(),
        grid.k_max(),
        sol.dc(Signal::VDc),
        sol.dc(Signal::IL),
        sol.dc(Signal::VO)
    );
    Ok(())
}

fn run_trace(ctx: &Context, closed_loop: bool) -> Result<Trace, Failure> {
    let p = &ctx.cfg.circuit;
    if closed_loop {
        let comp = ctx.cfg.compensators.as_ref().ok_or_else(|| {
            Failure::Validation("--closed-loop needs a `compensators` section in the config".into())
        })?;
        Ok(simulate_closed_loop(p, comp, &ctx.cfg.sim)?)
    } else {
        Ok(simulate(p, &ctx.cfg.sim)?)
    }
}

pub fn simulate_cmd(ctx: &Context, closed_loop: bool) -> Outcome {
    let p = &ctx.cfg.circuit;
    let grid = p.grid()?;
    let trace = run_trace(ctx, closed_loop)?;
    ctx.csv("trace.csv", |w| write_trace_csv(&trace, w))?;
    for s in Signal::ALL {
        let h = spectrum_of(&trace, s, &grid)?;
        ctx.csv(&format!("spectrum_{}.csv", s.name()), |w| write_harmonic_csv(&h, s.unit(), w))?;
    }
    let f_b = grid.beat_frequency();
    let mut signals = serde_json::Map::new();
    for s in Signal::ALL {
        let beat = if f_b > 0.0 {
            Some(2.0 * trace.line(s, f_b)?.norm())
        } else {
            None
        };
        signals.insert(
            s.name().into(),
            json!({
                "mean": trace.mean(s),
                "peak_to_peak": trace.peak_to_peak(s),
                "switching_ripple": trace.switching_ripple(s, p.f2),
                "beat_amplitude": beat,
            }),
        );
    }
    let mean_duty = trace.duty.iter().sum::<f64>() / trace.duty.len().max(1) as f64;
    ctx.json(
        "simulate.json",
        &json!({
            "closed_loop": closed_loop,
            "settle_time_s": trace.settle_time,
            "window_s": trace.window(),
            "samples": trace.len(),
            "mean_duty": mean_duty,
            "energy": trace.energy,
            "energy_imbalance": trace.energy.relative_imbalance(),
            "signals": signals,
        }),
    )?;
    println!(
        "captured {} samples over {} s after {} s of settling; v_o mean {:.4} V",
        trace.len(),
        trace.window(),
        trace.settle_time,
        trace.mean(Signal::VO)
    );
    Ok(())
}

fn write_checks(w: &mut impl Write, checks: &[&LineCheck], unit: &str, tol: f64) -> std::io::Result<()> {
    writeln!(w, "k,f_hz,model_amplitude_{unit},sim_amplitude_{unit},rel_error,status")?;
    for c in checks {
        let status = if c.relative_error <= tol { "PASS" } else { "FAIL" };
        writeln!(w, "{},{},{},{},{},{}", c.k, c.f_hz, c.model, c.simulated, c.relative_error, status)?;
    }
    Ok(())
}

pub fn verify(ctx: &Context, tolerance: f64) -> Outcome {
    if !(tolerance > 0.0) {
        return Err(Failure::Validation(format!("--tolerance must be > 0, got {tolerance}")));
    }
    let p = &ctx.cfg.circuit;
    let grid = p.grid()?;
    let sol = solve_steady_state(p, &grid)?;
    let trace = simulate(p, &ctx.cfg.sim)?;
    let checks = cross_check(&sol, &trace, DOMINANT_LINE)?;
    for s in Signal::ALL {
        let rows: Vec<&LineCheck> = checks.iter().filter(|c| c.signal == s).collect();
        ctx.csv(&format!("verify_{}.csv", s.name()), |w| write_checks(w, &rows, s.unit(), tolerance))?;
    }
    let worst = checks
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .copied();
    let pass = checks.iter().all(|c| c.relative_error <= tolerance);
    ctx.json(
        "verify.json",
        &json!({
            "tolerance": tolerance,
            "dominant_line_fraction": DOMINANT_LINE,
            "pass": pass,
            "lines": checks,
            "worst": worst,
        }),
    )?;
    let verdict = if pass { "PASS" } else { "FAIL" };
    match worst {
        Some(w) => println!(
            "{verdict}: {} lines, worst {:.3}% ({} k = {}) against {}%",
            checks.len(),
            100.0 * w.relative_error,
            w.signal.name(),
            w.k,
            100.0 * tolerance
        ),
        None => println!("{verdict}: no dominant lines"),
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::VerifyFailed)
    }
}

pub fn bode(ctx: &Context, loop_gain: bool) -> Outcome {
    let p = &ctx.cfg.circuit;
    p.validate()?;
    let grid = p.grid()?;
    let scan = default_scan(p);
    if !loop_gain {
        let resp = duty_to_output_response(p, &grid, &scan, ctx.exec)?;
        let dc = linearize(p, &grid)?.dc_gain()?;
        ctx.csv("bode.csv", |w| write_bode_csv(&resp, w))?;
        ctx.json(
            "bode.json",
            &json!({"description": resp.description, "dc_gain": dc.re, "dc_gain_db": 20.0 * dc.norm().log10()}),
        )?;
        println!("duty-to-output DC gain {:.4} V per unit duty", dc.re);
        return Ok(());
    }
    let comp = ctx
        .cfg
        .compensators
        .as_ref()
        .ok_or_else(|| Failure::Validation("--loop needs a `compensators` section in the config".into()))?;
    let mut probes = log_scan(1.0, 1e4, 1);
    let f_b = grid.beat_frequency();
    if f_b > 1.0 {
        probes.extend([f_b - 1.0, f_b + 1.0]);
    }
    let m = loop_metrics(p, &grid, comp, &scan, &probes, ctx.exec)?;
    ctx.csv("loop_bode.csv", |w| write_bode_csv(&m.loop_gain, w))?;
    ctx.json(
        "loop_metrics.json",
        &json!({
            "crossover_hz": m.crossover_hz,
            "phase_margin_deg": m.phase_margin_deg,
            "crossings_hz": m.crossings_hz,
            "gain_db_at": m.gain_db_at,
            "loop_sign": m.loop_sign,
        }),
    )?;
    println!(
        "crossover {:.1} Hz, phase margin {:.1} deg ({} unity crossings)",
        m.crossover_hz,
        m.phase_margin_deg,
        m.crossings_hz.len()
    );
    Ok(())
}

pub fn sweep(ctx: &Context) -> Outcome {
    let sc = &ctx.cfg.sweep;
    if !(sc.f_b_min > 0.0 && sc.f_b_max > sc.f_b_min && sc.points_per_decade > 0) {
        return Err(Failure::Validation(
            "sweep needs 0 < f_b_min < f_b_max and points_per_decade > 0".into(),
        ));
    }
    let axis = log_scan(sc.f_b_min, sc.f_b_max, sc.points_per_decade);
    let overrides: Vec<(String, Vec<f64>)> = sc.overrides.iter().map(|o| (o.name.clone(), o.values.clone())).collect();
    let result = sweep_beat(&ctx.cfg.circuit, &axis, &overrides, sc.full_solve, ctx.exec)?;
    ctx.csv("sweep.csv", |w| write_sweep_csv(&result, w))?;
    ctx.json("sweep.json", &result)?;
    for s in &result.series {
        let label = match (&s.param_name, s.param_value) {
            (Some(n), Some(v)) => format!("{n} = {v}"),
            _ => "base".into(),
        };
        match s.f_cr {
            Some(f) => println!("{label}: f_cr = {f:.1} Hz"),
            None => println!("{label}: no critical frequency in band"),
        }
    }
    Ok(())
}

pub fn design(ctx: &Context) -> Outcome {
    let p = &ctx.cfg.circuit;
    let spec = ctx.cfg.design.as_ref().ok_or_else(|| {
        Failure::Validation("design needs a `design` section with x_dc and v_dc0".into())
    })?;
    let caps = design_capacitors(p, spec)?;
    let plan = recommend_frequency_plan(p.f1, p.f2)?;
    let remedies: Vec<String> = plan.remedies.iter().map(|r| r.to_string()).collect();
    ctx.json(
        "design.json",
        &json!({"spec": spec, "capacitors": caps, "frequency_plan": plan, "advice": remedies}),
    )?;
    println!(
        "c_dc_min = {:.4e} F, c_o_min = {:.4e} F, plan {:?}",
        caps.c_dc_min, caps.c_o_min, plan.class
    );
    for r in &remedies {
        println!("  remedy: {r}");
    }
    Ok(())
}
