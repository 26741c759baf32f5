//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion,
//! followed by a few module-level checks that are reported but not gated,
//! and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use beatosc::beat_analysis::{beat_component_closed_form, critical_frequency, design_capacitors, DesignSpec};
use beatosc::compensator::CompensatorParams;
use beatosc::excitation::{rectified_current_spectrum, switching_spectrum, switching_spectrum_derivative};
use beatosc::small_signal::{default_scan, duty_to_output_response, log_scan, loop_metrics};
use beatosc::steady_state::solve_steady_state;
use beatosc::time_sim::{
    cross_check, measure_duty_response, simulate, spectrum_of, ConstantDuty, SimConfig, Simulator, Trace,
};
use beatosc::{CircuitParams, Exec, FrequencyGrid, Signal, SteadyStateSolution};

struct Gate {
    failed: Vec<String>,
}

impl Gate {
    fn report(&mut self, id: &str, title: &str, pass: bool, detail: String) {
        println!("[{}] {id} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn note(id: &str, title: &str, pass: bool, detail: String) {
    println!("  ({}) {id} {title}: {detail}", if pass { "pass" } else { "fail" });
}

fn paper() -> CircuitParams {
    CircuitParams::paper_default()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn wrap_deg(x: f64) -> f64 {
    (x + 180.0).rem_euclid(360.0) - 180.0
}

struct Baseline {
    sol: SteadyStateSolution,
    trace: Trace,
}

fn criterion_1(gate: &mut Gate) -> Baseline {
    let start = Instant::now();
    let p = paper();
    let grid = p.grid().unwrap();
    let sol = solve_steady_state(&p, &grid).unwrap();
    let trace = simulate(&p, &SimConfig::default()).unwrap();
    let checks = cross_check(&sol, &trace, 0.01).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = checks
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .unwrap();
    let pass = checks.iter().all(|c| c.relative_error <= 0.05) && elapsed < 30.0;
    gate.report(
        "C1",
        "cross-oracle equivalence",
        pass,
        format!(
            "{} lines >= 1% of DC, worst {:.3}% ({} k = {}), limit 5%; runtime {:.2} s (< 30 s)",
            checks.len(),
            100.0 * worst.relative_error,
            worst.signal.name(),
            worst.k,
            elapsed
        ),
    );
    Baseline { sol, trace }
}

fn criterion_2(gate: &mut Gate, base: &Baseline) {
    let grid = base.sol.grid;
    let kb = grid.beat_index() as i64;
    let (k1, k2) = (grid.m1() as i64, grid.m2() as i64);
    let amp = |s: Signal, k: i64| base.sol.signal(s).line_amplitude(k).unwrap();
    let sim = |s: Signal, k: i64| spectrum_of(&base.trace, s, &grid).unwrap().line_amplitude(k).unwrap();
    let ok = |f: &dyn Fn(Signal, i64) -> f64| {
        f(Signal::VO, kb) > f(Signal::VO, k1) && f(Signal::VDc, kb) > f(Signal::VDc, k2) && f(Signal::VDc, kb) > f(Signal::VDc, k1)
    };
    let pass = ok(&amp) && ok(&sim);
    gate.report(
        "C2",
        "beat dominance",
        pass,
        format!(
            "v_o 15k {:.4} > 200k {:.5} V; v_dc 15k {:.3} > 185k {:.3}, 200k {:.3} V (simulation agrees: {})",
            amp(Signal::VO, kb),
            amp(Signal::VO, k1),
            amp(Signal::VDc, kb),
            amp(Signal::VDc, k2),
            amp(Signal::VDc, k1),
            ok(&sim)
        ),
    );
}

fn criterion_3(gate: &mut Gate, base: &Baseline) {
    let v_dc = base.sol.dc(Signal::VDc);
    let v_o = base.sol.dc(Signal::VO);
    gate.report(
        "C3",
        "DC operating point",
        within(v_dc, 10.56, 0.10) && within(v_o, 5.25, 0.10),
        format!("v_dc<0> = {v_dc:.4} V (10.56 +/- 10%), v_o<0> = {v_o:.4} V (5.25 +/- 10%)"),
    );
}

fn criterion_4(gate: &mut Gate) {
    let p = paper();
    let grid = p.grid().unwrap();
    // Integer-Hz, roughly log-spaced, and never a multiple of half the base
    // frequency so the measured line is not shared with switching products.
    let freqs = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 4000.0, 9000.0];
    let model = duty_to_output_response(&p, &grid, &freqs, Exec::Parallel).unwrap();
    let cfg = SimConfig {
        record_stride: 50,
        ..SimConfig::default()
    };
    let measured = Exec::Parallel.map(&freqs, |&f| measure_duty_response(&p, &cfg, f, 0.005).unwrap());
    let mut worst_db: f64 = 0.0;
    let mut worst_deg: f64 = 0.0;
    for (g, m) in model.gains.iter().zip(&measured) {
        worst_db = worst_db.max((db(g.norm()) - db(m.norm())).abs());
        worst_deg = worst_deg.max(wrap_deg((g / m).arg().to_degrees()).abs());
    }
    gate.report(
        "C4",
        "small-signal vs perturbation",
        worst_db <= 1.0 && worst_deg <= 5.0,
        format!(
            "10 points 10 Hz..9 kHz, worst |gain| error {worst_db:.3} dB (<= 1), worst phase error {worst_deg:.3} deg (<= 5)"
        ),
    );
}

fn criterion_5(gate: &mut Gate) {
    let p = paper();
    let grid = p.grid().unwrap();
    let comp = CompensatorParams::paper_default(5.3);
    let scan = default_scan(&p);
    let m = loop_metrics(&p, &grid, &comp, &scan, &[1.0, 15e3 - 1.0, 15e3 + 1.0], Exec::Parallel).unwrap();
    // The resonant stage has a pole exactly at 15 kHz; read the Bode scan
    // point closest to it as well as the points 1 Hz either side.
    let nearest = m
        .loop_gain
        .freqs
        .iter()
        .zip(m.loop_gain.gain_db())
        .min_by(|a, b| (a.0 - 15e3).abs().total_cmp(&(b.0 - 15e3).abs()))
        .map(|(f, g)| (*f, g))
        .unwrap();
    let t1 = m.gain_db_at[0].1;
    let beat_readings = [nearest.1, m.gain_db_at[1].1, m.gain_db_at[2].1];
    let beat_ok = beat_readings.iter().any(|g| (g - 45.0).abs() <= 2.0);
    let pass = within(m.crossover_hz, 1000.0, 0.10)
        && (m.phase_margin_deg - 96.0).abs() <= 5.0
        && (t1 - 47.0).abs() <= 2.0
        && beat_ok;
    gate.report(
        "C5",
        "loop metrics",
        pass,
        format!(
            "crossover {:.1} Hz (1000 +/- 10%), PM {:.2} deg (96 +/- 5), |T(1 Hz)| {:.2} dB (47 +/- 2), \
             |T| near 15 kHz {:.2} dB at scan point {:.1} Hz, {:.2} / {:.2} dB at 15 kHz -/+ 1 Hz (45 +/- 2); \
             unity crossings at {:?} Hz",
            m.crossover_hz,
            m.phase_margin_deg,
            t1,
            nearest.1,
            nearest.0,
            m.gain_db_at[1].1,
            m.gain_db_at[2].1,
            m.crossings_hz.iter().map(|f| f.round()).collect::<Vec<_>>()
        ),
    );
}

fn criterion_6(gate: &mut Gate) {
    let beat = 18e3;
    let unsync = CircuitParams { f2: 182e3, ..paper() };
    let sync = CircuitParams { f2: 200e3, ..paper() };
    let cfg = SimConfig::default();
    let a = Simulator::open_loop(&unsync, &cfg).unwrap().run().unwrap();
    // Read the synchronized run on the same 2 kHz window so the 18 kHz bin
    // exists, and settle it hard so drift does not pass for envelope.
    let tight = SimConfig {
        relative_settle_tolerance: 1e-9,
        settle_base_periods: 4000,
        ..cfg
    };
    let b = Simulator::new(&sync, &tight, ConstantDuty(sync.duty), 2000.0)
        .unwrap()
        .run()
        .unwrap();
    let drop = |s: Signal| db(a.line(s, beat).unwrap().norm()) - db(b.line(s, beat).unwrap().norm());
    let (d_dc, d_o) = (drop(Signal::VDc), drop(Signal::VO));
    let full = b.peak_to_peak(Signal::VO);
    let ripple = b.switching_ripple(Signal::VO, sync.f2);
    let flat = (full - ripple).abs() <= 0.05 * ripple;
    gate.report(
        "C6",
        "synchronization suppression",
        d_dc >= 40.0 && d_o >= 40.0 && flat,
        format!(
            "18 kHz line drops {d_dc:.1} dB on v_dc and {d_o:.1} dB on v_o (>= 40); synchronized v_o p-p {:.4} mV vs \
             single-period ripple {:.4} mV ({:.2}%, <= 5%)",
            1e3 * full,
            1e3 * ripple,
            100.0 * (full - ripple).abs() / ripple
        ),
    );
}

fn criterion_7(gate: &mut Gate) {
    let p = paper();
    let f_cr = critical_frequency(&p).unwrap();
    let scan = log_scan(10.0, 0.5 * p.f1, 200);
    let v: Vec<f64> = scan
        .iter()
        .map(|&f| beat_component_closed_form(&p, f).unwrap().v_o.norm())
        .collect();
    let peaks: Vec<usize> = (1..v.len() - 1).filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1]).collect();
    let unique = peaks.len() == 1 && f_cr >= scan[peaks[0] - 1] && f_cr <= scan[peaks[0] + 1];

    let with = |c_dc: f64, c_o: f64| CircuitParams {
        c_dc: p.c_dc * c_dc,
        c_o: p.c_o * c_o,
        ..p
    };
    let f_dc2 = critical_frequency(&with(2.0, 1.0)).unwrap();
    let f_o2 = critical_frequency(&with(1.0, 2.0)).unwrap();
    let lowered = f_dc2 < f_cr && f_o2 < f_cr;

    let mults = [0.5, 1.0, 2.0, 4.0];
    let f_top = mults
        .iter()
        .flat_map(|&m| [critical_frequency(&with(m, 1.0)).unwrap(), critical_frequency(&with(1.0, m)).unwrap()])
        .fold(0.0, f64::max);
    let above = log_scan(1.2 * f_top, 0.5 * p.f1, 20);
    let mut monotone = true;
    for &fb in &above {
        for vary_dc in [true, false] {
            let amps: Vec<(f64, f64)> = mults
                .iter()
                .map(|&m| {
                    let q = if vary_dc { with(m, 1.0) } else { with(1.0, m) };
                    let b = beat_component_closed_form(&q, fb).unwrap();
                    (b.v_dc.norm(), b.v_o.norm())
                })
                .collect();
            monotone &= amps.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
        }
    }

    // Simulated beat amplitude across the 200 kHz / f2 family.
    let f_bs: Vec<f64> = (8..=24).map(|k| k as f64 * 1e3).collect();
    let sim_amp = Exec::Parallel.map(&f_bs, |&fb| {
        let q = CircuitParams { f2: p.f1 - fb, ..p };
        let trace = simulate(&q, &SimConfig::default()).unwrap();
        trace.line(Signal::VO, fb).unwrap().norm()
    });
    let i_peak = sim_amp
        .iter()
        .enumerate()
        .fold(0, |b, (i, a)| if *a > sim_amp[b] { i } else { b });
    let sim_peak = f_bs[i_peak];
    let shape = within(sim_peak, f_cr, 0.10);

    gate.report(
        "C7",
        "critical-frequency behaviour",
        unique && lowered && monotone && shape,
        format!(
            "f_cr = {f_cr:.1} Hz, {} interior peak(s) of |V_o_beat| on a 200/decade scan (at {:.1} Hz); \
             2x C_DC -> {f_dc2:.1} Hz, 2x C_o -> {f_o2:.1} Hz; beat amplitudes decrease in C_DC and C_o for \
             f_b >= {:.0} Hz: {monotone}; simulated v_o beat peaks at {sim_peak:.0} Hz ({:+.1}% from f_cr, <= 10%)",
            peaks.len(),
            peaks.first().map(|&i| scan[i]).unwrap_or(f64::NAN),
            1.2 * f_top,
            100.0 * (sim_peak - f_cr) / f_cr
        ),
    );
}

fn criterion_8(gate: &mut Gate) {
    let p = paper();
    let spec = DesignSpec {
        x_dc: 0.05,
        v_dc0: 10.56,
    };
    let d = design_capacitors(&p, &spec).unwrap();
    let values = within(d.c_dc_min, 4.50e-6, 0.005) && within(d.c_o_min, 3.41e-6, 0.005);
    let q = CircuitParams { c_dc: d.c_dc_min, ..p };
    let trace = simulate(&q, &SimConfig::default()).unwrap();
    let swing = 0.5 * trace.peak_to_peak(Signal::VDc);
    let limit = 1.5 * spec.x_dc * spec.v_dc0;
    gate.report(
        "C8",
        "design rules",
        values && swing <= limit,
        format!(
            "c_dc_min = {:.4} uF (4.50 +/- 0.5%), c_o_min = {:.4} uF (3.41 +/- 0.5%); with C_DC = c_dc_min the \
             v_dc beat+ripple amplitude is {:.4} V <= {:.4} V (margin {:.1}x)",
            1e6 * d.c_dc_min,
            1e6 * d.c_o_min,
            swing,
            limit,
            limit / swing
        ),
    );
}

fn criterion_9(gate: &mut Gate, base: &Baseline) {
    let p = paper();
    let grid = base.sol.grid;
    let mut parts = Vec::new();
    let mut pass = true;

    let sym = Signal::ALL
        .iter()
        .map(|&s| base.sol.signal(s).conjugate_symmetry_error())
        .chain(Signal::ALL.iter().map(|&s| spectrum_of(&base.trace, s, &grid).unwrap().conjugate_symmetry_error()))
        .fold(0.0, f64::max);
    pass &= sym <= 1e-10;
    parts.push(format!("conjugate symmetry {sym:.1e} (<= 1e-10)"));

    // Parseval on the switching spectrum truncated at |k| <= 4·M1.
    let wide = FrequencyGrid::new(p.f1, p.f2).unwrap().with_truncation(4 * grid.m1() as usize);
    let mut parseval_worst: f64 = 0.0;
    let mut parseval_ok = true;
    for d in [0.2, 0.35, 0.5, 0.65, 0.8] {
        let s = switching_spectrum(d, &wide);
        let energy: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let gap = (d - energy) / d;
        parseval_ok &= energy <= d + 1e-12 && gap <= 0.02;
        parseval_worst = parseval_worst.max(gap);
    }
    let fine = FrequencyGrid::new(p.f1, p.f2).unwrap().with_truncation(40 * grid.m2() as usize);
    let fine_gap = [0.2, 0.5, 0.8]
        .iter()
        .map(|&d| {
            let e: f64 = switching_spectrum(d, &fine).coeffs().iter().map(|c| c.norm_sqr()).sum();
            (d - e) / d
        })
        .fold(0.0, f64::max);
    pass &= parseval_ok;
    parts.push(format!(
        "Parseval to |k| <= 4M1 short by up to {:.2}% (<= 2%; {} switching harmonics kept), {:.2}% with 80 harmonics",
        100.0 * parseval_worst,
        wide.k_max() / grid.m2() as usize,
        100.0 * fine_gap
    ));

    let i_r = rectified_current_spectrum(&p, &grid);
    let p_in: f64 = i_r
        .coeffs()
        .iter()
        .zip(base.sol.v_dc.coeffs())
        .map(|(i, v)| (i * v.conj()).re)
        .sum();
    let p_out: f64 = base.sol.v_o.coeffs().iter().map(|v| v.norm_sqr()).sum::<f64>() / p.r_load;
    let balance = (p_in - p_out).abs() / p_out;
    pass &= balance <= 0.01;
    parts.push(format!("power balance {:.4}% (<= 1%)", 100.0 * balance));

    let audit = base.trace.energy.relative_imbalance();
    pass &= audit <= 0.005;
    parts.push(format!("energy audit {:.4}% (<= 0.5%)", 100.0 * audit));

    let h = 1e-6;
    let d0 = 0.4;
    let analytic = switching_spectrum_derivative(d0, &grid);
    let hi = switching_spectrum(d0 + h, &grid);
    let lo = switching_spectrum(d0 - h, &grid);
    let fd_err = analytic
        .harmonics()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(k, a)| ((hi.at(k) - lo.at(k)) / (2.0 * h) - a).norm() / a.norm())
        .fold(0.0, f64::max);
    pass &= fd_err <= 1e-6;
    parts.push(format!("dS/dD vs central difference {fd_err:.1e} (<= 1e-6)"));

    let fine_trace = simulate(
        &p,
        &SimConfig {
            steps_per_switch_period: 400,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let halving = cross_check(&base.sol, &base.trace, 0.01)
        .unwrap()
        .iter()
        .map(|c| {
            let a = c.simulated;
            let b = spectrum_of(&fine_trace, c.signal, &grid).unwrap().line_amplitude(c.k).unwrap();
            (a - b).abs() / b
        })
        .fold(0.0, f64::max);
    pass &= halving < 0.005;
    parts.push(format!("step halving moves lines by {:.4}% (< 0.5%)", 100.0 * halving));

    gate.report("C9", "property suites", pass, parts.join("; "));
}

fn module_checks(base: &Baseline) {
    println!("module-level checks (reported, not gated):");
    let p = paper();
    let min_il = base.trace.i_l.iter().copied().fold(f64::INFINITY, f64::min);
    note(
        "M1",
        "CCM holds at the default operating point",
        min_il > 0.0,
        format!(
            "min(i_L) = {min_il:.4} A; DC {:.4} A against a {:.4} A beat swing",
            base.sol.dc(Signal::IL),
            base.sol.i_l.line_amplitude(3).unwrap()
        ),
    );

    let cf = beat_component_closed_form(&p, 15e3).unwrap().v_o.norm();
    let full = base.sol.v_o.line_amplitude(3).unwrap();
    note(
        "M2",
        "closed-form |V_o_beat| vs full solve at 15 kHz within 30%",
        (cf - full).abs() <= 0.3 * full,
        format!("{cf:.4} V vs {full:.4} V ({:+.1}%)", 100.0 * (cf - full) / full),
    );

    let comp = CompensatorParams::paper_default(5.3);
    let s = num_complex::Complex64::new(0.0, 2.0 * PI * (15e3 + 1e-3));
    let g_b = db(comp.resonant(s).norm());
    note("M3", "|G_b| right next to its centre exceeds 80 dB", g_b > 80.0, format!("{g_b:.1} dB at 15 kHz + 1 mHz"));
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };
    let base = criterion_1(&mut gate);
    criterion_2(&mut gate, &base);
    criterion_3(&mut gate, &base);
    criterion_4(&mut gate);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate);
    criterion_9(&mut gate, &base);
    module_checks(&base);
    if gate.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {}", gate.failed.join(", "));
        std::process::exit(1);
    }
}
