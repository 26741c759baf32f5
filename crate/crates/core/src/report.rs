//! CSV writers for traces, spectra, frequency responses and sweeps.
//!
//! Numbers use Rust's shortest round-trip formatting, rows have a fixed
//! order and lines end in `\n`, so the same inputs give identical bytes.

use std::io::{self, Write};

use crate::beat_analysis::SweepResult;
use crate::small_signal::FrequencyResponse;
use crate::spectral::HarmonicVector;
use crate::time_sim::Trace;

pub fn write_trace_csv(trace: &Trace, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "t_s,v_dc_V,i_l_A,v_o_V,i_r_A,s_sw")?;
    for i in 0..trace.len() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            trace.time(i),
            trace.v_dc[i],
            trace.i_l[i],
            trace.v_o[i],
            trace.i_r[i],
            trace.s_sw[i]
        )?;
    }
    Ok(())
}

/// One-sided line table of a spectrum, `k = 0..=K`. Amplitudes are `2|c_k|`
/// (`|c_0|` at DC) and the normalized column is relative to the DC value.
pub fn write_harmonic_csv(h: &HarmonicVector, unit: &str, mut w: impl Write) -> io::Result<()> {
    writeln!(
        w,
        "k,f_hz,re_{unit},im_{unit},amplitude_{unit},amplitude_db_norm"
    )?;
    let dc = h.at(0).norm();
    for k in 0..=h.k_max() as i64 {
        let c = h.at(k);
        let amp = if k == 0 { c.norm() } else { 2.0 * c.norm() };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            k,
            k as f64 * h.f_base(),
            c.re,
            c.im,
            amp,
            20.0 * (amp / dc).log10()
        )?;
    }
    Ok(())
}

pub fn write_bode_csv(resp: &FrequencyResponse, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "f_hz,gain_db,phase_deg")?;
    for ((f, db), ph) in resp.freqs.iter().zip(resp.gain_db()).zip(resp.phase_deg()) {
        writeln!(w, "{f},{db},{ph}")?;
    }
    Ok(())
}

pub fn write_sweep_csv(sweep: &SweepResult, mut w: impl Write) -> io::Result<()> {
    writeln!(
        w,
        "f_b_hz,param_name,param_value,v_dc_beat_V,v_o_beat_V,v_o_beat_norm_db"
    )?;
    for s in &sweep.series {
        let name = s.param_name.as_deref().unwrap_or("");
        let value = s.param_value.map(|v| v.to_string()).unwrap_or_default();
        for (i, f) in sweep.axis.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                f,
                name,
                value,
                s.v_dc_beat[i],
                s.v_o_beat[i],
                20.0 * s.v_o_beat_norm[i].log10()
            )?;
        }
    }
    Ok(())
}
