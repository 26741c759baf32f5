use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "cannot place {f1} Hz and {f2} Hz on a common grid (M1 = {m1} exceeds {max_m1} or rounding error {rel_error:.3e} exceeds tolerance)"
    )]
    RationalizationFailure {
        f1: f64,
        f2: f64,
        m1: u64,
        max_m1: u64,
        rel_error: f64,
    },

    #[error("waveform evaluation left an imaginary residue of {residue:.3e} (limit {limit:.3e})")]
    NonRealResult { residue: f64, limit: f64 },

    #[error("harmonic system is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("harmonic index {k} outside the grid |k| <= {k_max}")]
    IndexOutOfGrid { k: i64, k_max: usize },

    #[error("simulation did not settle within {base_periods} base periods (last RMS change {last_change:.3e})")]
    NoConvergence { base_periods: usize, last_change: f64 },

    #[error("closed loop saturated duty at {bound} for {periods} consecutive switching periods")]
    UnstableLoop { bound: f64, periods: usize },

    #[error("capture window of {window_s} s is not an integer number of {period_s} s periods")]
    WindowMismatch { window_s: f64, period_s: f64 },

    #[error("loop gain never crosses unity between {f_lo} Hz and {f_hi} Hz")]
    NoCrossover { f_lo: f64, f_hi: f64 },

    #[error("|Den| is monotone over {f_lo}..{f_hi} Hz, no critical frequency")]
    NoResonance { f_lo: f64, f_hi: f64 },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonRealResult { .. }
                | Error::SingularSystem { .. }
                | Error::NoConvergence { .. }
                | Error::UnstableLoop { .. }
                | Error::NoCrossover { .. }
                | Error::NoResonance { .. }
        )
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
