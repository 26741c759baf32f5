//! Beat-frequency oscillation in two-stage wireless power receivers.
//!
//! A diode rectifier fed by the coil current at `f1` charges a DC-link
//! capacitor that supplies a buck converter switching at `f2`. When the two
//! frequencies differ, a component at `|f1 - f2|` builds up on both
//! capacitors. This crate models that receiver two independent ways:
//!
//! * [`steady_state`] solves the multi-frequency (harmonic) model on the
//!   grid `gcd(f1, f2)` with one linear solve, and [`small_signal`]
//!   linearizes it in the duty cycle;
//! * [`time_sim`] integrates the switched equations directly and extracts
//!   line spectra from bin-aligned windows.
//!
//! [`beat_analysis`] adds the reduced-order closed forms of the beat
//! components, the critical frequency and the capacitor/frequency design
//! rules. [`report`] writes the CSV and JSON formats used by the CLI.

pub mod beat_analysis;
pub mod compensator;
pub mod error;
pub mod excitation;
pub mod exec;
pub mod linalg;
pub mod report;
pub mod small_signal;
pub mod spectral;
pub mod steady_state;
pub mod time_sim;

pub use error::{Error, Result};
pub use exec::Exec;
pub use excitation::CircuitParams;
pub use spectral::{FrequencyGrid, HarmonicVector};
pub use steady_state::{Signal, SteadyStateSolution};
