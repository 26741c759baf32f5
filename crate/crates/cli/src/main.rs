//! `beatosc`: steady-state, simulation, loop and design reports for
//! two-stage wireless power receivers.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use beatosc::Exec;
use clap::{Parser, Subcommand};

use commands::{Context, Failure};
use config::Format;

#[derive(Parser)]
#[command(name = "beatosc", version, about = "Beat-frequency analysis of two-stage wireless power receivers")]
#[command(after_help = "Any config field can be overridden with a dotted flag, e.g. --circuit.f2 200000")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON)
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: config `output_dir`, then $BEATOSC_OUT_DIR, then ./out)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Report format: csv, json or both
    #[arg(long, global = true)]
    format: Option<String>,

    /// Evaluate frequency points and sweep points on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic steady state of the receiver
    Solve,
    /// Time-domain simulation: trace and spectra
    Simulate {
        /// Close the output-voltage loop with the configured compensators
        #[arg(long)]
        closed_loop: bool,
    },
    /// Compare the harmonic solution against simulation line by line
    Verify {
        /// Allowed relative error per line
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Duty-to-output frequency response, or the loop gain with --loop
    Bode {
        #[arg(long = "loop")]
        loop_gain: bool,
    },
    /// Closed-form beat amplitudes over a range of beat frequencies
    Sweep,
    /// Minimum capacitors and frequency-plan advice
    Design,
}

fn run() -> Result<(), Failure> {
    let (args, overrides) = config::split_overrides(std::env::args().collect()).map_err(Failure::Validation)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.trim_end().trim_start_matches("error: ");
            return Err(Failure::Validation(msg.to_string()));
        }
    };
    let path = cli
        .config
        .ok_or_else(|| Failure::Validation("--config <FILE> is required".into()))?;
    let cfg = config::load(&path, &overrides).map_err(Failure::Validation)?;
    let format = match cli.format.as_deref() {
        None => cfg.format,
        Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some("both") => Format::Both,
        Some(other) => return Err(Failure::Validation(format!("unknown --format `{other}`"))),
    };
    let ctx = Context {
        out_dir: cfg.output_dir(cli.out_dir.as_deref()),
        cfg,
        format,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Simulate { closed_loop } => commands::simulate_cmd(&ctx, closed_loop),
        Command::Verify { tolerance } => commands::verify(&ctx, tolerance),
        Command::Bode { loop_gain } => commands::bode(&ctx, loop_gain),
        Command::Sweep => commands::sweep(&ctx),
        Command::Design => commands::design(&ctx),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(msg) => eprintln!("error: {msg}"),
                Failure::Numerical(msg) => eprintln!("numerical failure: {msg}"),
                Failure::VerifyFailed => eprintln!("verification failed"),
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
