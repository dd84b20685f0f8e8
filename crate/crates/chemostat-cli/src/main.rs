use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemostat_cli::commands::{cmd_ide_check, cmd_run, cmd_solve_eq, cmd_sweep, Axis};
use chemostat_cli::config::{load_config, preset_by_name, preset_config, resolve, Resolved, RunConfig};
use chemostat_cli::error::Result;
use chemostat_cli::output::compare_csv;

/// Sampled-data dilution control for an age-structured chemostat:
/// equilibrium solving, closed-loop simulation, sweeps, and diagnostics.
#[derive(Parser)]
#[command(name = "chemostat", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Where the run description comes from: a JSON config file or a named
/// preset (sim1, sim2, sim3_newborn, sim3_output, openloop).
#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Path to a JSON run config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Name of a frozen preset.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<(RunConfig, Resolved)> {
        match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path),
            (None, Some(name)) => {
                let cfg = preset_config(preset_by_name(name)?);
                let res = resolve(&cfg)?;
                Ok((cfg, res))
            }
            _ => unreachable!("clap enforces exactly one source"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the equilibrium: characteristic root, set points, yield.
    SolveEq {
        #[command(flatten)]
        src: Source,
    },
    /// Simulate one run; write the time-series CSV and a JSON summary.
    Run {
        #[command(flatten)]
        src: Source,
        /// Output directory (default: $CHEMOSTAT_OUT_DIR, else the
        /// current directory).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Record every N-th step (overrides the config).
        #[arg(long, value_name = "N")]
        stride: Option<usize>,
    },
    /// Print a preset as a JSON config document.
    Preset {
        /// sim1, sim2, sim3_newborn, sim3_output, or openloop.
        name: String,
    },
    /// Run one simulation per axis value and aggregate the summaries.
    Sweep {
        #[command(flatten)]
        src: Source,
        /// Which knob to sweep.
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Output directory (default: $CHEMOSTAT_OUT_DIR, else the
        /// current directory).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads for the fan-out (default: one per core).
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
    /// Compare a CSV against a golden file within tolerances.
    Compare {
        /// The candidate CSV.
        candidate: PathBuf,
        /// The golden CSV to compare against.
        #[arg(long, value_name = "PATH")]
        golden: PathBuf,
        /// Relative tolerance (scaled by the golden value).
        #[arg(long, value_name = "R", default_value_t = 0.0)]
        tol_rel: f64,
        /// Absolute tolerance.
        #[arg(long, value_name = "A", default_value_t = 0.0)]
        tol_abs: f64,
    },
    /// Cross-validate the renewal equation against the transport
    /// simulator and print the envelope and ergodicity diagnostics.
    IdeCheck {
        #[command(flatten)]
        src: Source,
    },
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::SolveEq { src } => {
            let (_, res) = src.load()?;
            println!("{}", cmd_solve_eq(&res));
        }
        Cmd::Run { src, out, stride } => {
            let (_, res) = src.load()?;
            let summary = cmd_run(&res, out, stride)?;
            println!("{summary}");
        }
        Cmd::Preset { name } => {
            let cfg = preset_config(preset_by_name(&name)?);
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("presets serialize")
            );
        }
        Cmd::Sweep { src, axis, values, out, jobs } => {
            let (cfg, _) = src.load()?;
            let report = cmd_sweep(&cfg, axis, &values, out, jobs)?;
            println!("{report}");
        }
        Cmd::Compare { candidate, golden, tol_rel, tol_abs } => {
            compare_csv(&candidate, &golden, tol_rel, tol_abs)?;
            println!(
                "comparison passed: {} matches {}",
                candidate.display(),
                golden.display()
            );
        }
        Cmd::IdeCheck { src } => {
            let (cfg, res) = src.load()?;
            let report = cmd_ide_check(&cfg, &res)?;
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are "errors" to clap but successes to us;
            // real usage errors map to the config exit code.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
