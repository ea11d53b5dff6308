//! `fluorsqueeze`: command-line front end for the squeezing spectra,
//! trajectory simulation, Monte Carlo estimation and control optimization.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input (scenario, flags,
//! records), 3 numerical failure (singular or unstable drift), 4 trajectory
//! integration aborted, 5 every optimizer start was in the unstable region.
//! `FLUORSQUEEZE_THREADS` caps the worker thread count.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fluorsqueeze::dynamics::{equilibrium, validate, Severity};
use fluorsqueeze::optimize::optimize;
use fluorsqueeze::records::{load_records, write_ensemble};
use fluorsqueeze::scenario::Scenario;
use fluorsqueeze::spectrum::{spectrum_scan, uniform_grid};
use fluorsqueeze::trajectories::{estimate_spectrum, SmeConfig};
use fluorsqueeze::{Channel, Error, ModelParams, SpectrumSeries};
use serde_json::json;

const THREADS_VAR: &str = "FLUORSQUEEZE_THREADS";

#[derive(Parser)]
#[command(
    name = "fluorsqueeze",
    version,
    about = "Squeezing in the fluorescence of a two-level atom under homodyne feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Grid {
    /// Detector channel (1 or 2); defaults to the scenario's [spectrum] channel, else 1.
    #[arg(long)]
    channel: Option<u8>,
    #[arg(long, allow_hyphen_values = true)]
    mu_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic spectrum S(μ) on a grid.
    Spectrum {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Stationary Bloch vector and feedback-shifted detuning.
    Equilibrium {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Simulate quantum trajectories into a directory of record files.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo spectrum estimate from a record directory.
    Estimate {
        /// Directory written by `simulate`.
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Search the scenario's [control] parameters for the deepest squeezing.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Check a scenario and list every violated constraint.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Require |α₀|² > 0 regardless of the scenario's setting.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::InvalidState(_)
        | Error::InvalidParams(_)
        | Error::ZeroDetectionAmplitude
        | Error::RecordMismatch(_)
        | Error::Config(_) => 2,
        Error::Singular { .. } | Error::Unstable | Error::Quadrature(_) => 3,
        Error::NonFinite { .. } => 4,
        Error::Optimization(_) => 5,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("plain data always serializes") + "\n"
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let s = Scenario::load(path)?;
    for w in &s.warnings {
        eprintln!("{w}");
    }
    Ok(s)
}

fn channel(flag: Option<u8>, fallback: Option<Channel>) -> Result<Channel, Error> {
    match flag {
        Some(n) => Channel::try_from(n).map_err(|e| Error::Config(format!("--channel: {e}"))),
        None => Ok(fallback.unwrap_or(Channel::One)),
    }
}

// -0.0 prints as "-0.0"; fold it into 0.
fn tidy(v: f64) -> f64 {
    v + 0.0
}

fn series_csv(kind: &str, source: &str, params: &ModelParams, s: &SpectrumSeries) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "# fluorsqueeze {kind}");
    let _ = writeln!(text, "# source = {}", serde_json::to_string(source).unwrap());
    let _ = writeln!(text, "# channel = {}", s.channel.number());
    let _ = writeln!(text, "# params = {}", serde_json::to_string(params).unwrap());
    match &s.stderr {
        None => {
            text.push_str("mu,S\n");
            for (m, v) in s.mu.iter().zip(&s.values) {
                let _ = writeln!(text, "{:.16e},{:.16e}", tidy(*m), v);
            }
        }
        Some(err) => {
            text.push_str("mu,S_hat,stderr\n");
            for ((m, v), e) in s.mu.iter().zip(&s.values).zip(err) {
                let _ = writeln!(text, "{:.16e},{:.16e},{:.16e}", tidy(*m), v, e);
            }
        }
    }
    text
}

fn series_json(kind: &str, source: &str, params: &ModelParams, s: &SpectrumSeries) -> String {
    pretty(&json!({
        "kind": kind,
        "source": source,
        "params": params,
        "series": s,
    }))
}

fn write_series(
    kind: &str,
    source: &Path,
    params: &ModelParams,
    s: &SpectrumSeries,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Error> {
    let source = source.display().to_string();
    let text = match format {
        Format::Csv => series_csv(kind, &source, params, s),
        Format::Json => series_json(kind, &source, params, s),
    };
    emit(out, &text)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Spectrum {
            scenario,
            grid,
            out,
            format,
        } => {
            let s = load(&scenario)?;
            let settings = s.spectrum;
            let ch = channel(grid.channel, settings.map(|g| g.channel))?;
            let (lo, hi, n) = fluorsqueeze::spectrum::default_grid(&s.model);
            let series = spectrum_scan(
                &s.model,
                ch,
                grid.mu_min.or(settings.map(|g| g.mu_min)).unwrap_or(lo),
                grid.mu_max.or(settings.map(|g| g.mu_max)).unwrap_or(hi),
                grid.points.or(settings.map(|g| g.points)).unwrap_or(n),
            )?;
            if series.negative_count() > 0 {
                eprintln!("warning: {} negative spectrum values", series.negative_count());
            }
            write_series("spectrum", &scenario, &s.model, &series, out.as_deref(), format)
        }
        Command::Equilibrium { scenario, out, format } => {
            let s = load(&scenario)?;
            let x = equilibrium(&s.model)?;
            let dwc = s.model.delta_omega_c();
            let text = match format {
                Format::Json => pretty(&json!({
                    "x": tidy(x.x),
                    "y": tidy(x.y),
                    "z": tidy(x.z),
                    "delta_omega_c": tidy(dwc),
                })),
                Format::Csv => format!(
                    "x,y,z,delta_omega_c\n{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    tidy(x.x),
                    tidy(x.y),
                    tidy(x.z),
                    tidy(dwc)
                ),
            };
            emit(out.as_deref(), &text)
        }
        Command::Simulate {
            scenario,
            out,
            trajectories,
            dt,
            t_final,
            seed,
        } => {
            let s = load(&scenario)?;
            let base = s.simulation;
            let need = |v: Option<f64>, from: Option<f64>, flag: &str| {
                v.or(from)
                    .ok_or_else(|| Error::Config(format!("{flag} is required without a [simulation] section")))
            };
            let cfg = SmeConfig {
                dt: need(dt, base.map(|b| b.dt), "--dt")?,
                t_final: need(t_final, base.map(|b| b.t_final), "--t-final")?,
                seed: seed.or(base.map(|b| b.seed)).unwrap_or(0),
                n_traj: trajectories.or(base.map(|b| b.n_traj)).unwrap_or(1),
                initial: base
                    .map(|b| b.initial)
                    .unwrap_or(fluorsqueeze::trajectories::InitialState::Equilibrium),
            };
            let m = write_ensemble(&out, &s.model, &cfg)?;
            let eq = equilibrium(&s.model)?;
            let summary = json!({
                "directory": out.display().to_string(),
                "n_traj": m.n_traj,
                "steps": m.steps,
                "seed": m.seed,
                "projections": m.projections,
                "projection_fraction": m.projection_fraction,
                "max_violation": m.max_violation,
                "mean_final_state": m.mean_final_state().map(tidy),
                "equilibrium": eq.to_array().map(tidy),
            });
            emit(None, &pretty(&summary))
        }
        Command::Estimate {
            records,
            grid,
            out,
            format,
        } => {
            let (m, recs) = load_records(&records)?;
            let ch = channel(grid.channel, None)?;
            let mu = uniform_grid(
                grid.mu_min.unwrap_or(-3.0),
                grid.mu_max.unwrap_or(3.0),
                grid.points.unwrap_or(41),
            );
            if mu.len() < 2 {
                return Err(Error::Config("need at least two grid points".into()));
            }
            let series = estimate_spectrum(&recs, ch, &mu)?;
            write_series("estimate", &records, &m.params, &series, out.as_deref(), format)
        }
        Command::Optimize {
            scenario,
            seed,
            out,
            format,
        } => {
            if format == Format::Csv {
                return Err(Error::Config("optimize reports are JSON only".into()));
            }
            let s = load(&scenario)?;
            let control = s
                .control
                .ok_or_else(|| Error::Config(format!("{}: no [control] section", scenario.display())))?;
            let mut options = control.options;
            if let Some(seed) = seed {
                options.seed = seed;
            }
            let r = optimize(&s.model, &control.spec, &options)?;
            let best: serde_json::Map<String, serde_json::Value> = r
                .free
                .iter()
                .zip(&r.values)
                .map(|(p, v)| (p.name().to_string(), json!(v)))
                .collect();
            let report = json!({
                "scenario": scenario.display().to_string(),
                "channel": control.spec.channel,
                "objective": control.spec.objective,
                "options": options,
                "best": best,
                "objective_value": r.objective,
                "mu_star": tidy(r.mu_star),
                "evaluations": r.evaluations,
                "converged": r.converged,
                "params": r.params,
            });
            emit(out.as_deref(), &pretty(&report))
        }
        Command::Validate {
            scenario,
            strict,
            format,
        } => validate_cmd(&scenario, strict, format),
    }
}

/// Lists every violated constraint rather than stopping at the first.
fn validate_cmd(path: &Path, strict_flag: bool, format: Format) -> Result<(), Error> {
    let s = Scenario::load_unchecked(path)?;
    let violations = validate(&s.model, strict_flag || s.strict);
    let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
    let text = match format {
        Format::Json => pretty(&json!({
            "scenario": path.display().to_string(),
            "valid": errors == 0,
            "violations": violations,
        })),
        Format::Csv => {
            let mut t = String::from("severity,constraint,message\n");
            for v in &violations {
                let sev = if v.severity == Severity::Error {
                    "error"
                } else {
                    "warning"
                };
                let _ = writeln!(t, "{sev},{},\"{}\"", v.constraint, v.message.replace('"', "\"\""));
            }
            t
        }
    };
    emit(None, &text)?;
    if errors > 0 {
        Err(Error::InvalidParams(violations))
    } else {
        Ok(())
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_VAR} must be a positive integer, got \"{value}\"")))?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_VAR} must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("{THREADS_VAR}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
