//! Scenario files: TOML documents that pin down a parameter set and,
//! optionally, a spectrum grid, a trajectory ensemble and an optimization.
//!
//! ```toml
//! [model]
//! gamma = 1.0          # optional, defaults to 1
//! k_d = 0.0
//! n_bar = 0.0
//! omega_rabi = 0.2976
//! delta_omega = 0.0
//! a0sq = 0.1
//! a1sq = 0.45
//! a2sq = 0.45
//! theta1 = -1.5707963267948966
//! theta2 = -1.5707963267948966
//! c = 0.0
//! phi = 0.0
//!
//! [validation]         # optional
//! strict = false
//!
//! [spectrum]           # optional
//! channel = 1
//! mu_min = -8.0
//! mu_max = 8.0
//! points = 801
//!
//! [simulation]         # optional
//! dt = 1e-3
//! t_final = 200.0
//! seed = 1
//! n_traj = 2000
//! initial = "equilibrium"   # or [x, y, z]
//!
//! [control]            # optional
//! channel = 1
//! objective = "min_over_mu" # or "at_mu", which needs `mu`
//! starts = 16
//! seed = 0
//! [[control.free]]
//! param = "omega_rabi"
//! lower = 0.0          # bounds optional
//! upper = 1.0
//! ```
//!
//! Unknown keys are rejected and missing ones are reported by their full path.

use std::path::Path;

use serde::Deserialize;

use crate::dynamics::{ensure_valid, ModelParams, Violation};
use crate::error::{Error, Result};
use crate::optimize::{ControlParam, ControlSpec, FreeParam, Objective, OptimizeOptions};
use crate::spectrum::{default_grid, Channel};
use crate::trajectories::{InitialState, SmeConfig};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: Option<RawModel>,
    validation: Option<RawValidation>,
    spectrum: Option<RawSpectrum>,
    simulation: Option<RawSimulation>,
    control: Option<RawControl>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    gamma: Option<f64>,
    k_d: Option<f64>,
    n_bar: Option<f64>,
    omega_rabi: Option<f64>,
    delta_omega: Option<f64>,
    a0sq: Option<f64>,
    a1sq: Option<f64>,
    a2sq: Option<f64>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    c: Option<f64>,
    phi: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    strict: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    channel: Option<u8>,
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    points: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: Option<f64>,
    t_final: Option<f64>,
    seed: Option<u64>,
    n_traj: Option<usize>,
    initial: Option<InitialState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    channel: Option<u8>,
    objective: Option<String>,
    mu: Option<f64>,
    free: Option<Vec<RawFree>>,
    starts: Option<usize>,
    seed: Option<u64>,
    fatol: Option<f64>,
    xrtol: Option<f64>,
    max_evals_per_start: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFree {
    param: Option<String>,
    lower: Option<f64>,
    upper: Option<f64>,
}

/// Spectrum settings from a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSettings {
    pub channel: Channel,
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlSettings {
    pub spec: ControlSpec,
    pub options: OptimizeOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub model: ModelParams,
    pub strict: bool,
    /// Warnings left over from validation.
    pub warnings: Vec<Violation>,
    pub spectrum: Option<SpectrumSettings>,
    pub simulation: Option<SmeConfig>,
    pub control: Option<ControlSettings>,
}

fn require<T>(v: Option<T>, path: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key {path}")))
}

fn channel(n: Option<u8>, path: &str) -> Result<Channel> {
    Channel::try_from(require(n, path)?).map_err(|e| Error::Config(format!("{path}: {e}")))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let mut s = Scenario::from_toml_unchecked(text)?;
        s.warnings = ensure_valid(&s.model, s.strict)?;
        Ok(s)
    }

    /// Parses without checking the model constraints (other sections are
    /// still checked). `warnings` is left empty.
    pub fn from_toml_unchecked(text: &str) -> Result<Scenario> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let m = require(raw.model, "model")?;
        let model = ModelParams {
            gamma: m.gamma.unwrap_or(1.0),
            k_d: require(m.k_d, "model.k_d")?,
            n_bar: require(m.n_bar, "model.n_bar")?,
            omega_rabi: require(m.omega_rabi, "model.omega_rabi")?,
            delta_omega: require(m.delta_omega, "model.delta_omega")?,
            a0sq: require(m.a0sq, "model.a0sq")?,
            a1sq: require(m.a1sq, "model.a1sq")?,
            a2sq: require(m.a2sq, "model.a2sq")?,
            theta1: require(m.theta1, "model.theta1")?,
            theta2: require(m.theta2, "model.theta2")?,
            c: require(m.c, "model.c")?,
            phi: require(m.phi, "model.phi")?,
        };
        let strict = raw.validation.and_then(|v| v.strict).unwrap_or(false);

        let spectrum = match raw.spectrum {
            None => None,
            Some(s) => {
                let (lo, hi, n) = default_grid(&model);
                let settings = SpectrumSettings {
                    channel: channel(s.channel, "spectrum.channel")?,
                    mu_min: s.mu_min.unwrap_or(lo),
                    mu_max: s.mu_max.unwrap_or(hi),
                    points: s.points.unwrap_or(n),
                };
                if !(settings.mu_min < settings.mu_max) || settings.points < 2 {
                    return Err(Error::Config("spectrum: need mu_min < mu_max and points ≥ 2".into()));
                }
                Some(settings)
            }
        };

        let simulation = match raw.simulation {
            None => None,
            Some(s) => {
                let cfg = SmeConfig {
                    dt: require(s.dt, "simulation.dt")?,
                    t_final: require(s.t_final, "simulation.t_final")?,
                    seed: require(s.seed, "simulation.seed")?,
                    n_traj: require(s.n_traj, "simulation.n_traj")?,
                    initial: s.initial.unwrap_or(InitialState::Equilibrium),
                };
                cfg.validate()?;
                Some(cfg)
            }
        };

        let control = match raw.control {
            None => None,
            Some(c) => {
                let objective = match c.objective.as_deref().unwrap_or("min_over_mu") {
                    "min_over_mu" => Objective::MinOverMu,
                    "at_mu" => Objective::AtMu {
                        mu: require(c.mu, "control.mu")?,
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "control.objective: expected \"min_over_mu\" or \"at_mu\", got \"{other}\""
                        )))
                    }
                };
                let mut free = Vec::new();
                for (i, f) in c.free.unwrap_or_default().into_iter().enumerate() {
                    let path = format!("control.free[{i}]");
                    let name = require(f.param, &format!("{path}.param"))?;
                    let param = ControlParam::from_name(&name)
                        .ok_or_else(|| Error::Config(format!("{path}.param: unknown parameter \"{name}\"")))?;
                    let (lo, hi) = param.default_bounds(model.gamma);
                    free.push(FreeParam::new(param, f.lower.unwrap_or(lo), f.upper.unwrap_or(hi)));
                }
                let spec = ControlSpec {
                    free,
                    channel: channel(c.channel, "control.channel")?,
                    objective,
                };
                spec.validate()?;
                let d = OptimizeOptions::default();
                let options = OptimizeOptions {
                    starts: c.starts.unwrap_or(d.starts),
                    seed: c.seed.unwrap_or(d.seed),
                    fatol: c.fatol.unwrap_or(d.fatol),
                    xrtol: c.xrtol.unwrap_or(d.xrtol),
                    max_evals_per_start: c.max_evals_per_start.unwrap_or(d.max_evals_per_start),
                };
                Some(ControlSettings { spec, options })
            }
        };

        Ok(Scenario {
            model,
            strict,
            warnings: Vec::new(),
            spectrum,
            simulation,
            control,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        Self::read(path.as_ref(), Scenario::from_toml)
    }

    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Scenario> {
        Self::read(path.as_ref(), Scenario::from_toml_unchecked)
    }

    fn read(path: &Path, parse: fn(&str) -> Result<Scenario>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
