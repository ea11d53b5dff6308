//! Browser bindings for the static demo in `web/`.
//!
//! Every entry point takes and returns JSON strings. The `*_json` functions
//! are plain Rust so they can be tested on the host; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use fluorsqueeze::dynamics::{ensure_valid, equilibrium};
use fluorsqueeze::optimize::{optimize, ControlParam, ControlSpec, FreeParam, Objective, OptimizeOptions};
use fluorsqueeze::scenario::Scenario;
use fluorsqueeze::spectrum::spectrum_scan;
use fluorsqueeze::{Channel, ModelParams};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const PRESETS: [(&str, &str); 8] = [
    ("fig1-line1", include_str!("../../../scenarios/fig1-line1.toml")),
    ("fig1-line2", include_str!("../../../scenarios/fig1-line2.toml")),
    ("fig1-line3", include_str!("../../../scenarios/fig1-line3.toml")),
    ("fig1-line4", include_str!("../../../scenarios/fig1-line4.toml")),
    ("fig2-line1", include_str!("../../../scenarios/fig2-line1.toml")),
    ("fig2-line2", include_str!("../../../scenarios/fig2-line2.toml")),
    ("fig2-line3", include_str!("../../../scenarios/fig2-line3.toml")),
    ("fig2-line4", include_str!("../../../scenarios/fig2-line4.toml")),
];

/// Upper bound on plotted points, keeps the page responsive.
pub const MAX_POINTS: usize = 20_001;

#[derive(Serialize)]
struct Preset {
    name: &'static str,
    model: ModelParams,
    channel: Channel,
    free: Vec<ControlParam>,
}

fn parse_model(model: &str) -> Result<ModelParams, String> {
    let p: ModelParams = serde_json::from_str(model).map_err(|e| format!("bad model JSON: {e}"))?;
    ensure_valid(&p, false).map_err(|e| e.to_string())?;
    Ok(p)
}

fn parse_channel(channel: u8) -> Result<Channel, String> {
    Channel::try_from(channel).map_err(|e| e.to_string())
}

/// Bundled scenario fixtures: name, model, channel and the free parameters
/// of their optimization problem.
pub fn presets_json() -> String {
    let presets: Vec<Preset> = PRESETS
        .iter()
        .map(|(name, text)| {
            let s = Scenario::from_toml(text).expect("bundled scenario parses");
            let control = s.control.expect("bundled scenario has [control]");
            Preset {
                name,
                model: s.model,
                channel: control.spec.channel,
                free: control.spec.free.iter().map(|f| f.param).collect(),
            }
        })
        .collect();
    serde_json::to_string(&presets).expect("serializable")
}

/// `{mu, s, minima: [{mu, value}], squeezed}` on a uniform grid.
pub fn spectrum_json(model: &str, channel: u8, mu_min: f64, mu_max: f64, points: usize) -> Result<String, String> {
    let p = parse_model(model)?;
    let ch = parse_channel(channel)?;
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_POINTS}"));
    }
    let s = spectrum_scan(&p, ch, mu_min, mu_max, points).map_err(|e| e.to_string())?;
    let minima = s.global_minima();
    let squeezed = minima.iter().any(|m| m.value < 1.0);
    Ok(json!({
        "mu": s.mu,
        "s": s.values,
        "minima": minima.iter().map(|m| json!({"mu": m.mu, "value": m.value})).collect::<Vec<_>>(),
        "squeezed": squeezed,
    })
    .to_string())
}

/// Stationary Bloch vector `{x, y, z}`.
pub fn equilibrium_json(model: &str) -> Result<String, String> {
    let p = parse_model(model)?;
    let x = equilibrium(&p).map_err(|e| e.to_string())?;
    Ok(json!({"x": x.x, "y": x.y, "z": x.z}).to_string())
}

/// Minimizes `min_μ S` over the comma-separated parameters in `free`
/// (default bounds) starting from `model`.
pub fn optimize_json(model: &str, channel: u8, free: &str, starts: usize) -> Result<String, String> {
    let p = parse_model(model)?;
    let ch = parse_channel(channel)?;
    let free = free
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            ControlParam::from_name(name)
                .map(|c| FreeParam::with_default_bounds(c, p.gamma))
                .ok_or_else(|| format!("unknown parameter {name:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = ControlSpec {
        free,
        channel: ch,
        objective: Objective::MinOverMu,
    };
    let opts = OptimizeOptions {
        starts: starts.clamp(1, 64),
        ..OptimizeOptions::default()
    };
    let r = optimize(&p, &spec, &opts).map_err(|e| e.to_string())?;
    let best: serde_json::Map<String, serde_json::Value> = r
        .free
        .iter()
        .zip(&r.values)
        .map(|(c, v)| (c.name().to_string(), json!(v)))
        .collect();
    Ok(json!({
        "best": best,
        "model": r.params,
        "objective": r.objective,
        "mu_star": r.mu_star,
        "evaluations": r.evaluations,
        "converged": r.converged,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn presets() -> String {
    presets_json()
}

#[wasm_bindgen]
pub fn spectrum(model: &str, channel: u8, mu_min: f64, mu_max: f64, points: usize) -> Result<String, JsError> {
    spectrum_json(model, channel, mu_min, mu_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = equilibrium)]
pub fn equilibrium_state(model: &str) -> Result<String, JsError> {
    equilibrium_json(model).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = optimize)]
pub fn optimize_controls(model: &str, channel: u8, free: &str, starts: usize) -> Result<String, JsError> {
    optimize_json(model, channel, free, starts).map_err(|e| JsError::new(&e))
}
