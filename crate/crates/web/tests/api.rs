use fluorsqueeze_web::{equilibrium_json, optimize_json, presets_json, spectrum_json};
use serde_json::Value;

fn preset(name: &str) -> Value {
    let all: Value = serde_json::from_str(&presets_json()).unwrap();
    all.as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == name)
        .cloned()
        .unwrap()
}

#[test]
fn presets_cover_every_fixture() {
    let all: Value = serde_json::from_str(&presets_json()).unwrap();
    assert_eq!(all.as_array().unwrap().len(), 8);
    assert_eq!(preset("fig2-line4")["channel"], 2);
    assert_eq!(preset("fig1-line2")["free"], serde_json::json!(["c"]));
}

#[test]
fn spectrum_of_line_one_dips_at_zero() {
    let model = preset("fig1-line1")["model"].to_string();
    let out: Value = serde_json::from_str(&spectrum_json(&model, 1, -8.0, 8.0, 801).unwrap()).unwrap();
    assert_eq!(out["mu"].as_array().unwrap().len(), 801);
    assert_eq!(out["squeezed"], true);
    let minima = out["minima"].as_array().unwrap();
    assert_eq!(minima.len(), 1);
    assert!(minima[0]["mu"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn bad_inputs_are_rejected_with_messages() {
    let model = preset("fig1-line1")["model"].to_string();
    assert!(spectrum_json(&model, 3, -1.0, 1.0, 11).is_err());
    assert!(spectrum_json(&model, 1, -1.0, 1.0, 1).is_err());
    assert!(spectrum_json("{", 1, -1.0, 1.0, 11).unwrap_err().contains("model JSON"));
    let mut bad: Value = serde_json::from_str(&model).unwrap();
    bad["a1sq"] = 0.95.into();
    assert!(equilibrium_json(&bad.to_string()).unwrap_err().contains("fractions"));
    assert!(optimize_json(&model, 1, "omega_rabi,nope", 4)
        .unwrap_err()
        .contains("nope"));
}

#[test]
fn equilibrium_is_in_the_ball() {
    let model = preset("fig1-line3")["model"].to_string();
    let x: Value = serde_json::from_str(&equilibrium_json(&model).unwrap()).unwrap();
    let r2: f64 = ["x", "y", "z"].iter().map(|k| x[k].as_f64().unwrap().powi(2)).sum();
    assert!(r2 <= 1.0);
}

#[test]
fn optimizing_the_rabi_frequency_recovers_line_one() {
    let model = preset("fig1-line1")["model"].to_string();
    let out: Value = serde_json::from_str(&optimize_json(&model, 1, "omega_rabi", 8).unwrap()).unwrap();
    let omega = out["best"]["omega_rabi"].as_f64().unwrap();
    assert!((omega - 0.2976).abs() < 0.005, "{omega}");
    assert!(out["objective"].as_f64().unwrap() < 1.0);
}
