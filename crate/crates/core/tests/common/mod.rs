#![allow(dead_code)]

use beatmap::ModelParams;

pub const TAU: f64 = 1000.0;
pub const T_STIM: f64 = 500.0;

/// Every figure setting with both rule strengths given.
pub const RULE_PRESETS: [(&str, f64, f64); 9] = [
    ("fig4", 0.005, 0.5),
    ("fig6a", 0.002, 2.5),
    ("fig6c", 0.005, 3.5),
    ("fig8a", 0.0045, 1.5),
    ("fig8b", 0.002, 3.0),
    ("fig8c", 0.002, 4.5),
    ("fig8d", 0.0055, 4.5),
    ("fig8e", 0.0045, 6.5),
    ("fig8f", 0.008, 3.8),
];

pub fn params(delta_t: f64, delta_phi: f64) -> ModelParams {
    ModelParams::new(TAU, T_STIM, delta_t, delta_phi).unwrap()
}

pub fn preset(name: &str) -> ModelParams {
    let &(_, dt, dp) = RULE_PRESETS.iter().find(|p| p.0 == name).expect("unknown preset");
    params(dt, dp)
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn close_phase(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d) <= tol
}
