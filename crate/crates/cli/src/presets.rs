use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::CliError;

const PRESETS: &str = include_str!("../presets.toml");

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub tau: f64,
    pub t_stim: f64,
    #[serde(default)]
    pub delta_t: f64,
    #[serde(default)]
    pub delta_phi: f64,
    pub i0: Option<f64>,
    pub phi0: Option<f64>,
}

fn table() -> &'static BTreeMap<String, Preset> {
    static TABLE: OnceLock<BTreeMap<String, Preset>> = OnceLock::new();
    TABLE.get_or_init(|| toml::from_str(PRESETS).expect("bundled presets.toml is valid"))
}

pub fn names() -> impl Iterator<Item = &'static str> {
    table().keys().map(String::as_str)
}

pub fn get(name: &str) -> Result<Preset, CliError> {
    table().get(name).copied().ok_or_else(|| {
        let known: Vec<&str> = names().collect();
        CliError::Config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
    })
}
