use std::path::Path;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../../presets/table1.toml")),
    ("table2", include_str!("../../presets/table2.toml")),
    ("table4-lv", include_str!("../../presets/table4-lv.toml")),
    ("table5-paths", include_str!("../../presets/table5-paths.toml")),
    ("table6-lv", include_str!("../../presets/table6-lv.toml")),
    ("table7-lv", include_str!("../../presets/table7-lv.toml")),
    ("fig3", include_str!("../../presets/fig3.toml")),
    ("fig4", include_str!("../../presets/fig4.toml")),
    ("fig4-paths", include_str!("../../presets/fig4-paths.toml")),
    ("fig5", include_str!("../../presets/fig5.toml")),
    ("fig6", include_str!("../../presets/fig6.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// A bundled configuration by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (known: {})", preset_names().join(", "))))?;
    ExperimentConfig::from_toml(text)
}

/// A preset name or the path of a configuration file.
pub fn resolve(name_or_path: &str) -> Result<ExperimentConfig> {
    if PRESETS.iter().any(|p| p.0 == name_or_path) {
        return preset(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return ExperimentConfig::load(path);
    }
    Err(Error::Config(format!(
        "'{name_or_path}' is neither a preset ({}) nor a readable file",
        preset_names().join(", ")
    )))
}
