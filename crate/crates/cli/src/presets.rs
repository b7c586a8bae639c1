//! Built-in experiment configurations.

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Preset {
    pub name: &'static str,
    /// Subcommand the preset is written for.
    pub command: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "speed-relaxation", command: "simulate", text: include_str!("../presets/speed-relaxation.toml") },
    Preset { name: "cf-crosscheck", command: "compare", text: include_str!("../presets/cf-crosscheck.toml") },
    Preset { name: "diffusion-limit", command: "sweep", text: include_str!("../presets/diffusion-limit.toml") },
    Preset { name: "wave-limit", command: "sweep", text: include_str!("../presets/wave-limit.toml") },
    Preset { name: "v0-symmetry", command: "compare", text: include_str!("../presets/v0-symmetry.toml") },
];

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })
}

pub fn load(name: &str) -> Result<ExperimentConfig, CliError> {
    let p = find(name)?;
    ExperimentConfig::from_toml(p.text, &format!("preset:{name}"))
}
