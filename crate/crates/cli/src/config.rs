//! Experiment configuration files (TOML).
//!
//! Unknown keys are rejected and every physical precondition is re-checked
//! at load, so a config that loads is one the runner can execute.

use orthodyn::analysis::Binning;
use orthodyn::sim::IntegratorScheme;
use orthodyn::spectral::{RegimeParams, SpectralGrid};
use orthodyn::{ModelParams, Vec3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelParams,
    pub scheme: IntegratorScheme,
    pub ensemble: EnsembleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: usize,
    /// Must start at 0; every entry a multiple of `scheme.dt`.
    pub sample_times: Vec<f64>,
    pub seed: u64,
}

/// Spectral grid plus the width of the Gaussian initial density placed at
/// the model's `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_per_axis: usize,
    pub x_extent: f64,
    pub initial_sigma: f64,
}

impl GridSection {
    pub fn grid(&self) -> Result<SpectralGrid, orthodyn::Error> {
        SpectralGrid::new(self.n_per_axis, self.x_extent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    /// Wavevectors whose characteristic function is written at every
    /// ensemble sample time.
    #[serde(default)]
    pub lambdas: Vec<Vec3>,
    /// Times at which densities are reconstructed on `[grid]`.
    #[serde(default)]
    pub density_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Characteristic-function cross-check wavevectors.
    #[serde(default)]
    pub lambdas: Vec<Vec3>,
    /// Sample times to compare at; defaults to every positive sample time.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub moments: bool,
    /// Compare against an ensemble with `v0 -> -v0` (same seed) and, if a
    /// grid is given, the spectral densities likewise.
    #[serde(default)]
    pub reflect_v0: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<Binning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    Diffusion,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralV0 {
    /// `|v0|² = |v|²/3`, the per-axis share of the equilibrium speed.
    Equipartition,
    /// `|v0|² = |v|²`.
    Sphere,
}

fn default_bins() -> usize {
    16
}

fn default_spectral_v0() -> SpectralV0 {
    SpectralV0::Equipartition
}

/// Small-parameter sweep. The model's `coeffs` are replaced by the scaled
/// ones; the initial velocity keeps the direction of `model.v0` and is put
/// on the equilibrium sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub kind: RegimeKind,
    pub epsilons: Vec<f64>,
    pub base_a: f64,
    pub base_b: f64,
    pub t: f64,
    /// Step as a fraction of the relaxation time, `dt = a_dt / a`; if absent
    /// `scheme.dt` is used unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_dt: Option<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Initial speed used by the spectral sweep.
    #[serde(default = "default_spectral_v0")]
    pub spectral_v0: SpectralV0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub formats: Vec<FileFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { formats: vec![FileFormat::Binary] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub cf_z: f64,
    pub moment_z: f64,
    pub l1: f64,
    /// Multiplier on the calibrated Monte-Carlo noise floor.
    pub null_safety: f64,
    pub speed_rel_projected: f64,
    pub speed_rel_em: f64,
    pub mass: f64,
    pub imag_residue: f64,
    pub reflection: f64,
    pub wave_spread: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            cf_z: 3.0,
            moment_z: 3.0,
            l1: 0.05,
            null_safety: 1.0,
            speed_rel_projected: 1e-12,
            speed_rel_em: 5e-3,
            mass: 1e-9,
            imag_residue: 1e-10,
            reflection: 1e-9,
            wave_spread: 0.15,
        }
    }
}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, col)
}

/// Line of `key = ...` inside `[section]` (dotted sections allowed).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    CliError::Config(format!("{origin}:{l}:{c}: {msg}"))
                }
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        })?;
        cfg.validate().map_err(|(section, key, msg)| {
            let at = locate(text, section, key).map(|l| format!("{origin}:{l}")).unwrap_or_else(|| origin.to_string());
            CliError::Config(format!("{at}: {section}.{key}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn t_max(&self) -> f64 {
        self.ensemble.sample_times.last().copied().unwrap_or(0.0)
    }

    /// Physical and structural checks; errors name the offending key.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let e = |s, k, m: String| Err((s, k, m));
        if let Err(err) = self.model.validate() {
            return e("model", "v0", err.to_string());
        }
        if self.ensemble.n_traj == 0 {
            return e("ensemble", "n_traj", "must be >= 1".into());
        }
        let ts = &self.ensemble.sample_times;
        if ts.first() != Some(&0.0) || ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
            return e("ensemble", "sample_times", "must start at 0 and increase strictly".into());
        }
        if let Err(err) = self.scheme.validate(&self.model, self.t_max()) {
            return e("scheme", "dt", err.to_string());
        }
        for &t in ts {
            let k = (t / self.scheme.dt).round();
            if (k * self.scheme.dt - t).abs() > 1e-9 * t.max(1.0) {
                return e("ensemble", "sample_times", format!("{t} is not a multiple of dt = {}", self.scheme.dt));
            }
        }
        if let Some(g) = &self.grid {
            if let Err(err) = g.grid() {
                return e("grid", "n_per_axis", err.to_string());
            }
            if !(g.initial_sigma.is_finite() && g.initial_sigma > 0.0) {
                return e("grid", "initial_sigma", "must be > 0".into());
            }
        }
        if let Some(s) = &self.spectral {
            if s.lambdas.iter().any(|l| !l.is_finite()) {
                return e("spectral", "lambdas", "must be finite".into());
            }
            if !s.density_times.is_empty() && self.grid.is_none() {
                return e("spectral", "density_times", "needs a [grid] section".into());
            }
            if s.density_times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
                || s.density_times.windows(2).any(|w| !(w[1] > w[0]))
            {
                return e("spectral", "density_times", "must be non-negative and increasing".into());
            }
        }
        if let Some(c) = &self.compare {
            for &t in &c.times {
                if !ts.iter().any(|s| (s - t).abs() <= 1e-9 * s.abs().max(1.0)) {
                    return e("compare", "times", format!("{t} is not a sample time"));
                }
            }
            if let Some(b) = &c.binning {
                if let Err(err) = b.validate() {
                    return e("compare", "binning", err.to_string());
                }
            }
        }
        if let Some(r) = &self.regime {
            if r.epsilons.is_empty() {
                return e("regime", "epsilons", "must not be empty".into());
            }
            for &eps in &r.epsilons {
                if let Err(err) = RegimeParams::new(eps, r.base_a, r.base_b) {
                    return e("regime", "epsilons", err.to_string());
                }
            }
            if !(r.t.is_finite() && r.t > 0.0) {
                return e("regime", "t", "must be > 0".into());
            }
            if let Some(x) = r.a_dt {
                if !(x.is_finite() && x > 0.0 && x < 0.5) {
                    return e("regime", "a_dt", "must lie in (0, 0.5)".into());
                }
            }
            if r.bins < 8 {
                return e("regime", "bins", "must be >= 8".into());
            }
            if r.base_b == 0.0 {
                return e("regime", "base_b", "must be > 0 for a sweep".into());
            }
        }
        let th = &self.thresholds;
        for (k, v) in [
            ("cf_z", th.cf_z),
            ("moment_z", th.moment_z),
            ("l1", th.l1),
            ("null_safety", th.null_safety),
            ("speed_rel_projected", th.speed_rel_projected),
            ("speed_rel_em", th.speed_rel_em),
            ("mass", th.mass),
            ("imag_residue", th.imag_residue),
            ("reflection", th.reflection),
            ("wave_spread", th.wave_spread),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return e("thresholds", k, "must be > 0".into());
            }
        }
        Ok(())
    }
}
