//! Declarative experiment configuration: presets, file merge and overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::Experiment;
use crate::error::{Error, Result};
use crate::loss::{DynamicWeights, LossWeights};
use crate::optimize::OptimizerSchedule;
use crate::oracles::WallCurve;
use crate::physics::{EntropyMode, PrimitiveState};
use crate::sampling::{GradientMethod, Strategy};

const PRESETS: [(&str, &str); 4] = [
    ("smooth", include_str!("../presets/smooth.toml")),
    ("expansion", include_str!("../presets/expansion.toml")),
    ("oblique", include_str!("../presets/oblique.toml")),
    ("bow", include_str!("../presets/bow.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Geometry parameters; each experiment reads only its own fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_angle_deg: Option<f64>,
    /// Oblique: vertical offsets of the two interfaces from the shock line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<[f64; 2]>,
    /// Oblique: half-width of the gradient-data band around the shock.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    /// Bow: interface curve `x = a + b y^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interface: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_segments: Option<usize>,
    /// Gradient-data region as a polygon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<[f64; 2]>>,
}

/// Freestream state in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InletConfig {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl InletConfig {
    pub fn state(&self) -> PrimitiveState {
        PrimitiveState::new(self.rho, self.u, self.v, self.p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub residual: usize,
    pub gradient: usize,
    pub inflow: usize,
    pub wall_pressure: usize,
    pub wall_slip: usize,
    /// Interface points per interface; the decomposition default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<usize>,
    /// Unsteady runs: number of time levels for point data and interfaces.
    #[serde(default = "default_levels")]
    pub time_levels: usize,
    /// Explicit pressure-data locations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_points: Option<Vec<[f64; 2]>>,
    pub strategy: Strategy,
    pub gradient_method: GradientMethod,
    #[serde(default)]
    pub noise: f64,
    /// Unsteady runs: count the t = 0 plane as an inflow face of the
    /// space-time domain.
    #[serde(default)]
    pub initial_data: bool,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default = "default_panels")]
    pub quadrature_panels: f64,
}

fn default_levels() -> usize {
    1
}

fn default_order() -> usize {
    4
}

fn default_panels() -> f64 {
    8.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub scale_n: f64,
    pub alpha_clamp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyChoice {
    Relu,
    TwoSided,
    Off,
}

impl EntropyChoice {
    pub fn mode(self) -> Option<EntropyMode> {
        match self {
            EntropyChoice::Relu => Some(EntropyMode::Relu),
            EntropyChoice::TwoSided => Some(EntropyMode::TwoSided),
            EntropyChoice::Off => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub xpinn: bool,
    pub adaptive: bool,
    pub dynamic: bool,
    pub entropy: EntropyChoice,
    pub epsilon: f64,
    /// Flux continuity on interfaces; the decomposition default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_continuity: Option<bool>,
    pub global_conservation: bool,
    pub wall_slip: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub checkpoint_every: usize,
    /// Evaluation grid resolution per axis.
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub path: String,
}

/// Full description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub output_dir: String,
    pub gamma: f64,
    pub geometry: GeometryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlet: Option<InletConfig>,
    pub sampling: SamplingConfig,
    pub network: NetworkConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub dynamic: DynamicWeights,
    #[serde(default)]
    pub optimizer: OptimizerSchedule,
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, what: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::config(format!("{what}: {e}")))
}

/// Applies `key.path=value`; the value is read as TOML and falls back to a
/// bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not key=value")))?;
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override '{key}' descends into a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        Self::resolve(name, &[])
    }

    /// Resolves a preset name or config path, then applies overrides. A
    /// config file is merged over the preset named by its `experiment` key.
    pub fn resolve(source: &str, overrides: &[String]) -> Result<Self> {
        let mut table = match PRESETS.iter().find(|(n, _)| *n == source) {
            Some((_, text)) => parse_table(text, source)?,
            None => {
                let path = Path::new(source);
                if !path.exists() {
                    return Err(Error::config(format!(
                        "'{source}' is neither a preset ({}) nor a file",
                        preset_names().collect::<Vec<_>>().join(", ")
                    )));
                }
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let user = parse_table(&text, source)?;
                let name = user
                    .get("experiment")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| Error::config(format!("{source}: missing 'experiment'")))?;
                let (_, preset) = PRESETS
                    .iter()
                    .find(|(n, _)| *n == name)
                    .ok_or_else(|| Error::config(format!("unknown experiment '{name}'")))?;
                let mut base = parse_table(preset, name)?;
                merge(&mut base, user);
                base
            }
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn kind(&self) -> Result<Experiment> {
        Experiment::parse(&self.experiment)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if !(self.gamma > 1.0) {
            return Err(Error::config("gamma must exceed 1"));
        }
        if self.network.hidden_layers == 0 || self.network.width == 0 {
            return Err(Error::config("network needs at least one hidden layer of positive width"));
        }
        if !(self.network.scale_n > 0.0) || !(self.network.alpha_clamp > 0.0) {
            return Err(Error::config("scale_n and alpha_clamp must be positive"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed must fit in a signed 64-bit integer"));
        }
        if self.sampling.residual == 0 {
            return Err(Error::config("sampling.residual must be positive"));
        }
        if self.output.grid < 2 {
            return Err(Error::config("output.grid must be at least 2"));
        }
        if self.weights.omega.iter().chain(&self.weights.interface).any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config("loss weights must be finite and nonnegative"));
        }
        if self.dynamic.period == 0 {
            return Err(Error::config("dynamic.period must be positive"));
        }
        self.optimizer.validate()?;
        let g = &self.geometry;
        let need = |v: bool, name: &str| {
            if v {
                Ok(())
            } else {
                Err(Error::config(format!("{} geometry needs '{name}'", self.experiment)))
            }
        };
        match kind {
            Experiment::Smooth => {
                need(g.half_width.is_some(), "half_width")?;
                need(g.t_final.is_some(), "t_final")?;
                if self.method.global_conservation {
                    return Err(Error::config("global conservation terms need a steady problem"));
                }
            }
            Experiment::Expansion => {
                need(g.theta_deg.is_some(), "theta_deg")?;
                need(self.inlet.is_some(), "inlet")?;
            }
            Experiment::Oblique => {
                need(g.theta_deg.is_some(), "theta_deg")?;
                need(g.offsets.is_some(), "offsets")?;
                need(self.inlet.is_some(), "inlet")?;
            }
            Experiment::Bow => {
                need(g.radius.is_some(), "radius")?;
                need(g.bounds.is_some(), "bounds")?;
                need(g.interface.is_some(), "interface")?;
                need(self.inlet.is_some(), "inlet")?;
            }
        }
        if let Some(inlet) = &self.inlet {
            if !inlet.state().is_admissible() {
                return Err(Error::config("inlet state must have positive density and pressure"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_with_reference_architectures() {
        let arch = |n: &str| {
            let c = ExperimentConfig::preset(n).unwrap();
            (c.network.hidden_layers, c.network.width)
        };
        assert_eq!(arch("expansion"), (6, 40));
        assert_eq!(arch("oblique"), (7, 30));
        assert_eq!(arch("bow"), (5, 160));
        assert_eq!(arch("smooth"), (4, 30));
    }

    #[test]
    fn round_trip_is_idempotent() {
        for name in preset_names() {
            let c = ExperimentConfig::preset(name).unwrap();
            let text = c.to_toml();
            let again = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_toml(), text);
            assert_eq!(again.hash(), c.hash());
        }
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::resolve(
            "expansion",
            &["optimizer.adam.iterations=7".into(), "method.dynamic=true".into(), "output_dir=somewhere".into()],
        )
        .unwrap();
        assert_eq!(c.optimizer.adam.iterations, 7);
        assert!(c.method.dynamic);
        assert_eq!(c.output_dir, "somewhere");
        assert_ne!(c.hash(), ExperimentConfig::preset("expansion").unwrap().hash());
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::resolve("nope", &[]).is_err());
        assert!(ExperimentConfig::resolve("smooth", &["network.width=0".into()]).is_err());
        assert!(ExperimentConfig::resolve("smooth", &["method.global_conservation=true".into()]).is_err());
        assert!(ExperimentConfig::resolve("smooth", &["bogus.key=1".into()]).is_err());
        assert!(ExperimentConfig::resolve("smooth", &["novalue".into()]).is_err());
    }

    #[test]
    fn user_file_merges_over_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "experiment = \"oblique\"\nseed = 9\n[network]\nwidth = 12\n").unwrap();
        let c = ExperimentConfig::resolve(path.to_str().unwrap(), &[]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.network.width, 12);
        assert_eq!(c.network.hidden_layers, 7);
    }
}
