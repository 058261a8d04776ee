//! TOML run configuration. Relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use didimpact::panel::PanelSchema;
use didimpact::synth::{ControlFamily, ControlGenerator, DgpSpec};

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Long-format CSV. Omit to analyse the panel described by `[synth]`.
    pub panel_path: Option<PathBuf>,
    pub event_calendar_path: Option<PathBuf>,
    /// Industry coefficients; the built-in preset when omitted.
    pub coefficient_preset_path: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub schema: SchemaConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub counterfactual: CounterfactualConfig,
    pub synth: Option<SynthConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemaConfig {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub treatment: String,
    pub controls: Option<Vec<String>>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        let s = PanelSchema::default();
        Self { unit: s.unit, time: s.time, outcome: s.outcome, treatment: s.treatment, controls: s.controls }
    }
}

impl From<&SchemaConfig> for PanelSchema {
    fn from(s: &SchemaConfig) -> Self {
        PanelSchema {
            unit: s.unit.clone(),
            time: s.time.clone(),
            outcome: s.outcome.clone(),
            treatment: s.treatment.clone(),
            controls: s.controls.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    #[serde(default = "yes")]
    pub log_outcome: bool,
    /// Consecutive phases from each treated unit's onset. A missing length
    /// runs to the end of the panel.
    #[serde(default)]
    pub phases: Vec<PhaseConfig>,
    /// Explicit windows; overrides `phases`.
    #[serde(default)]
    pub windows: Vec<WindowConfig>,
    #[serde(default)]
    pub controls: Vec<ControlConfig>,
}

fn default_outcome() -> String {
    "outcome".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub label: String,
    pub length: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub unit: String,
    pub onset: String,
    pub end: Option<String>,
    pub phase: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub name: String,
    #[serde(default)]
    pub log: bool,
    /// Capacity-type control (e.g. bed days offered); triggers the
    /// ceteris-paribus note in the report.
    #[serde(default)]
    pub supply_side: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub include_controls: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { enabled: true, alpha: 0.1, include_controls: true }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterfactualConfig {
    /// Model name; the last model when omitted.
    pub model: Option<String>,
    /// Treated unit; the first treated unit when omitted.
    pub unit: Option<String>,
    /// Limit the window to one phase.
    pub phase: Option<String>,
    /// Explicit `[first, last]` periods; overrides `phase`.
    pub window: Option<[String; 2]>,
    pub smearing: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub units: usize,
    pub periods: usize,
    #[serde(default = "default_start")]
    pub start: String,
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    pub unit_names: Option<Vec<String>>,
    /// Per-unit linear trends; zeros when omitted.
    pub unit_trends: Option<Vec<f64>>,
    /// Where `synth` writes the panel.
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub delta: Vec<DeltaConfig>,
    #[serde(default)]
    pub windows: Vec<SynthWindow>,
    #[serde(default)]
    pub controls: Vec<SynthControl>,
}

fn default_start() -> String {
    "2017-01".into()
}

fn default_base() -> f64 {
    8.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaConfig {
    pub phase: String,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthWindow {
    pub unit: String,
    /// Period index of the onset, counted from `start`.
    pub onset: usize,
    pub length: Option<usize>,
    pub phase: String,
    /// Apply the effect without setting the treatment column.
    #[serde(default)]
    pub hidden: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "lowercase")]
pub enum SynthFamily {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Poisson { lambda: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthControl {
    pub name: String,
    pub beta: f64,
    #[serde(default)]
    pub log: bool,
    #[serde(flatten)]
    pub family: SynthFamily,
}

impl SynthConfig {
    pub fn dgp(&self) -> Result<DgpSpec, Failure> {
        let start = didimpact::panel::TimeAxis::YearMonth
            .parse(&self.start)
            .ok_or_else(|| Failure::config(format!("synth.start `{}` is not YYYY-MM", self.start)))?;
        let mut spec = DgpSpec::seasonal(self.units, self.periods, self.base, self.amplitude, self.seed)
            .with_noise(self.noise_sd);
        spec.start = start;
        if let Some(names) = &self.unit_names {
            if names.len() != self.units {
                return Err(Failure::config(format!("synth.unit_names has {} names for {} units", names.len(), self.units)));
            }
            spec.unit_names = names.clone();
        }
        if let Some(trends) = &self.unit_trends {
            spec.unit_trends = trends.clone();
        }
        for d in &self.delta {
            spec = spec.with_delta(&d.phase, d.value);
        }
        for c in &self.controls {
            let family = match c.family {
                SynthFamily::Normal { mean, sd } => ControlFamily::Normal { mean, sd },
                SynthFamily::Uniform { low, high } => ControlFamily::Uniform { low, high },
                SynthFamily::Poisson { lambda } => ControlFamily::Poisson { lambda },
                SynthFamily::Lognormal { mu, sigma } => ControlFamily::LogNormal { mu, sigma },
            };
            spec = spec.with_control(ControlGenerator { name: c.name.clone(), family, beta: c.beta, enters_as_log: c.log });
        }
        Ok(spec)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::config(e.to_string()))
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.panel_path.as_mut().map(resolve);
        cfg.event_calendar_path.as_mut().map(resolve);
        cfg.coefficient_preset_path.as_mut().map(resolve);
        resolve(&mut cfg.output_dir);
        if let Some(out) = cfg.synth.as_mut().and_then(|s| s.output.as_mut()) {
            resolve(out);
        }
        Ok(cfg)
    }

    /// Checks referenced inputs exist and the model list is usable.
    pub fn validate(&self) -> Result<(), Failure> {
        match (&self.panel_path, &self.synth) {
            (Some(p), _) => require_file(p)?,
            (None, Some(_)) => {}
            (None, None) => return Err(Failure::config("either panel_path or [synth] is required".into())),
        }
        if let Some(p) = &self.event_calendar_path {
            require_file(p)?;
        }
        if let Some(p) = &self.coefficient_preset_path {
            require_file(p)?;
        }
        if self.models.is_empty() {
            return Err(Failure::config("at least one [[models]] entry is required".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Failure::config(format!("duplicate model name `{}`", m.name)));
            }
            if m.phases.is_empty() && m.windows.is_empty() {
                return Err(Failure::config(format!("model `{}` needs phases or windows", m.name)));
            }
        }
        if let Some(name) = &self.counterfactual.model {
            if !self.models.iter().any(|m| &m.name == name) {
                return Err(Failure::config(format!("counterfactual.model `{name}` is not a configured model")));
            }
        }
        Ok(())
    }
}

fn require_file(p: &Path) -> Result<(), Failure> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::config(format!("file not found: {}", p.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse(
            r#"
            panel_path = "p.csv"
            [[models]]
            name = "M"
            phases = [{ label = "open" }]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert!(cfg.diagnostics.enabled);
        assert_eq!(cfg.diagnostics.alpha, 0.1);
        assert!(cfg.models[0].log_outcome);
        assert_eq!(cfg.models[0].phases[0].length, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("panel_pth = \"x\"").unwrap_err();
        assert_eq!(err.module, "config");
        assert!(err.message.contains("panel_pth"));
    }

    #[test]
    fn synth_controls_parse() {
        let cfg = RunConfig::parse(
            r#"
            [synth]
            units = 3
            periods = 4
            controls = [
              { name = "beds", family = "lognormal", mu = 9.0, sigma = 0.1, beta = 0.2, log = true },
              { name = "events", family = "poisson", lambda = 2.0, beta = 0.03 },
            ]
            "#,
        )
        .unwrap();
        let dgp = cfg.synth.unwrap().dgp().unwrap();
        assert_eq!(dgp.controls.len(), 2);
        assert!(dgp.controls[0].enters_as_log);
        assert_eq!(dgp.controls[1].family, ControlFamily::Poisson { lambda: 2.0 });
    }
}
