//! Run configuration: JSON schema, defaults and validation.

use crate::climate::{EcsDistribution, UhiParams, REFERENCE_ECS};
use crate::damage::{GlobalDf, Variant, DICE2016_COEFFICIENT};
use crate::pulse::PulseParams;
use crate::scc::{DiscountSpec, ScuhiSettings, DEFAULT_DISCOUNT_RATE, DEFAULT_HORIZON};
use crate::scenario::DEFAULT_URBAN_THRESHOLD;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{role} file not found: {path}")]
    MissingFile { role: &'static str, path: PathBuf },
    #[error("{field} out of range: {reason}")]
    InvalidRange { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidRange {
        field,
        reason: reason.into(),
    }
}

/// How equilibrium climate sensitivity enters the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EcsConfig {
    Fixed {
        #[serde(default = "reference_ecs")]
        value: f64,
    },
    /// Triangular draws from a seeded ChaCha8 stream.
    Sample {
        draws: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "ecs_lower")]
        lower: f64,
        #[serde(default = "reference_ecs")]
        mode: f64,
        #[serde(default = "ecs_upper")]
        upper: f64,
    },
}

fn reference_ecs() -> f64 {
    REFERENCE_ECS
}

fn ecs_lower() -> f64 {
    2.0
}

fn ecs_upper() -> f64 {
    5.0
}

impl Default for EcsConfig {
    fn default() -> Self {
        EcsConfig::Fixed { value: REFERENCE_ECS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[serde(default = "pulse_year")]
    pub year: i32,
    #[serde(default = "pulse_size")]
    pub size_gtc: f64,
    #[serde(default = "pulse_amplitudes")]
    pub amplitudes: [f64; 3],
    #[serde(default = "pulse_timescales")]
    pub timescales: [f64; 3],
    /// Multiply the response by `ecs / 3`.
    #[serde(default)]
    pub scale_with_ecs: bool,
}

fn pulse_year() -> i32 {
    PulseParams::default().year
}

fn pulse_size() -> f64 {
    PulseParams::default().size_gtc
}

fn pulse_amplitudes() -> [f64; 3] {
    PulseParams::default().amplitudes
}

fn pulse_timescales() -> [f64; 3] {
    PulseParams::default().timescales
}

impl Default for PulseConfig {
    fn default() -> Self {
        let p = PulseParams::default();
        Self {
            year: p.year,
            size_gtc: p.size_gtc,
            amplitudes: p.amplitudes,
            timescales: p.timescales,
            scale_with_ecs: false,
        }
    }
}

impl PulseConfig {
    pub fn params(&self) -> PulseParams {
        PulseParams {
            amplitudes: self.amplitudes,
            timescales: self.timescales,
            year: self.year,
            size_gtc: self.size_gtc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UhiConfig {
    #[serde(default = "uhi_a")]
    pub a: f64,
    #[serde(default = "uhi_b")]
    pub b: f64,
    #[serde(default)]
    pub ratchet: bool,
}

fn uhi_a() -> f64 {
    UhiParams::default().a
}

fn uhi_b() -> f64 {
    UhiParams::default().b
}

impl Default for UhiConfig {
    fn default() -> Self {
        Self {
            a: uhi_a(),
            b: uhi_b(),
            ratchet: false,
        }
    }
}

impl UhiConfig {
    pub fn params(&self) -> UhiParams {
        UhiParams { a: self.a, b: self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageConfig {
    /// CSV `region,alpha_r,alpha_u,phi`; overrides the uniform values below
    /// for the regions it lists.
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default = "alpha")]
    pub alpha_r: f64,
    /// Defaults to `alpha_r`.
    #[serde(default)]
    pub alpha_u: Option<f64>,
    #[serde(default = "phi")]
    pub phi: f64,
}

fn alpha() -> f64 {
    DICE2016_COEFFICIENT
}

fn phi() -> f64 {
    crate::damage::PersistenceParams::default().phi.get(crate::Region::Us)
}

impl Default for DamageConfig {
    fn default() -> Self {
        Self {
            params_file: None,
            alpha_r: alpha(),
            alpha_u: None,
            phi: phi(),
        }
    }
}

/// Full run configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub patterns: Vec<PathBuf>,
    pub trajectory: PathBuf,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub global_df: GlobalDf,
    #[serde(default = "discount_rates")]
    pub discount_rates: Vec<f64>,
    /// First discounted year; defaults to the pulse year.
    #[serde(default)]
    pub discount_base_year: Option<i32>,
    #[serde(default = "horizon")]
    pub horizon: i32,
    #[serde(default)]
    pub ecs: EcsConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub uhi: UhiConfig,
    #[serde(default = "urban_threshold")]
    pub urban_threshold: f64,
    #[serde(default)]
    pub damage: DamageConfig,
    #[serde(default)]
    pub scuhi: ScuhiSettings,
    #[serde(default = "quantiles")]
    pub quantiles: Vec<f64>,
    /// Not echoed in the manifest, so outputs are independent of where
    /// they are written.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn discount_rates() -> Vec<f64> {
    vec![DEFAULT_DISCOUNT_RATE]
}

fn horizon() -> i32 {
    DEFAULT_HORIZON
}

fn urban_threshold() -> f64 {
    DEFAULT_URBAN_THRESHOLD
}

fn quantiles() -> Vec<f64> {
    vec![0.05, 0.5, 0.95]
}

impl RunConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(scenario: impl Into<PathBuf>, patterns: Vec<PathBuf>, trajectory: impl Into<PathBuf>) -> Self {
        Self {
            scenario: scenario.into(),
            patterns,
            trajectory: trajectory.into(),
            variants: all_variants(),
            global_df: GlobalDf::default(),
            discount_rates: discount_rates(),
            discount_base_year: None,
            horizon: horizon(),
            ecs: EcsConfig::default(),
            pulse: PulseConfig::default(),
            uhi: UhiConfig::default(),
            urban_threshold: urban_threshold(),
            damage: DamageConfig::default(),
            scuhi: ScuhiSettings::default(),
            quantiles: quantiles(),
            output_dir: None,
        }
    }

    pub fn discount_base_year(&self) -> i32 {
        self.discount_base_year.unwrap_or(self.pulse.year)
    }

    pub fn discount_specs(&self) -> Vec<DiscountSpec> {
        self.discount_rates
            .iter()
            .map(|&rate| DiscountSpec {
                rate,
                base_year: self.discount_base_year(),
                horizon: self.horizon,
            })
            .collect()
    }

    pub fn ecs_distribution(&self) -> Option<EcsDistribution> {
        match self.ecs {
            EcsConfig::Fixed { .. } => None,
            EcsConfig::Sample { lower, mode, upper, .. } => EcsDistribution::new(lower, mode, upper).ok(),
        }
    }

    /// Checks ranges and normalises the variant list to canonical order.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        if self.variants.is_empty() {
            return Err(invalid("variants", "at least one variant is required"));
        }
        self.variants.sort_by_key(|v| Variant::ALL.iter().position(|x| x == v));
        self.variants.dedup();
        if self.patterns.is_empty() {
            return Err(invalid("patterns", "at least one pattern file is required"));
        }
        if self.discount_rates.is_empty() {
            return Err(invalid("discount_rates", "at least one rate is required"));
        }
        for spec in self.discount_specs() {
            spec.validate().map_err(|e| invalid("discount_rates", e.to_string()))?;
        }
        match self.ecs {
            EcsConfig::Fixed { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(invalid("ecs.value", format!("{value} must be positive")));
                }
            }
            EcsConfig::Sample {
                draws,
                lower,
                mode,
                upper,
                ..
            } => {
                if draws == 0 {
                    return Err(invalid("ecs.draws", "at least one draw is required"));
                }
                if !(lower > 0.0) {
                    return Err(invalid("ecs.lower", format!("{lower} must be positive")));
                }
                EcsDistribution::new(lower, mode, upper).map_err(|e| invalid("ecs", e.to_string()))?;
            }
        }
        self.pulse.params().validate().map_err(|e| invalid("pulse", e.to_string()))?;
        self.uhi.params().validate().map_err(|e| invalid("uhi", e.to_string()))?;
        if !(self.urban_threshold.is_finite() && self.urban_threshold > 0.0) {
            return Err(invalid("urban_threshold", format!("{} must be positive", self.urban_threshold)));
        }
        let d = &self.damage;
        for (field, v) in [("damage.alpha_r", d.alpha_r), ("damage.alpha_u", d.alpha_u.unwrap_or(d.alpha_r))] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, format!("{v} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&d.phi) {
            return Err(invalid("damage.phi", format!("{} outside [0, 1]", d.phi)));
        }
        self.global_df.validate().map_err(|e| invalid("global_df", e.to_string()))?;
        if !(self.scuhi.reduction > 0.0 && self.scuhi.reduction <= 1.0) {
            return Err(invalid("scuhi.reduction", format!("{} outside (0, 1]", self.scuhi.reduction)));
        }
        if self.quantiles.is_empty() {
            return Err(invalid("quantiles", "at least one quantile is required"));
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(invalid("quantiles", format!("{q} outside [0, 1]")));
        }
        Ok(())
    }

    /// Input files with their role, in a fixed order.
    pub fn input_files(&self) -> Vec<(&'static str, &Path)> {
        let mut files = vec![("scenario", self.scenario.as_path()), ("trajectory", self.trajectory.as_path())];
        files.extend(self.patterns.iter().map(|p| ("pattern", p.as_path())));
        if let Some(p) = &self.damage.params_file {
            files.push(("damage_params", p.as_path()));
        }
        files
    }

    fn resolve_paths(&mut self, base_dir: &Path) {
        let join = |p: &mut PathBuf| *p = base_dir.join(&*p);
        join(&mut self.scenario);
        join(&mut self.trajectory);
        self.patterns.iter_mut().for_each(join);
        if let Some(p) = self.damage.params_file.as_mut() {
            join(p);
        }
        if let Some(p) = self.output_dir.as_mut() {
            join(p);
        }
    }
}

/// Parses config text, applies defaults, resolves paths against
/// `base_dir` and checks that every input file exists.
pub fn validate_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.resolve_paths(base_dir);
    config.validate()?;
    for (role, path) in config.input_files() {
        if !path.is_file() {
            return Err(ConfigError::MissingFile {
                role,
                path: path.to_path_buf(),
            });
        }
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    validate_config(&text, base_dir)
}
