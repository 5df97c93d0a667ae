//! Run configuration: a strict JSON schema with documented defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use bpnld::characterization::CharacterizationSetup;
use bpnld::closed_form::{ApertureMapping, ExperimentSpec, ScanSpec};
use bpnld::frames::{DetectorModel, Region};
use bpnld::model::{LayoutSpec, PolarizationAngles, PumpSpec};
use bpnld::oracle::QuadratureConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<bpnld::error::Error> for ConfigError {
    fn from(e: bpnld::error::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// A length that may be infinite, written as a number or the string "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length(pub f64);

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Length(v)),
            Raw::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(Length(f64::INFINITY)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{s}\""))),
        }
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    pub wavelength_m: f64,
    pub w0_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lc_m: Option<Length>,
    #[serde(rename = "coherence_A", skip_serializing_if = "Option::is_none")]
    pub coherence_a: Option<f64>,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            wavelength_m: 405e-9,
            w0_m: 2.3e-3,
            lc_m: None,
            coherence_a: None,
        }
    }
}

pub const DEFAULT_COHERENCE: f64 = 0.99;

impl PumpConfig {
    pub fn resolve(&self) -> Result<PumpSpec, ConfigError> {
        match (self.lc_m, self.coherence_a) {
            (Some(_), Some(_)) => Err(ConfigError(
                "experiment.pump: give either `lc_m` or `coherence_A`, not both".into(),
            )),
            (Some(Length(lc)), None) => Ok(PumpSpec::new(self.wavelength_m, self.w0_m, lc)?),
            (None, a) => Ok(PumpSpec::with_degree_of_coherence(
                self.wavelength_m,
                self.w0_m,
                a.unwrap_or(DEFAULT_COHERENCE),
            )?),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub wavelength_m: f64,
    pub z0_m: f64,
    pub z1_m: f64,
    /// Crystal-to-lens distance; equal to `z0_m` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_m: Option<f64>,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            wavelength_m: 810e-9,
            z0_m: 0.1,
            z1_m: 0.2,
            z_m: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnglesConfig {
    pub theta_s_rad: f64,
    pub theta_i_rad: f64,
}

impl Default for AnglesConfig {
    fn default() -> Self {
        Self {
            theta_s_rad: std::f64::consts::FRAC_PI_4,
            theta_i_rad: std::f64::consts::FRAC_PI_4,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub u1_m: f64,
    pub u2_min_m: f64,
    pub u2_max_m: f64,
    pub count: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let s = ScanSpec::default();
        Self {
            u1_m: s.u1_m,
            u2_min_m: s.u2_min_m,
            u2_max_m: s.u2_max_m,
            count: s.count,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingConfig {
    #[default]
    WireEnvelope,
    SlitEnvelope,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pump: PumpConfig,
    pub layout: LayoutConfig,
    pub slit_width_m: f64,
    pub wire_width_m: f64,
    pub angles: AnglesConfig,
    pub scan: ScanConfig,
    pub mapping: MappingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pump: PumpConfig::default(),
            layout: LayoutConfig::default(),
            slit_width_m: 0.55e-3,
            wire_width_m: 80e-6,
            angles: AnglesConfig::default(),
            scan: ScanConfig::default(),
            mapping: MappingConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ExperimentSpec, ConfigError> {
        self.resolve_with(self.pump.resolve()?, self.slit_width_m, self.scan.count)
    }

    pub fn resolve_with(&self, pump: PumpSpec, slit_width_m: f64, count: usize) -> Result<ExperimentSpec, ConfigError> {
        let l = &self.layout;
        let layout = LayoutSpec::with_z(l.wavelength_m, l.z0_m, l.z1_m, l.z_m.unwrap_or(l.z0_m))?;
        let angles = PolarizationAngles::new(self.angles.theta_s_rad, self.angles.theta_i_rad)?;
        let scan = ScanSpec {
            u1_m: self.scan.u1_m,
            u2_min_m: self.scan.u2_min_m,
            u2_max_m: self.scan.u2_max_m,
            count,
        };
        let mapping = match self.mapping {
            MappingConfig::WireEnvelope => ApertureMapping::WireEnvelope,
            MappingConfig::SlitEnvelope => ApertureMapping::SlitEnvelope,
        };
        Ok(ExperimentSpec::new(pump, layout, slit_width_m, self.wire_width_m, angles, scan, mapping)?)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "coherence_A")]
    pub coherence_a: Vec<f64>,
    pub slit_widths_m: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            coherence_a: vec![0.99, 0.76, 0.5, 0.2],
            slit_widths_m: vec![0.2e-3, 0.4e-3, 0.6e-3, 0.8e-3],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub aperture_points: usize,
    pub rho_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_extent_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_m: Option<f64>,
    pub oscillation_guard: f64,
    pub kernel_power: u32,
    /// Samples of the comparison scan.
    pub scan_points: usize,
    /// u2 positions of the convergence probes.
    pub probes_m: Vec<f64>,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            aperture_points: q.aperture_points,
            rho_points: q.rho_points,
            rho_extent_m: q.rho_extent_m,
            truncation_m: q.truncation_m,
            oscillation_guard: q.oscillation_guard,
            kernel_power: q.kernel_power,
            scan_points: 101,
            probes_m: vec![-0.95e-3, -0.5e-3, 0.0, 0.6e-3, 1.2e-3],
        }
    }
}

impl QuadratureSection {
    pub fn resolve(&self) -> Result<QuadratureConfig, ConfigError> {
        let q = QuadratureConfig {
            aperture_points: self.aperture_points,
            rho_points: self.rho_points,
            rho_extent_m: self.rho_extent_m,
            truncation_m: self.truncation_m,
            oscillation_guard: self.oscillation_guard,
            kernel_power: self.kernel_power,
        };
        q.validate()?;
        if self.scan_points < 2 {
            return Err(ConfigError("quadrature.scan_points: must be ≥ 2".into()));
        }
        if self.probes_m.is_empty() {
            return Err(ConfigError("quadrature.probes_m: needs at least one probe".into()));
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizationConfig {
    pub focal_length_m: f64,
    pub slit_separations_m: Vec<f64>,
    pub slit_width_m: f64,
    /// CSV with columns `d12_m,visibility`; relative paths resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurements_csv: Option<PathBuf>,
    /// Spot sizes of the coherence curve; a log-spaced default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot_sizes_m: Option<Vec<f64>>,
}

impl Default for CharacterizationConfig {
    fn default() -> Self {
        Self {
            focal_length_m: 0.2,
            slit_separations_m: vec![0.25e-3, 0.5e-3, 0.75e-3, 1e-3],
            slit_width_m: 0.15e-3,
            measurements_csv: None,
            spot_sizes_m: None,
        }
    }
}

impl CharacterizationConfig {
    pub fn resolve(&self, wavelength_pump_m: f64) -> Result<CharacterizationSetup, ConfigError> {
        Ok(CharacterizationSetup::new(
            self.focal_length_m,
            self.slit_separations_m.clone(),
            self.slit_width_m,
            wavelength_pump_m,
        )?)
    }

    pub fn spot_sizes(&self) -> Vec<f64> {
        self.spot_sizes_m.clone().unwrap_or_else(|| {
            let (lo, hi, n) = (1e-5f64, 1e-3f64, 41);
            (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub quantum_efficiency: f64,
    pub dark_count_prob: f64,
    pub pixel_pitch_m: f64,
    pub width: u16,
    pub height: u16,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorModel::default();
        Self {
            quantum_efficiency: d.quantum_efficiency,
            dark_count_prob: d.dark_count_prob,
            pixel_pitch_m: d.pixel_pitch_m,
            width: d.width,
            height: d.height,
        }
    }
}

impl DetectorConfig {
    pub fn resolve(&self) -> Result<DetectorModel, ConfigError> {
        let d = DetectorModel {
            quantum_efficiency: self.quantum_efficiency,
            dark_count_prob: self.dark_count_prob,
            pixel_pitch_m: self.pixel_pitch_m,
            width: self.width,
            height: self.height,
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x0: u16,
    pub y: u16,
    pub len: u16,
}

impl From<RegionConfig> for Region {
    fn from(r: RegionConfig) -> Self {
        Region {
            x0: r.x0,
            y: r.y,
            len: r.len,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesConfig {
    pub n_frames: usize,
    pub pairs_per_frame: f64,
    pub region1: RegionConfig,
    pub region2: RegionConfig,
    /// Fixed region-2 pixel; the brightest marginal pixel when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_star: Option<usize>,
}

impl Default for FramesConfig {
    fn default() -> Self {
        Self {
            n_frames: 40_000,
            pairs_per_frame: 0.5,
            region1: RegionConfig { x0: 32, y: 16, len: 64 },
            region2: RegionConfig { x0: 32, y: 48, len: 64 },
            j_star: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub sweep: SweepConfig,
    pub quadrature: QuadratureSection,
    pub characterization: CharacterizationConfig,
    pub detector: DetectorConfig,
    pub frames: FramesConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            sweep: SweepConfig::default(),
            quadrature: QuadratureSection::default(),
            characterization: CharacterizationConfig::default(),
            detector: DetectorConfig::default(),
            frames: FramesConfig::default(),
            output_dir: None,
            seed: 42,
        }
    }
}

pub const SECTIONS: [&str; 6] = ["experiment", "sweep", "quadrature", "characterization", "detector", "frames"];

/// Parsed configuration plus the top-level sections the file actually set.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub present: Vec<String>,
    pub base_dir: PathBuf,
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut loaded = parse_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
    loaded.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(loaded)
}

pub fn parse_str(text: &str) -> Result<LoadedConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed JSON: {e}")))?;
    let present = match &value {
        serde_json::Value::Object(map) => map.keys().cloned().collect(),
        _ => return Err(ConfigError("top level must be a JSON object".into())),
    };
    let config: RunConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let location = if path == "." { "top level".to_string() } else { format!("`{path}`") };
        match suggestion(&inner) {
            Some(s) => ConfigError(format!("{location}: {inner}; did you mean `{s}`?")),
            None => ConfigError(format!("{location}: {inner}")),
        }
    })?;
    Ok(LoadedConfig {
        config,
        present,
        base_dir: PathBuf::new(),
    })
}

/// Closest expected key for serde's "unknown field `x`, expected ..." message.
fn suggestion(message: &str) -> Option<String> {
    if !message.starts_with("unknown field") {
        return None;
    }
    let quoted: Vec<&str> = message.split('`').skip(1).step_by(2).collect();
    let (unknown, candidates) = quoted.split_first()?;
    let squash = |s: &str| s.to_ascii_lowercase().replace('_', "");
    let target = squash(unknown);
    candidates
        .iter()
        .map(|c| (strsim::normalized_levenshtein(&target, &squash(c)), *c))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = parse_str("{}").unwrap().config;
        assert_eq!(c.seed, 42);
        assert_eq!(c.experiment.slit_width_m, 0.55e-3);
        assert_eq!(c.quadrature.scan_points, 101);
        let spec = c.experiment.resolve().unwrap();
        assert!((spec.degree_of_coherence() - 0.99).abs() < 1e-12);
    }

    #[test]
    fn infinite_coherence_length() {
        let c = parse_str(r#"{"experiment":{"pump":{"lc_m":"inf"}}}"#).unwrap().config;
        let spec = c.experiment.resolve().unwrap();
        assert_eq!(spec.degree_of_coherence(), 1.0);
    }

    #[test]
    fn unknown_key_is_named_with_suggestion() {
        let e = parse_str(r#"{"experiment":{"slitwidth":1e-3}}"#).unwrap_err().0;
        assert!(e.contains("slitwidth"), "{e}");
        assert!(e.contains("did you mean `slit_width_m`"), "{e}");
        assert!(e.contains("`experiment.slitwidth`"), "{e}");
    }

    #[test]
    fn nested_type_errors_carry_the_path() {
        let e = parse_str(r#"{"detector":{"width":"wide"}}"#).unwrap_err().0;
        assert!(e.contains("detector.width"), "{e}");
    }

    #[test]
    fn conflicting_pump_keys() {
        let c = parse_str(r#"{"experiment":{"pump":{"lc_m":1e-3,"coherence_A":0.5}}}"#).unwrap().config;
        assert!(c.experiment.resolve().is_err());
    }

    #[test]
    fn out_of_range_values_fail_resolution() {
        let c = parse_str(r#"{"experiment":{"slit_width_m":-1}}"#).unwrap().config;
        assert!(c.experiment.resolve().is_err());
        let c = parse_str(r#"{"detector":{"quantum_efficiency":2}}"#).unwrap().config;
        assert!(c.detector.resolve().is_err());
    }

    #[test]
    fn resolved_config_echo_round_trips() {
        let c = parse_str(r#"{"experiment":{"pump":{"lc_m":"inf"}},"seed":7}"#).unwrap().config;
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains(r#""lc_m":"inf""#));
        let again = parse_str(&text).unwrap().config;
        assert_eq!(serde_json::to_string(&again).unwrap(), text);
    }

    #[test]
    fn present_sections_are_recorded() {
        let l = parse_str(r#"{"frames":{},"seed":1}"#).unwrap();
        assert_eq!(l.present, vec!["frames".to_string(), "seed".to_string()]);
    }
}
