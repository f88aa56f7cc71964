//! Experiment configuration file: a single TOML document describing the
//! source, sensor, analytes, detectors, optics and scan protocol. Unknown
//! keys are rejected, and the canonical serialization of the effective
//! config (after command-line overrides) is hashed into every output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use ghostspec::{
    Analyte, BiphotonSpectrum, CoincidenceWindow, DetectorSpec, Fidelity, FanoProfile, LampSpec,
    MonochromatorSpec, Mode, PassbandShape, PumpSpec, SamplePlacement, ScanConfig, SensorModel,
    SpectralLobe,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub modes: Vec<Mode>,
    pub source: SourceSection,
    pub sensor: SensorSection,
    pub analytes: Vec<AnalyteSection>,
    pub detectors: DetectorsSection,
    pub monochromator: MonochromatorSection,
    pub window: WindowSection,
    pub scan: ScanSection,
    pub noise_levels: Vec<NoiseLevel>,
    /// Lamp for the classical mode; only needed when the scan carries no
    /// signal-rate calibration target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamp: Option<LampSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LampSection {
    pub flux_per_nm_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub pump_nm: f64,
    /// Total pair emission rate; only used when the scan carries no
    /// signal-rate calibration target.
    pub pair_rate_hz: f64,
    pub lobes: Vec<LobeSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobeSection {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub lambda_r_nm: f64,
    pub width_nm: f64,
    pub fano_f: f64,
    pub depth_a: f64,
    pub baseline_t0: f64,
    pub reference_index: f64,
    pub sensitivity_nm_per_riu: f64,
}

/// One analyte: a name for file stems plus either a glycerin mass fraction
/// or a refractive index.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyteSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glycerin_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refractive_index: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsSection {
    pub signal: DetectorSection,
    pub idler: DetectorSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub noise_rate_hz: f64,
    pub jitter_sigma_s: f64,
    #[serde(default)]
    pub noise_rsd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonochromatorSection {
    pub fwhm_nm: f64,
    pub shape: PassbandShape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub delta_t_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub lambda_start_nm: f64,
    pub lambda_stop_nm: f64,
    pub step_nm: f64,
    pub dwell_s: f64,
    pub repeats: u32,
    pub fidelity: Fidelity,
    /// Detected in-band monochromator-channel rate at unit transmission that
    /// the source or lamp is calibrated to deliver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_rate_hz: Option<f64>,
    #[serde(default)]
    pub sample_placement: SamplePlacement,
}

/// One injected-noise operating point, with per-mode rates (the lowest
/// level of the published grid differs between the modes).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevel {
    pub quantum_hz: f64,
    pub classical_hz: f64,
}

impl NoiseLevel {
    pub fn rate_for(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Quantum => self.quantum_hz,
            Mode::Classical => self.classical_hz,
        }
    }
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fidelity: Option<Fidelity>,
    pub dwell_s: Option<f64>,
    pub repeats: Option<u32>,
    pub step_nm: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(fidelity) = overrides.fidelity {
            self.scan.fidelity = fidelity;
        }
        if let Some(dwell) = overrides.dwell_s {
            self.scan.dwell_s = dwell;
        }
        if let Some(repeats) = overrides.repeats {
            self.scan.repeats = repeats;
        }
        if let Some(step) = overrides.step_nm {
            self.scan.step_nm = step;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.modes.is_empty() {
            return Err(CliError::Config("at least one mode is required".into()));
        }
        if self.analytes.is_empty() {
            return Err(CliError::Config("at least one analyte is required".into()));
        }
        if self.noise_levels.is_empty() {
            return Err(CliError::Config("at least one noise level is required".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for analyte in &self.analytes {
            if analyte.name.is_empty()
                || !analyte.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(CliError::Config(format!(
                    "analyte name '{}' must be non-empty alphanumeric/underscore/dash",
                    analyte.name
                )));
            }
            if !names.insert(&analyte.name) {
                return Err(CliError::Config(format!("duplicate analyte name '{}'", analyte.name)));
            }
            match (analyte.glycerin_percent, analyte.refractive_index) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(CliError::Config(format!(
                        "analyte '{}' needs exactly one of glycerin_percent or refractive_index",
                        analyte.name
                    )));
                }
                _ => {}
            }
        }
        for level in &self.noise_levels {
            if level.quantum_hz < 0.0 || level.classical_hz < 0.0 {
                return Err(CliError::Config("noise levels must be non-negative".into()));
            }
        }
        if self.modes.contains(&Mode::Classical)
            && self.scan.signal_rate_hz.is_none()
            && self.lamp.is_none()
        {
            return Err(CliError::Config(
                "classical mode needs a [lamp] section or scan.signal_rate_hz".into(),
            ));
        }
        // materialize the domain objects once so their invariants run now
        self.to_domain().map(|_| ())
    }

    /// Canonical serialization of the effective configuration.
    pub fn canonical_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("serialize config: {e}")))
    }

    /// Content hash recorded into every output produced from this config.
    pub fn digest(&self) -> Result<String, CliError> {
        let canonical = self.canonical_toml()?;
        let hash = Sha256::digest(canonical.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Build the domain-level objects this config describes.
    pub fn to_domain(&self) -> Result<DomainObjects, CliError> {
        let pump = PumpSpec::new(self.source.pump_nm).map_err(cfg)?;
        let lobes = self
            .source
            .lobes
            .iter()
            .map(|l| SpectralLobe { center_nm: l.center_nm, fwhm_nm: l.fwhm_nm, weight: l.weight })
            .collect();
        let source =
            BiphotonSpectrum::new(lobes, self.source.pair_rate_hz, pump).map_err(cfg)?;
        let profile = FanoProfile::new(
            self.sensor.lambda_r_nm,
            self.sensor.width_nm,
            self.sensor.fano_f,
            self.sensor.depth_a,
            self.sensor.baseline_t0,
        )
        .map_err(cfg)?;
        let sensor = SensorModel::new(
            profile,
            self.sensor.reference_index,
            self.sensor.sensitivity_nm_per_riu,
        )
        .map_err(cfg)?;
        let mut analytes = Vec::new();
        for section in &self.analytes {
            let analyte = match (section.glycerin_percent, section.refractive_index) {
                (Some(percent), None) => Analyte::from_glycerin_percent(percent).map_err(cfg)?,
                (None, Some(index)) => Analyte::new(index).map_err(cfg)?,
                _ => unreachable!("validated"),
            };
            analytes.push((section.name.clone(), analyte));
        }
        let det_signal = DetectorSpec::with_noise_rsd(
            self.detectors.signal.efficiency,
            self.detectors.signal.noise_rate_hz,
            self.detectors.signal.jitter_sigma_s,
            self.detectors.signal.noise_rsd,
        )
        .map_err(cfg)?;
        let det_idler = DetectorSpec::with_noise_rsd(
            self.detectors.idler.efficiency,
            self.detectors.idler.noise_rate_hz,
            self.detectors.idler.jitter_sigma_s,
            self.detectors.idler.noise_rsd,
        )
        .map_err(cfg)?;
        // the center is rewritten at every scan bin; seed it at the resonance
        let mono = MonochromatorSpec::new(
            self.sensor.lambda_r_nm,
            self.monochromator.fwhm_nm,
            self.monochromator.shape,
        )
        .map_err(cfg)?;
        let window = CoincidenceWindow::new(self.window.delta_t_s).map_err(cfg)?;
        let scan_template = ScanConfig {
            mode: Mode::Quantum,
            fidelity: self.scan.fidelity,
            lambda_start_nm: self.scan.lambda_start_nm,
            lambda_stop_nm: self.scan.lambda_stop_nm,
            step_nm: self.scan.step_nm,
            dwell_s: self.scan.dwell_s,
            repeats: self.scan.repeats,
            injected_noise_hz: 0.0,
            signal_rate_hz: self.scan.signal_rate_hz,
            sample_placement: self.scan.sample_placement,
        };
        scan_template.validate().map_err(cfg)?;
        let lamp = self.lamp.as_ref().map(|l| LampSpec { flux_per_nm_hz: l.flux_per_nm_hz });
        Ok(DomainObjects {
            source,
            sensor,
            analytes,
            det_signal,
            det_idler,
            mono,
            window,
            scan_template,
            lamp,
        })
    }
}

fn cfg(e: ghostspec::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Validated domain objects materialized from a config.
pub struct DomainObjects {
    pub source: BiphotonSpectrum,
    pub sensor: SensorModel,
    pub analytes: Vec<(String, Analyte)>,
    pub det_signal: DetectorSpec,
    pub det_idler: DetectorSpec,
    pub mono: MonochromatorSpec,
    pub window: CoincidenceWindow,
    pub scan_template: ScanConfig,
    pub lamp: Option<LampSpec>,
}
