//! Phenomenological model of the nanoparticle-array sensor.
//!
//! The array's transmission is a Fano lineshape dip on a flat baseline:
//!
//! ```text
//! T(λ) = T0 · (1 − a · (F + ε)² / ((1 + F²)(1 + ε²))),   ε = 2(λ − λR)/Δλ
//! ```
//!
//! with resonance wavelength λR, width Δλ, asymmetry F, dip depth a and
//! baseline T0. The resonance wavelength shifts linearly with the
//! refractive index of the surrounding medium; width, asymmetry and depth
//! are held fixed, matching the translated, shape-preserving response of
//! diffractively coupled particle arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fano-dip transmission profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoProfile {
    /// Resonance wavelength λR (nm).
    pub lambda_r_nm: f64,
    /// Resonance width Δλ (nm).
    pub width_nm: f64,
    /// Asymmetry parameter F.
    pub fano_f: f64,
    /// Dip depth a in [0, 1].
    pub depth_a: f64,
    /// Baseline transmission T0 in (0, 1] for physical samples; fits on raw
    /// count spectra use larger values.
    pub baseline_t0: f64,
}

impl FanoProfile {
    pub fn new(
        lambda_r_nm: f64,
        width_nm: f64,
        fano_f: f64,
        depth_a: f64,
        baseline_t0: f64,
    ) -> Result<Self> {
        if !(width_nm > 0.0) {
            return Err(Error::InvalidInput(format!("width must be positive, got {width_nm}")));
        }
        if !(0.0..=1.0).contains(&depth_a) {
            return Err(Error::InvalidInput(format!("depth must be in [0,1], got {depth_a}")));
        }
        if !(baseline_t0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "baseline must be positive, got {baseline_t0}"
            )));
        }
        Ok(Self { lambda_r_nm, width_nm, fano_f, depth_a, baseline_t0 })
    }

    /// The array measured on this work's setup: λR = 806 nm, Δλ = 30 nm,
    /// F = −16, with a half-depth dip on a unit baseline.
    pub fn default_sensor_array() -> Self {
        Self { lambda_r_nm: 806.0, width_nm: 30.0, fano_f: -16.0, depth_a: 0.5, baseline_t0: 1.0 }
    }

    /// Quality factor Q = λR / Δλ.
    pub fn q_factor(&self) -> f64 {
        self.lambda_r_nm / self.width_nm
    }

    /// Reduced detuning ε = 2(λ − λR)/Δλ.
    pub fn reduced_detuning(&self, lambda_nm: f64) -> f64 {
        2.0 * (lambda_nm - self.lambda_r_nm) / self.width_nm
    }
}

/// Transmission of the array at a wavelength; bounded in [T0(1−a), T0].
pub fn transmission(profile: &FanoProfile, lambda_nm: f64) -> f64 {
    let eps = profile.reduced_detuning(lambda_nm);
    let f = profile.fano_f;
    let u = f + eps;
    let fano = u * u / ((1.0 + f * f) * (1.0 + eps * eps));
    profile.baseline_t0 * (1.0 - profile.depth_a * fano)
}

/// Wavelength of the transmission minimum, λR + Δλ/(2F).
///
/// Signals `DegenerateProfile` when F = 0 (symmetric dip centered on λR has
/// its extremum structure collapse) or when the dip has zero depth.
pub fn resonance_minimum_wavelength(profile: &FanoProfile) -> Result<f64> {
    if profile.fano_f == 0.0 {
        return Err(Error::DegenerateProfile("asymmetry F is zero".into()));
    }
    if profile.depth_a == 0.0 {
        return Err(Error::DegenerateProfile("dip depth is zero".into()));
    }
    Ok(profile.lambda_r_nm + profile.width_nm / (2.0 * profile.fano_f))
}

/// Linear refractive-index response of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub reference_profile: FanoProfile,
    /// Index at which `reference_profile` was measured.
    pub reference_index: f64,
    /// Resonance shift per refractive-index unit (nm/RIU).
    pub sensitivity_nm_per_riu: f64,
}

impl SensorModel {
    pub fn new(
        reference_profile: FanoProfile,
        reference_index: f64,
        sensitivity_nm_per_riu: f64,
    ) -> Result<Self> {
        if !(reference_index >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "reference index must be >= 1, got {reference_index}"
            )));
        }
        if !(sensitivity_nm_per_riu >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sensitivity must be non-negative, got {sensitivity_nm_per_riu}"
            )));
        }
        Ok(Self { reference_profile, reference_index, sensitivity_nm_per_riu })
    }
}

/// Medium on top of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analyte {
    pub refractive_index: f64,
}

impl Analyte {
    pub fn new(refractive_index: f64) -> Result<Self> {
        if !(refractive_index >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "refractive index must be >= 1, got {refractive_index}"
            )));
        }
        Ok(Self { refractive_index })
    }

    /// Analyte from a glycerin-in-water mass fraction via [`glycerin_index`].
    pub fn from_glycerin_percent(mass_fraction_percent: f64) -> Result<Self> {
        Ok(Self { refractive_index: glycerin_index(mass_fraction_percent)? })
    }
}

/// Profile seen with the given analyte: λR moves by S·(n − n0), everything
/// else is unchanged.
pub fn shifted_profile(sensor: &SensorModel, analyte: &Analyte) -> FanoProfile {
    let mut profile = sensor.reference_profile;
    profile.lambda_r_nm +=
        sensor.sensitivity_nm_per_riu * (analyte.refractive_index - sensor.reference_index);
    profile
}

/// Anchor table for glycerin-water solutions at 20 °C: mass fraction (%) to
/// refractive index.
pub const GLYCERIN_ANCHORS: [(f64, f64); 2] = [(40.0, 1.384), (50.0, 1.398)];

/// Refractive index of a glycerin-water solution by linear interpolation on
/// the anchor table. Extrapolation outside the table hull is refused.
pub fn glycerin_index(mass_fraction_percent: f64) -> Result<f64> {
    glycerin_index_with(&GLYCERIN_ANCHORS, mass_fraction_percent)
}

/// Same as [`glycerin_index`] on a caller-supplied anchor table (sorted by
/// mass fraction, at least two entries).
pub fn glycerin_index_with(anchors: &[(f64, f64)], mass_fraction_percent: f64) -> Result<f64> {
    if anchors.len() < 2 {
        return Err(Error::InvalidInput("need at least two anchors".into()));
    }
    if !(0.0..=100.0).contains(&mass_fraction_percent) {
        return Err(Error::InvalidInput(format!(
            "mass fraction must be in [0, 100], got {mass_fraction_percent}"
        )));
    }
    let (lo, _) = anchors[0];
    let (hi, _) = anchors[anchors.len() - 1];
    if mass_fraction_percent < lo || mass_fraction_percent > hi {
        return Err(Error::OutOfTable(format!(
            "fraction {mass_fraction_percent}% outside anchor hull [{lo}, {hi}]%"
        )));
    }
    for pair in anchors.windows(2) {
        let (x0, n0) = pair[0];
        let (x1, n1) = pair[1];
        if mass_fraction_percent <= x1 {
            let t = (mass_fraction_percent - x0) / (x1 - x0);
            return Ok(n0 + t * (n1 - n0));
        }
    }
    unreachable!("fraction inside hull must land in a window")
}
