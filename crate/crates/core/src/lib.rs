//! Virtual laboratory for coincidence-based (ghost) spectroscopy of a
//! plasmonic Fano-resonance refractive-index sensor.
//!
//! A broadband photon-pair source feeds two detector arms. In the quantum
//! mode the sample sits in the arm *without* the monochromator and its
//! transmission is read out from coincidence counts at the conjugate
//! wavelength; in the classical mode a lamp shines through the sample into
//! the monochromator and singles are counted. The crate simulates both
//! protocols — as closed-form rates with Poisson draws or as full
//! time-tagged event streams — and analyzes the resulting spectra with a
//! weighted Fano-lineshape fit to extract resonance shifts, sensitivities
//! and detectability under configurable noise.

pub mod analysis;
pub mod biphoton;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod sample;
pub mod seeds;
pub mod spectrum;

pub use analysis::{
    detectability, estimate_shift, fit_fano, snr_report, Detectability, FanoFit, ShiftEstimate,
    SnrReport,
};
pub use biphoton::{conjugate_wavelength, sample_pairs, BiphotonSpectrum, PairEvent, PumpSpec, SpectralLobe};
pub use detection::{
    count_coincidences, detect, expected_rates, passband, poisson_stream, Arrival,
    CoincidenceWindow, DetectorSpec, EventStream, MonochromatorSpec, PassbandShape,
    RateBreakdown,
};
pub use error::{Error, Result};
pub use experiment::{
    calibrated_lamp_flux, calibrated_pair_rate, inband_pair_fraction, normalize,
    plan_quantum_scan, run_classical_scan, run_quantum_scan, LampSpec, QuantumScanPlan,
    SamplePlacement, ScanConfig,
};
pub use sample::{
    glycerin_index, resonance_minimum_wavelength, shifted_profile, transmission, Analyte,
    FanoProfile, SensorModel,
};
pub use spectrum::{Fidelity, Mode, Provenance, Spectrum, SpectrumKind, SpectrumRecord};
