//! Broadband photon-pair source model.
//!
//! A continuous-wave pump drives collinear down-conversion in a stack of
//! crystals: one cut for the degenerate wavelength, two detuned, giving a
//! broad spectrum modeled as a weighted sum of Gaussian lobes over the
//! signal wavelength. Pair emission is a homogeneous Poisson process; the
//! two photons of a pair are emitted simultaneously and their wavelengths
//! satisfy exact energy conservation.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

const FWHM_TO_SIGMA: f64 = 0.424660900144009521; // 1 / (2 sqrt(2 ln 2))

/// Monochromatic pump laser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub wavelength_nm: f64,
}

impl PumpSpec {
    pub fn new(wavelength_nm: f64) -> Result<Self> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump wavelength must be positive, got {wavelength_nm}"
            )));
        }
        Ok(Self { wavelength_nm })
    }
}

/// One Gaussian lobe of the pair spectrum: (center, FWHM, weight).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLobe {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub weight: f64,
}

impl SpectralLobe {
    fn sigma(&self) -> f64 {
        self.fwhm_nm * FWHM_TO_SIGMA
    }

    /// Normalized Gaussian pdf value at `lambda_nm`.
    fn pdf(&self, lambda_nm: f64) -> f64 {
        let s = self.sigma();
        let z = (lambda_nm - self.center_nm) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Spectral density of the pair source over signal wavelength, plus the
/// total pair emission rate.
///
/// Lobes must clear the pump wavelength by at least six standard deviations
/// so that the density integrates to one over the physical band
/// (idler wavelengths stay defined) without truncation corrections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiphotonSpectrum {
    pub lobes: Vec<SpectralLobe>,
    pub pair_rate_hz: f64,
    pub pump: PumpSpec,
}

/// Default degenerate-lobe center for a 407 nm pump, nm.
pub const DEFAULT_DEGENERATE_NM: f64 = 814.0;
/// Default detuning of the two off-degenerate lobes, nm.
pub const DEFAULT_DETUNE_NM: f64 = 84.0;
/// Default FWHM of each lobe, nm. Together with the detuning this puts the
/// summed-density FWHM at ~250 nm.
pub const DEFAULT_LOBE_FWHM_NM: f64 = 100.0;

impl BiphotonSpectrum {
    pub fn new(lobes: Vec<SpectralLobe>, pair_rate_hz: f64, pump: PumpSpec) -> Result<Self> {
        if lobes.is_empty() {
            return Err(Error::InvalidInput("spectrum needs at least one lobe".into()));
        }
        let mut weight_sum = 0.0;
        for lobe in &lobes {
            if !(lobe.fwhm_nm > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "lobe fwhm must be positive, got {}",
                    lobe.fwhm_nm
                )));
            }
            if !(lobe.weight > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "lobe weight must be positive, got {}",
                    lobe.weight
                )));
            }
            if lobe.center_nm - 6.0 * lobe.sigma() <= pump.wavelength_nm {
                return Err(Error::InvalidInput(format!(
                    "lobe at {} nm (fwhm {}) reaches within 6 sigma of the pump at {} nm",
                    lobe.center_nm, lobe.fwhm_nm, pump.wavelength_nm
                )));
            }
            weight_sum += lobe.weight;
        }
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "lobe weights must sum to 1, got {weight_sum}"
            )));
        }
        if !(pair_rate_hz >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "pair rate must be non-negative, got {pair_rate_hz}"
            )));
        }
        Ok(Self { lobes, pair_rate_hz, pump })
    }

    /// Three-lobe source calibrated to a ~250 nm wide combined spectrum
    /// around the degenerate wavelength of a 407 nm pump.
    pub fn default_three_crystal(pair_rate_hz: f64) -> Self {
        let w = 1.0 / 3.0;
        let lobe = |center_nm| SpectralLobe {
            center_nm,
            fwhm_nm: DEFAULT_LOBE_FWHM_NM,
            weight: w,
        };
        Self::new(
            vec![
                lobe(DEFAULT_DEGENERATE_NM - DEFAULT_DETUNE_NM),
                lobe(DEFAULT_DEGENERATE_NM),
                lobe(DEFAULT_DEGENERATE_NM + DEFAULT_DETUNE_NM),
            ],
            pair_rate_hz,
            PumpSpec { wavelength_nm: 407.0 },
        )
        .expect("default source parameters are valid")
    }

    /// Probability density (1/nm) of a pair's signal wavelength.
    /// Zero at and below the pump wavelength.
    pub fn spectral_density(&self, lambda_nm: f64) -> f64 {
        if lambda_nm <= self.pump.wavelength_nm {
            return 0.0;
        }
        self.lobes.iter().map(|l| l.weight * l.pdf(lambda_nm)).sum()
    }

    /// Upper bound for the density over a closed interval; each lobe is
    /// maximized at its center clamped into the interval, and a sum of
    /// per-lobe maxima bounds the maximum of the sum.
    pub fn density_bound(&self, lo_nm: f64, hi_nm: f64) -> f64 {
        self.lobes
            .iter()
            .map(|l| l.weight * l.pdf(l.center_nm.clamp(lo_nm, hi_nm)))
            .sum()
    }

    /// Draw one signal wavelength from the spectral density.
    pub fn sample_signal_wavelength<R: Rng>(&self, rng: &mut R) -> f64 {
        // Pick a lobe by weight, then a Gaussian within it; redraw the
        // (astronomically rare, < 1e-9) samples at or below the pump.
        loop {
            let mut pick = rng.gen::<f64>();
            let mut chosen = &self.lobes[self.lobes.len() - 1];
            for lobe in &self.lobes {
                if pick < lobe.weight {
                    chosen = lobe;
                    break;
                }
                pick -= lobe.weight;
            }
            let normal = Normal::new(chosen.center_nm, chosen.sigma()).expect("valid sigma");
            let lambda = normal.sample(rng);
            if lambda > self.pump.wavelength_nm {
                return lambda;
            }
        }
    }
}

/// One emitted pair: emission time and the two conjugate wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEvent {
    pub t_s: f64,
    pub lambda_signal_nm: f64,
    pub lambda_idler_nm: f64,
}

/// Idler wavelength conjugate to a given signal wavelength under energy
/// conservation with a monochromatic pump: 1/λs + 1/λi = 1/λp.
///
/// The mapping is an involution. Signals `InvalidInput` when the signal
/// wavelength does not exceed the pump wavelength (the idler would be
/// undefined or non-positive).
pub fn conjugate_wavelength(pump: &PumpSpec, lambda_signal_nm: f64) -> Result<f64> {
    if !(lambda_signal_nm > pump.wavelength_nm) {
        return Err(Error::InvalidInput(format!(
            "signal wavelength {lambda_signal_nm} nm must exceed the pump wavelength {} nm",
            pump.wavelength_nm
        )));
    }
    Ok(pump.wavelength_nm * lambda_signal_nm / (lambda_signal_nm - pump.wavelength_nm))
}

/// Generate the pair emissions of one acquisition of length `duration_s`.
///
/// The pair count is Poisson with mean `pair_rate_hz * duration_s`, emission
/// times are uniform over the acquisition, signal wavelengths follow the
/// spectral density and idler wavelengths are their exact conjugates.
/// Output is sorted by time and fully determined by the seed.
pub fn sample_pairs(spec: &BiphotonSpectrum, duration_s: f64, seed: u64) -> Result<Vec<PairEvent>> {
    if !(duration_s >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "duration must be non-negative, got {duration_s}"
        )));
    }
    let mean = spec.pair_rate_hz * duration_s;
    let mut rng = seeds::rng(seed);
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize
    } else {
        0
    };
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        let t_s = rng.gen::<f64>() * duration_s;
        let lambda_signal_nm = spec.sample_signal_wavelength(&mut rng);
        let lambda_idler_nm = conjugate_wavelength(&spec.pump, lambda_signal_nm)?;
        events.push(PairEvent { t_s, lambda_signal_nm, lambda_idler_nm });
    }
    events.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    Ok(events)
}
