//! Scan orchestration for both spectroscopy modes.
//!
//! Quantum mode: the sample sits in the idler arm, the monochromator selects
//! signal wavelengths in the other arm, and coincidences are counted; the
//! probed sample wavelength is the energy-conservation conjugate of the
//! monochromator setting. Classical mode: a spectrally flat lamp shines
//! through the sample into the monochromator and singles are counted.
//!
//! Scans run in one of two fidelities. `Rate` draws per-acquisition Poisson
//! counts around the closed-form expected rates; `Event` generates
//! time-tagged streams and matches them in the coincidence window. Both are
//! deterministic per seed, with every (bin, repeat) drawing from its own
//! derived seed.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::biphoton::{conjugate_wavelength, BiphotonSpectrum};
use crate::detection::{
    count_coincidences, detect, expected_rates, passband, Arrival, CoincidenceWindow,
    DetectorSpec, MonochromatorSpec, PassbandShape, RateBreakdown,
};
use crate::error::{Error, Result};
use crate::sample::{transmission, FanoProfile};
use crate::seeds;
use crate::spectrum::{Fidelity, Mode, Provenance, Spectrum, SpectrumKind, SpectrumRecord};

const FWHM_TO_SIGMA: f64 = 0.424660900144009521;

/// Where the sample sits in the quantum scan. The default keeps the sample
/// in the arm without the monochromator; `SignalArm` places it after the
/// monochromator instead (fewer photons on the sample, same coincidence
/// statistics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplePlacement {
    #[default]
    IdlerArm,
    SignalArm,
}

/// Spectrally flat lamp for the classical mode: photon flux density before
/// the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LampSpec {
    pub flux_per_nm_hz: f64,
}

/// Protocol of one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub mode: Mode,
    pub fidelity: Fidelity,
    /// First probed sample wavelength (nm).
    pub lambda_start_nm: f64,
    /// Last probed sample wavelength (nm, inclusive up to grid rounding).
    pub lambda_stop_nm: f64,
    pub step_nm: f64,
    /// Acquisition time per repeat (s).
    pub dwell_s: f64,
    /// Acquisitions averaged per spectrum point.
    pub repeats: u32,
    /// Extra noise rate injected into the monochromator-channel detector.
    pub injected_noise_hz: f64,
    /// When set, the source (or lamp) is rescaled so the detected in-band
    /// rate in the monochromator channel at unit transmission equals this,
    /// calibrated at the scan center.
    pub signal_rate_hz: Option<f64>,
    #[serde(default)]
    pub sample_placement: SamplePlacement,
}

impl ScanConfig {
    /// Paper-protocol defaults: 740–870 nm in 3 nm steps, 20 repeats of
    /// 20 s each.
    pub fn defaults(mode: Mode) -> Self {
        Self {
            mode,
            fidelity: Fidelity::Rate,
            lambda_start_nm: 740.0,
            lambda_stop_nm: 870.0,
            step_nm: 3.0,
            dwell_s: 20.0,
            repeats: 20,
            injected_noise_hz: 0.0,
            signal_rate_hz: None,
            sample_placement: SamplePlacement::IdlerArm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_nm > 0.0) {
            return Err(Error::InvalidInput(format!("step must be positive, got {}", self.step_nm)));
        }
        if !(self.dwell_s > 0.0) {
            return Err(Error::InvalidInput(format!("dwell must be positive, got {}", self.dwell_s)));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidInput("repeats must be >= 1".into()));
        }
        if !(self.lambda_start_nm < self.lambda_stop_nm) {
            return Err(Error::InvalidInput(format!(
                "scan range [{}, {}] is empty",
                self.lambda_start_nm, self.lambda_stop_nm
            )));
        }
        if !(self.injected_noise_hz >= 0.0) {
            return Err(Error::InvalidInput("injected noise must be >= 0".into()));
        }
        if let Some(rate) = self.signal_rate_hz {
            if !(rate > 0.0) {
                return Err(Error::InvalidInput("signal rate target must be positive".into()));
            }
        }
        Ok(())
    }

    /// Probed wavelengths, strictly increasing.
    pub fn grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut i = 0u32;
        loop {
            let lambda = self.lambda_start_nm + f64::from(i) * self.step_nm;
            if lambda > self.lambda_stop_nm + 1e-9 {
                break;
            }
            grid.push(lambda);
            i += 1;
        }
        grid
    }

    fn center_nm(&self) -> f64 {
        0.5 * (self.lambda_start_nm + self.lambda_stop_nm)
    }
}

/// Fraction of emitted pairs whose signal wavelength falls in the
/// monochromator passband (the integral of density times passband).
pub fn inband_pair_fraction(source: &BiphotonSpectrum, mono: &MonochromatorSpec) -> f64 {
    let (lo, hi) = integration_bounds(mono);
    let lo = lo.max(source.pump.wavelength_nm * (1.0 + 1e-12));
    if hi <= lo {
        return 0.0;
    }
    simpson(lo, hi, 400, |l| source.spectral_density(l) * passband(mono, l))
}

fn integration_bounds(mono: &MonochromatorSpec) -> (f64, f64) {
    match mono.shape {
        PassbandShape::Gaussian => {
            let sigma = mono.fwhm_nm * FWHM_TO_SIGMA;
            (mono.center_nm - 8.0 * sigma, mono.center_nm + 8.0 * sigma)
        }
        PassbandShape::Rectangular => {
            (mono.center_nm - mono.fwhm_nm / 2.0, mono.center_nm + mono.fwhm_nm / 2.0)
        }
    }
}

fn simpson(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Pair rate that puts the detected in-band signal-channel rate at
/// `target_hz` for the given monochromator setting.
pub fn calibrated_pair_rate(
    source: &BiphotonSpectrum,
    mono_at_center: &MonochromatorSpec,
    det_signal: &DetectorSpec,
    target_hz: f64,
) -> Result<f64> {
    let fraction = inband_pair_fraction(source, mono_at_center);
    let denom = det_signal.efficiency * fraction;
    if !(denom > 0.0) {
        return Err(Error::EmptyBand(format!(
            "no detectable pair flux at {} nm",
            mono_at_center.center_nm
        )));
    }
    Ok(target_hz / denom)
}

/// Lamp flux density that puts the detected in-band rate at `target_hz`
/// through a unit-transmission sample.
pub fn calibrated_lamp_flux(
    mono: &MonochromatorSpec,
    det: &DetectorSpec,
    target_hz: f64,
) -> Result<LampSpec> {
    let denom = det.efficiency * mono.equivalent_width_nm();
    if !(denom > 0.0) {
        return Err(Error::InvalidInput("zero efficiency or passband width".into()));
    }
    Ok(LampSpec { flux_per_nm_hz: target_hz / denom })
}

/// Detector with the injected noise folded into its lumped noise rate;
/// injecting a rate is exactly equivalent to raising `noise_rate_hz`.
fn with_injected(det: &DetectorSpec, injected_hz: f64) -> DetectorSpec {
    DetectorSpec { noise_rate_hz: det.noise_rate_hz + injected_hz, ..*det }
}

/// Per-bin plan of a quantum scan: probe wavelengths, monochromator
/// settings, in-band pair rates and sample transmissions, with the
/// calibrated source rate applied.
#[derive(Debug, Clone)]
pub struct QuantumScanPlan {
    pub probe_nm: Vec<f64>,
    pub mono_center_nm: Vec<f64>,
    pub pair_rate_inband_hz: Vec<f64>,
    pub sample_transmission: Vec<f64>,
    pub sample: FanoProfile,
    pub det_signal: DetectorSpec,
    pub det_idler: DetectorSpec,
    pub window: CoincidenceWindow,
}

impl QuantumScanPlan {
    /// Expected rate decomposition for one bin at the mean noise levels.
    pub fn breakdown(&self, bin: usize) -> RateBreakdown {
        expected_rates(
            self.pair_rate_inband_hz[bin],
            self.det_signal.efficiency,
            self.det_idler.efficiency,
            self.det_signal.noise_rate_hz,
            self.det_idler.noise_rate_hz,
            self.sample_transmission[bin],
            self.window,
        )
        .expect("plan rates are validated")
    }
}

/// Resolve the per-bin physics of a quantum scan.
pub fn plan_quantum_scan(
    source: &BiphotonSpectrum,
    sample: &FanoProfile,
    det_signal: &DetectorSpec,
    det_idler: &DetectorSpec,
    mono: &MonochromatorSpec,
    window: CoincidenceWindow,
    scan: &ScanConfig,
) -> Result<QuantumScanPlan> {
    scan.validate()?;
    if scan.mode != Mode::Quantum {
        return Err(Error::InvalidInput("plan_quantum_scan requires quantum mode".into()));
    }
    let probe = scan.grid();
    let mut mono_centers = Vec::with_capacity(probe.len());
    for &lambda in &probe {
        let center = match scan.sample_placement {
            SamplePlacement::IdlerArm => conjugate_wavelength(&source.pump, lambda)?,
            SamplePlacement::SignalArm => lambda,
        };
        mono_centers.push(center);
    }
    let fractions: Vec<f64> =
        mono_centers.iter().map(|&c| inband_pair_fraction(source, &mono.at_center(c))).collect();
    if fractions.iter().all(|&f| f <= 0.0) {
        return Err(Error::EmptyBand(format!(
            "source delivers no pairs anywhere in the scan band [{}, {}] nm",
            scan.lambda_start_nm, scan.lambda_stop_nm
        )));
    }
    let pair_rate = match scan.signal_rate_hz {
        Some(target) => {
            let center_probe = scan.center_nm();
            let mono_center = match scan.sample_placement {
                SamplePlacement::IdlerArm => conjugate_wavelength(&source.pump, center_probe)?,
                SamplePlacement::SignalArm => center_probe,
            };
            calibrated_pair_rate(source, &mono.at_center(mono_center), det_signal, target)?
        }
        None => source.pair_rate_hz,
    };
    let transmissions: Vec<f64> = probe.iter().map(|&l| transmission(sample, l)).collect();
    Ok(QuantumScanPlan {
        probe_nm: probe,
        mono_center_nm: mono_centers,
        pair_rate_inband_hz: fractions.iter().map(|f| f * pair_rate).collect(),
        sample_transmission: transmissions,
        sample: *sample,
        det_signal: with_injected(det_signal, scan.injected_noise_hz),
        det_idler: *det_idler,
        window,
    })
}

/// Run a quantum (coincidence) scan.
///
/// Each record's wavelength is the probed sample wavelength — the conjugate
/// of the monochromator setting in the default sample placement — and its
/// statistics are the mean and standard deviation of the coincidence counts
/// over the repeats.
#[allow(clippy::too_many_arguments)]
pub fn run_quantum_scan(
    source: &BiphotonSpectrum,
    sample: &FanoProfile,
    det_signal: &DetectorSpec,
    det_idler: &DetectorSpec,
    mono: &MonochromatorSpec,
    window: CoincidenceWindow,
    scan: &ScanConfig,
    seed: u64,
) -> Result<Spectrum> {
    let plan = plan_quantum_scan(source, sample, det_signal, det_idler, mono, window, scan)?;
    let mut records = Vec::with_capacity(plan.probe_nm.len());
    for bin in 0..plan.probe_nm.len() {
        let mut counts = Vec::with_capacity(scan.repeats as usize);
        for rep in 0..scan.repeats {
            let c = match scan.fidelity {
                Fidelity::Rate => quantum_rate_draw(&plan, scan, bin, rep, seed),
                Fidelity::Event => quantum_event_draw(source, mono, &plan, scan, bin, rep, seed)?,
            };
            counts.push(c);
        }
        records.push(record_from_counts(plan.probe_nm[bin], &counts));
    }
    Spectrum::new(
        records,
        Provenance {
            mode: Mode::Quantum,
            fidelity: scan.fidelity,
            kind: SpectrumKind::Raw,
            seed,
            config_digest: String::new(),
            dwell_s: scan.dwell_s,
            repeats: scan.repeats,
            noise_floor_hz: plan.det_signal.noise_rate_hz,
            label: String::new(),
        },
    )
}

fn quantum_rate_draw(plan: &QuantumScanPlan, scan: &ScanConfig, bin: usize, rep: u32, seed: u64) -> f64 {
    let mut rng = seeds::rng(seeds::derive(seed, &[bin as u64, u64::from(rep), 0]));
    let ns = plan.det_signal.realized_noise_rate(&mut rng);
    let ni = plan.det_idler.realized_noise_rate(&mut rng);
    let rates = expected_rates(
        plan.pair_rate_inband_hz[bin],
        plan.det_signal.efficiency,
        plan.det_idler.efficiency,
        ns,
        ni,
        plan.sample_transmission[bin],
        plan.window,
    )
    .expect("plan rates are validated");
    poisson_count(rates.r_total_hz * scan.dwell_s, &mut rng)
}

fn quantum_event_draw(
    source: &BiphotonSpectrum,
    mono: &MonochromatorSpec,
    plan: &QuantumScanPlan,
    scan: &ScanConfig,
    bin: usize,
    rep: u32,
    seed: u64,
) -> Result<f64> {
    let mono_bin = mono.at_center(plan.mono_center_nm[bin]);
    let mut rng = seeds::rng(seeds::derive(seed, &[bin as u64, u64::from(rep), 1]));
    let n_pairs = poisson_count(plan.pair_rate_inband_hz[bin] * scan.dwell_s, &mut rng) as usize;
    let mut signal_arrivals = Vec::with_capacity(n_pairs);
    let mut idler_arrivals = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let t = rng.gen::<f64>() * scan.dwell_s;
        let lambda_signal = sample_inband_wavelength(source, &mono_bin, &mut rng);
        let lambda_idler = conjugate_wavelength(&source.pump, lambda_signal)?;
        // The passband thinning is already in the in-band rate and the
        // wavelength distribution; only the sample transmission remains.
        let (surv_s, surv_i) = match scan.sample_placement {
            SamplePlacement::IdlerArm => (1.0, transmission(&plan.sample, lambda_idler)),
            SamplePlacement::SignalArm => (transmission(&plan.sample, lambda_signal), 1.0),
        };
        signal_arrivals.push(Arrival { t_s: t, survival: surv_s });
        idler_arrivals.push(Arrival { t_s: t, survival: surv_i });
    }
    let s_stream = detect(
        &signal_arrivals,
        &plan.det_signal,
        scan.dwell_s,
        seeds::derive(seed, &[bin as u64, u64::from(rep), 2]),
    );
    let i_stream = detect(
        &idler_arrivals,
        &plan.det_idler,
        scan.dwell_s,
        seeds::derive(seed, &[bin as u64, u64::from(rep), 3]),
    );
    Ok(count_coincidences(&s_stream, &i_stream, plan.window)? as f64)
}

/// Draw a signal wavelength from the density restricted to the passband:
/// propose from the passband shape, accept on the density ratio.
fn sample_inband_wavelength<R: Rng>(
    source: &BiphotonSpectrum,
    mono: &MonochromatorSpec,
    rng: &mut R,
) -> f64 {
    let (lo, hi) = integration_bounds(mono);
    let bound = source.density_bound(lo, hi);
    match mono.shape {
        PassbandShape::Gaussian => {
            let sigma = mono.fwhm_nm * FWHM_TO_SIGMA;
            loop {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let x = mono.center_nm + sigma * z;
                if (x - mono.center_nm).abs() > 8.0 * sigma {
                    continue;
                }
                if rng.gen::<f64>() * bound < source.spectral_density(x) {
                    return x;
                }
            }
        }
        PassbandShape::Rectangular => loop {
            let x = lo + rng.gen::<f64>() * (hi - lo);
            if rng.gen::<f64>() * bound < source.spectral_density(x) {
                return x;
            }
        },
    }
}

/// Run a classical transmission scan: per bin, singles counts through the
/// sample and monochromator, Poisson around `(η·Φ·T + N)·dwell`.
pub fn run_classical_scan(
    lamp: &LampSpec,
    sample: &FanoProfile,
    det: &DetectorSpec,
    mono: &MonochromatorSpec,
    scan: &ScanConfig,
    seed: u64,
) -> Result<Spectrum> {
    scan.validate()?;
    if scan.mode != Mode::Classical {
        return Err(Error::InvalidInput("run_classical_scan requires classical mode".into()));
    }
    let det_total = with_injected(det, scan.injected_noise_hz);
    let inband_flux = match scan.signal_rate_hz {
        Some(target) => calibrated_lamp_flux(mono, det, target)?.flux_per_nm_hz,
        None => lamp.flux_per_nm_hz,
    } * mono.equivalent_width_nm();
    let grid = scan.grid();
    let mut records = Vec::with_capacity(grid.len());
    for (bin, &lambda) in grid.iter().enumerate() {
        let t_sample = transmission(sample, lambda);
        let mut counts = Vec::with_capacity(scan.repeats as usize);
        for rep in 0..scan.repeats {
            let c = match scan.fidelity {
                Fidelity::Rate => {
                    let mut rng =
                        seeds::rng(seeds::derive(seed, &[bin as u64, u64::from(rep), 0]));
                    let noise = det_total.realized_noise_rate(&mut rng);
                    let rate = det_total.efficiency * inband_flux * t_sample + noise;
                    poisson_count(rate * scan.dwell_s, &mut rng)
                }
                Fidelity::Event => {
                    let mut rng =
                        seeds::rng(seeds::derive(seed, &[bin as u64, u64::from(rep), 1]));
                    let n = poisson_count(inband_flux * scan.dwell_s, &mut rng) as usize;
                    let arrivals: Vec<Arrival> = (0..n)
                        .map(|_| Arrival { t_s: rng.gen::<f64>() * scan.dwell_s, survival: t_sample })
                        .collect();
                    let stream = detect(
                        &arrivals,
                        &det_total,
                        scan.dwell_s,
                        seeds::derive(seed, &[bin as u64, u64::from(rep), 2]),
                    );
                    stream.len() as f64
                }
            };
            counts.push(c);
        }
        records.push(record_from_counts(lambda, &counts));
    }
    Spectrum::new(
        records,
        Provenance {
            mode: Mode::Classical,
            fidelity: scan.fidelity,
            kind: SpectrumKind::Raw,
            seed,
            config_digest: String::new(),
            dwell_s: scan.dwell_s,
            repeats: scan.repeats,
            noise_floor_hz: det_total.noise_rate_hz,
            label: String::new(),
        },
    )
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng)
}

fn record_from_counts(lambda_nm: f64, counts: &[f64]) -> SpectrumRecord {
    let n = counts.len();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    SpectrumRecord { lambda_nm, mean_counts: mean, std_counts: std, n_repeats: n as u32 }
}

/// Normalize an array spectrum by a substrate spectrum taken on the same
/// grid: pointwise ratio of means with first-order error propagation.
///
/// In classical mode the known background floor (`noise_floor_hz · dwell`)
/// is subtracted from both arms before the ratio; in quantum mode nothing
/// is subtracted and the accidental pedestal stays in the ratio.
pub fn normalize(array: &Spectrum, substrate: &Spectrum) -> Result<Spectrum> {
    let (a, s) = (array.records(), substrate.records());
    if a.len() != s.len() {
        return Err(Error::GridMismatch(format!(
            "array has {} bins, substrate {}",
            a.len(),
            s.len()
        )));
    }
    if array.provenance.mode != substrate.provenance.mode {
        return Err(Error::GridMismatch("array and substrate modes differ".into()));
    }
    for (ra, rs) in a.iter().zip(s) {
        if ra.lambda_nm != rs.lambda_nm {
            return Err(Error::GridMismatch(format!(
                "wavelength grids differ at {} vs {} nm",
                ra.lambda_nm, rs.lambda_nm
            )));
        }
    }
    let floor = match array.provenance.mode {
        Mode::Classical => array.provenance.noise_floor_hz * array.provenance.dwell_s,
        Mode::Quantum => 0.0,
    };
    let substrate_floor = match substrate.provenance.mode {
        Mode::Classical => substrate.provenance.noise_floor_hz * substrate.provenance.dwell_s,
        Mode::Quantum => 0.0,
    };
    let mut records = Vec::with_capacity(a.len());
    for (ra, rs) in a.iter().zip(s) {
        let num = ra.mean_counts - floor;
        let den = rs.mean_counts - substrate_floor;
        if den <= 0.0 {
            return Err(Error::DivisionByZero(format!(
                "substrate bin at {} nm is {} after background subtraction",
                rs.lambda_nm, den
            )));
        }
        let ratio = num / den;
        let var = (ra.std_counts / den).powi(2) + (num * rs.std_counts / (den * den)).powi(2);
        records.push(SpectrumRecord {
            lambda_nm: ra.lambda_nm,
            mean_counts: ratio,
            std_counts: var.sqrt(),
            n_repeats: ra.n_repeats.min(rs.n_repeats),
        });
    }
    let mut provenance = array.provenance.clone();
    provenance.kind = SpectrumKind::Normalized;
    Spectrum::new_normalized(records, provenance)
}
