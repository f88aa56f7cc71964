//! Detectors, monochromator and coincidence counting.
//!
//! Two fidelities coexist: closed-form expected rates (singles, true
//! coincidences and the three accidental-overlap terms) and full time-tagged
//! event streams with window matching, so the stream machinery can be checked
//! against the rate algebra and vice versa.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::seeds;

/// Single-photon detector channel: combined quantum + collection efficiency,
/// a lumped Poisson noise rate (dark counts, background light, injected
/// noise), Gaussian timing jitter, and an optional per-acquisition noise
/// level jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Detection probability per photon reaching the channel.
    pub efficiency: f64,
    /// Mean noise count rate (counts/s).
    pub noise_rate_hz: f64,
    /// 1-sigma timing jitter (s).
    pub jitter_sigma_s: f64,
    /// Relative standard deviation of the noise *level* from one acquisition
    /// to the next (lamp/bias drift of the noise source). Zero means a
    /// strictly stationary noise rate.
    #[serde(default)]
    pub noise_rsd: f64,
}

impl DetectorSpec {
    pub fn new(efficiency: f64, noise_rate_hz: f64, jitter_sigma_s: f64) -> Result<Self> {
        Self::with_noise_rsd(efficiency, noise_rate_hz, jitter_sigma_s, 0.0)
    }

    pub fn with_noise_rsd(
        efficiency: f64,
        noise_rate_hz: f64,
        jitter_sigma_s: f64,
        noise_rsd: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::InvalidInput(format!("efficiency must be in [0,1], got {efficiency}")));
        }
        if !(noise_rate_hz >= 0.0) {
            return Err(Error::InvalidInput(format!("noise rate must be >= 0, got {noise_rate_hz}")));
        }
        if !(jitter_sigma_s >= 0.0) {
            return Err(Error::InvalidInput(format!("jitter must be >= 0, got {jitter_sigma_s}")));
        }
        if !(noise_rsd >= 0.0) {
            return Err(Error::InvalidInput(format!("noise rsd must be >= 0, got {noise_rsd}")));
        }
        Ok(Self { efficiency, noise_rate_hz, jitter_sigma_s, noise_rsd })
    }

    /// Noise level realized for one acquisition: the mean rate scaled by a
    /// Gaussian factor of relative width `noise_rsd`, clamped at zero.
    pub fn realized_noise_rate<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.noise_rsd == 0.0 || self.noise_rate_hz == 0.0 {
            return self.noise_rate_hz;
        }
        let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
        (self.noise_rate_hz * (1.0 + self.noise_rsd * z)).max(0.0)
    }
}

/// Passband shape of the grating monochromator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassbandShape {
    Gaussian,
    Rectangular,
}

/// Monochromator set to a center wavelength with a fixed FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonochromatorSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub shape: PassbandShape,
}

impl MonochromatorSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64, shape: PassbandShape) -> Result<Self> {
        if !(fwhm_nm > 0.0) {
            return Err(Error::InvalidInput(format!("fwhm must be positive, got {fwhm_nm}")));
        }
        Ok(Self { center_nm, fwhm_nm, shape })
    }

    pub fn at_center(&self, center_nm: f64) -> Self {
        Self { center_nm, ..*self }
    }

    /// Equivalent width of the passband (integral of the transmission), nm.
    pub fn equivalent_width_nm(&self) -> f64 {
        match self.shape {
            // integral of exp(-4 ln2 x^2 / w^2) = w/2 * sqrt(pi/ln2)
            PassbandShape::Gaussian => self.fwhm_nm * 1.0644670194312262,
            PassbandShape::Rectangular => self.fwhm_nm,
        }
    }
}

/// Passband transmission at a wavelength: unit peak at the center, FWHM as
/// configured, bounded in [0, 1].
pub fn passband(mono: &MonochromatorSpec, lambda_nm: f64) -> f64 {
    let x = lambda_nm - mono.center_nm;
    match mono.shape {
        PassbandShape::Gaussian => {
            (-4.0 * std::f64::consts::LN_2 * x * x / (mono.fwhm_nm * mono.fwhm_nm)).exp()
        }
        PassbandShape::Rectangular => {
            if x.abs() <= mono.fwhm_nm / 2.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Coincidence circuit acceptance window; two clicks pair up when their
/// timestamps differ by at most Δt/2, for a total acceptance width of Δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindow {
    pub delta_t_s: f64,
}

impl CoincidenceWindow {
    pub fn new(delta_t_s: f64) -> Result<Self> {
        if !(delta_t_s > 0.0) {
            return Err(Error::InvalidInput(format!("window must be positive, got {delta_t_s}")));
        }
        Ok(Self { delta_t_s })
    }
}

/// Time-ordered click record of one detector channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    timestamps: Vec<f64>,
}

impl EventStream {
    /// Build from arbitrary click times; sorts them.
    pub fn new(mut timestamps: Vec<f64>) -> Self {
        timestamps.sort_by(|a, b| a.total_cmp(b));
        Self { timestamps }
    }

    /// Build from already sorted, non-negative times; validated.
    pub fn from_sorted(timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidInput("negative timestamp".into()));
        }
        if !timestamps.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::UnsortedInput("timestamps must be non-decreasing"));
        }
        Ok(Self { timestamps })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    fn check_sorted(&self) -> Result<()> {
        if !self.timestamps.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::UnsortedInput("stream timestamps must be non-decreasing"));
        }
        Ok(())
    }
}

/// One photon arriving at a detector channel: arrival time and the survival
/// probability it accumulated upstream (sample transmission, passband).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub t_s: f64,
    pub survival: f64,
}

impl Arrival {
    pub fn certain(t_s: f64) -> Self {
        Self { t_s, survival: 1.0 }
    }
}

/// Detect a sequence of photon arrivals over one acquisition.
///
/// Each arrival is kept with probability `efficiency * survival`, surviving
/// clicks get Gaussian timing jitter, and an independent Poisson noise
/// stream at the detector's (per-acquisition realized) noise rate is merged
/// in. Clicks jittered outside `[0, duration)` are discarded. Output is
/// sorted; the result is a pure function of `(arrivals, det, duration, seed)`.
pub fn detect(arrivals: &[Arrival], det: &DetectorSpec, duration_s: f64, seed: u64) -> EventStream {
    let mut rng = seeds::rng(seed);
    let jitter = if det.jitter_sigma_s > 0.0 {
        Some(Normal::new(0.0, det.jitter_sigma_s).expect("positive sigma"))
    } else {
        None
    };
    let mut clicks = Vec::new();
    for a in arrivals {
        let p = det.efficiency * a.survival;
        if p > 0.0 && rng.gen::<f64>() < p {
            let mut t = a.t_s;
            if let Some(j) = &jitter {
                t += j.sample(&mut rng);
            }
            if (0.0..duration_s).contains(&t) {
                clicks.push(t);
            }
        }
    }
    let noise_rate = det.realized_noise_rate(&mut rng);
    let mean = noise_rate * duration_s;
    if mean > 0.0 {
        let n = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
        clicks.reserve(n);
        for _ in 0..n {
            clicks.push(rng.gen::<f64>() * duration_s);
        }
    }
    EventStream::new(clicks)
}

/// Count coincidences between two sorted streams: clicks pair up when
/// `|t_s - t_i| <= Δt/2`, each click is consumed at most once, matched
/// greedily in time order with a two-pointer sweep.
pub fn count_coincidences(
    signal: &EventStream,
    idler: &EventStream,
    w: CoincidenceWindow,
) -> Result<u64> {
    signal.check_sorted()?;
    idler.check_sorted()?;
    let half = w.delta_t_s / 2.0;
    let (s, t) = (signal.timestamps(), idler.timestamps());
    let (mut i, mut j, mut count) = (0usize, 0usize, 0u64);
    while i < s.len() && j < t.len() {
        let d = s[i] - t[j];
        if d.abs() <= half {
            count += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(count)
}

/// Decomposed coincidence rates: singles, true pairs, and the three
/// accidental-overlap terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    /// Signal-channel pair-photon rate Ss = ηs·P (counts/s).
    pub s_signal_hz: f64,
    /// Idler-channel pair-photon rate Si = ηi·P·T (counts/s).
    pub s_idler_hz: f64,
    /// True-coincidence rate R = ηs·ηi·P·T.
    pub r_true_hz: f64,
    /// Noise–noise accidentals Ns·Ni·Δt.
    pub r_acc_nn_hz: f64,
    /// Pair–noise accidentals Ss·Ni·Δt.
    pub r_acc_sn_hz: f64,
    /// Noise–pair accidentals Ns·Si·Δt.
    pub r_acc_ns_hz: f64,
    /// Total accidental (noise-coincidence) rate.
    pub r_noise_hz: f64,
    /// Total coincidence rate, true plus accidental.
    pub r_total_hz: f64,
}

/// Expected rates for an in-band pair flux `p_inband_hz` probed through a
/// sample of transmission `transmission`, with channel efficiencies and
/// lumped noise rates.
pub fn expected_rates(
    p_inband_hz: f64,
    eta_s: f64,
    eta_i: f64,
    n_s_hz: f64,
    n_i_hz: f64,
    transmission: f64,
    w: CoincidenceWindow,
) -> Result<RateBreakdown> {
    for (name, v) in [("eta_s", eta_s), ("eta_i", eta_i), ("transmission", transmission)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("{name} must be in [0,1], got {v}")));
        }
    }
    for (name, v) in [("p_inband_hz", p_inband_hz), ("n_s_hz", n_s_hz), ("n_i_hz", n_i_hz)] {
        if !(v >= 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
        }
    }
    let dt = w.delta_t_s;
    let s_signal_hz = eta_s * p_inband_hz;
    let s_idler_hz = eta_i * p_inband_hz * transmission;
    let r_true_hz = eta_s * eta_i * p_inband_hz * transmission;
    let r_acc_nn_hz = n_s_hz * n_i_hz * dt;
    let r_acc_sn_hz = s_signal_hz * n_i_hz * dt;
    let r_acc_ns_hz = n_s_hz * s_idler_hz * dt;
    let r_noise_hz = r_acc_nn_hz + r_acc_sn_hz + r_acc_ns_hz;
    Ok(RateBreakdown {
        s_signal_hz,
        s_idler_hz,
        r_true_hz,
        r_acc_nn_hz,
        r_acc_sn_hz,
        r_acc_ns_hz,
        r_noise_hz,
        r_total_hz: r_true_hz + r_noise_hz,
    })
}

/// Homogeneous Poisson click stream over `[0, duration)`, e.g. a bare noise
/// channel.
pub fn poisson_stream(rate_hz: f64, duration_s: f64, seed: u64) -> EventStream {
    let mut rng = seeds::rng(seed);
    let mean = rate_hz * duration_s;
    let mut times = Vec::new();
    if mean > 0.0 {
        let n = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
        times = (0..n).map(|_| rng.gen::<f64>() * duration_s).collect();
    }
    EventStream::new(times)
}

/// One exported time tag: channel id, timestamp, optional wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTag {
    pub channel: u8,
    pub timestamp_ps: i64,
    pub wavelength_nm: Option<f64>,
}

/// Write time tags as CSV with header `channel,timestamp_ps,wavelength_nm`,
/// the interchange layout of commercial time-tagger dumps.
pub fn write_time_tags<P: AsRef<Path>>(path: P, tags: &[TimeTag]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "channel,timestamp_ps,wavelength_nm")?;
    for tag in tags {
        match tag.wavelength_nm {
            Some(l) => writeln!(out, "{},{},{}", tag.channel, tag.timestamp_ps, l)?,
            None => writeln!(out, "{},{},", tag.channel, tag.timestamp_ps)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a time-tag CSV written by [`write_time_tags`] (or a hardware dump
/// with the same columns).
pub fn read_time_tags<P: AsRef<Path>>(path: P) -> Result<Vec<TimeTag>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut tags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line.trim() != "channel,timestamp_ps,wavelength_nm" {
                return Err(Error::Parse(format!("unexpected time-tag header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 fields", idx + 1)));
        }
        let channel = fields[0]
            .trim()
            .parse::<u8>()
            .map_err(|e| Error::Parse(format!("line {}: channel: {e}", idx + 1)))?;
        let timestamp_ps = fields[1]
            .trim()
            .parse::<i64>()
            .map_err(|e| Error::Parse(format!("line {}: timestamp: {e}", idx + 1)))?;
        let wavelength_nm = if fields[2].trim().is_empty() {
            None
        } else {
            Some(
                fields[2]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: wavelength: {e}", idx + 1)))?,
            )
        };
        tags.push(TimeTag { channel, timestamp_ps, wavelength_nm });
    }
    Ok(tags)
}

/// Convert an event stream into time tags for export.
pub fn stream_to_tags(stream: &EventStream, channel: u8) -> Vec<TimeTag> {
    stream
        .timestamps()
        .iter()
        .map(|&t| TimeTag { channel, timestamp_ps: (t * 1e12).round() as i64, wavelength_nm: None })
        .collect()
}
