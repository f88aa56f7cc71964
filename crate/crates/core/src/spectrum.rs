//! Measured spectra: per-wavelength count statistics with provenance, plus
//! the CSV + JSON-sidecar file format.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Scan mode: coincidence-based scan with the frequency selection in the arm
/// that never sees the sample, or direct transmission through the sample
/// into the monochromator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quantum,
    Classical,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Quantum => write!(f, "quantum"),
            Mode::Classical => write!(f, "classical"),
        }
    }
}

/// Simulation fidelity: closed-form rates with Poisson sampling, or full
/// time-tagged event streams with window matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Rate,
    Event,
}

/// One spectrum point: probe wavelength, mean and standard deviation of the
/// per-acquisition counts over the repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// Wavelength at which the sample transmission is probed (nm). In the
    /// coincidence mode this is the conjugate of the monochromator setting.
    pub lambda_nm: f64,
    pub mean_counts: f64,
    /// Standard deviation over the repeats (the plotted error bar), not the
    /// standard error of the mean.
    pub std_counts: f64,
    pub n_repeats: u32,
}

/// Whether a spectrum holds raw counts or a normalized transmission ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Raw,
    Normalized,
}

/// Everything needed to reproduce and post-process a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: Mode,
    pub fidelity: Fidelity,
    pub kind: SpectrumKind,
    pub seed: u64,
    /// Content hash of the experiment configuration that produced the run.
    pub config_digest: String,
    pub dwell_s: f64,
    pub repeats: u32,
    /// Total noise rate on the monochromator-channel detector (base +
    /// injected), used as the known background floor in normalization.
    pub noise_floor_hz: f64,
    /// Free-text label of the analyte or reference arm.
    #[serde(default)]
    pub label: String,
}

/// An ordered spectrum with provenance. Wavelengths are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    records: Vec<SpectrumRecord>,
    pub provenance: Provenance,
}

impl Spectrum {
    pub fn new(records: Vec<SpectrumRecord>, provenance: Provenance) -> Result<Self> {
        for r in &records {
            if !(r.mean_counts >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "negative count mean at {} nm",
                    r.lambda_nm
                )));
            }
        }
        Self::new_normalized(records, provenance)
    }

    /// Like [`Spectrum::new`] but permits negative means: a background-
    /// subtracted transmission estimate can fluctuate below zero.
    pub fn new_normalized(records: Vec<SpectrumRecord>, provenance: Provenance) -> Result<Self> {
        if !records.windows(2).all(|w| w[0].lambda_nm < w[1].lambda_nm) {
            return Err(Error::InvalidInput("wavelengths must be strictly increasing".into()));
        }
        for r in &records {
            if !(r.std_counts >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "negative standard deviation at {} nm",
                    r.lambda_nm
                )));
            }
        }
        Ok(Self { records, provenance })
    }

    pub fn records(&self) -> &[SpectrumRecord] {
        &self.records
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.lambda_nm)
    }

    /// Probe wavelength of the smallest mean (grid resolution only; fits
    /// refine it below the step size).
    pub fn argmin_lambda(&self) -> Option<f64> {
        self.records
            .iter()
            .min_by(|a, b| a.mean_counts.total_cmp(&b.mean_counts))
            .map(|r| r.lambda_nm)
    }

    /// Write `<stem>.csv` (header `lambda_nm,mean,std,n`) and the
    /// `<stem>.json` sidecar with the provenance.
    pub fn write<P: AsRef<Path>>(&self, stem: P) -> Result<()> {
        let stem = stem.as_ref();
        let csv_path = stem.with_extension("csv");
        let file = std::fs::File::create(&csv_path)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "lambda_nm,mean,std,n")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.lambda_nm, r.mean_counts, r.std_counts, r.n_repeats)?;
        }
        out.flush()?;
        let sidecar = serde_json::to_string_pretty(&self.provenance)
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(stem.with_extension("json"), sidecar + "\n")?;
        Ok(())
    }

    /// Read a spectrum back from its `<stem>.csv` / `<stem>.json` pair.
    pub fn read<P: AsRef<Path>>(stem: P) -> Result<Self> {
        let stem = stem.as_ref();
        let sidecar = std::fs::read_to_string(stem.with_extension("json"))?;
        let provenance: Provenance =
            serde_json::from_str(&sidecar).map_err(|e| Error::Parse(e.to_string()))?;
        let file = std::fs::File::open(stem.with_extension("csv"))?;
        let reader = std::io::BufReader::new(file);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if idx == 0 {
                if line.trim() != "lambda_nm,mean,std,n" {
                    return Err(Error::Parse(format!("unexpected spectrum header: {line}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", idx + 1)));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {what}: {e}", idx + 1)))
            };
            records.push(SpectrumRecord {
                lambda_nm: parse(fields[0], "lambda")?,
                mean_counts: parse(fields[1], "mean")?,
                std_counts: parse(fields[2], "std")?,
                n_repeats: fields[3]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("line {}: n: {e}", idx + 1)))?,
            });
        }
        match provenance.kind {
            SpectrumKind::Raw => Self::new(records, provenance),
            SpectrumKind::Normalized => Self::new_normalized(records, provenance),
        }
    }
}
