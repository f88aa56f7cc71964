//! `fit`: Fano-lineshape fits of spectrum files, optionally with a shift
//! and sensitivity estimate between exactly two of them.

use serde::Serialize;
use std::path::{Path, PathBuf};

use ghostspec::{detectability, estimate_shift, fit_fano, Error, FanoFit, FanoProfile, Spectrum};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct FitEntry {
    pub file: String,
    pub label: String,
    pub config_digest: String,
    pub converged: bool,
    pub profile: FanoProfile,
    pub lambda_min_nm: Option<f64>,
    pub lambda_min_sigma_nm: f64,
    pub q_factor: f64,
    pub dip_depth: f64,
    pub dip_depth_sigma: f64,
    pub r_squared: f64,
    pub residual_norm: f64,
    pub iterations: u32,
    pub detectable: bool,
    pub score: f64,
    pub covariance: [[f64; 5]; 5],
}

#[derive(Debug, Serialize)]
pub struct ShiftEntry {
    pub from: String,
    pub to: String,
    pub config_digests: [String; 2],
    pub shift_nm: f64,
    pub sigma_nm: f64,
    pub delta_n: f64,
    pub sensitivity_nm_per_riu: f64,
    pub sensitivity_sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub fits: Vec<FitEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftEntry>,
}

/// Strip a trailing `.csv`/`.json` so both the stem and either file name
/// are accepted.
fn stem_of(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum, CliError> {
    let stem = stem_of(path);
    Spectrum::read(&stem).map_err(|e| match e {
        Error::Io(io) => {
            CliError::Runtime(format!("cannot read spectrum {}: {io}", stem.display()))
        }
        Error::Parse(msg) => {
            CliError::Runtime(format!("malformed spectrum {}: {msg}", stem.display()))
        }
        other => CliError::Runtime(format!("{}: {other}", stem.display())),
    })
}

pub fn fit_spectrum(spectrum: &Spectrum, file: &str) -> Result<(FanoFit, FitEntry), CliError> {
    let fit = fit_fano(spectrum, None)
        .map_err(|e| CliError::Runtime(format!("fit of {file} failed: {e}")))?;
    let verdict = detectability(&fit, spectrum);
    let entry = FitEntry {
        file: file.to_string(),
        label: spectrum.provenance.label.clone(),
        config_digest: spectrum.provenance.config_digest.clone(),
        converged: fit.converged,
        profile: fit.profile,
        lambda_min_nm: fit.lambda_min_nm().ok(),
        lambda_min_sigma_nm: fit.lambda_min_sigma(),
        q_factor: fit.q_factor(),
        dip_depth: fit.dip_depth(),
        dip_depth_sigma: fit.dip_depth_sigma(),
        r_squared: fit.r_squared,
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
        detectable: verdict.detectable,
        score: verdict.score,
        covariance: fit.covariance,
    };
    Ok((fit, entry))
}

pub fn run(spectra: &[PathBuf], delta_n: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    if spectra.is_empty() {
        return Err(CliError::Config("fit needs at least one spectrum file".into()));
    }
    if delta_n.is_some() && spectra.len() != 2 {
        return Err(CliError::Config("--delta-n needs exactly two spectra".into()));
    }
    let mut fits = Vec::new();
    let mut entries = Vec::new();
    for path in spectra {
        let spectrum = load_spectrum(path)?;
        let (fit, entry) = fit_spectrum(&spectrum, &path.display().to_string())?;
        fits.push(fit);
        entries.push(entry);
    }
    let shift = match delta_n {
        Some(dn) => {
            let estimate = estimate_shift(&fits[0], &fits[1], Some(dn))
                .map_err(|e| CliError::Runtime(format!("shift estimate failed: {e}")))?;
            Some(ShiftEntry {
                from: entries[0].file.clone(),
                to: entries[1].file.clone(),
                config_digests: [entries[0].config_digest.clone(), entries[1].config_digest.clone()],
                shift_nm: estimate.shift_nm,
                sigma_nm: estimate.sigma_nm,
                delta_n: dn,
                sensitivity_nm_per_riu: estimate.sensitivity_nm_per_riu.unwrap_or(f64::NAN),
                sensitivity_sigma: estimate.sensitivity_sigma.unwrap_or(f64::NAN),
            })
        }
        None => None,
    };
    let report = FitReport { fits: entries, shift };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("serialize report: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(())
}
