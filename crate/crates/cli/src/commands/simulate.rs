//! `simulate`: run every configured (mode, analyte, noise level) scan pair
//! (array + substrate), normalize, and write the spectra.

use std::path::{Path, PathBuf};

use ghostspec::{
    normalize, run_classical_scan, run_quantum_scan, seeds, shifted_profile, FanoProfile,
    LampSpec, Mode, ScanConfig, Spectrum,
};

use crate::config::{DomainObjects, ExperimentConfig, Overrides};
use crate::CliError;

pub fn run(
    config_path: &Path,
    overrides: &Overrides,
    out: Option<&Path>,
    emit_raw: bool,
) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply_overrides(overrides);
    let digest = config.digest()?;
    let domain = config.to_domain()?;

    let out_dir: PathBuf = match (out, &config.output) {
        (Some(path), _) => path.to_path_buf(),
        (None, Some(path)) => path.clone(),
        (None, None) => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            PathBuf::from("runs").join(stem)
        }
    };
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("create {}: {e}", out_dir.display())))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let result = simulate_all(&config, &domain, &digest, &out_dir, emit_raw, &mut written);
    if let Err(err) = result {
        // remove partial outputs so a failed run leaves nothing behind
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        return Err(err);
    }
    for path in &written {
        println!("{}", path.display());
    }
    Ok(())
}

fn simulate_all(
    config: &ExperimentConfig,
    domain: &DomainObjects,
    digest: &str,
    out_dir: &Path,
    emit_raw: bool,
    written: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let config_copy = out_dir.join("config.toml");
    std::fs::write(&config_copy, config.canonical_toml()?)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", config_copy.display())))?;
    written.push(config_copy);

    let substrate = FanoProfile { depth_a: 0.0, ..domain.sensor.reference_profile };
    for &mode in &config.modes {
        for level in &config.noise_levels {
            let injected = level.rate_for(mode);
            for (name, analyte) in &domain.analytes {
                let profile = shifted_profile(&domain.sensor, analyte);
                let scan = ScanConfig {
                    mode,
                    injected_noise_hz: injected,
                    ..domain.scan_template.clone()
                };
                let path = format!("{mode}/{name}/{injected}");
                let array = run_scan(
                    domain,
                    &profile,
                    &scan,
                    seeds::derive_labeled(config.seed, &format!("{path}/array")),
                )?;
                let reference = run_scan(
                    domain,
                    &substrate,
                    &scan,
                    seeds::derive_labeled(config.seed, &format!("{path}/substrate")),
                )?;
                let mut normalized = normalize(&array, &reference)
                    .map_err(|e| CliError::Runtime(format!("{path}: {e}")))?;
                normalized.provenance.config_digest = digest.to_string();
                normalized.provenance.label = name.clone();
                let stem = out_dir.join(format!("{mode}_{name}_noise{injected}"));
                write_spectrum(&normalized, &stem, written)?;
                if emit_raw {
                    let mut array = array;
                    array.provenance.config_digest = digest.to_string();
                    array.provenance.label = format!("{name}-array");
                    write_spectrum(&array, &out_dir.join(format!("{mode}_{name}_noise{injected}_array")), written)?;
                    let mut reference = reference;
                    reference.provenance.config_digest = digest.to_string();
                    reference.provenance.label = format!("{name}-substrate");
                    write_spectrum(&reference, &out_dir.join(format!("{mode}_{name}_noise{injected}_substrate")), written)?;
                }
            }
        }
    }
    Ok(())
}

fn run_scan(
    domain: &DomainObjects,
    profile: &FanoProfile,
    scan: &ScanConfig,
    seed: u64,
) -> Result<Spectrum, CliError> {
    let spectrum = match scan.mode {
        Mode::Quantum => run_quantum_scan(
            &domain.source,
            profile,
            &domain.det_signal,
            &domain.det_idler,
            &domain.mono,
            domain.window,
            scan,
            seed,
        ),
        Mode::Classical => run_classical_scan(
            // with a signal-rate target configured the lamp flux is
            // recalibrated per scan and this value is unused
            &domain.lamp.unwrap_or(LampSpec { flux_per_nm_hz: 0.0 }),
            profile,
            &domain.det_signal,
            &domain.mono,
            scan,
            seed,
        ),
    };
    spectrum.map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_spectrum(
    spectrum: &Spectrum,
    stem: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    spectrum
        .write(stem)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", stem.display())))?;
    written.push(stem.with_extension("csv"));
    written.push(stem.with_extension("json"));
    Ok(())
}
