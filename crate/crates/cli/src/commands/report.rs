//! `report`: summarize a simulate run directory into one row per
//! (mode, noise level): fitted minima for each analyte, the shift between
//! them, detectability verdicts and the SNR comparison.

use std::fmt::Write as _;
use std::path::Path;

use ghostspec::{
    conjugate_wavelength, detectability, estimate_shift, fit_fano, inband_pair_fraction,
    snr_report, FanoFit, Mode, SamplePlacement, Spectrum,
};

use crate::commands::fit::load_spectrum;
use crate::config::ExperimentConfig;
use crate::CliError;

struct AnalyteResult {
    name: String,
    lambda_min: Option<f64>,
    lambda_min_sigma: Option<f64>,
    detectable: bool,
    score: Option<f64>,
    fit: Option<FanoFit>,
}

struct Row {
    mode: Mode,
    noise_hz: f64,
    analytes: Vec<AnalyteResult>,
    shift_nm: Option<f64>,
    shift_sigma: Option<f64>,
    sensitivity: Option<f64>,
    snr_ratio_predicted: f64,
    snr_ratio_measured: f64,
}

pub fn run(run_dir: &Path) -> Result<(), CliError> {
    let config_path = run_dir.join("config.toml");
    if !config_path.exists() {
        return Err(CliError::Runtime(format!(
            "missing inputs in {}: no config.toml (0 spectra found); run simulate first",
            run_dir.display()
        )));
    }
    let config = ExperimentConfig::load(&config_path)?;
    let digest = config.digest()?;
    let domain = config.to_domain()?;

    // Resolve the expected spectrum files up front and complain about every
    // absent one at once.
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for &mode in &config.modes {
        for level in &config.noise_levels {
            let injected = level.rate_for(mode);
            let mut spectra: Vec<(String, Spectrum)> = Vec::new();
            for (name, _) in &domain.analytes {
                let stem = run_dir.join(format!("{mode}_{name}_noise{injected}"));
                if stem.with_extension("csv").exists() {
                    let spectrum = load_spectrum(&stem.with_extension("csv"))?;
                    if spectrum.provenance.config_digest != digest {
                        return Err(CliError::Runtime(format!(
                            "{} was produced by a different configuration (digest mismatch)",
                            stem.display()
                        )));
                    }
                    spectra.push((name.clone(), spectrum));
                } else {
                    missing.push(format!("{}", stem.with_extension("csv").display()));
                }
            }
            rows.push((mode, injected, spectra));
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Runtime(format!(
            "missing inputs in {}: {}",
            run_dir.display(),
            missing.join(", ")
        )));
    }

    let p_inband = match config.scan.signal_rate_hz {
        Some(target) => target / domain.det_signal.efficiency,
        None => {
            let center = 0.5 * (config.scan.lambda_start_nm + config.scan.lambda_stop_nm);
            let mono_center = match config.scan.sample_placement {
                SamplePlacement::IdlerArm => conjugate_wavelength(&domain.source.pump, center)
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
                SamplePlacement::SignalArm => center,
            };
            domain.source.pair_rate_hz
                * inband_pair_fraction(&domain.source, &domain.mono.at_center(mono_center))
        }
    };

    let mut table = Vec::new();
    for (mode, injected, spectra) in rows {
        let mut analytes = Vec::new();
        for (name, spectrum) in &spectra {
            analytes.push(analyze(name, spectrum));
        }
        let (shift_nm, shift_sigma, sensitivity) = if analytes.len() == 2 {
            shift_between(&analytes, &domain.analytes)
        } else {
            (None, None, None)
        };
        let n_s = injected + config.detectors.signal.noise_rate_hz;
        let ratio_predicted = domain.det_idler.efficiency
            / (domain.det_idler.noise_rate_hz * domain.window.delta_t_s);
        let ratio_measured = if n_s > 0.0 {
            snr_report(
                domain.det_idler.efficiency,
                domain.det_idler.noise_rate_hz,
                n_s,
                domain.det_signal.efficiency,
                p_inband,
                domain.window,
            )
            .map(|r| r.ratio_measured)
            .unwrap_or(ratio_predicted)
        } else {
            ratio_predicted
        };
        table.push(Row {
            mode,
            noise_hz: injected,
            analytes,
            shift_nm,
            shift_sigma,
            sensitivity,
            snr_ratio_predicted: ratio_predicted,
            snr_ratio_measured: ratio_measured,
        });
    }

    let csv = render_csv(&table);
    let text = render_text(&table);
    std::fs::write(run_dir.join("report.csv"), &csv)
        .map_err(|e| CliError::Runtime(format!("write report.csv: {e}")))?;
    std::fs::write(run_dir.join("report.txt"), &text)
        .map_err(|e| CliError::Runtime(format!("write report.txt: {e}")))?;
    print!("{text}");
    Ok(())
}

fn analyze(name: &str, spectrum: &Spectrum) -> AnalyteResult {
    match fit_fano(spectrum, None) {
        Ok(fit) => {
            let verdict = detectability(&fit, spectrum);
            AnalyteResult {
                name: name.to_string(),
                lambda_min: fit.lambda_min_nm().ok(),
                lambda_min_sigma: Some(fit.lambda_min_sigma()),
                detectable: verdict.detectable,
                score: Some(verdict.score),
                fit: Some(fit),
            }
        }
        // a spectrum that is flat within its error bars or will not fit has
        // no detectable resonance
        Err(_) => AnalyteResult {
            name: name.to_string(),
            lambda_min: None,
            lambda_min_sigma: None,
            detectable: false,
            score: None,
            fit: None,
        },
    }
}

fn shift_between(
    analytes: &[AnalyteResult],
    catalog: &[(String, ghostspec::Analyte)],
) -> (Option<f64>, Option<f64>, Option<f64>) {
    let (Some(fit_a), Some(fit_b)) = (&analytes[0].fit, &analytes[1].fit) else {
        return (None, None, None);
    };
    let index_of = |name: &str| {
        catalog.iter().find(|(n, _)| n == name).map(|(_, a)| a.refractive_index)
    };
    let delta_n = match (index_of(&analytes[0].name), index_of(&analytes[1].name)) {
        (Some(n0), Some(n1)) if n1 != n0 => Some(n1 - n0),
        _ => None,
    };
    match estimate_shift(fit_a, fit_b, delta_n) {
        Ok(est) => (Some(est.shift_nm), Some(est.sigma_nm), est.sensitivity_nm_per_riu),
        Err(_) => (None, None, None),
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "nan".to_string(),
    }
}

fn render_csv(rows: &[Row]) -> String {
    let mut out = String::from(
        "mode,noise_hz,analyte_a,lambda_min_a_nm,sigma_a_nm,detectable_a,score_a,\
         analyte_b,lambda_min_b_nm,sigma_b_nm,detectable_b,score_b,\
         shift_nm,shift_sigma_nm,sensitivity_nm_per_riu,snr_ratio_predicted,snr_ratio_measured\n",
    );
    for row in rows {
        let blank = AnalyteResult {
            name: String::new(),
            lambda_min: None,
            lambda_min_sigma: None,
            detectable: false,
            score: None,
            fit: None,
        };
        let a = row.analytes.first().unwrap_or(&blank);
        let b = row.analytes.get(1).unwrap_or(&blank);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.mode,
            row.noise_hz,
            a.name,
            fmt_opt(a.lambda_min),
            fmt_opt(a.lambda_min_sigma),
            a.detectable,
            fmt_opt(a.score),
            b.name,
            fmt_opt(b.lambda_min),
            fmt_opt(b.lambda_min_sigma),
            b.detectable,
            fmt_opt(b.score),
            fmt_opt(row.shift_nm),
            fmt_opt(row.shift_sigma),
            fmt_opt(row.sensitivity),
            row.snr_ratio_predicted,
            row.snr_ratio_measured,
        );
    }
    out
}

fn render_text(rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<9} {:>10} | {:<24} {:<24} | {:>9} {:>8} {:>12} | {:>9}",
        "mode", "noise_hz", "analyte A", "analyte B", "shift_nm", "sigma", "nm_per_riu", "snr_q/c"
    );
    let _ = writeln!(out, "{}", "-".repeat(120));
    for row in rows {
        let describe = |a: Option<&AnalyteResult>| match a {
            Some(r) => {
                let min = match r.lambda_min {
                    Some(m) => format!("{m:.2}"),
                    None => "n/a".to_string(),
                };
                let verdict = if r.detectable { "ok" } else { "NOT-DET" };
                format!("{}: {} [{}]", r.name, min, verdict)
            }
            None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<9} {:>10} | {:<24} {:<24} | {:>9} {:>8} {:>12} | {:>9.3}",
            row.mode.to_string(),
            row.noise_hz,
            describe(row.analytes.first()),
            describe(row.analytes.get(1)),
            row.shift_nm.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into()),
            row.shift_sigma.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into()),
            row.sensitivity.map(|s| format!("{s:.1}")).unwrap_or_else(|| "n/a".into()),
            row.snr_ratio_predicted,
        );
    }
    out
}
