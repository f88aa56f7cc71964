//! `rates`: print the coincidence-rate decomposition and the SNR comparison
//! for one operating point, in full precision.

use ghostspec::{expected_rates, snr_report, CoincidenceWindow};

use crate::CliError;

#[allow(clippy::too_many_arguments)]
pub fn run(
    p_inband: f64,
    eta_s: f64,
    eta_i: f64,
    ns: f64,
    ni: f64,
    dt: f64,
    transmission: f64,
) -> Result<(), CliError> {
    let window = CoincidenceWindow::new(dt).map_err(|e| CliError::Config(e.to_string()))?;
    let rates = expected_rates(p_inband, eta_s, eta_i, ns, ni, transmission, window)
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!("p_inband_hz = {p_inband}");
    println!("eta_s = {eta_s}");
    println!("eta_i = {eta_i}");
    println!("n_s_hz = {ns}");
    println!("n_i_hz = {ni}");
    println!("delta_t_s = {dt}");
    println!("transmission = {transmission}");
    println!("s_signal_hz = {}", rates.s_signal_hz);
    println!("s_idler_hz = {}", rates.s_idler_hz);
    println!("r_true_hz = {}", rates.r_true_hz);
    println!("r_acc_nn_hz = {}", rates.r_acc_nn_hz);
    println!("r_acc_sn_hz = {}", rates.r_acc_sn_hz);
    println!("r_acc_ns_hz = {}", rates.r_acc_ns_hz);
    println!("r_noise_hz = {}", rates.r_noise_hz);
    println!("r_total_hz = {}", rates.r_total_hz);
    let snr = snr_report(eta_i, ni, ns, eta_s, p_inband, window)
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!("snr_quantum = {}", snr.snr_quantum);
    println!("snr_classical = {}", snr.snr_classical);
    println!("snr_ratio_measured = {}", snr.ratio_measured);
    println!("snr_ratio_predicted = {}", snr.ratio_predicted);
    Ok(())
}
