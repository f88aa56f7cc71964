//! End-to-end scan, normalization and analysis checks.

use ghostspec::*;

fn paper_sensor() -> SensorModel {
    SensorModel::new(FanoProfile::default_sensor_array(), 1.384, 570.0).unwrap()
}

fn substrate_profile() -> FanoProfile {
    // unit transmission everywhere
    FanoProfile { depth_a: 0.0, ..FanoProfile::default_sensor_array() }
}

fn mono() -> MonochromatorSpec {
    MonochromatorSpec::new(806.0, 1.5, PassbandShape::Gaussian).unwrap()
}

fn window() -> CoincidenceWindow {
    CoincidenceWindow::new(5e-9).unwrap()
}

fn signal_detector(noise_rsd: f64) -> DetectorSpec {
    DetectorSpec::with_noise_rsd(0.5, 0.0, 400e-12, noise_rsd).unwrap()
}

fn idler_detector() -> DetectorSpec {
    DetectorSpec::new(0.05, 1e5, 400e-12).unwrap()
}

fn quantum_scan_config(injected: f64) -> ScanConfig {
    ScanConfig {
        injected_noise_hz: injected,
        signal_rate_hz: Some(1e3),
        ..ScanConfig::defaults(Mode::Quantum)
    }
}

fn run_quantum_pair(
    sample: &FanoProfile,
    scan: &ScanConfig,
    seed: u64,
) -> (Spectrum, Spectrum) {
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let array = run_quantum_scan(
        &source,
        sample,
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        scan,
        seeds::derive_labeled(seed, "array"),
    )
    .unwrap();
    let substrate = run_quantum_scan(
        &source,
        &substrate_profile(),
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        scan,
        seeds::derive_labeled(seed, "substrate"),
    )
    .unwrap();
    (array, substrate)
}

#[test]
fn quantum_dip_lands_on_the_sample_minimum() {
    // x-axis correctness: the monochromator scans the conjugate arm, yet the
    // normalized spectrum dips at the sample's own minimum wavelength.
    let sample = FanoProfile::default_sensor_array();
    let scan = quantum_scan_config(0.0);
    let (array, substrate) = run_quantum_pair(&sample, &scan, 11);
    let normalized = normalize(&array, &substrate).unwrap();
    let expected = resonance_minimum_wavelength(&sample).unwrap();
    let argmin = normalized.argmin_lambda().unwrap();
    assert!(
        (argmin - expected).abs() <= scan.step_nm,
        "argmin {argmin} vs minimum {expected}"
    );
}

#[test]
fn unit_transmission_sample_gives_a_flat_quantum_spectrum() {
    // With the sample replaced by unit transmission the normalized spectrum
    // is flat up to Poisson noise.
    let scan = quantum_scan_config(0.0);
    let (array, substrate) = run_quantum_pair(&substrate_profile(), &scan, 13);
    let normalized = normalize(&array, &substrate).unwrap();
    for r in normalized.records() {
        let se = r.std_counts / (r.n_repeats as f64).sqrt();
        assert!(
            (r.mean_counts - 1.0).abs() <= 4.0 * se.max(1e-6),
            "bin {} = {} +- {}",
            r.lambda_nm,
            r.mean_counts,
            se
        );
    }
}

#[test]
fn noiseless_quantum_scan_normalizes_to_the_transmission_curve() {
    let sample = FanoProfile::default_sensor_array();
    let mut scan = quantum_scan_config(0.0);
    scan.dwell_s = 100.0;
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let noiseless_signal = DetectorSpec::new(0.5, 0.0, 0.0).unwrap();
    let noiseless_idler = DetectorSpec::new(0.05, 0.0, 0.0).unwrap();
    let array = run_quantum_scan(
        &source, &sample, &noiseless_signal, &noiseless_idler, &mono(), window(), &scan, 5,
    )
    .unwrap();
    let substrate = run_quantum_scan(
        &source,
        &substrate_profile(),
        &noiseless_signal,
        &noiseless_idler,
        &mono(),
        window(),
        &scan,
        6,
    )
    .unwrap();
    let normalized = normalize(&array, &substrate).unwrap();
    for r in normalized.records() {
        let t = transmission(&sample, r.lambda_nm);
        let se = r.std_counts / (r.n_repeats as f64).sqrt();
        assert!(
            (r.mean_counts - t).abs() <= 4.0 * se,
            "bin {}: {} vs T {} (se {})",
            r.lambda_nm,
            r.mean_counts,
            t,
            se
        );
    }
}

#[test]
fn injected_noise_equals_raised_detector_noise() {
    // Injecting a rate into the monochromator channel is byte-identical to
    // raising that detector's lumped noise rate, on the same seed path.
    let sample = FanoProfile::default_sensor_array();
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let mut scan = quantum_scan_config(2e4);
    scan.repeats = 5;
    let injected = run_quantum_scan(
        &source,
        &sample,
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        &scan,
        42,
    )
    .unwrap();
    let raised_det = DetectorSpec::with_noise_rsd(0.5, 2e4, 400e-12, 0.0).unwrap();
    scan.injected_noise_hz = 0.0;
    let raised = run_quantum_scan(
        &source, &sample, &raised_det, &idler_detector(), &mono(), window(), &scan, 42,
    )
    .unwrap();
    assert_eq!(injected.records(), raised.records());
}

#[test]
fn argmin_is_invariant_under_source_and_lamp_scaling() {
    let sample = FanoProfile::default_sensor_array();
    let mono = mono();
    let scan = ScanConfig { signal_rate_hz: None, ..ScanConfig::defaults(Mode::Quantum) };
    let argmin_of = |pair_rate: f64| {
        let source = BiphotonSpectrum::default_three_crystal(pair_rate);
        let plan = plan_quantum_scan(
            &source,
            &sample,
            &signal_detector(0.0),
            &idler_detector(),
            &mono,
            window(),
            &scan,
        )
        .unwrap();
        let (mut best, mut best_lambda) = (f64::MAX, 0.0);
        for bin in 0..plan.probe_nm.len() {
            // normalized expectation: array over substrate
            let with_sample = plan.breakdown(bin).r_total_hz;
            let mut unit = plan.clone();
            unit.sample_transmission = vec![1.0; plan.probe_nm.len()];
            let without = unit.breakdown(bin).r_total_hz;
            let ratio = with_sample / without;
            if ratio < best {
                best = ratio;
                best_lambda = plan.probe_nm[bin];
            }
        }
        best_lambda
    };
    let a = argmin_of(1e5);
    let b = argmin_of(1e7);
    assert_eq!(a, b);
}

#[test]
fn event_mode_coincidences_match_the_rate_algebra() {
    // Correlated pair streams with efficiencies, jitter and noise: the
    // event-mode coincidence count agrees with the expected total rate.
    let duration = 20.0;
    let pair_rate = 5e4;
    let (eta_s, eta_i, t_sample) = (0.5, 0.4, 0.7);
    let (n_s, n_i) = (2e4, 5e4);
    let source = BiphotonSpectrum::default_three_crystal(pair_rate);
    let pairs = sample_pairs(&source, duration, 17).unwrap();
    let signal_arrivals: Vec<Arrival> = pairs.iter().map(|p| Arrival::certain(p.t_s)).collect();
    let idler_arrivals: Vec<Arrival> =
        pairs.iter().map(|p| Arrival { t_s: p.t_s, survival: t_sample }).collect();
    let det_s = DetectorSpec::new(eta_s, n_s, 400e-12).unwrap();
    let det_i = DetectorSpec::new(eta_i, n_i, 400e-12).unwrap();
    let s = detect(&signal_arrivals, &det_s, duration, 18);
    let i = detect(&idler_arrivals, &det_i, duration, 19);
    let count = count_coincidences(&s, &i, window()).unwrap() as f64;
    let rates = expected_rates(pair_rate, eta_s, eta_i, n_s, n_i, t_sample, window()).unwrap();
    let expected = rates.r_total_hz * duration;
    assert!(
        (count - expected).abs() <= 4.0 * expected.sqrt(),
        "count {count} vs expected {expected}"
    );
}

#[test]
fn rate_and_event_fidelities_agree_per_bin() {
    let sample = FanoProfile::default_sensor_array();
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let det_i = DetectorSpec::new(0.05, 1e4, 400e-12).unwrap();
    let base = ScanConfig {
        lambda_start_nm: 780.0,
        lambda_stop_nm: 807.0,
        dwell_s: 1.0,
        injected_noise_hz: 1e3,
        signal_rate_hz: Some(1e3),
        ..ScanConfig::defaults(Mode::Quantum)
    };
    let rate_scan = run_quantum_scan(
        &source,
        &sample,
        &signal_detector(0.0),
        &det_i,
        &mono(),
        window(),
        &ScanConfig { fidelity: Fidelity::Rate, ..base.clone() },
        101,
    )
    .unwrap();
    let event_scan = run_quantum_scan(
        &source,
        &sample,
        &signal_detector(0.0),
        &det_i,
        &mono(),
        window(),
        &ScanConfig { fidelity: Fidelity::Event, ..base },
        102,
    )
    .unwrap();
    for (r, e) in rate_scan.records().iter().zip(event_scan.records()) {
        let se = ((r.std_counts.powi(2) + e.std_counts.powi(2)) / r.n_repeats as f64).sqrt();
        assert!(
            (r.mean_counts - e.mean_counts).abs() <= 4.0 * se.max(1e-9),
            "bin {}: rate {} vs event {} (se {})",
            r.lambda_nm,
            r.mean_counts,
            e.mean_counts,
            se
        );
    }
}

#[test]
fn doubling_dwell_tightens_relative_error_by_sqrt_two() {
    let sample = substrate_profile();
    let det = DetectorSpec::new(0.5, 0.0, 0.0).unwrap();
    let scan_with_dwell = |dwell: f64| ScanConfig {
        lambda_start_nm: 790.0,
        lambda_stop_nm: 805.0,
        dwell_s: dwell,
        repeats: 300,
        signal_rate_hz: Some(1e3),
        ..ScanConfig::defaults(Mode::Classical)
    };
    let lamp = LampSpec { flux_per_nm_hz: 0.0 };
    let rel_se = |dwell: f64, seed: u64| {
        let spec =
            run_classical_scan(&lamp, &sample, &det, &mono(), &scan_with_dwell(dwell), seed)
                .unwrap();
        let rels: Vec<f64> =
            spec.records().iter().map(|r| r.std_counts / r.mean_counts).collect();
        rels.iter().sum::<f64>() / rels.len() as f64
    };
    let ratio = rel_se(1.0, 31) / rel_se(2.0, 32);
    assert!(
        (ratio - std::f64::consts::SQRT_2).abs() < 0.2,
        "relative-error ratio {ratio}"
    );
}

#[test]
fn scan_outside_the_source_band_is_rejected() {
    let narrow = BiphotonSpectrum::new(
        vec![SpectralLobe { center_nm: 814.0, fwhm_nm: 0.001, weight: 1.0 }],
        1e5,
        PumpSpec { wavelength_nm: 407.0 },
    )
    .unwrap();
    let scan = ScanConfig {
        lambda_start_nm: 740.0,
        lambda_stop_nm: 760.0,
        ..ScanConfig::defaults(Mode::Quantum)
    };
    let err = run_quantum_scan(
        &narrow,
        &FanoProfile::default_sensor_array(),
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        &scan,
        1,
    );
    assert!(matches!(err, Err(Error::EmptyBand(_))));
}

#[test]
fn normalize_rejects_mismatched_grids_and_dead_substrate() {
    let sample = FanoProfile::default_sensor_array();
    let scan = quantum_scan_config(0.0);
    let (array, substrate) = run_quantum_pair(&sample, &scan, 77);
    let shifted_scan = ScanConfig { lambda_start_nm: 741.0, ..scan };
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let other = run_quantum_scan(
        &source,
        &substrate_profile(),
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        &shifted_scan,
        78,
    )
    .unwrap();
    assert!(matches!(normalize(&array, &other), Err(Error::GridMismatch(_))));

    // a classical substrate whose counts sit exactly at the floor dies in
    // background subtraction
    let dead = Spectrum::new(
        substrate
            .records()
            .iter()
            .map(|r| SpectrumRecord { mean_counts: 100.0, std_counts: 1.0, ..*r })
            .collect(),
        Provenance {
            mode: Mode::Classical,
            noise_floor_hz: 100.0 / substrate.provenance.dwell_s,
            ..substrate.provenance.clone()
        },
    )
    .unwrap();
    let dead_array = Spectrum::new(
        array
            .records()
            .iter()
            .map(|r| SpectrumRecord { mean_counts: 150.0, std_counts: 1.0, ..*r })
            .collect(),
        dead.provenance.clone(),
    )
    .unwrap();
    assert!(matches!(normalize(&dead_array, &dead), Err(Error::DivisionByZero(_))));
}

#[test]
fn spectrum_divided_by_itself_is_unity_with_sqrt2_errors() {
    let sample = FanoProfile::default_sensor_array();
    let scan = quantum_scan_config(0.0);
    let (array, _) = run_quantum_pair(&sample, &scan, 55);
    let ratio = normalize(&array, &array).unwrap();
    for (r, orig) in ratio.records().iter().zip(array.records()) {
        assert_eq!(r.mean_counts, 1.0);
        let rel = orig.std_counts / orig.mean_counts;
        let expected = std::f64::consts::SQRT_2 * rel;
        assert!((r.std_counts - expected).abs() < 1e-12);
    }
}

#[test]
fn sample_in_the_signal_arm_still_shows_the_dip() {
    let sample = FanoProfile::default_sensor_array();
    let source = BiphotonSpectrum::default_three_crystal(1.0);
    let scan = ScanConfig {
        sample_placement: SamplePlacement::SignalArm,
        ..quantum_scan_config(0.0)
    };
    let array = run_quantum_scan(
        &source,
        &sample,
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        &scan,
        23,
    )
    .unwrap();
    let substrate = run_quantum_scan(
        &source,
        &substrate_profile(),
        &signal_detector(0.0),
        &idler_detector(),
        &mono(),
        window(),
        &scan,
        24,
    )
    .unwrap();
    let normalized = normalize(&array, &substrate).unwrap();
    let argmin = normalized.argmin_lambda().unwrap();
    let expected = resonance_minimum_wavelength(&sample).unwrap();
    assert!((argmin - expected).abs() <= scan.step_nm);
}

#[test]
fn monte_carlo_shift_scatter_matches_propagated_sigma() {
    // The propagated shift uncertainty tracks the spread of repeated
    // simulations within a factor of two.
    let sensor = paper_sensor();
    let p40 = shifted_profile(&sensor, &Analyte::from_glycerin_percent(40.0).unwrap());
    let p50 = shifted_profile(&sensor, &Analyte::from_glycerin_percent(50.0).unwrap());
    let scan = quantum_scan_config(1e3);
    let mut shifts = Vec::new();
    let mut sigmas = Vec::new();
    for seed in 0..50u64 {
        let (a40, s40) = run_quantum_pair(&p40, &scan, 1000 + seed);
        let (a50, s50) = run_quantum_pair(&p50, &scan, 2000 + seed);
        let n40 = normalize(&a40, &s40).unwrap();
        let n50 = normalize(&a50, &s50).unwrap();
        let f40 = fit_fano(&n40, None).unwrap();
        let f50 = fit_fano(&n50, None).unwrap();
        let est = estimate_shift(&f40, &f50, Some(0.014)).unwrap();
        shifts.push(est.shift_nm);
        sigmas.push(est.sigma_nm);
    }
    let n = shifts.len() as f64;
    let mean = shifts.iter().sum::<f64>() / n;
    let std = (shifts.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sigma = sigmas.iter().sum::<f64>() / n;
    let ratio = sigma / std;
    assert!(
        (0.5..=2.0).contains(&ratio),
        "propagated {sigma} vs monte-carlo {std} (ratio {ratio})"
    );
    assert!((mean - 7.98).abs() < 0.5, "mean shift {mean}");
}
