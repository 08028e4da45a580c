use fluordet::detmodel::{analytic_histograms, dark_point_mass, p_dark};
use fluordet::mcsim::{add_background, simulate_histogram};
use fluordet::{Error, HistogramKind, InitialState, LeakParams, McConfig, McMode, PhotonHistogram};

const ETA: f64 = 1e-3;

fn leak(lambda0: f64, a1_over_eta: f64, a2_over_eta: f64) -> LeakParams {
    LeakParams::per_detected(lambda0, a1_over_eta, a2_over_eta, ETA).unwrap()
}

/// Expected total-variation distance between two independent `trials`-sample
/// histograms drawn from `p`, using the half-normal mean per bin.
fn expected_tv_between_samples(p: &[f64], trials: u64) -> f64 {
    let n = trials as f64;
    0.5 * p
        .iter()
        .map(|&q| (2.0 * q * (1.0 - q) / n).sqrt() * (2.0 / std::f64::consts::PI).sqrt())
        .sum::<f64>()
}

#[test]
fn leak_free_bright_is_poisson() {
    let trials = 200_000;
    for mode in [McMode::RateEquation, McMode::PhotonLevel] {
        let h = simulate_histogram(
            &leak(7.5, 0.0, 0.0),
            ETA,
            &McConfig::new(trials, 5, mode, InitialState::Bright),
        )
        .unwrap();
        assert_eq!(h.kind, HistogramKind::Simulated);
        assert_eq!(h.trials, Some(trials));
        assert_eq!(h.total(), trials as f64);
        let tol = 4.0 * (7.5 / trials as f64).sqrt();
        assert!((h.mean() - 7.5).abs() < tol, "{mode}: mean {}", h.mean());
    }
}

#[test]
fn leak_free_dark_never_counts() {
    for mode in [McMode::RateEquation, McMode::PhotonLevel] {
        let h = simulate_histogram(
            &leak(30.0, 0.0, 0.0),
            ETA,
            &McConfig::new(10_000, 1, mode, InitialState::Dark),
        )
        .unwrap();
        assert_eq!(h.values, vec![10_000.0]);
    }
}

#[test]
fn zero_trials_rejected() {
    let cfg = McConfig::new(0, 1, McMode::RateEquation, InitialState::Dark);
    assert!(matches!(
        simulate_histogram(&leak(5.0, 0.01, 0.0), ETA, &cfg),
        Err(Error::Domain(_))
    ));
}

#[test]
fn identical_across_thread_counts() {
    let p = leak(12.0, 0.05, 0.02);
    for mode in [McMode::RateEquation, McMode::PhotonLevel] {
        let cfg = McConfig::new(50_001, 99, mode, InitialState::Dark);
        let runs: Vec<PhotonHistogram> = [1, 3, 8]
            .iter()
            .map(|&threads| {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .unwrap();
                pool.install(|| simulate_histogram(&p, ETA, &cfg).unwrap())
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
        let other = simulate_histogram(&p, ETA, &McConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(runs[0], other);
    }
}

#[test]
fn dark_million_trials_close_to_closed_form() {
    let p = leak(12.0, 0.05, 0.0);
    let (analytic, _) = analytic_histograms(&p, ETA).unwrap();
    let cfg = McConfig::new(1_000_000, 2024, McMode::RateEquation, InitialState::Dark);
    let h = simulate_histogram(&p, ETA, &cfg).unwrap();
    let tv = h.total_variation(&analytic);
    assert!(tv <= 0.002, "total variation {tv}");
}

#[test]
fn modes_agree_within_sampling_noise() {
    let trials = 1_000_000;
    let cases = [
        (leak(12.0, 0.05, 0.0), InitialState::Dark),
        (leak(12.0, 0.0, 0.05), InitialState::Bright),
        (leak(5.0, 0.2, 0.0), InitialState::Dark),
        (leak(20.0, 0.0, 0.01), InitialState::Bright),
    ];
    for (k, (p, initial)) in cases.iter().enumerate() {
        let seed = 310 + k as u64;
        let rate = simulate_histogram(
            p,
            ETA,
            &McConfig::new(trials, seed, McMode::RateEquation, *initial),
        )
        .unwrap();
        let photon = simulate_histogram(
            p,
            ETA,
            &McConfig::new(trials, seed, McMode::PhotonLevel, *initial),
        )
        .unwrap();
        let (dark, bright) = analytic_histograms(p, ETA).unwrap();
        let reference = if *initial == InitialState::Dark {
            dark
        } else {
            bright
        };
        let noise = expected_tv_between_samples(&reference.values, trials);
        let tv = rate.total_variation(&photon);
        assert!(tv <= 3.0 * noise, "case {k}: tv {tv} vs noise {noise}");
    }
}

#[test]
fn empty_dark_frames_match_closed_form() {
    let trials = 400_000;
    let p = leak(12.0, 0.05, 0.0);
    let h = simulate_histogram(
        &p,
        ETA,
        &McConfig::new(trials, 8, McMode::PhotonLevel, InitialState::Dark),
    )
    .unwrap();
    let observed = h.get(0) / trials as f64;
    let expected = p_dark(0, &p, ETA).unwrap().value();
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    assert!(
        (observed - expected).abs() < 4.0 * sigma,
        "{observed} vs {expected}"
    );
    // Zero counts come from the never-leaked mass plus late leaks that
    // happened to yield nothing.
    assert!(expected > dark_point_mass(&p, ETA).unwrap().value());
}

#[test]
fn background_adds_its_mean() {
    let p = leak(6.0, 0.0, 0.0);
    let h = simulate_histogram(
        &p,
        ETA,
        &McConfig::new(100_000, 3, McMode::RateEquation, InitialState::Bright),
    )
    .unwrap();
    let noisy = add_background(&h, 0.4, 17).unwrap();
    assert_eq!(noisy.total(), h.total());
    assert!((noisy.mean() - h.mean() - 0.4).abs() < 4.0 * (0.4f64 / 100_000.0).sqrt());
    assert_eq!(add_background(&h, 0.0, 17).unwrap(), h);
    assert!(add_background(&h, -1.0, 17).is_err());
}
