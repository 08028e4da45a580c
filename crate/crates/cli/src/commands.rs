use std::fmt::Write as _;
use std::path::Path;

use fluordet::ccd::{
    calibrate_thresholds, conditional_correlations, crosstalk_ratio, readouts_csv,
    simulate_readouts, write_pgm, RegisterSetup, RegisterSimulator,
};
use fluordet::detmodel::{
    bright_distribution, dark_distribution, detection_params, leak_floor, n_max,
};
use fluordet::fidelity::{
    clock_state_fidelity, curve_csv, fidelity_curve, optimize_detection, p12_table, table_csv,
    TABLE_ETAS,
};
use fluordet::fitkit::{fit_histograms, model_vs_data_csv};
use fluordet::format::sig9;
use fluordet::mcsim::{add_background, block_rng, simulate_histogram};
use fluordet::{InitialState, LeakParams, McConfig, McMode, PhotonHistogram, Scheme};
use rand::Rng;

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::output::{emit, ensure_dir, write_atomic};

const DEFAULT_ETA: f64 = 1e-3;
const DEFAULT_SEED: u64 = 1;
const DEFAULT_MC_TRIALS: u64 = 100_000;
const DEFAULT_CCD_TRIALS: u64 = 4_000;
const DEFAULT_SPACING_UM: f64 = 4.0;

fn eta(cfg: &RunConfig) -> f64 {
    cfg.eta.unwrap_or(DEFAULT_ETA)
}

/// Leak parameters derived from the species and laser settings, with any
/// direct overrides from the config applied on top.
fn leak_params(cfg: &RunConfig) -> Result<LeakParams, Failure> {
    let species = cfg.species()?;
    let derived = detection_params(&species, &cfg.detection(eta(cfg)))?;
    Ok(LeakParams::new(
        cfg.lambda0.unwrap_or(derived.lambda0),
        cfg.alpha1.unwrap_or(derived.alpha1),
        cfg.alpha2.unwrap_or(derived.alpha2),
    )?)
}

pub fn params(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let eta = eta(cfg);
    let p = leak_params(cfg)?;
    let species = cfg.species()?;
    let text = format!(
        "species: {}\nscheme: {}\neta: {}\nlambda0: {}\nalpha1: {}\nalpha2: {}\nalpha1_over_eta: {}\nalpha2_over_eta: {}\ndark_leak_time_over_tau_d: {}\n",
        species.name,
        cfg.scheme().as_str(),
        sig9(eta),
        sig9(p.lambda0),
        sig9(p.alpha1),
        sig9(p.alpha2),
        sig9(p.alpha1 / eta),
        sig9(p.alpha2 / eta),
        sig9(p.dark_leak_time(eta)),
    );
    emit(out, &text)
}

pub fn dist(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let eta = eta(cfg);
    let p = leak_params(cfg)?;
    let nm = n_max(p.lambda0);
    let dark = dark_distribution(&p, eta, nm)?;
    let bright = bright_distribution(&p, eta, nm)?;
    let header = format!(
        "# lambda0={} alpha1={} alpha2={} eta={}\n",
        sig9(p.lambda0),
        sig9(p.alpha1),
        sig9(p.alpha2),
        sig9(eta)
    );
    let column = |values: &[f64], name: &str| {
        let mut s = format!("{header}n,{name}\n");
        for (n, v) in values.iter().enumerate() {
            let _ = writeln!(s, "{n},{}", sig9(*v));
        }
        s
    };
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_atomic(&dir.join("dark.csv"), column(&dark, "p_dark").as_bytes())?;
            write_atomic(
                &dir.join("bright.csv"),
                column(&bright, "p_bright").as_bytes(),
            )
        }
        None => {
            let mut s = format!("{header}n,p_dark,p_bright\n");
            for (n, (d, b)) in dark.iter().zip(&bright).enumerate() {
                let _ = writeln!(s, "{n},{},{}", sig9(*d), sig9(*b));
            }
            emit(None, &s)
        }
    }
}

pub fn optimize(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let species = cfg.species()?;
    let scheme = cfg.scheme();
    let eta = eta(cfg);
    let r = optimize_detection(&species, scheme, eta)?;
    let mut text = format!(
        "species: {}\nscheme: {}\neta: {}\nthreshold_d: {}\nlambda0_opt: {}\nfidelity: {}\ndark_fidelity: {}\nbright_fidelity: {}\n",
        species.name,
        scheme.as_str(),
        sig9(eta),
        r.d,
        sig9(r.lambda0_opt),
        sig9(r.fidelity.value()),
        sig9(r.dark_fidelity.value()),
        sig9(r.bright_fidelity.value()),
    );
    if scheme == Scheme::P32 {
        let clock = clock_state_fidelity(&species, eta)?;
        let _ = write!(
            text,
            "max_clock_fidelity: {}\nclock_state_fidelity: {}\n",
            sig9(clock.max_clock.value()),
            sig9(clock.total.value())
        );
    }
    emit(out, &text)
}

pub fn curve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let etas = match &cfg.etas {
        Some(v) => v.clone(),
        None => (0..=12)
            .map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0))
            .collect(),
    };
    let rows = fidelity_curve(&cfg.species()?, cfg.scheme(), &etas)?;
    emit(out, &curve_csv(&rows))
}

pub fn table1(_cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let rows = p12_table(&fluordet::IonSpecies::builtins(), &TABLE_ETAS)?;
    emit(out, &table_csv(&rows))
}

pub fn mc(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let p = leak_params(cfg)?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let config = McConfig::new(
        cfg.trials.unwrap_or(DEFAULT_MC_TRIALS),
        seed,
        cfg.mode.unwrap_or(McMode::RateEquation),
        cfg.initial.unwrap_or(InitialState::Dark),
    );
    let mut hist = simulate_histogram(&p, eta(cfg), &config)?;
    let mut metadata = vec![
        config.metadata(),
        format!(
            "initial={} lambda0={} alpha1={} alpha2={}",
            config.initial.as_str(),
            sig9(p.lambda0),
            sig9(p.alpha1),
            sig9(p.alpha2)
        ),
    ];
    if let Some(mean) = cfg.background_mean {
        hist = add_background(&hist, mean, seed.wrapping_add(1))?;
        metadata.push(format!("background_mean={}", sig9(mean)));
    }
    emit(out, &hist.to_csv(&metadata))
}

fn read_histogram(path: Option<&Path>, which: &str) -> Result<PhotonHistogram, Failure> {
    let path = path.ok_or_else(|| {
        Failure::invalid(format!(
            "no {which} histogram given (--{which} or {which}_csv)"
        ))
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::runtime(format!("cannot read {}: {e}", path.display())))?;
    PhotonHistogram::from_csv(&text)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

pub fn fit(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let dark = read_histogram(cfg.dark_csv.as_deref(), "dark")?;
    let bright = read_histogram(cfg.bright_csv.as_deref(), "bright")?;
    let species = cfg.species()?;
    let tau_d = cfg.tau_d_us.unwrap_or(150.0) * 1e-6;
    let result = fit_histograms(
        &dark,
        &bright,
        &species,
        tau_d,
        cfg.fit_background.unwrap_or(false),
    )?;
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            let table = model_vs_data_csv(&dark, &bright, &species, tau_d, &result.params())?;
            write_atomic(&dir.join("fit.txt"), result.to_text().as_bytes())?;
            write_atomic(&dir.join("model_vs_data.csv"), table.as_bytes())
        }
        None => emit(None, &result.to_text()),
    }
}

pub fn ccd_sim(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let dir =
        out.ok_or_else(|| Failure::invalid("ccd-sim writes several files and needs --out <dir>"))?;
    let species = cfg.species()?;
    let eta = eta(cfg);
    let register = cfg.register.clone().unwrap_or_default();
    let (floor1, floor2) = leak_floor(&species, cfg.scheme())?;
    let leaks = register
        .ion_lambda0
        .iter()
        .map(|&l| {
            LeakParams::new(
                l,
                cfg.alpha1.unwrap_or(floor1),
                cfg.alpha2.unwrap_or(floor2),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let setup = RegisterSetup::linear_chain(&leaks, eta, cfg.ccd(), register.crosstalk_eps)?;
    let sim = RegisterSimulator::new(setup)?;

    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let calibration_seed = seed.wrapping_mul(2);
    let readout_seed = calibration_seed.wrapping_add(1);
    let trials = cfg.trials.unwrap_or(DEFAULT_CCD_TRIALS);
    let thresholds = calibrate_thresholds(&sim, register.calibration_trials, calibration_seed)?;
    let readouts = simulate_readouts(&sim, &thresholds, trials, readout_seed)?;
    let correlations = conditional_correlations(&readouts)?;

    let (right, total) = readouts.iter().fold((0usize, 0usize), |(ok, all), r| {
        let truth = r.truth.as_deref().unwrap_or(&[]);
        let hits = r.bits.iter().zip(truth).filter(|(b, t)| b == t).count();
        (ok + hits, all + r.bits.len())
    });
    let mut report = format!(
        "# crosstalk_eps={} calibration_trials={} seed={}\n# thresholds={}\n# per_qubit_fidelity={}\n",
        sig9(register.crosstalk_eps),
        register.calibration_trials,
        seed,
        thresholds.iter().map(|t| sig9(*t)).collect::<Vec<_>>().join(","),
        sig9(right as f64 / total.max(1) as f64),
    );
    report.push_str(&correlations.to_report());

    ensure_dir(dir)?;
    write_atomic(
        &dir.join("readouts.csv"),
        readouts_csv(&readouts).as_bytes(),
    )?;
    write_atomic(&dir.join("correlations.txt"), report.as_bytes())?;
    // Frames are re-rendered from the same per-trial streams the readouts used.
    for t in 0..register.pgm_frames.min(trials) {
        let mut rng = block_rng(readout_seed, t);
        let states: Vec<bool> = (0..sim.n_ions()).map(|_| rng.random()).collect();
        let frame = sim.render(&states, readout_seed, &mut rng)?;
        write_atomic(&dir.join(format!("frame_{t:04}.pgm")), &write_pgm(&frame))?;
    }
    Ok(())
}

pub fn crosstalk(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let wavelength_nm = match cfg.wavelength_nm {
        Some(w) => w,
        None => cfg
            .species()?
            .manifold(cfg.scheme())?
            .wavelength_nm
            .ok_or_else(|| {
                Failure::invalid("species has no wavelength for this scheme; give --wavelength-nm")
            })?,
    };
    let spacing_um = cfg.spacing_um.unwrap_or(DEFAULT_SPACING_UM);
    let ratio = crosstalk_ratio(wavelength_nm * 1e-9, spacing_um * 1e-6)?;
    emit(
        out,
        &format!(
            "wavelength_nm: {}\nspacing_um: {}\ncrosstalk_ratio: {}\n",
            sig9(wavelength_nm),
            sig9(spacing_um),
            sig9(ratio)
        ),
    )
}
