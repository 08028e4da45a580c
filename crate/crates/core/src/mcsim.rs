//! Monte Carlo photon-count histograms, sampled trajectory by trajectory and
//! independent of the closed-form distributions.
//!
//! Trials are grouped into fixed-size blocks. Each block draws from its own
//! ChaCha stream selected by the block index, so the histogram depends only
//! on the seed and never on how rayon schedules the blocks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detmodel::{check_eta, HistogramKind, LeakParams, PhotonHistogram};
use crate::error::{Error, Result};

const BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Exponential leak time, then Poisson counting over the bright fraction
    /// of the detection window.
    RateEquation,
    /// Every emitted photon carries a leak check and a detection check.
    PhotonLevel,
}

impl McMode {
    pub fn as_str(self) -> &'static str {
        match self {
            McMode::RateEquation => "rate_equation",
            McMode::PhotonLevel => "photon_level",
        }
    }
}

impl fmt::Display for McMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for McMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rate_equation" | "rate" => Ok(McMode::RateEquation),
            "photon_level" | "photon" => Ok(McMode::PhotonLevel),
            _ => Err(Error::config(format!(
                "unknown Monte Carlo mode `{s}` (rate_equation | photon_level)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Dark,
    Bright,
}

impl InitialState {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialState::Dark => "dark",
            InitialState::Bright => "bright",
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dark" => Ok(InitialState::Dark),
            "bright" => Ok(InitialState::Bright),
            _ => Err(Error::config(format!(
                "unknown initial state `{s}` (dark | bright)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub mode: McMode,
    pub initial: InitialState,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64, mode: McMode, initial: InitialState) -> Self {
        McConfig {
            trials,
            seed,
            mode,
            initial,
        }
    }

    /// The `trials=<N> seed=<S> mode=<M>` metadata line of the histogram CSV.
    pub fn metadata(&self) -> String {
        format!(
            "trials={} seed={} mode={}",
            self.trials, self.seed, self.mode
        )
    }
}

/// Random stream for block `index` of a run seeded with `seed`.
pub fn block_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

fn binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    Binomial::new(n, p)
        .expect("probability checked by caller")
        .sample(rng)
}

/// Per-trajectory sampler with its distributions built once.
enum Sampler {
    Rate {
        lambda0: f64,
        leak: Option<Exp<f64>>,
        dark: bool,
    },
    Photon {
        emitted: Option<Poisson<f64>>,
        leak: Option<Geometric>,
        eta: f64,
        dark: bool,
    },
}

impl Sampler {
    fn new(params: &LeakParams, eta: f64, config: &McConfig) -> Result<Self> {
        let dark = config.initial == InitialState::Dark;
        let alpha = if dark { params.alpha1 } else { params.alpha2 };
        Ok(match config.mode {
            McMode::RateEquation => {
                // Leak rate in units of the detection time: alpha lambda0 / eta.
                let rate = alpha * params.lambda0 / eta;
                let leak = if rate > 0.0 {
                    Some(
                        Exp::new(rate)
                            .map_err(|e| Error::domain(format!("leak rate {rate}: {e}")))?,
                    )
                } else {
                    None
                };
                Sampler::Rate {
                    lambda0: params.lambda0,
                    leak,
                    dark,
                }
            }
            McMode::PhotonLevel => {
                let mean = params.lambda0 / eta;
                let emitted = if mean > 0.0 {
                    Some(
                        Poisson::new(mean)
                            .map_err(|e| Error::domain(format!("emitted mean {mean}: {e}")))?,
                    )
                } else {
                    None
                };
                let leak = if alpha > 0.0 {
                    Some(
                        Geometric::new(alpha)
                            .map_err(|e| Error::domain(format!("leak probability {alpha}: {e}")))?,
                    )
                } else {
                    None
                };
                Sampler::Photon {
                    emitted,
                    leak,
                    eta,
                    dark,
                }
            }
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match *self {
            Sampler::Rate {
                lambda0,
                ref leak,
                dark,
            } => {
                let t = leak.as_ref().map_or(f64::INFINITY, |e| e.sample(rng));
                let bright_fraction = if dark { 1.0 - t.min(1.0) } else { t.min(1.0) };
                poisson(bright_fraction * lambda0, rng)
            }
            Sampler::Photon {
                ref emitted,
                ref leak,
                eta,
                dark,
            } => {
                let n = emitted.as_ref().map_or(0, |p| p.sample(rng) as u64);
                // Photons emitted before the one that triggers the leak.
                let before = leak.as_ref().map_or(u64::MAX, |g| g.sample(rng));
                let counted = if dark {
                    if before >= n {
                        0
                    } else {
                        n - before - 1
                    }
                } else {
                    n.min(before)
                };
                binomial(counted, eta, rng)
            }
        }
    }
}

fn merge(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        return merge(b, a);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Samples `config.trials` detection events and bins the detected counts.
pub fn simulate_histogram(
    params: &LeakParams,
    eta: f64,
    config: &McConfig,
) -> Result<PhotonHistogram> {
    params.validate()?;
    check_eta(eta)?;
    if config.trials == 0 {
        return Err(Error::domain("Monte Carlo needs at least one trial"));
    }
    if config.initial == InitialState::Dark && params.alpha1 / eta >= 1.0 {
        return Err(Error::domain(format!(
            "dark simulation requires alpha1/eta < 1, got {}",
            params.alpha1 / eta
        )));
    }
    let sampler = Sampler::new(params, eta, config)?;
    let blocks = config.trials.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .fold(Vec::new, |mut acc: Vec<u64>, b| {
            let mut rng = block_rng(config.seed, b);
            let end = ((b + 1) * BLOCK).min(config.trials);
            for _ in b * BLOCK..end {
                let n = sampler.sample(&mut rng) as usize;
                if acc.len() <= n {
                    acc.resize(n + 1, 0);
                }
                acc[n] += 1;
            }
            acc
        })
        .reduce(Vec::new, merge);
    Ok(PhotonHistogram::from_counts(
        &counts,
        HistogramKind::Simulated,
    ))
}

/// Adds an independent Poisson(`mean`) background count to every trial of an
/// integer histogram.
pub fn add_background(hist: &PhotonHistogram, mean: f64, seed: u64) -> Result<PhotonHistogram> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::domain(format!(
            "background mean must be >= 0, got {mean}"
        )));
    }
    if hist.values.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::domain("background injection needs integer counts"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<u64> = Vec::new();
    for (n, &c) in hist.values.iter().enumerate() {
        for _ in 0..c as u64 {
            let m = n + poisson(mean, &mut rng) as usize;
            if out.len() <= m {
                out.resize(m + 1, 0);
            }
            out[m] += 1;
        }
    }
    let kind = if hist.kind == HistogramKind::Analytic {
        HistogramKind::Simulated
    } else {
        hist.kind
    };
    Ok(PhotonHistogram::from_counts(&out, kind))
}
