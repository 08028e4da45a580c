use serde::Serialize;

use crate::angular::{branching_ratios, Scheme};
use crate::error::{Error, Result};

use super::species::IonSpecies;

/// Laser and optics settings for one detection pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionConfig {
    pub scheme: Scheme,
    /// Saturation parameter `I / I_sat`.
    pub s: f64,
    /// Laser detuning from the cycling resonance, rad/s. Only its square enters.
    pub delta: f64,
    /// Detection time, seconds.
    pub tau_d: f64,
    /// Total collection efficiency.
    pub eta: f64,
    /// Fraction of laser power in pi polarization.
    pub p_pi: f64,
    /// Fraction of laser power in the wrong circular polarization.
    pub p_minus: f64,
}

impl DetectionConfig {
    /// Resonant light with perfect polarization.
    pub fn new(scheme: Scheme, s: f64, tau_d: f64, eta: f64) -> Self {
        DetectionConfig {
            scheme,
            s,
            delta: 0.0,
            tau_d,
            eta,
            p_pi: 0.0,
            p_minus: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::domain(format!(
                "saturation s must be >= 0, got {}",
                self.s
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("detuning must be finite"));
        }
        if !(self.tau_d.is_finite() && self.tau_d > 0.0) {
            return Err(Error::domain(format!(
                "detection time must be > 0, got {}",
                self.tau_d
            )));
        }
        check_eta(self.eta)?;
        for (label, p) in [("p_pi", self.p_pi), ("p_minus", self.p_minus)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "{label} must lie in [0, 1), got {p}"
                )));
            }
        }
        if self.p_pi + self.p_minus >= 1.0 {
            return Err(Error::domain(format!(
                "polarization impurities p_pi + p_minus = {} must be < 1",
                self.p_pi + self.p_minus
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "collection efficiency eta must lie in (0, 1], got {eta}"
        )));
    }
    Ok(())
}

/// Mean detected bright-state photons and per-emitted-photon leak
/// probabilities in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakParams {
    pub lambda0: f64,
    /// Dark -> bright leak probability per emitted photon.
    pub alpha1: f64,
    /// Bright -> dark leak probability per emitted photon.
    pub alpha2: f64,
}

impl LeakParams {
    pub fn new(lambda0: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let p = LeakParams {
            lambda0,
            alpha1,
            alpha2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from leak probabilities per *detected* photon.
    pub fn per_detected(
        lambda0: f64,
        alpha1_over_eta: f64,
        alpha2_over_eta: f64,
        eta: f64,
    ) -> Result<Self> {
        check_eta(eta)?;
        Self::new(lambda0, alpha1_over_eta * eta, alpha2_over_eta * eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0.is_finite() && self.lambda0 >= 0.0) {
            return Err(Error::domain(format!(
                "lambda0 must be finite and >= 0, got {}",
                self.lambda0
            )));
        }
        for (label, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::domain(format!(
                    "{label} must be finite and >= 0, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// Mean leak time out of the dark state in units of the detection time,
    /// `tau_L1 / tau_D = eta / (alpha1 lambda0)`. Infinite when nothing leaks.
    pub fn dark_leak_time(&self, eta: f64) -> f64 {
        eta / (self.alpha1 * self.lambda0)
    }

    /// `tau_L2 / tau_D = eta / (alpha2 lambda0)`.
    pub fn bright_leak_time(&self, eta: f64) -> f64 {
        eta / (self.alpha2 * self.lambda0)
    }

    pub fn with_lambda0(self, lambda0: f64) -> Self {
        LeakParams { lambda0, ..self }
    }
}

/// Saturation and detuning broadening factor `1 + s + (2 delta / gamma)^2`.
fn broadening(s: f64, delta: f64, gamma: f64) -> f64 {
    let x = 2.0 * delta / gamma;
    1.0 + s + x * x
}

/// Derives `(lambda0, alpha1, alpha2)` from atomic data and laser settings.
pub fn detection_params(species: &IonSpecies, config: &DetectionConfig) -> Result<LeakParams> {
    config.validate()?;
    species.validate()?;
    let manifold = species.manifold(config.scheme)?;
    let ratios = branching_ratios(species.nuclear_spin, config.scheme)?;
    let gamma = manifold.gamma;
    let b = broadening(config.s, config.delta, gamma);
    let lambda0 = config.tau_d * config.eta * config.s * (gamma / 2.0) / b;

    let (delta1, delta2) = match config.scheme {
        Scheme::P32 => (species.omega_hfs - manifold.omega_hfp, manifold.omega_hfp),
        Scheme::P12 => (species.omega_hfs + manifold.omega_hfp, manifold.omega_hfp),
    };
    if delta1 <= 0.0 {
        return Err(Error::domain(format!(
            "{}: S1/2 splitting must exceed the P3/2 splitting for a dark qubit state",
            species.name
        )));
    }
    let off_resonance = |delta: f64| {
        let r = gamma / (2.0 * delta);
        r * r
    };
    let alpha1 = ratios.m1 * b * off_resonance(delta1);
    let alpha2 = match config.scheme {
        Scheme::P32 => {
            let impure = ratios.m2_pi * config.p_pi + ratios.m2_minus * config.p_minus;
            b * off_resonance(delta2) * impure / (1.0 - (config.p_pi + config.p_minus))
        }
        Scheme::P12 => ratios.m2_pi * b * off_resonance(delta2),
    };
    LeakParams::new(lambda0, alpha1, alpha2)
}

/// Leak probabilities in the weak, resonant, perfectly polarized limit
/// (`s -> 0`, `delta = 0`). `lambda0` is then a free light-level knob.
pub fn leak_floor(species: &IonSpecies, scheme: Scheme) -> Result<(f64, f64)> {
    let config = DetectionConfig::new(scheme, 0.0, 1.0, 1.0);
    let p = detection_params(species, &config)?;
    Ok((p.alpha1, p.alpha2))
}
