//! The JSON run configuration. Every key carries its unit in the name and
//! unknown keys are rejected with their full path.

use std::path::{Path, PathBuf};

use fluordet::ccd::GainDist;
use fluordet::detmodel::{mhz, SpeciesRecord};
use fluordet::{CcdParams, DetectionConfig, InitialState, IonSpecies, McMode, Scheme};
use serde::Deserialize;

use crate::failure::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in species name.
    pub species: Option<String>,
    /// Inline species definition; takes precedence over `species`.
    pub species_data: Option<SpeciesRecord>,
    pub scheme: Option<Scheme>,
    pub eta: Option<f64>,
    pub saturation_s: Option<f64>,
    pub detuning_mhz: Option<f64>,
    pub tau_d_us: Option<f64>,
    pub p_pi: Option<f64>,
    pub p_minus: Option<f64>,

    /// Direct overrides of the derived leak parameters.
    pub lambda0: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,

    pub etas: Option<Vec<f64>>,

    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub mode: Option<McMode>,
    pub initial: Option<InitialState>,
    pub background_mean: Option<f64>,

    pub dark_csv: Option<PathBuf>,
    pub bright_csv: Option<PathBuf>,
    pub fit_background: Option<bool>,

    pub ccd: Option<CcdSection>,
    pub register: Option<RegisterSection>,

    pub wavelength_nm: Option<f64>,
    pub spacing_um: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcdSection {
    pub gain_g: Option<f64>,
    pub readout_rms_counts: Option<f64>,
    pub bin_factor: Option<u32>,
    pub roi_super_pixels: Option<u32>,
    pub offset_counts: Option<f64>,
    pub counts_per_photon: Option<f64>,
    pub psf_sigma_px: Option<f64>,
    pub gain_dist: Option<GainDist>,
}

impl CcdSection {
    pub fn params(&self) -> CcdParams {
        let d = CcdParams::default();
        CcdParams {
            gain_g: self.gain_g.unwrap_or(d.gain_g),
            readout_rms_r: self.readout_rms_counts.unwrap_or(d.readout_rms_r),
            bin_factor: self.bin_factor.unwrap_or(d.bin_factor),
            roi_super_pixels: self.roi_super_pixels.unwrap_or(d.roi_super_pixels),
            offset: self.offset_counts.unwrap_or(d.offset),
            counts_per_photon: self.counts_per_photon.unwrap_or(d.counts_per_photon),
            psf_sigma: self.psf_sigma_px.unwrap_or(d.psf_sigma),
            gain_dist: self.gain_dist.unwrap_or(d.gain_dist),
        }
    }
}

/// Layout of a simulated linear register.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterSection {
    /// Mean detected photons of each bright ion, left to right.
    #[serde(default = "default_ion_lambda0")]
    pub ion_lambda0: Vec<f64>,
    #[serde(default = "default_eps")]
    pub crosstalk_eps: f64,
    #[serde(default = "default_calibration_trials")]
    pub calibration_trials: u64,
    /// Number of leading frames also written as images.
    #[serde(default = "default_pgm_frames")]
    pub pgm_frames: u64,
}

fn default_ion_lambda0() -> Vec<f64> {
    vec![6.0, 7.8, 6.0]
}

fn default_eps() -> f64 {
    0.006
}

fn default_calibration_trials() -> u64 {
    20_000
}

fn default_pgm_frames() -> u64 {
    1
}

impl Default for RegisterSection {
    fn default() -> Self {
        RegisterSection {
            ion_lambda0: default_ion_lambda0(),
            crosstalk_eps: default_eps(),
            calibration_trials: default_calibration_trials(),
            pgm_frames: default_pgm_frames(),
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Failure::invalid(format!("config: {inner}"))
        } else {
            Failure::invalid(format!("config key `{path}`: {inner}"))
        }
    })
}

pub fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::runtime(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

impl RunConfig {
    pub fn species(&self) -> Result<IonSpecies, Failure> {
        if let Some(record) = &self.species_data {
            return Ok(IonSpecies::try_from(record.clone())?);
        }
        Ok(IonSpecies::builtin(
            self.species.as_deref().unwrap_or("cd111"),
        )?)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.unwrap_or(Scheme::P32)
    }

    /// Laser settings; defaults are weak resonant light (s = 0.25) for
    /// 150 us at the collection efficiency in force.
    pub fn detection(&self, eta: f64) -> DetectionConfig {
        let mut c = DetectionConfig::new(
            self.scheme(),
            self.saturation_s.unwrap_or(0.25),
            self.tau_d_us.unwrap_or(150.0) * 1e-6,
            eta,
        );
        c.delta = mhz(self.detuning_mhz.unwrap_or(0.0));
        c.p_pi = self.p_pi.unwrap_or(0.0);
        c.p_minus = self.p_minus.unwrap_or(0.0);
        c
    }

    pub fn ccd(&self) -> CcdParams {
        self.ccd
            .as_ref()
            .map(CcdSection::params)
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = parse(r#"{"eta": 0.01, "ccd": {"gain": 3}}"#).unwrap_err();
        assert!(err.message().contains("ccd"), "{}", err.message());
        assert!(err.message().contains("gain"), "{}", err.message());
        let err = parse(r#"{"etaa": 0.01}"#).unwrap_err();
        assert!(err.message().contains("etaa"), "{}", err.message());
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = parse(r#"{"register": {"crosstalk_eps": "big"}}"#).unwrap_err();
        assert!(
            err.message().contains("register.crosstalk_eps"),
            "{}",
            err.message()
        );
    }

    #[test]
    fn inline_species_uses_published_units() {
        let cfg = parse(
            r#"{"species_data": {"name": "toy", "nuclear_spin": 0.5, "omega_hfs_ghz": 10,
                "gamma_p32_mhz": 20, "omega_hfp32_ghz": 1}}"#,
        )
        .unwrap();
        let s = cfg.species().unwrap();
        assert!((s.gamma_p32.unwrap() - mhz(20.0)).abs() < 1e-6);
    }

    #[test]
    fn ccd_defaults_fill_gaps() {
        let cfg = parse(r#"{"ccd": {"gain_g": 50, "gain_dist": "fixed"}}"#).unwrap();
        let c = cfg.ccd();
        assert_eq!(c.gain_g, 50.0);
        assert_eq!(c.gain_dist, GainDist::Fixed);
        assert_eq!(c.readout_rms_r, CcdParams::default().readout_rms_r);
    }
}
