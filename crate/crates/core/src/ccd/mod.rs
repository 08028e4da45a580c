//! Intensified-CCD imaging of an ion register: gain chain, readout noise,
//! region-of-interest photometry and neighbor crosstalk.

mod frame;
mod pgm;
mod readout;

pub use frame::{
    synthesize_frame, CcdFrame, FrameMeta, IonSite, RegisterSetup, RegisterSimulator, Roi,
};
pub use pgm::{read_pgm, write_pgm};
pub use readout::{
    calibrate_thresholds, conditional_correlations, equal_error_threshold, read_register,
    readouts_csv, simulate_readouts, CorrelationEntry, CorrelationMatrix, RegisterReadout,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statistics of the counts produced by one detected photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainDist {
    /// Single-stage avalanche: exponentially distributed amplitude.
    Exponential,
    /// Every photon deposits exactly the mean amplitude.
    Fixed,
}

impl FromStr for GainDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" => Ok(GainDist::Exponential),
            "fixed" => Ok(GainDist::Fixed),
            _ => Err(Error::config(format!(
                "unknown gain distribution `{s}` (exponential | fixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdParams {
    /// Mean counts per photoelectron.
    pub gain_g: f64,
    /// Readout noise per super-pixel, counts rms.
    pub readout_rms_r: f64,
    /// On-chip binning factor per axis.
    pub bin_factor: u32,
    /// Super-pixels integrated per ion.
    pub roi_super_pixels: u32,
    /// Constant pedestal per super-pixel, counts.
    pub offset: f64,
    /// Mean integrated counts per detected photon.
    pub counts_per_photon: f64,
    /// Gaussian point-spread width, super-pixels.
    pub psf_sigma: f64,
    pub gain_dist: GainDist,
}

impl Default for CcdParams {
    fn default() -> Self {
        let r = 2.0;
        CcdParams {
            gain_g: 100.0,
            readout_rms_r: r,
            bin_factor: 4,
            roi_super_pixels: 49,
            offset: 10.0 * r,
            counts_per_photon: 100.0,
            psf_sigma: 0.8,
            gain_dist: GainDist::Exponential,
        }
    }
}

impl CcdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_g.is_finite() && self.gain_g > 0.0) {
            return Err(Error::domain(format!(
                "gain g must be > 0, got {}",
                self.gain_g
            )));
        }
        if !(self.readout_rms_r.is_finite() && self.readout_rms_r >= 0.0) {
            return Err(Error::domain(format!(
                "readout noise r must be >= 0, got {}",
                self.readout_rms_r
            )));
        }
        if self.bin_factor == 0 {
            return Err(Error::domain("bin factor must be >= 1"));
        }
        if self.roi_super_pixels == 0 {
            return Err(Error::domain("ROI must contain at least one super-pixel"));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::domain(format!(
                "offset must be >= 0, got {}",
                self.offset
            )));
        }
        if !(self.counts_per_photon.is_finite() && self.counts_per_photon >= 0.0) {
            return Err(Error::domain(format!(
                "counts per photon must be >= 0, got {}",
                self.counts_per_photon
            )));
        }
        if !(self.psf_sigma.is_finite() && self.psf_sigma >= 0.0) {
            return Err(Error::domain(format!(
                "PSF width must be >= 0, got {}",
                self.psf_sigma
            )));
        }
        Ok(())
    }
}

/// Signal-to-noise ratio `lambda0 / sqrt(lambda0 + (k r / g)^2)` of an ROI sum.
pub fn snr(lambda0: f64, params: &CcdParams) -> Result<f64> {
    if !(lambda0.is_finite() && lambda0 >= 0.0) {
        return Err(Error::domain(format!(
            "lambda0 must be >= 0, got {lambda0}"
        )));
    }
    params.validate()?;
    let read = params.roi_super_pixels as f64 * params.readout_rms_r / params.gain_g;
    let noise = (lambda0 + read * read).sqrt();
    Ok(if noise == 0.0 { 0.0 } else { lambda0 / noise })
}

/// Fraction of a neighbor's scattered intensity reaching an ion at distance
/// `spacing`, `3 lambda^2 / (4 pi x^2)`. Both lengths in the same unit.
pub fn crosstalk_ratio(wavelength: f64, spacing: f64) -> Result<f64> {
    if !(wavelength.is_finite() && wavelength > 0.0 && spacing.is_finite() && spacing > 0.0) {
        return Err(Error::domain(format!(
            "wavelength and spacing must be positive, got {wavelength} and {spacing}"
        )));
    }
    Ok(3.0 * wavelength * wavelength / (4.0 * std::f64::consts::PI * spacing * spacing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_direct_evaluation() {
        let p = CcdParams {
            readout_rms_r: 2.0,
            gain_g: 100.0,
            roi_super_pixels: 49,
            ..Default::default()
        };
        let v = snr(12.0, &p).unwrap();
        assert!((v - 12.0 / (12.0f64 + 0.9604).sqrt()).abs() < 1e-12);
        assert!((v - 3.333).abs() < 1e-3);
        assert!(snr(-1.0, &p).is_err());
        assert_eq!(
            snr(
                0.0,
                &CcdParams {
                    readout_rms_r: 0.0,
                    ..p
                }
            )
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn crosstalk_geometry() {
        let r = crosstalk_ratio(214.5e-9, 4e-6).unwrap();
        assert!((r / 6.9e-4 - 1.0).abs() < 0.01, "{r}");
        assert!(
            (crosstalk_ratio(1.0, 1.0).unwrap() - 3.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15
        );
        assert!(crosstalk_ratio(0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CcdParams {
            gain_g: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(CcdParams {
            bin_factor: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!("lorentzian".parse::<GainDist>().is_err());
    }
}
