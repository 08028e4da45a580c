//! From atomic structure and laser settings to photon-count distributions.

mod dist;
mod histogram;
mod params;
mod species;

pub use dist::{
    bright_distribution, dark_distribution, dark_leak_density, dark_point_mass, n_max, p_bright,
    p_dark,
};
pub use histogram::{HistogramKind, PhotonHistogram};
pub(crate) use params::check_eta;
pub use params::{detection_params, leak_floor, DetectionConfig, LeakParams};
pub use species::{ghz, mhz, IonSpecies, ManifoldData, SpeciesRecord, SpeciesRegistry};

use crate::error::Result;

/// Analytic dark and bright histograms truncated at [`n_max`].
pub fn analytic_histograms(
    params: &LeakParams,
    eta: f64,
) -> Result<(PhotonHistogram, PhotonHistogram)> {
    let nm = n_max(params.lambda0);
    let dark = PhotonHistogram::analytic(dark_distribution(params, eta, nm)?)?;
    let bright = PhotonHistogram::analytic(bright_distribution(params, eta, nm)?)?;
    Ok((dark, bright))
}
