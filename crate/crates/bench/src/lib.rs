//! Fixtures shared by the benchmarks.

use fluordet::ccd::RegisterSetup;
use fluordet::detmodel::leak_floor;
use fluordet::{CcdParams, IonSpecies, LeakParams, Scheme};

pub const ETA: f64 = 1e-3;

/// Cadmium leak floors at the light level that optimizes detection near
/// one part per thousand collection.
pub fn cadmium_leaks(lambda0: f64) -> LeakParams {
    let (a1, a2) = leak_floor(&IonSpecies::cd111(), Scheme::P32).expect("built-in species");
    LeakParams::new(lambda0, a1, a2).expect("valid leak parameters")
}

/// Three ions imaged on the default camera with a small crosstalk.
pub fn three_ion_register() -> RegisterSetup {
    let leaks: Vec<LeakParams> = [6.0, 7.8, 6.0].map(cadmium_leaks).to_vec();
    RegisterSetup::linear_chain(&leaks, ETA, CcdParams::default(), 0.006).expect("valid register")
}
