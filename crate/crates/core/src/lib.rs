//! Photon-count statistics and readout-fidelity models for state detection
//! of hyperfine trapped-ion qubits.
//!
//! [`detmodel`] turns atomic data and laser settings into the mean detected
//! photon number and the two leak probabilities, and evaluates the exact
//! dark and bright count distributions. [`fidelity`] optimizes threshold
//! discrimination on top of them, [`mcsim`] samples the same process
//! trajectory by trajectory, [`ccd`] models camera readout of an ion
//! register, and [`fitkit`] inverts measured histograms.

pub mod angular;
pub mod ccd;
pub mod detmodel;
pub mod error;
pub mod fidelity;
pub mod fitkit;
pub mod format;
pub mod mcsim;
pub mod specfun;

pub use angular::{BranchingRatios, HalfInt, Scheme};
pub use ccd::{CcdFrame, CcdParams, RegisterReadout};
pub use detmodel::{DetectionConfig, HistogramKind, IonSpecies, LeakParams, PhotonHistogram};
pub use error::{Error, Result};
pub use fidelity::DiscriminationResult;
pub use fitkit::FitResult;
pub use mcsim::{InitialState, McConfig, McMode};
pub use specfun::Probability;
