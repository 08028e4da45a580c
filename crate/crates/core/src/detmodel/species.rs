use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angular::{HalfInt, Scheme};
use crate::error::{Error, Result};

/// Converts an ordinary frequency in MHz to angular frequency in rad/s.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Converts an ordinary frequency in GHz to angular frequency in rad/s.
pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f * 1e9
}

fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

/// Atomic data for one ion isotope. All frequencies are angular (rad/s);
/// wavelengths are in nm.
///
/// The P3/2 and P1/2 blocks are optional because published data is not
/// always available for both manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub name: String,
    pub nuclear_spin: HalfInt,
    /// S1/2 ground-state hyperfine splitting.
    pub omega_hfs: f64,
    pub gamma_p32: Option<f64>,
    /// P3/2 splitting between F' = I+3/2 and F' = I+1/2.
    pub omega_hfp32: Option<f64>,
    pub wavelength_p32: Option<f64>,
    pub gamma_p12: Option<f64>,
    pub omega_hfp12: Option<f64>,
    pub wavelength_p12: Option<f64>,
}

/// `(linewidth, excited hyperfine splitting, wavelength_nm)` for one manifold.
#[derive(Debug, Clone, Copy)]
pub struct ManifoldData {
    pub gamma: f64,
    pub omega_hfp: f64,
    pub wavelength_nm: Option<f64>,
}

impl IonSpecies {
    /// 111Cd+: gamma/2pi = 60 MHz, Delta1/2pi = 13.7 GHz, Delta2/2pi = 800 MHz
    /// on P3/2; gamma'/2pi = 50 MHz, 2 GHz on P1/2.
    pub fn cd111() -> Self {
        IonSpecies {
            name: "111Cd+".into(),
            nuclear_spin: HalfInt::HALF,
            omega_hfs: ghz(14.5),
            gamma_p32: Some(mhz(60.0)),
            omega_hfp32: Some(ghz(0.8)),
            wavelength_p32: Some(214.5),
            gamma_p12: Some(mhz(50.0)),
            omega_hfp12: Some(ghz(2.0)),
            wavelength_p12: Some(226.5),
        }
    }

    pub fn yb171() -> Self {
        IonSpecies {
            name: "171Yb+".into(),
            nuclear_spin: HalfInt::HALF,
            omega_hfs: ghz(12.6),
            gamma_p32: None,
            omega_hfp32: None,
            wavelength_p32: None,
            gamma_p12: Some(mhz(23.0)),
            omega_hfp12: Some(ghz(2.1)),
            wavelength_p12: Some(369.5),
        }
    }

    pub fn hg199() -> Self {
        IonSpecies {
            name: "199Hg+".into(),
            nuclear_spin: HalfInt::HALF,
            omega_hfs: ghz(40.5),
            gamma_p32: None,
            omega_hfp32: None,
            wavelength_p32: None,
            gamma_p12: Some(mhz(70.0)),
            omega_hfp12: Some(ghz(6.9)),
            wavelength_p12: Some(194.0),
        }
    }

    pub fn builtins() -> Vec<IonSpecies> {
        vec![Self::cd111(), Self::yb171(), Self::hg199()]
    }

    /// Looks up a built-in species. Accepts forms like `cd`, `cd111`,
    /// `111Cd+`.
    pub fn builtin(name: &str) -> Result<Self> {
        let key = normalize_name(name);
        Self::builtins()
            .into_iter()
            .find(|s| name_matches(s, &key))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown species `{name}` (built-ins: cd111, yb171, hg199)"
                ))
            })
    }

    /// Linewidth and excited-state splitting for the requested scheme.
    pub fn manifold(&self, scheme: Scheme) -> Result<ManifoldData> {
        let (gamma, hfp, wl) = match scheme {
            Scheme::P32 => (self.gamma_p32, self.omega_hfp32, self.wavelength_p32),
            Scheme::P12 => (self.gamma_p12, self.omega_hfp12, self.wavelength_p12),
        };
        match (gamma, hfp) {
            (Some(gamma), Some(omega_hfp)) => Ok(ManifoldData {
                gamma,
                omega_hfp,
                wavelength_nm: wl,
            }),
            _ => Err(Error::domain(format!(
                "species {} has no {} data (linewidth and hyperfine splitting required)",
                self.name, scheme
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nuclear_spin.twice() <= 0 {
            return Err(Error::domain(format!(
                "{}: nuclear spin must be positive",
                self.name
            )));
        }
        let positive = |label: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x.is_finite() && x > 0.0) => Err(Error::domain(format!(
                    "{}: {label} must be positive, got {x}",
                    self.name
                ))),
                _ => Ok(()),
            }
        };
        positive("omega_hfs", Some(self.omega_hfs))?;
        positive("gamma_p32", self.gamma_p32)?;
        positive("omega_hfp32", self.omega_hfp32)?;
        positive("wavelength_p32", self.wavelength_p32)?;
        positive("gamma_p12", self.gamma_p12)?;
        positive("omega_hfp12", self.omega_hfp12)?;
        positive("wavelength_p12", self.wavelength_p12)?;
        Ok(())
    }
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase()
}

fn name_matches(species: &IonSpecies, key: &str) -> bool {
    !key.is_empty() && normalize_name(&species.name) == key
}

/// On-disk form of a species, with frequencies as published (MHz/GHz) and
/// wavelengths in nm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesRecord {
    pub name: String,
    pub nuclear_spin: HalfInt,
    pub omega_hfs_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p32_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hfp32_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_p32_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p12_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hfp12_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_p12_nm: Option<f64>,
}

impl TryFrom<SpeciesRecord> for IonSpecies {
    type Error = Error;

    fn try_from(r: SpeciesRecord) -> Result<Self> {
        let species = IonSpecies {
            name: r.name,
            nuclear_spin: r.nuclear_spin,
            omega_hfs: ghz(r.omega_hfs_ghz),
            gamma_p32: r.gamma_p32_mhz.map(mhz),
            omega_hfp32: r.omega_hfp32_ghz.map(ghz),
            wavelength_p32: r.wavelength_p32_nm,
            gamma_p12: r.gamma_p12_mhz.map(mhz),
            omega_hfp12: r.omega_hfp12_ghz.map(ghz),
            wavelength_p12: r.wavelength_p12_nm,
        };
        species.validate()?;
        Ok(species)
    }
}

impl From<&IonSpecies> for SpeciesRecord {
    fn from(s: &IonSpecies) -> Self {
        SpeciesRecord {
            name: s.name.clone(),
            nuclear_spin: s.nuclear_spin,
            omega_hfs_ghz: to_ghz(s.omega_hfs),
            gamma_p32_mhz: s.gamma_p32.map(to_mhz),
            omega_hfp32_ghz: s.omega_hfp32.map(to_ghz),
            wavelength_p32_nm: s.wavelength_p32,
            gamma_p12_mhz: s.gamma_p12.map(to_mhz),
            omega_hfp12_ghz: s.omega_hfp12.map(to_ghz),
            wavelength_p12_nm: s.wavelength_p12,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDocument {
    species: Vec<SpeciesRecord>,
}

/// A named collection of species, stored as a JSON document.
#[derive(Debug, Clone, Default)]
pub struct SpeciesRegistry {
    species: Vec<IonSpecies>,
}

impl SpeciesRegistry {
    pub fn builtin() -> Self {
        SpeciesRegistry {
            species: IonSpecies::builtins(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: RegistryDocument = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("species registry: {e}")))?;
        let species = doc
            .species
            .into_iter()
            .map(IonSpecies::try_from)
            .collect::<Result<Vec<_>>>()?;
        Ok(SpeciesRegistry { species })
    }

    pub fn to_json_string(&self) -> String {
        let doc = RegistryDocument {
            species: self.species.iter().map(SpeciesRecord::from).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }

    pub fn insert(&mut self, species: IonSpecies) {
        let key = normalize_name(&species.name);
        self.species.retain(|s| normalize_name(&s.name) != key);
        self.species.push(species);
    }

    pub fn get(&self, name: &str) -> Option<&IonSpecies> {
        let key = normalize_name(name);
        self.species.iter().find(|s| name_matches(s, &key))
    }

    pub fn iter(&self) -> impl Iterator<Item = &IonSpecies> {
        self.species.iter()
    }
}
