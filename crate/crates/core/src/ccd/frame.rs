use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::detmodel::{bright_distribution, check_eta, dark_distribution, n_max, LeakParams};
use crate::error::{Error, Result};

use super::{CcdParams, GainDist};

/// Axis-aligned box of super-pixels, `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn overlaps(&self, other: &Roi) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 + self.width <= width && self.y0 + self.height <= height
    }
}

pub(crate) fn check_rois(rois: &[Roi], width: usize, height: usize) -> Result<()> {
    for (i, r) in rois.iter().enumerate() {
        if r.area() == 0 {
            return Err(Error::config(format!("ROI {i} is empty")));
        }
        if !r.fits(width, height) {
            return Err(Error::config(format!(
                "ROI {i} {r:?} lies outside the {width}x{height} frame"
            )));
        }
        for (j, s) in rois.iter().enumerate().skip(i + 1) {
            if r.overlaps(s) {
                return Err(Error::config(format!("ROIs {i} and {j} overlap")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IonSite {
    /// Image position in super-pixel coordinates; pixel `(x, y)` spans
    /// `[x, x+1) x [y, y+1)`.
    pub center: (f64, f64),
    pub roi: Roi,
    pub leak: LeakParams,
}

/// Geometry, optics and camera settings of a register image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterSetup {
    pub width: usize,
    pub height: usize,
    pub ions: Vec<IonSite>,
    pub eta: f64,
    pub ccd: CcdParams,
    /// Probability that a detected photon lands on each adjacent ion's image.
    pub crosstalk_eps: f64,
}

impl RegisterSetup {
    /// A row of ions, one square ROI each, side `sqrt(roi_super_pixels)`,
    /// placed edge to edge with the ion imaged at the ROI center.
    pub fn linear_chain(
        leaks: &[LeakParams],
        eta: f64,
        ccd: CcdParams,
        crosstalk_eps: f64,
    ) -> Result<Self> {
        let side = (ccd.roi_super_pixels as f64).sqrt().round() as usize;
        if side * side != ccd.roi_super_pixels as usize {
            return Err(Error::config(format!(
                "a linear chain needs a square ROI, {} super-pixels is not a square",
                ccd.roi_super_pixels
            )));
        }
        let ions = leaks
            .iter()
            .enumerate()
            .map(|(i, &leak)| IonSite {
                center: ((i * side) as f64 + side as f64 / 2.0, side as f64 / 2.0),
                roi: Roi {
                    x0: i * side,
                    y0: 0,
                    width: side,
                    height: side,
                },
                leak,
            })
            .collect();
        let setup = RegisterSetup {
            width: side * leaks.len(),
            height: side,
            ions,
            eta,
            ccd,
            crosstalk_eps,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        self.ccd.validate()?;
        check_eta(self.eta)?;
        if self.ions.is_empty() {
            return Err(Error::config("register has no ions"));
        }
        if !(0.0..=0.5).contains(&self.crosstalk_eps) {
            return Err(Error::domain(format!(
                "crosstalk_eps must lie in [0, 0.5], got {}",
                self.crosstalk_eps
            )));
        }
        let rois: Vec<Roi> = self.rois();
        check_rois(&rois, self.width, self.height)?;
        for (i, ion) in self.ions.iter().enumerate() {
            let (x, y) = ion.center;
            if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
                return Err(Error::config(format!(
                    "ion {i} at ({x}, {y}) is outside the frame"
                )));
            }
            ion.leak.validate()?;
        }
        Ok(())
    }

    pub fn rois(&self) -> Vec<Roi> {
        self.ions.iter().map(|ion| ion.roi).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameMeta {
    pub ccd: CcdParams,
    pub seed: u64,
}

/// One camera exposure in super-pixels, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
    pub meta: FrameMeta,
}

impl CcdFrame {
    pub fn pixel(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn roi_total(&self, roi: &Roi) -> u64 {
        (roi.y0..roi.y0 + roi.height)
            .flat_map(|y| (roi.x0..roi.x0 + roi.width).map(move |x| (x, y)))
            .map(|(x, y)| self.pixel(x, y) as u64)
            .sum()
    }
}

/// Inverse-CDF sampler over a truncated count distribution.
#[derive(Debug, Clone)]
struct CountSampler {
    cdf: Vec<f64>,
}

impl CountSampler {
    fn new(probabilities: Vec<f64>) -> Self {
        let cdf = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        CountSampler { cdf }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let n = self.cdf.partition_point(|&c| c <= u);
        n.min(self.cdf.len() - 1) as u64
    }
}

/// A register setup with its count distributions tabulated once, ready to
/// render many frames.
#[derive(Debug, Clone)]
pub struct RegisterSimulator {
    setup: RegisterSetup,
    dark: Vec<CountSampler>,
    bright: Vec<CountSampler>,
}

impl RegisterSimulator {
    pub fn new(setup: RegisterSetup) -> Result<Self> {
        setup.validate()?;
        let mut dark = Vec::with_capacity(setup.ions.len());
        let mut bright = Vec::with_capacity(setup.ions.len());
        for ion in &setup.ions {
            let nm = n_max(ion.leak.lambda0);
            dark.push(CountSampler::new(dark_distribution(
                &ion.leak, setup.eta, nm,
            )?));
            bright.push(CountSampler::new(bright_distribution(
                &ion.leak, setup.eta, nm,
            )?));
        }
        Ok(RegisterSimulator {
            setup,
            dark,
            bright,
        })
    }

    pub fn setup(&self) -> &RegisterSetup {
        &self.setup
    }

    pub fn n_ions(&self) -> usize {
        self.setup.ions.len()
    }

    /// Renders one frame for the prepared `states` (true = bright).
    pub fn render<R: Rng>(&self, states: &[bool], seed: u64, rng: &mut R) -> Result<CcdFrame> {
        let setup = &self.setup;
        if states.len() != setup.ions.len() {
            return Err(Error::config(format!(
                "{} qubit states given for {} ions",
                states.len(),
                setup.ions.len()
            )));
        }
        let ccd = &setup.ccd;
        let (w, h) = (setup.width, setup.height);
        let mut signal = vec![0.0f64; w * h];
        let last = setup.ions.len() - 1;
        let eps = setup.crosstalk_eps;
        for (i, &bright) in states.iter().enumerate() {
            let sampler = if bright {
                &self.bright[i]
            } else {
                &self.dark[i]
            };
            let photons = sampler.sample(rng);
            for _ in 0..photons {
                let u: f64 = rng.random();
                let target = if u < eps && i > 0 {
                    i - 1
                } else if (eps..2.0 * eps).contains(&u) && i < last {
                    i + 1
                } else {
                    i
                };
                let (cx, cy) = setup.ions[target].center;
                let dx: f64 = StandardNormal.sample(rng);
                let dy: f64 = StandardNormal.sample(rng);
                let amplitude = match ccd.gain_dist {
                    GainDist::Exponential => {
                        let g: f64 = Exp1.sample(rng);
                        ccd.counts_per_photon * g
                    }
                    GainDist::Fixed => ccd.counts_per_photon,
                };
                let x = cx + ccd.psf_sigma * dx;
                let y = cy + ccd.psf_sigma * dy;
                if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
                    signal[y as usize * w + x as usize] += amplitude;
                }
            }
        }
        let pixels = signal
            .into_iter()
            .map(|s| {
                let noise: f64 = if ccd.readout_rms_r > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    ccd.readout_rms_r * z
                } else {
                    0.0
                };
                (s + ccd.offset + noise).round().clamp(0.0, u16::MAX as f64) as u16
            })
            .collect();
        Ok(CcdFrame {
            width: w,
            height: h,
            pixels,
            meta: FrameMeta { ccd: *ccd, seed },
        })
    }
}

/// Renders a single frame of the register prepared in `states`.
pub fn synthesize_frame(setup: &RegisterSetup, states: &[bool], seed: u64) -> Result<CcdFrame> {
    let sim = RegisterSimulator::new(setup.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sim.render(states, seed, &mut rng)
}
