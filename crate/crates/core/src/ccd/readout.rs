use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig9;
use crate::mcsim::block_rng;

use super::frame::{check_rois, CcdFrame, RegisterSimulator, Roi};

/// Per-ion photometry of one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterReadout {
    /// ROI totals minus the pedestal of every pixel in the ROI.
    pub roi_sums: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub bits: Vec<bool>,
    pub truth: Option<Vec<bool>>,
}

/// Integrates each ROI, subtracts the pedestal and thresholds the result;
/// a sum above its threshold reads as bright.
pub fn read_register(
    frame: &CcdFrame,
    rois: &[Roi],
    thresholds: &[f64],
) -> Result<RegisterReadout> {
    if rois.len() != thresholds.len() {
        return Err(Error::config(format!(
            "{} ROIs but {} thresholds",
            rois.len(),
            thresholds.len()
        )));
    }
    check_rois(rois, frame.width, frame.height)?;
    let offset = frame.meta.ccd.offset;
    let roi_sums: Vec<f64> = rois
        .iter()
        .map(|r| frame.roi_total(r) as f64 - r.area() as f64 * offset)
        .collect();
    let bits = roi_sums
        .iter()
        .zip(thresholds)
        .map(|(s, t)| s > t)
        .collect();
    Ok(RegisterReadout {
        roi_sums,
        thresholds: thresholds.to_vec(),
        bits,
        truth: None,
    })
}

/// Threshold that balances the two misidentification rates as closely as
/// the samples allow, minimizing the larger of them.
pub fn equal_error_threshold(dark: &[f64], bright: &[f64]) -> Result<f64> {
    if dark.is_empty() || bright.is_empty() {
        return Err(Error::domain(
            "threshold calibration needs dark and bright samples",
        ));
    }
    let mut d = dark.to_vec();
    let mut b = bright.to_vec();
    d.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = d.iter().chain(&b).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (nd, nb) = (d.len() as f64, b.len() as f64);
    let mut best = (f64::INFINITY, f64::INFINITY, candidates[0]);
    for &t in &candidates {
        let dark_err = (d.len() - d.partition_point(|&x| x <= t)) as f64 / nd;
        let bright_err = b.partition_point(|&x| x <= t) as f64 / nb;
        let key = (dark_err.max(bright_err), (dark_err - bright_err).abs());
        if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
            best = (key.0, key.1, t);
        }
    }
    Ok(best.2)
}

/// Per-ion thresholds from `trials` all-dark and `trials` all-bright frames.
pub fn calibrate_thresholds(sim: &RegisterSimulator, trials: u64, seed: u64) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::domain(
            "threshold calibration needs at least one trial",
        ));
    }
    let n = sim.n_ions();
    let rois = sim.setup().rois();
    let unthresholded = vec![f64::INFINITY; n];
    let sums = |bright: bool| -> Result<Vec<Vec<f64>>> {
        let states = vec![bright; n];
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = block_rng(seed, 2 * t + bright as u64);
                let frame = sim.render(&states, seed, &mut rng)?;
                Ok(read_register(&frame, &rois, &unthresholded)?.roi_sums)
            })
            .collect()
    };
    let dark = sums(false)?;
    let bright = sums(true)?;
    (0..n)
        .map(|i| {
            let d: Vec<f64> = dark.iter().map(|s| s[i]).collect();
            let b: Vec<f64> = bright.iter().map(|s| s[i]).collect();
            equal_error_threshold(&d, &b)
        })
        .collect()
}

/// Frames with every qubit prepared by an independent fair coin, read out
/// with `thresholds`. Trial `t` uses its own random stream.
pub fn simulate_readouts(
    sim: &RegisterSimulator,
    thresholds: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<RegisterReadout>> {
    let rois = sim.setup().rois();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = block_rng(seed, t);
            let states: Vec<bool> = (0..sim.n_ions()).map(|_| rng.random()).collect();
            let frame = sim.render(&states, seed, &mut rng)?;
            let mut r = read_register(&frame, &rois, thresholds)?;
            r.truth = Some(states);
            Ok(r)
        })
        .collect()
}

pub fn readouts_csv(readouts: &[RegisterReadout]) -> String {
    let mut out = String::from("trial,ion,roi_sum,bit\n");
    for (t, r) in readouts.iter().enumerate() {
        for (i, (s, b)) in r.roi_sums.iter().zip(&r.bits).enumerate() {
            let _ = writeln!(out, "{t},{i},{},{}", sig9(*s), u8::from(*b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEntry {
    /// `|P(bit_i = 1 | bit_j = 1) - P(bit_i = 1)|`.
    pub deviation: f64,
    pub std_error: f64,
}

/// Pairwise conditional-probability deviations; `None` on the diagonal and
/// wherever the conditioning bit was never set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub n_ions: usize,
    pub entries: Vec<Option<CorrelationEntry>>,
    pub trials: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<CorrelationEntry> {
        self.entries[i * self.n_ions + j]
    }

    /// Mean deviation over ordered pairs of neighbors `|i - j| = 1`.
    pub fn adjacent_mean(&self) -> Option<f64> {
        self.mean_where(|i, j| i.abs_diff(j) == 1)
    }

    /// Mean deviation over ordered pairs further apart than neighbors.
    pub fn distant_mean(&self) -> Option<f64> {
        self.mean_where(|i, j| i.abs_diff(j) > 1)
    }

    fn mean_where(&self, keep: impl Fn(usize, usize) -> bool) -> Option<f64> {
        let vals: Vec<f64> = (0..self.n_ions)
            .flat_map(|i| (0..self.n_ions).map(move |j| (i, j)))
            .filter(|&(i, j)| keep(i, j))
            .filter_map(|(i, j)| self.get(i, j).map(|e| e.deviation))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_report(&self) -> String {
        let mut out = format!("# trials={}\ni,j,deviation,std_error\n", self.trials);
        for i in 0..self.n_ions {
            for j in 0..self.n_ions {
                if i == j {
                    continue;
                }
                match self.get(i, j) {
                    Some(e) => {
                        let _ =
                            writeln!(out, "{i},{j},{},{}", sig9(e.deviation), sig9(e.std_error));
                    }
                    None => {
                        let _ = writeln!(out, "{i},{j},undefined,undefined");
                    }
                }
            }
        }
        out
    }
}

/// How far learning that qubit `j` read bright shifts the probability that
/// qubit `i` reads bright. Independent qubits give deviations consistent
/// with zero.
pub fn conditional_correlations(readouts: &[RegisterReadout]) -> Result<CorrelationMatrix> {
    let n_ions = readouts.first().map_or(0, |r| r.bits.len());
    if n_ions < 2 {
        return Err(Error::domain("correlations need at least two ions"));
    }
    if readouts.len() < 100 {
        return Err(Error::domain(format!(
            "correlations need >= 100 readouts, got {}",
            readouts.len()
        )));
    }
    if readouts.iter().any(|r| r.bits.len() != n_ions) {
        return Err(Error::domain("readouts disagree on the number of ions"));
    }
    let total = readouts.len() as f64;
    let ones: Vec<f64> = (0..n_ions)
        .map(|i| readouts.iter().filter(|r| r.bits[i]).count() as f64)
        .collect();
    let mut entries = vec![None; n_ions * n_ions];
    for i in 0..n_ions {
        for j in 0..n_ions {
            if i == j || ones[j] == 0.0 {
                continue;
            }
            let both = readouts.iter().filter(|r| r.bits[i] && r.bits[j]).count() as f64;
            let p = ones[i] / total;
            let conditional = both / ones[j];
            let variance = p * (1.0 - p) * (1.0 / ones[j] - 1.0 / total);
            entries[i * n_ions + j] = Some(CorrelationEntry {
                deviation: (conditional - p).abs(),
                std_error: variance.max(0.0).sqrt(),
            });
        }
    }
    Ok(CorrelationMatrix {
        n_ions,
        entries,
        trials: readouts.len(),
    })
}
