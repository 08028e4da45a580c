//! Maximum-likelihood recovery of collection efficiency, saturation and
//! polarization impurity from dark- and bright-prepared count histograms.
//!
//! The model is the P3/2 scheme at zero detuning with all impure
//! polarization lumped into the pi component. Parameters are searched in
//! log space with a box-constrained simplex from a fixed grid of starts.

mod simplex;

pub use simplex::{minimize, SimplexOptions, SimplexOutcome};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::Scheme;
use crate::detmodel::{
    bright_distribution, dark_distribution, detection_params, DetectionConfig, HistogramKind,
    IonSpecies, LeakParams, PhotonHistogram,
};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::specfun::poisson_pmf;

const LN_BOUNDS: [(f64, f64); 4] = [
    // eta
    (-16.1, 0.0),
    // s
    (-13.8, 6.9),
    // p_impure
    (-18.4, -0.7),
    // lambda_bg
    (-13.8, 3.9),
];
const BOUND_EPS: f64 = 1e-6;
const START_S: [f64; 3] = [0.05, 0.3, 2.0];
const START_P: [f64; 3] = [1e-4, 1e-3, 1e-2];
const START_ETA_FACTOR: [f64; 3] = [0.5, 1.0, 2.0];
const START_BG: f64 = 0.1;

/// Physical parameters of the count model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub eta: f64,
    pub s: f64,
    pub p_impure: f64,
    pub lambda_bg: f64,
}

impl ModelParams {
    pub fn leak_params(&self, species: &IonSpecies, tau_d: f64) -> Result<LeakParams> {
        let mut config = DetectionConfig::new(Scheme::P32, self.s, tau_d, self.eta);
        config.p_pi = self.p_impure;
        detection_params(species, &config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub eta: f64,
    pub s: f64,
    pub p_impure: f64,
    pub lambda_bg: f64,
    pub neg_log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            eta: self.eta,
            s: self.s,
            p_impure: self.p_impure,
            lambda_bg: self.lambda_bg,
        }
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "eta: {}\ns: {}\np_impure: {}\nlambda_bg: {}\nneg_log_likelihood: {}\nconverged: {}\niterations: {}\n",
            sig9(self.eta),
            sig9(self.s),
            sig9(self.p_impure),
            sig9(self.lambda_bg),
            sig9(self.neg_log_likelihood),
            self.converged,
            self.iterations
        )
    }
}

/// Dark and bright model distributions over `0..len`, with the background
/// count convolved in.
pub fn model_distributions(
    params: &ModelParams,
    species: &IonSpecies,
    tau_d: f64,
    len: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let leak = params.leak_params(species, tau_d)?;
    let top = len.saturating_sub(1);
    let dark = dark_distribution(&leak, params.eta, top)?;
    let bright = bright_distribution(&leak, params.eta, top)?;
    if params.lambda_bg <= 0.0 {
        return Ok((dark, bright));
    }
    let bg: Vec<f64> = (0..len as u64)
        .map(|k| poisson_pmf(k, params.lambda_bg).map(|p| p.value()))
        .collect::<Result<_>>()?;
    let convolve = |p: &[f64]| -> Vec<f64> {
        (0..len)
            .map(|n| (0..=n).map(|k| p[k] * bg[n - k]).sum())
            .collect()
    };
    Ok((convolve(&dark), convolve(&bright)))
}

fn checked_counts(hist: &PhotonHistogram, label: &str) -> Result<Vec<f64>> {
    let total = hist.total();
    if total <= 0.0 {
        return Err(Error::domain(format!("{label} histogram is empty")));
    }
    if hist.kind != HistogramKind::Analytic && total < 100.0 {
        return Err(Error::domain(format!(
            "{label} histogram has {total} counts, at least 100 are needed"
        )));
    }
    Ok(hist.values.clone())
}

/// `-sum_n c_n ln p_n` over both histograms.
pub fn neg_log_likelihood(
    dark: &PhotonHistogram,
    bright: &PhotonHistogram,
    species: &IonSpecies,
    tau_d: f64,
    params: &ModelParams,
) -> Result<f64> {
    let len = dark.values.len().max(bright.values.len());
    let (pd, pb) = model_distributions(params, species, tau_d, len)?;
    Ok(nll_part(&dark.values, &pd) + nll_part(&bright.values, &pb))
}

fn nll_part(counts: &[f64], p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(p)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, p)| -c * p.max(f64::MIN_POSITIVE).ln())
        .sum()
}

/// Kullback-Leibler deviance of counts from a model, `sum c ln(c / (T p))`.
fn deviance(counts: &[f64], total: f64, p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(p)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, p)| c * (c / (total * p.max(f64::MIN_POSITIVE))).ln())
        .sum()
}

struct Problem<'a> {
    dark: Option<Vec<f64>>,
    bright: Option<Vec<f64>>,
    species: &'a IonSpecies,
    tau_d: f64,
    fit_background: bool,
    len: usize,
    grand_total: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        if self.fit_background {
            4
        } else {
            3
        }
    }

    fn params(&self, x: &[f64]) -> ModelParams {
        ModelParams {
            eta: x[0].exp(),
            s: x[1].exp(),
            p_impure: x[2].exp(),
            lambda_bg: if self.fit_background { x[3].exp() } else { 0.0 },
        }
    }

    /// Deviance per recorded trial; `+inf` where the model is undefined.
    fn objective(&self, x: &[f64]) -> f64 {
        let Ok((pd, pb)) = model_distributions(&self.params(x), self.species, self.tau_d, self.len)
        else {
            return f64::INFINITY;
        };
        let mut total = 0.0;
        for (counts, p) in [(&self.dark, &pd), (&self.bright, &pb)] {
            if let Some(c) = counts {
                total += deviance(c, c.iter().sum(), p);
            }
        }
        total / self.grand_total
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        LN_BOUNDS[..self.dim()].iter().copied().unzip()
    }

    fn starts(&self, light: f64) -> Vec<Vec<f64>> {
        let gamma = self.species.gamma_p32.unwrap_or(0.0);
        let mut out = Vec::new();
        for &s in &START_S {
            let eta0 = light * (1.0 + s) / (self.tau_d * s * gamma / 2.0);
            for &p in &START_P {
                for &k in &START_ETA_FACTOR {
                    let mut x = vec![(eta0 * k).min(1.0).ln(), s.ln(), p.ln()];
                    if self.fit_background {
                        x.push(START_BG.ln());
                    }
                    out.push(x);
                }
            }
        }
        out
    }

    fn on_bound(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.bounds();
        x.iter()
            .zip(lo.iter().zip(&hi))
            .any(|(v, (l, h))| v - l < BOUND_EPS || h - v < BOUND_EPS)
    }

    /// Finite-difference Hessian in log coordinates is positive definite.
    fn well_determined(&self, x: &[f64]) -> bool {
        let n = x.len();
        let h = 1e-2;
        let f = |dx: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(i, d) in dx {
                y[i] += d;
            }
            self.objective(&y)
        };
        let f0 = f(&[]);
        let hess: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            (f(&[(i, h)]) - 2.0 * f0 + f(&[(i, -h)])) / (h * h)
                        } else {
                            (f(&[(i, h), (j, h)]) - f(&[(i, h), (j, -h)]) - f(&[(i, -h), (j, h)])
                                + f(&[(i, -h), (j, -h)]))
                                / (4.0 * h * h)
                        }
                    })
                    .collect()
            })
            .collect();
        positive_definite(hess)
    }
}

fn positive_definite(mut a: Vec<Vec<f64>>) -> bool {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if !(scale.is_finite() && scale > 0.0) {
        return false;
    }
    for k in 0..n {
        let pivot = a[k][k] - (0..k).map(|m| a[k][m] * a[k][m]).sum::<f64>();
        if pivot.is_nan() || pivot <= 1e-10 * scale {
            return false;
        }
        let root = pivot.sqrt();
        a[k][k] = root;
        for i in k + 1..n {
            a[i][k] = (a[i][k] - (0..k).map(|m| a[i][m] * a[k][m]).sum::<f64>()) / root;
        }
    }
    true
}

fn run(problem: &Problem, light: f64) -> Result<(Vec<f64>, f64, usize, bool)> {
    let (lo, hi) = problem.bounds();
    let opts = SimplexOptions::default();
    let outcomes: Vec<SimplexOutcome> = problem
        .starts(light)
        .par_iter()
        .map(|x0| minimize(|x| problem.objective(x), x0, &lo, &hi, &opts))
        .collect();
    // Lowest objective wins; the stable scan keeps the earliest start on ties.
    let best = outcomes
        .iter()
        .enumerate()
        .fold(None::<(usize, &SimplexOutcome)>, |acc, (i, o)| match acc {
            Some((_, b)) if b.f <= o.f => acc,
            _ => Some((i, o)),
        })
        .map(|(_, o)| o.clone())
        .ok_or_else(|| Error::NoConvergence("no fit starts".into()))?;
    if !best.f.is_finite() {
        return Err(Error::NoConvergence(
            "the model is undefined at every start point".into(),
        ));
    }
    let polish = minimize(|x| problem.objective(x), &best.x, &lo, &hi, &opts);
    let (x, f) = if polish.f <= best.f {
        (polish.x, polish.f)
    } else {
        (best.x, best.f)
    };
    let converged = polish.converged && !problem.on_bound(&x) && problem.well_determined(&x);
    Ok((x, f, best.iterations + polish.iterations, converged))
}

fn light_level(bright: &[f64]) -> Result<f64> {
    let total: f64 = bright.iter().sum();
    let mean = bright
        .iter()
        .enumerate()
        .map(|(n, c)| n as f64 * c)
        .sum::<f64>()
        / total;
    if mean <= 0.0 {
        return Err(Error::domain(
            "bright histogram has no counts above zero, so the light level is not identifiable",
        ));
    }
    Ok(mean)
}

/// Joint fit of dark- and bright-prepared histograms recorded with
/// detection time `tau_d` (seconds).
pub fn fit_histograms(
    dark: &PhotonHistogram,
    bright: &PhotonHistogram,
    species: &IonSpecies,
    tau_d: f64,
    fit_background: bool,
) -> Result<FitResult> {
    let d = checked_counts(dark, "dark")?;
    let b = checked_counts(bright, "bright")?;
    species.manifold(Scheme::P32)?;
    if !(tau_d.is_finite() && tau_d > 0.0) {
        return Err(Error::domain(format!(
            "detection time must be > 0, got {tau_d}"
        )));
    }
    let light = light_level(&b)?;
    let problem = Problem {
        len: d.len().max(b.len()),
        grand_total: d.iter().sum::<f64>() + b.iter().sum::<f64>(),
        dark: Some(d),
        bright: Some(b),
        species,
        tau_d,
        fit_background,
    };
    let (x, _, iterations, converged) = run(&problem, light)?;
    let params = problem.params(&x);
    Ok(FitResult {
        eta: params.eta,
        s: params.s,
        p_impure: params.p_impure,
        lambda_bg: params.lambda_bg,
        neg_log_likelihood: neg_log_likelihood(dark, bright, species, tau_d, &params)?,
        converged,
        iterations,
    })
}

/// Fit to a dark-prepared histogram alone. The impurity only shapes the
/// bright distribution, so this is never well determined and reports
/// `converged = false`; it exists to make that degeneracy visible.
pub fn fit_dark_only(
    dark: &PhotonHistogram,
    species: &IonSpecies,
    tau_d: f64,
    light: f64,
) -> Result<FitResult> {
    let d = checked_counts(dark, "dark")?;
    species.manifold(Scheme::P32)?;
    let problem = Problem {
        len: d.len(),
        grand_total: d.iter().sum(),
        dark: Some(d),
        bright: None,
        species,
        tau_d,
        fit_background: false,
    };
    let (x, f, iterations, converged) = run(&problem, light)?;
    let params = problem.params(&x);
    Ok(FitResult {
        eta: params.eta,
        s: params.s,
        p_impure: params.p_impure,
        lambda_bg: 0.0,
        neg_log_likelihood: f * problem.grand_total,
        converged,
        iterations,
    })
}

/// Observed and expected counts side by side,
/// `n,dark_data,dark_model,bright_data,bright_model`.
pub fn model_vs_data_csv(
    dark: &PhotonHistogram,
    bright: &PhotonHistogram,
    species: &IonSpecies,
    tau_d: f64,
    params: &ModelParams,
) -> Result<String> {
    let len = dark.values.len().max(bright.values.len());
    let (pd, pb) = model_distributions(params, species, tau_d, len)?;
    let (td, tb) = (dark.total(), bright.total());
    let mut out = String::from("n,dark_data,dark_model,bright_data,bright_model\n");
    for n in 0..len {
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            sig9(dark.get(n)),
            sig9(td * pd[n]),
            sig9(bright.get(n)),
            sig9(tb * pb[n])
        );
    }
    Ok(out)
}
