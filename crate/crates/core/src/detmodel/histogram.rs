use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramKind {
    Analytic,
    Simulated,
    Measured,
}

/// Photon-count histogram indexed by photon number.
///
/// `values` holds probabilities for analytic histograms and raw counts
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonHistogram {
    pub values: Vec<f64>,
    pub trials: Option<u64>,
    pub kind: HistogramKind,
}

impl PhotonHistogram {
    pub fn analytic(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(
                "histogram values must be finite and non-negative",
            ));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "analytic histogram sums to {total}, not 1"
            )));
        }
        Ok(PhotonHistogram {
            values,
            trials: None,
            kind: HistogramKind::Analytic,
        })
    }

    pub fn from_counts(counts: &[u64], kind: HistogramKind) -> Self {
        let trials = counts.iter().sum();
        let mut values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        while values.len() > 1 && values.last() == Some(&0.0) {
            values.pop();
        }
        PhotonHistogram {
            values,
            trials: Some(trials),
            kind,
        }
    }

    /// Counts that need not be integers, e.g. expected counts `N p_n`.
    pub fn from_weights(values: Vec<f64>, kind: HistogramKind) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(
                "histogram values must be finite and non-negative",
            ));
        }
        let total: f64 = values.iter().sum();
        Ok(PhotonHistogram {
            values,
            trials: Some(total.round() as u64),
            kind,
        })
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        if total <= 0.0 {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|v| v / total).collect()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total();
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| n as f64 * v)
            .sum::<f64>()
            / total
    }

    /// Count or probability in bin `n`, zero beyond the stored range.
    pub fn get(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }

    /// Total-variation distance between the normalized histograms.
    pub fn total_variation(&self, other: &PhotonHistogram) -> f64 {
        let a = self.probabilities();
        let b = other.probabilities();
        let len = a.len().max(b.len());
        0.5 * (0..len)
            .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }

    /// CSV with header `n,count`, one row per occupied bin, preceded by the
    /// given `# ...` metadata lines.
    pub fn to_csv(&self, metadata: &[String]) -> String {
        let mut out = String::new();
        for line in metadata {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("n,count\n");
        for (n, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if v.fract() == 0.0 && v < 9.007e15 {
                let _ = writeln!(out, "{n},{}", v as u64);
            } else {
                let _ = writeln!(out, "{n},{}", sig9(v));
            }
        }
        out
    }

    /// Parses the `n,count` format. A `trials=<N>` metadata token, when
    /// present, must agree with the counts.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut declared_trials = None;
        let mut simulated = false;
        let mut header_seen = false;
        let mut values: Vec<f64> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    if let Some(v) = token.strip_prefix("trials=") {
                        declared_trials = Some(v.parse::<u64>().map_err(|_| {
                            Error::parse(format!("line {}: bad trials value `{v}`", lineno + 1))
                        })?);
                    }
                    if token.starts_with("mode=") {
                        simulated = true;
                    }
                }
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "n,count" {
                    return Err(Error::parse(format!(
                        "expected header `n,count`, found `{line}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let (n, c) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("line {}: expected `n,count`", lineno + 1)))?;
            let n: usize = n.trim().parse().map_err(|_| {
                Error::parse(format!("line {}: bad photon number `{n}`", lineno + 1))
            })?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("line {}: bad count `{c}`", lineno + 1)))?;
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::parse(format!(
                    "line {}: negative or non-finite count",
                    lineno + 1
                )));
            }
            if values.len() <= n {
                values.resize(n + 1, 0.0);
            }
            values[n] += c;
        }
        if !header_seen {
            return Err(Error::parse("missing `n,count` header"));
        }
        if values.is_empty() {
            values.push(0.0);
        }
        let total: f64 = values.iter().sum();
        if let Some(t) = declared_trials {
            if (total - t as f64).abs() > 0.5 {
                return Err(Error::parse(format!(
                    "trials={t} but counts sum to {total}"
                )));
            }
        }
        let kind = if simulated {
            HistogramKind::Simulated
        } else {
            HistogramKind::Measured
        };
        Ok(PhotonHistogram {
            values,
            trials: Some(declared_trials.unwrap_or(total.round() as u64)),
            kind,
        })
    }
}
