//! Monte Carlo averages of exponentially large integrands, kept in log space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrand {
    /// `|det (dφ_t)_x|_{α(x)}|`
    RestrictedDet,
    /// `ex (dφ_t)_x`
    Expansion,
    /// `|det (dφ_t)_x|_{α̃(x)}|` on a level set
    QuotientDet,
}

/// `log Σ w_i e^{x_i}` (weights summing to one) and its delta-method standard error.
///
/// The reduction runs in index order after shifting by the maximum, so it is deterministic
/// and never overflows.
pub fn weighted_log_mean_exp(values: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() || values.len() != weights.len() {
        return invalid("log-mean-exp needs matching, nonempty values and weights");
    }
    if values.iter().any(|v| v.is_nan()) {
        return invalid("log integrand is NaN");
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok((m, 0.0));
    }
    let mut s = 0.0;
    for (v, w) in values.iter().zip(weights) {
        s += w * (v - m).exp();
    }
    let mut var = 0.0;
    for (v, w) in values.iter().zip(weights) {
        let d = (v - m).exp() - s;
        var += w * w * d * d;
    }
    Ok((m + s.ln(), var.sqrt() / s))
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSeries {
    pub t: Vec<f64>,
    pub log_avg: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub integrand: Integrand,
    /// Hypothesis violations and other non-fatal findings.
    pub warnings: Vec<String>,
    pub max_energy_drift: f64,
    pub max_symp_residual: f64,
    /// Largest `log ex(SVD) − proxy` on the validation samples (expansion series only).
    pub svd_gap: Option<f64>,
    /// Per-sample log integrands, `samples[i][k]` at `t[k]`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    #[serde(skip)]
    pub weights: Vec<f64>,
}

impl GrowthSeries {
    /// Reduces per-sample log integrands (one row per sample) into a series.
    pub fn from_samples(t: Vec<f64>, samples: Vec<Vec<f64>>, weights: Vec<f64>, integrand: Integrand) -> Result<Self> {
        if samples.is_empty() {
            return invalid("growth series needs at least one sample");
        }
        if samples.len() != weights.len() || samples.iter().any(|s| s.len() != t.len()) {
            return invalid("per-sample series must match the time grid and weights");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return invalid("weights must be nonnegative with positive sum");
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut log_avg = Vec::with_capacity(t.len());
        let mut stderr = Vec::with_capacity(t.len());
        let mut column = vec![0.0; samples.len()];
        for k in 0..t.len() {
            for (c, s) in column.iter_mut().zip(&samples) {
                *c = s[k];
            }
            let (m, se) = weighted_log_mean_exp(&column, &weights)?;
            if !m.is_finite() {
                return invalid(format!("log average is not finite at t = {}", t[k]));
            }
            log_avg.push(m);
            stderr.push(se);
        }
        Ok(Self {
            t,
            log_avg,
            stderr,
            n_samples: samples.len(),
            integrand,
            warnings: Vec::new(),
            max_energy_drift: 0.0,
            max_symp_residual: 0.0,
            svd_gap: None,
            samples,
            weights,
        })
    }

    /// Pointwise difference `self − other` on a common grid (used for ratio audits).
    pub fn log_ratio(&self, other: &GrowthSeries) -> Result<Vec<f64>> {
        if self.t != other.t {
            return invalid("series live on different grids");
        }
        Ok(self.log_avg.iter().zip(&other.log_avg).map(|(a, b)| a - b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_is_exact() {
        let s = GrowthSeries::from_samples(vec![0.0, 1.0], vec![vec![0.0, 3.5]], vec![1.0], Integrand::RestrictedDet)
            .unwrap();
        assert_eq!(s.log_avg, vec![0.0, 3.5]);
        assert_eq!(s.stderr, vec![0.0, 0.0]);
    }

    #[test]
    fn log_mean_exp_handles_huge_values() {
        let (m, _) = weighted_log_mean_exp(&[1000.0, 1000.0 + 2f64.ln()], &[0.5, 0.5]).unwrap();
        assert!((m - (1000.0 + 1.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn delta_method_matches_plain_formula() {
        let xs = [0.1f64, -0.3, 0.7, 0.2];
        let w = uniform_weights(4);
        let (m, se) = weighted_log_mean_exp(&xs, &w).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let mean = ys.iter().sum::<f64>() / 4.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 16.0;
        assert!((m - mean.ln()).abs() < 1e-14);
        assert!((se - var.sqrt() / mean).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GrowthSeries::from_samples(vec![0.0], vec![], vec![], Integrand::Expansion).is_err());
        assert!(GrowthSeries::from_samples(vec![0.0], vec![vec![0.0, 1.0]], vec![1.0], Integrand::Expansion).is_err());
    }
}
