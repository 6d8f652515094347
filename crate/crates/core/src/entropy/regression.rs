//! Growth-rate regression and the `ε → 0` extrapolation.

use serde::Serialize;

use super::series::GrowthSeries;
use crate::error::{invalid, Result};

/// Affine fit of `slope(ε)` across shell widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolation {
    pub epsilons: Vec<f64>,
    pub slopes: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `d slope / d ε` of the affine model.
    pub coefficient: f64,
    /// Largest absolute residual of the affine model.
    pub max_residual: f64,
    /// False when some slope decreases in `ε` by more than two combined standard errors.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub epsilon: Option<f64>,
    pub extrapolation: Option<Extrapolation>,
}

struct Fit {
    slope: f64,
    intercept: f64,
    stderr: f64,
    r2: f64,
    mean_x: f64,
    sxx: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Fit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let stderr = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Fit { slope, intercept, stderr, r2, mean_x: mx, sxx }
}

/// Ordinary least squares of `log_avg` against `t` on the closed window.
pub fn estimate_slope(series: &GrowthSeries, window: (f64, f64)) -> Result<EntropyEstimate> {
    fit_window(&series.t, &series.log_avg, window)
}

/// Ordinary least squares of `y` against `t` on the closed window.
pub fn fit_window(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<EntropyEstimate> {
    if t.len() != y.len() {
        return invalid("abscissae and ordinates differ in length");
    }
    let (t0, t1) = window;
    if !(t0 < t1) {
        return invalid("regression window must satisfy t0 < t1");
    }
    let pad = 1e-9 * t1.abs().max(1.0);
    let (x, y): (Vec<f64>, Vec<f64>) =
        t.iter().zip(y).filter(|(t, _)| **t >= t0 - pad && **t <= t1 + pad).map(|(t, v)| (*t, *v)).unzip();
    if x.len() < 3 {
        return invalid(format!("window [{t0}, {t1}] holds {} grid points; at least 3 are needed", x.len()));
    }
    let f = ols(&x, &y);
    Ok(EntropyEstimate {
        slope: f.slope,
        stderr: f.stderr,
        intercept: f.intercept,
        r_squared: f.r2,
        window,
        n_points: x.len(),
        epsilon: None,
        extrapolation: None,
    })
}

/// Affine extrapolation of slopes to `ε = 0`.
pub fn epsilon_extrapolate(pairs: &[(f64, EntropyEstimate)]) -> Result<EntropyEstimate> {
    if pairs.len() < 3 {
        return invalid("epsilon extrapolation needs at least three shell widths");
    }
    let mut sorted: Vec<&(f64, EntropyEstimate)> = pairs.iter().collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    if sorted.windows(2).any(|w| !(w[0].0 > w[1].0)) || sorted.last().is_some_and(|p| !(p.0 > 0.0)) {
        return invalid("shell widths must be positive and distinct");
    }
    let eps: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let slopes: Vec<f64> = sorted.iter().map(|p| p.1.slope).collect();
    let ses: Vec<f64> = sorted.iter().map(|p| p.1.stderr).collect();
    let f = ols(&eps, &slopes);
    let m = eps.len() as f64;
    let var: f64 = eps
        .iter()
        .zip(&ses)
        .map(|(e, se)| {
            let c = 1.0 / m - f.mean_x * (e - f.mean_x) / f.sxx;
            c * c * se * se
        })
        .sum();
    let max_residual = eps.iter().zip(&slopes).map(|(e, s)| (s - f.intercept - f.slope * e).abs()).fold(0.0, f64::max);
    // ε decreases along `sorted`; the entropy of N_ε is nondecreasing in ε
    let monotone = sorted.windows(2).all(|w| w[1].1.slope <= w[0].1.slope + 2.0 * (w[0].1.stderr.hypot(w[1].1.stderr)));
    let window = sorted[0].1.window;
    let n_points = sorted.iter().map(|p| p.1.n_points).min().unwrap_or(0);
    Ok(EntropyEstimate {
        slope: f.intercept,
        stderr: var.sqrt(),
        intercept: f.intercept,
        r_squared: f.r2,
        window,
        n_points,
        epsilon: Some(0.0),
        extrapolation: Some(Extrapolation {
            epsilons: eps,
            slopes,
            stderrs: ses,
            coefficient: f.slope,
            max_residual,
            monotone,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::series::Integrand;

    fn series(t: &[f64], f: impl Fn(f64) -> f64) -> GrowthSeries {
        let n = t.len();
        GrowthSeries {
            t: t.to_vec(),
            log_avg: t.iter().map(|&x| f(x)).collect(),
            stderr: vec![0.0; n],
            n_samples: 1,
            integrand: Integrand::RestrictedDet,
            warnings: vec![],
            max_energy_drift: 0.0,
            max_symp_residual: 0.0,
            svd_gap: None,
            samples: vec![],
            weights: vec![],
        }
    }

    fn grid(a: f64, b: f64, k: usize) -> Vec<f64> {
        (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
    }

    #[test]
    fn exact_line_and_constant() {
        let t = grid(0.0, 10.0, 20);
        let e = estimate_slope(&series(&t, |x| 2.0 * x), (0.0, 10.0)).unwrap();
        assert!((e.slope - 2.0).abs() < 1e-14);
        assert!(e.stderr < 1e-12);
        let c = estimate_slope(&series(&t, |_| 4.0), (0.0, 10.0)).unwrap();
        assert_eq!(c.slope, 0.0);
    }

    #[test]
    fn log_sinh_slope() {
        let t = grid(0.0, 20.0, 200);
        let e = estimate_slope(&series(&t, |x| x.sinh().ln()), (5.0, 20.0)).unwrap();
        assert!((e.slope - 1.0).abs() < 1e-3);
    }

    #[test]
    fn shift_invariance() {
        let t = grid(0.0, 10.0, 50);
        let a = estimate_slope(&series(&t, |x| (1.0 + x * x).ln()), (5.0, 10.0)).unwrap();
        let b = estimate_slope(&series(&t, |x| (1.0 + x * x).ln() + 17.25), (5.0, 10.0)).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
    }

    #[test]
    fn degenerate_window() {
        let t = grid(0.0, 10.0, 10);
        assert!(estimate_slope(&series(&t, |x| x), (0.0, 1.5)).is_err());
        assert!(estimate_slope(&series(&t, |x| x), (3.0, 3.0)).is_err());
    }

    fn est(slope: f64, stderr: f64) -> EntropyEstimate {
        EntropyEstimate {
            slope,
            stderr,
            intercept: 0.0,
            r_squared: 1.0,
            window: (5.0, 10.0),
            n_points: 10,
            epsilon: None,
            extrapolation: None,
        }
    }

    #[test]
    fn extrapolation_examples() {
        let eq = epsilon_extrapolate(&[(0.2, est(0.7, 0.0)), (0.1, est(0.7, 0.0)), (0.05, est(0.7, 0.0))]).unwrap();
        assert!((eq.slope - 0.7).abs() < 1e-14);
        let aff = epsilon_extrapolate(&[(0.2, est(1.4, 0.0)), (0.1, est(1.2, 0.0)), (0.05, est(1.1, 0.0))]).unwrap();
        assert!((aff.slope - 1.0).abs() < 1e-12);
        let x = aff.extrapolation.unwrap();
        assert!(x.max_residual < 1e-12 && x.monotone);
        assert!((x.coefficient - 2.0).abs() < 1e-12);
        assert!(epsilon_extrapolate(&[(0.2, est(1.0, 0.0)), (0.1, est(1.0, 0.0))]).is_err());
        let bad = epsilon_extrapolate(&[(0.2, est(1.0, 0.01)), (0.1, est(1.5, 0.01)), (0.05, est(1.0, 0.01))]).unwrap();
        assert!(!bad.extrapolation.unwrap().monotone);
    }

    #[test]
    fn extrapolation_stderr_propagates() {
        let e = epsilon_extrapolate(&[(0.2, est(1.0, 0.1)), (0.1, est(1.0, 0.1)), (0.05, est(1.0, 0.1))]).unwrap();
        // intercept weights c_i for ε = (0.2, 0.1, 0.05)
        let eps = [0.2f64, 0.1, 0.05];
        let m = eps.iter().sum::<f64>() / 3.0;
        let sxx: f64 = eps.iter().map(|e| (e - m).powi(2)).sum();
        let expect: f64 = eps.iter().map(|e| (1.0 / 3.0 - m * (e - m) / sxx).powi(2) * 0.01).sum::<f64>().sqrt();
        assert!((e.stderr - expect).abs() < 1e-14);
    }
}
