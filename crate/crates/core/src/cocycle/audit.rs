//! Empirical audits of the volume inequalities: determinant vs expansion averages, and the
//! ambient vs quotient comparisons on energy levels.

use nalgebra::DMatrix;
use serde::Serialize;

use super::distribution::LagrangianDistribution;
use super::opticity::{is_optical, OpticityReport, POSITIVITY_TOL};
use super::quotient::{quotient_space, tilde_alpha_parts, LEAKAGE_TOL};
use crate::entropy::{fit_window, growth_series_paired, run_population, EntropyEstimate};
use crate::error::{invalid, Error, Result};
use crate::hamflow::{evolve_with_frames, sample_level, sample_shell, EvolveOptions, ShellSpec, TrackedFrame};
use crate::hamflow::{HamiltonianSystem, PhasePoint};
use crate::symplin::{apply_j, thin_qr, Frame};

/// Slack allowed on the pointwise bound `det ≤ ex`.
pub const TRIVIAL_BOUND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ManeAudit {
    pub t: Vec<f64>,
    /// `log r(t) = log avg det − log avg ex`.
    pub log_r: Vec<f64>,
    pub min_r: f64,
    pub max_r: f64,
    /// `r(t) ≤ 1 + 1e−8` at every node.
    pub trivial_bound_ok: bool,
    pub slope: EntropyEstimate,
    pub det_slope: EntropyEstimate,
    pub ex_slope: EntropyEstimate,
    pub n_samples: usize,
    pub opticity: OpticityReport,
    pub warnings: Vec<String>,
}

/// Compares the shell averages of the restricted determinant and of the expansion.
///
/// Refuses with [`Error::NonOptical`] when the distribution is not optical on the shell.
pub fn audit_mane_bound(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    shell: &ShellSpec,
    t_grid: &[f64],
    window: (f64, f64),
    opts: &EvolveOptions,
) -> Result<ManeAudit> {
    let pts = sample_shell(sys, shell)?.points;
    if pts.is_empty() {
        return invalid("shell sample count must be positive");
    }
    let report = is_optical(sys, dist, &pts, POSITIVITY_TOL)?;
    if !report.optical {
        return Err(Error::NonOptical { min_eigenvalue: report.min_eigenvalue });
    }
    let paired = growth_series_paired(sys, dist, shell, t_grid, opts)?;
    let log_r = paired.det.log_ratio(&paired.ex)?;
    let min_r = log_r.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let max_r = log_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let mut warnings = paired.det.warnings.clone();
    warnings.extend(paired.ex.warnings.iter().cloned());
    Ok(ManeAudit {
        slope: fit_window(t_grid, &log_r, window)?,
        det_slope: fit_window(t_grid, &paired.det.log_avg, window)?,
        ex_slope: fit_window(t_grid, &paired.ex.log_avg, window)?,
        trivial_bound_ok: max_r <= 1.0 + TRIVIAL_BOUND_TOL,
        t: t_grid.to_vec(),
        log_r,
        min_r,
        max_r,
        n_samples: paired.det.n_samples,
        opticity: report,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientAudit {
    pub t: Vec<f64>,
    /// Sample mean of `log ex_{TΣ} − log ex_S` per node.
    pub mean_log_k1: Vec<f64>,
    /// Sample mean of `log det_{α̃_S} − log det_{α̃}` per node.
    pub mean_log_k2: Vec<f64>,
    /// Largest per-sample log ratios over all nodes (empirical `log K₁`, `log K₂`).
    pub max_log_k1: f64,
    pub max_log_k2: f64,
    pub slope_k1: EntropyEstimate,
    pub slope_k2: EntropyEstimate,
    /// Largest `|n̂_y · q₁|` over the leading pushed level directions (`X̂_H` and `w₁`).
    pub max_leakage: f64,
    pub n_samples: usize,
}

/// Per-sample log integrands behind [`QuotientAudit`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientLogs {
    pub log_ex_level: Vec<f64>,
    pub log_ex_quotient: Vec<f64>,
    pub log_det_quotient: Vec<f64>,
    pub log_det_ambient: Vec<f64>,
    pub leakage: f64,
}

fn reorder(m: &DMatrix<f64>, first: usize) -> DMatrix<f64> {
    let k = m.ncols();
    let mut out = DMatrix::zeros(m.nrows(), k);
    out.columns_mut(0, k - first).copy_from(&m.columns(first, k - first));
    out.columns_mut(k - first, first).copy_from(&m.columns(0, first));
    out
}

/// Accumulated log volumes of the leading-column spans of a tracked frame, measured after
/// projecting onto the target basis `b` at node `k`.
fn projected_prefixes(f: &TrackedFrame, k: usize, b: &DMatrix<f64>) -> Vec<f64> {
    let (_, diag) = thin_qr(&(b.transpose() * &f.bases()[k]));
    let mut acc = 0.0;
    f.column_logs(k)
        .iter()
        .zip(diag)
        .map(|(l, r)| {
            acc += l + r.ln();
            acc
        })
        .collect()
}

fn best(prefixes: &[f64]) -> f64 {
    prefixes.iter().cloned().fold(0.0, f64::max)
}

/// Ambient and quotient volumes along one level trajectory.
pub fn quotient_sample(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<QuotientLogs> {
    let n = x.dof();
    let ta = tilde_alpha_parts(sys, dist, x)?;
    let qx = quotient_space(sys, x)?;
    let mut frames = vec![
        ("tilde".to_string(), ta.frame.frame().clone()),
        ("level".to_string(), Frame::orthonormalize(&qx.tangent)?),
        ("level-rev".to_string(), Frame::orthonormalize(&reorder(&qx.tangent, 1))?),
    ];
    if n > 1 {
        let proj = &qx.w * (qx.w.transpose() * &ta.intersection);
        frames.push(("qalpha".to_string(), Frame::orthonormalize(&proj)?));
        frames.push(("w".to_string(), Frame::orthonormalize(&qx.w)?));
        let jw = apply_j(&qx.w.columns(0, n - 1).into_owned());
        let mut swapped = DMatrix::zeros(2 * n, 2 * n - 2);
        swapped.columns_mut(0, n - 1).copy_from(&jw);
        swapped.columns_mut(n - 1, n - 1).copy_from(&qx.w.columns(0, n - 1));
        frames.push(("w-rev".to_string(), Frame::orthonormalize(&swapped)?));
    }
    let o = EvolveOptions { record_frames: true, metric: None, ..opts.clone() };
    let traj = evolve_with_frames(sys, x, t_grid, &frames, &o)?;
    let fr = |name: &str| traj.frame(name).expect("tracked");
    let mut logs = QuotientLogs {
        log_ex_level: Vec::with_capacity(t_grid.len()),
        log_ex_quotient: Vec::with_capacity(t_grid.len()),
        log_det_quotient: Vec::with_capacity(t_grid.len()),
        log_det_ambient: fr("tilde").log_volumes(),
        leakage: 0.0,
    };
    for (k, y) in traj.points.iter().enumerate() {
        let qy = quotient_space(sys, y)?;
        let level = fr("level");
        // leading columns are never orthogonalized, so their normal component is not
        // amplified by the contraction of later columns
        for f in [level, fr("level-rev")] {
            let leak = qy.normal.dot(&f.bases()[k].column(0)).abs();
            logs.leakage = logs.leakage.max(leak);
        }
        let ex_level = best(&projected_prefixes(level, k, &qy.tangent)).max(best(&projected_prefixes(
            fr("level-rev"),
            k,
            &qy.tangent,
        )));
        logs.log_ex_level.push(ex_level);
        if n > 1 {
            let ex_q =
                best(&projected_prefixes(fr("w"), k, &qy.w)).max(best(&projected_prefixes(fr("w-rev"), k, &qy.w)));
            logs.log_ex_quotient.push(ex_q);
            logs.log_det_quotient.push(*projected_prefixes(fr("qalpha"), k, &qy.w).last().expect("n > 1"));
        } else {
            logs.log_ex_quotient.push(0.0);
            logs.log_det_quotient.push(0.0);
        }
    }
    if logs.leakage > LEAKAGE_TOL {
        return Err(Error::LevelInvariance { leakage: logs.leakage, tol: LEAKAGE_TOL });
    }
    Ok(logs)
}

/// Per-sample ratio trajectories `ex_{TΣ}/ex_S` and `det_{α̃_S}/det_{α̃}` on the level `H = e`.
#[allow(clippy::too_many_arguments)]
pub fn audit_quotient_inequalities(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    e: f64,
    t_grid: &[f64],
    count: usize,
    seed: u64,
    window: (f64, f64),
    opts: &EvolveOptions,
) -> Result<QuotientAudit> {
    let level = sample_level(sys, e, count, seed, None)?;
    if level.points.is_empty() {
        return invalid("level sample count must be positive");
    }
    let logs = run_population(&level.points, |_, x| quotient_sample(sys, dist, x, t_grid, opts))?;
    let m = logs.len() as f64;
    let nodes = t_grid.len();
    let mut k1 = vec![0.0; nodes];
    let mut k2 = vec![0.0; nodes];
    let mut max1 = f64::NEG_INFINITY;
    let mut max2 = f64::NEG_INFINITY;
    for l in &logs {
        for k in 0..nodes {
            let a = l.log_ex_level[k] - l.log_ex_quotient[k];
            let b = l.log_det_quotient[k] - l.log_det_ambient[k];
            k1[k] += a / m;
            k2[k] += b / m;
            max1 = max1.max(a);
            max2 = max2.max(b);
        }
    }
    Ok(QuotientAudit {
        slope_k1: fit_window(t_grid, &k1, window)?,
        slope_k2: fit_window(t_grid, &k2, window)?,
        t: t_grid.to_vec(),
        mean_log_k1: k1,
        mean_log_k2: k2,
        max_log_k1: max1,
        max_log_k2: max2,
        max_leakage: logs.iter().map(|l| l.leakage).fold(0.0, f64::max),
        n_samples: logs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{uniform_grid, FnSystem, FreeParticle, HarmonicOscillator, JacobiBenchmark};

    #[test]
    fn harmonic_mane_ratio_is_one() {
        let sys = HarmonicOscillator;
        let t = uniform_grid(10.0, 1.0).unwrap();
        let shell = ShellSpec::new(0.5, 0.1, 32, 2);
        let a = audit_mane_bound(
            &sys,
            &LagrangianDistribution::Vertical,
            &shell,
            &t,
            (5.0, 10.0),
            &EvolveOptions::with_dt(1e-2),
        )
        .unwrap();
        assert_eq!(a.log_r[0], 0.0);
        assert!(a.log_r.iter().all(|v| v.abs() < 1e-4));
        assert!(a.trivial_bound_ok);
    }

    #[test]
    fn non_optical_is_refused() {
        let sys = FnSystem::new(
            "indefinite",
            2,
            vec![false, false],
            |z| 0.5 * (z[2] * z[2] - z[3] * z[3]) + 0.5 * (z[0] * z[0] + z[1] * z[1]),
            |z, g| {
                g[0] = z[0];
                g[1] = z[1];
                g[2] = z[2];
                g[3] = -z[3];
            },
            |_, h| {
                h.fill(0.0);
                h[(0, 0)] = 1.0;
                h[(1, 1)] = 1.0;
                h[(2, 2)] = 1.0;
                h[(3, 3)] = -1.0;
            },
        )
        .unwrap()
        .with_box(vec![(-2.0, 2.0); 4]);
        let shell = ShellSpec::new(0.5, 0.1, 8, 1);
        let r = audit_mane_bound(
            &sys,
            &LagrangianDistribution::Vertical,
            &shell,
            &[0.0, 1.0, 2.0],
            (0.0, 2.0),
            &EvolveOptions::with_dt(1e-2),
        );
        assert!(matches!(r, Err(Error::NonOptical { .. })));
    }

    #[test]
    fn quotient_ratios_start_at_one() {
        let sys = FreeParticle::new(2).unwrap();
        let t = uniform_grid(4.0, 1.0).unwrap();
        let a = audit_quotient_inequalities(
            &sys,
            &LagrangianDistribution::Vertical,
            0.5,
            &t,
            8,
            4,
            (1.0, 4.0),
            &EvolveOptions::with_dt(1e-2),
        )
        .unwrap();
        assert!(a.mean_log_k1[0].abs() < 1e-12 && a.mean_log_k2[0].abs() < 1e-12);
        assert!(a.max_leakage < 1e-9);
    }

    #[test]
    fn harmonic_quotient_is_trivial() {
        let sys = HarmonicOscillator;
        let t = uniform_grid(6.0, 1.0).unwrap();
        let a = audit_quotient_inequalities(
            &sys,
            &LagrangianDistribution::Vertical,
            0.5,
            &t,
            8,
            4,
            (2.0, 6.0),
            &EvolveOptions::with_dt(1e-3),
        )
        .unwrap();
        // |X_H| is conserved up to the O(dt²) modified-energy oscillation of leapfrog
        assert!(a.mean_log_k2.iter().all(|v| v.abs() < 1e-5));
        assert!(a.mean_log_k1.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn jacobi_quotient_ratios_flat() {
        let sys = JacobiBenchmark::new(1.0).unwrap();
        let t = uniform_grid(12.0, 1.0).unwrap();
        let a = audit_quotient_inequalities(
            &sys,
            &LagrangianDistribution::Vertical,
            0.5,
            &t,
            8,
            9,
            (5.0, 12.0),
            &EvolveOptions::with_dt(1e-2),
        )
        .unwrap();
        assert!(a.slope_k1.slope.abs() < 0.05, "{}", a.slope_k1.slope);
        assert!(a.slope_k2.slope.abs() < 0.05, "{}", a.slope_k2.slope);
    }
}
