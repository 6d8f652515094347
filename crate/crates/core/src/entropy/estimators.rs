//! Monte Carlo growth series for the determinant and expansion integrands.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::hyperplane::{hyperplane_field, HyperplaneField};
use super::series::{uniform_weights, GrowthSeries, Integrand};
use crate::cocycle::{is_optical, tilde_alpha, LagrangianDistribution, OpticityReport, POSITIVITY_TOL};
use crate::error::{invalid, Result};
use crate::hamflow::{evolve_with_frames, sample_level, sample_shell, EvolveOptions, ShellSpec};
use crate::hamflow::{HamiltonianSystem, PhasePoint};
use crate::symplin::{apply_j, log_expansion_of, Frame, LagrangianFrame};

/// Largest time at which the expansion proxy is compared with an SVD of the tangent map.
pub const SVD_VALIDATION_HORIZON: f64 = 20.0;
/// Number of samples re-run with recorded maps for the SVD comparison.
pub const SVD_VALIDATION_SAMPLES: usize = 4;

/// Runs `f` on every point in parallel; results keep sample order and the error of the
/// lowest failing index wins.
pub fn run_population<T, F>(points: &[PhasePoint], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &PhasePoint) -> Result<T> + Sync + Send,
{
    let out: Vec<Result<T>> = points.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
    out.into_iter().collect()
}

/// Log integrands of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLogs {
    pub log_det: Vec<f64>,
    pub log_ex: Option<Vec<f64>>,
    pub energy_drift: f64,
    pub symp_residual: f64,
}

fn pair_frames(alpha: &LagrangianFrame) -> Result<(Frame, Frame)> {
    let a = alpha.basis();
    let ja = apply_j(a);
    let n = a.ncols();
    let mut lead = DMatrix::zeros(a.nrows(), 2 * n);
    lead.columns_mut(0, n).copy_from(a);
    lead.columns_mut(n, n).copy_from(&ja);
    let mut swap = DMatrix::zeros(a.nrows(), 2 * n);
    swap.columns_mut(0, n).copy_from(&ja);
    swap.columns_mut(n, n).copy_from(a);
    Ok((Frame::orthonormalize(&lead)?, Frame::orthonormalize(&swap)?))
}

/// Tracks `[α, J₀α]` (and `[J₀α, α]` when the expansion is wanted) along one trajectory.
pub fn theorem_a_sample(
    sys: &dyn HamiltonianSystem,
    alpha: &LagrangianFrame,
    x: &PhasePoint,
    t_grid: &[f64],
    opts: &EvolveOptions,
    with_expansion: bool,
) -> Result<SampleLogs> {
    let n = alpha.half_dim();
    let (lead, swap) = pair_frames(alpha)?;
    let mut frames = vec![("lead".to_string(), lead)];
    if with_expansion {
        frames.push(("swap".to_string(), swap));
    }
    if opts.metric.is_some() {
        frames.push(("alpha".to_string(), alpha.frame().clone()));
    }
    let traj = evolve_with_frames(sys, x, t_grid, &frames, opts)?;
    let log_det = match opts.metric {
        Some(_) => traj.frame("alpha").expect("tracked").metric_log_volumes(),
        None => {
            let f = traj.frame("lead").expect("tracked");
            (0..t_grid.len()).map(|k| f.log_volume_prefix(k, n)).collect()
        }
    };
    let log_ex = if with_expansion { traj.log_expansion_proxy() } else { None };
    Ok(SampleLogs { log_det, log_ex, energy_drift: traj.energy_drift, symp_residual: traj.symp_residual })
}

fn finish(mut s: GrowthSeries, logs: &[SampleLogs]) -> GrowthSeries {
    s.max_energy_drift = logs.iter().map(|l| l.energy_drift).fold(0.0, f64::max);
    s.max_symp_residual = logs.iter().map(|l| l.symp_residual).fold(0.0, f64::max);
    s
}

/// Determinant and expansion series computed from the same trajectories.
#[derive(Debug, Clone)]
pub struct PairedSeries {
    pub det: GrowthSeries,
    pub ex: GrowthSeries,
    pub opticity: OpticityReport,
    pub acceptance_rate: f64,
}

fn shell_points(sys: &dyn HamiltonianSystem, shell: &ShellSpec) -> Result<(Vec<PhasePoint>, f64)> {
    let s = sample_shell(sys, shell)?;
    if s.points.is_empty() {
        return invalid("shell sample count must be positive");
    }
    let rate = s.acceptance_rate();
    Ok((s.points, rate))
}

fn opticity_warning(report: &OpticityReport) -> Option<String> {
    (!report.optical).then(|| {
        format!(
            "opticity hypothesis violated on the shell: min eigenvalue {:.6e} below {:.1e}",
            report.min_eigenvalue, report.tol
        )
    })
}

/// Restricted-determinant and expansion series from one population of shell trajectories.
pub fn growth_series_paired(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    shell: &ShellSpec,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<PairedSeries> {
    let (points, rate) = shell_points(sys, shell)?;
    let opticity = is_optical(sys, dist, &points, POSITIVITY_TOL)?;
    let logs = run_population(&points, |_, x| theorem_a_sample(sys, &dist.at(x)?, x, t_grid, opts, true))?;
    let w = uniform_weights(points.len());
    let dets = logs.iter().map(|l| l.log_det.clone()).collect();
    let exs = logs.iter().map(|l| l.log_ex.clone().expect("expansion tracked")).collect();
    let mut det =
        finish(GrowthSeries::from_samples(t_grid.to_vec(), dets, w.clone(), Integrand::RestrictedDet)?, &logs);
    let mut ex = finish(GrowthSeries::from_samples(t_grid.to_vec(), exs, w, Integrand::Expansion)?, &logs);
    if let Some(msg) = opticity_warning(&opticity) {
        det.warnings.push(msg);
    }
    validate_expansion(&mut ex, sys, &points, opts)?;
    Ok(PairedSeries { det, ex, opticity, acceptance_rate: rate })
}

/// `log avg |det (dφ_t)_x|_{α(x)}|` over the shell.
///
/// A violated opticity hypothesis is recorded in `warnings`; the series is still computed.
pub fn growth_series_theorem_a(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    shell: &ShellSpec,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<GrowthSeries> {
    let (points, _) = shell_points(sys, shell)?;
    let opticity = is_optical(sys, dist, &points, POSITIVITY_TOL)?;
    let logs = run_population(&points, |_, x| theorem_a_sample(sys, &dist.at(x)?, x, t_grid, opts, false))?;
    let dets = logs.iter().map(|l| l.log_det.clone()).collect();
    let mut s = finish(
        GrowthSeries::from_samples(t_grid.to_vec(), dets, uniform_weights(points.len()), Integrand::RestrictedDet)?,
        &logs,
    );
    if let Some(msg) = opticity_warning(&opticity) {
        s.warnings.push(msg);
    }
    Ok(s)
}

/// `log avg ex (dφ_t)_x` over the shell, from the QR prefix-volume lower bound.
pub fn growth_series_expansion(
    sys: &dyn HamiltonianSystem,
    shell: &ShellSpec,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<GrowthSeries> {
    let (points, _) = shell_points(sys, shell)?;
    let vertical = LagrangianFrame::vertical(sys.dof());
    let opts = EvolveOptions { metric: None, ..opts.clone() };
    let logs = run_population(&points, |_, x| theorem_a_sample(sys, &vertical, x, t_grid, &opts, true))?;
    let exs = logs.iter().map(|l| l.log_ex.clone().expect("expansion tracked")).collect();
    let mut s = finish(
        GrowthSeries::from_samples(t_grid.to_vec(), exs, uniform_weights(points.len()), Integrand::Expansion)?,
        &logs,
    );
    validate_expansion(&mut s, sys, &points, &opts)?;
    Ok(s)
}

/// Slack on the lower-bound property `proxy ≤ log ex` in the SVD comparison.
const SVD_BOUND_TOL: f64 = 1e-6;

/// Compares the proxy with SVDs on the first samples; records the largest gap and warns
/// if the proxy ever exceeds the SVD value.
fn validate_expansion(
    s: &mut GrowthSeries,
    sys: &dyn HamiltonianSystem,
    points: &[PhasePoint],
    opts: &EvolveOptions,
) -> Result<()> {
    let k = points.len().min(SVD_VALIDATION_SAMPLES);
    let gaps = run_population(&points[..k], |i, x| {
        let nodes: Vec<f64> = s.t.iter().copied().take_while(|t| *t <= SVD_VALIDATION_HORIZON).collect();
        if nodes.is_empty() {
            return Ok((0.0, 0.0));
        }
        let o = EvolveOptions { record_maps: true, metric: None, ..opts.clone() };
        let traj = evolve_with_frames(sys, x, &nodes, &[], &o)?;
        Ok(traj.maps.iter().zip(&s.samples[i]).fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), (m, p)| {
            let g = log_expansion_of(m) - p;
            (hi.max(g), lo.min(g / p.abs().max(1.0)))
        }))
    })?;
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let lowest = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    s.svd_gap = Some(worst);
    if lowest < -SVD_BOUND_TOL {
        s.warnings.push(format!("expansion proxy exceeds the SVD value (relative gap {lowest:.3e})"));
    }
    Ok(())
}

/// `log avg |det (dφ_t)_x|_{α̃(x)}|` over the level `H = e` with Liouville weights,
/// gated by the contact hyperplane field.
pub fn growth_series_theorem_b(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    e: f64,
    count: usize,
    seed: u64,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<GrowthSeries> {
    let field = hyperplane_field(sys, e)?;
    growth_series_theorem_b_with_field(sys, dist, &field, count, seed, t_grid, opts)
}

pub fn growth_series_theorem_b_with_field(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    field: &HyperplaneField,
    count: usize,
    seed: u64,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<GrowthSeries> {
    let level = sample_level(sys, field.e, count, seed, None)?;
    if level.points.is_empty() {
        return invalid("level sample count must be positive");
    }
    let logs = run_population(&level.points, |_, x| {
        let ta = tilde_alpha(sys, dist, x)?;
        let traj = evolve_with_frames(sys, x, t_grid, &[("tilde".to_string(), ta.frame().clone())], opts)?;
        let f = traj.frame("tilde").expect("tracked");
        let log_det = if opts.metric.is_some() { f.metric_log_volumes() } else { f.log_volumes() };
        Ok(SampleLogs { log_det, log_ex: None, energy_drift: traj.energy_drift, symp_residual: traj.symp_residual })
    })?;
    let dets = logs.iter().map(|l| l.log_det.clone()).collect();
    let mut s = finish(
        GrowthSeries::from_samples(t_grid.to_vec(), dets, level.weights.clone(), Integrand::QuotientDet)?,
        &logs,
    );
    if level.rejected_critical > 0 {
        s.warnings.push(format!("{} near-critical level proposals rejected", level.rejected_critical));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{uniform_grid, FreeParticle, HarmonicOscillator, LinearSaddle};

    fn opts() -> EvolveOptions {
        EvolveOptions::with_dt(1e-2)
    }

    #[test]
    fn harmonic_series_vanish() {
        let sys = HarmonicOscillator;
        let t = uniform_grid(10.0, 1.0).unwrap();
        let shell = ShellSpec::new(0.5, 0.1, 64, 3);
        let p = growth_series_paired(&sys, &LagrangianDistribution::Vertical, &shell, &t, &opts()).unwrap();
        assert!(p.det.log_avg.iter().all(|v| v.abs() < 1e-4));
        assert!(p.ex.log_avg.iter().all(|v| v.abs() < 1e-4));
        assert!(p.det.warnings.is_empty());
        let b = growth_series_theorem_b(&sys, &LagrangianDistribution::Vertical, 0.5, 32, 3, &t, &opts()).unwrap();
        assert!(b.log_avg.iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn free_particle_closed_form() {
        let sys = FreeParticle::new(2).unwrap();
        let t = uniform_grid(20.0, 2.0).unwrap();
        let shell = ShellSpec::new(0.5, 0.1, 16, 5);
        let p = growth_series_paired(&sys, &LagrangianDistribution::Vertical, &shell, &t, &opts()).unwrap();
        for (k, &tk) in t.iter().enumerate() {
            let exact = (1.0 + tk * tk).ln();
            assert!((p.det.log_avg[k] - exact).abs() < 2e-2, "det at t = {tk}");
            assert!((p.ex.log_avg[k] - exact).abs() < 2e-2, "ex at t = {tk}");
        }
        assert!(p.ex.warnings.is_empty(), "{:?}", p.ex.warnings);
        // singular values of [[1, t], [0, 1]] are (√(t² + 4) ± t)/2; the proxy is log(1 + t²)
        let gap = t
            .iter()
            .filter(|tk| **tk <= SVD_VALIDATION_HORIZON)
            .map(|tk| 2.0 * ((tk + (tk * tk + 4.0).sqrt()) / 2.0).ln() - (1.0 + tk * tk).ln())
            .fold(0.0, f64::max);
        assert!((p.ex.svd_gap.unwrap() - gap).abs() < 1e-6, "{:?} vs {gap}", p.ex.svd_gap);
    }

    #[test]
    fn single_sample_matches_its_log_det() {
        let sys = FreeParticle::new(2).unwrap();
        let t = uniform_grid(5.0, 1.0).unwrap();
        let shell = ShellSpec::new(0.5, 0.1, 1, 11);
        let s = growth_series_theorem_a(&sys, &LagrangianDistribution::Vertical, &shell, &t, &opts()).unwrap();
        assert_eq!(s.log_avg, s.samples[0]);
    }

    #[test]
    fn saddle_expansion_grows_like_t() {
        let sys = LinearSaddle;
        let t = uniform_grid(20.0, 1.0).unwrap();
        let shell = ShellSpec::new(0.0, 0.5, 8, 1).with_box(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        let s = growth_series_expansion(&sys, &shell, &t, &opts()).unwrap();
        for (k, &tk) in t.iter().enumerate() {
            assert!((s.log_avg[k] - tk).abs() < 1e-2);
        }
    }

    #[test]
    fn population_keeps_order_and_first_error() {
        let pts: Vec<PhasePoint> = (0..50).map(|i| PhasePoint::new(&[i as f64], &[0.0]).unwrap()).collect();
        let v = run_population(&pts, |i, x| Ok((i, x.q()[0]))).unwrap();
        assert!(v.iter().enumerate().all(|(i, (j, q))| i == *j && *q == i as f64));
        let e = run_population(&pts, |i, _| if i >= 7 { invalid::<()>(format!("bad {i}")) } else { Ok(()) });
        assert!(format!("{}", e.unwrap_err()).contains("bad 7"));
    }
}
