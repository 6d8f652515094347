//! Tangent propagation with windowed QR renormalization.
//!
//! Step Jacobians are multiplied into a window product `P`; frames only see `P` at a flush,
//! which happens at every grid node and whenever the policy says the pushed frames could
//! become ill-conditioned. Because `P` is symplectic, `cond(Gram(P F)) ≤ ‖P‖_F⁴`, so
//! flushing at `‖P‖_F > c^{1/4}` keeps the Gram condition of every frame below `c`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::integrator::{Scheme, Stepper};
use super::systems::{HamiltonianSystem, PhasePoint};
use crate::error::{invalid, Error, Result};
use crate::symplin::{log_volume, orthonormality_error, symplectic_residual, thin_qr, Frame, ORTHONORMAL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormPolicy {
    /// Renormalize before any frame's Gram condition number can exceed the bound.
    GramCondition(f64),
    /// Renormalize after a fixed number of steps.
    EverySteps(usize),
}

impl Default for RenormPolicy {
    fn default() -> Self {
        RenormPolicy::GramCondition(1e6)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub scheme: Scheme,
    pub renorm: RenormPolicy,
    /// Append an identity `2n`-frame named `"full"` unless a full-rank frame is tracked.
    pub full_frame: bool,
    /// Store the accumulated tangent map at every node.
    pub record_maps: bool,
    /// Store every tracked frame's orthonormal basis at every node.
    pub record_frames: bool,
    /// Diagonal of a constant metric `g = D²` in which tracked volumes are also measured.
    pub metric: Option<DVector<f64>>,
    /// Abort with [`Error::EnergyDrift`] when `|H − H(x₀)|` exceeds this at a node.
    pub energy_bound: Option<f64>,
    /// Abort with [`Error::SymplecticDrift`] when a window product drifts beyond this.
    pub symp_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::Auto,
            renorm: RenormPolicy::default(),
            full_frame: false,
            record_maps: false,
            record_frames: false,
            metric: None,
            energy_bound: None,
            symp_tol: 1e-6,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// A frame pushed along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub name: String,
    initial: DMatrix<f64>,
    current: DMatrix<f64>,
    /// Per node, accumulated `log|r_ii|` per column.
    column_logs: Vec<Vec<f64>>,
    /// Per node, `log vol_D(Q_t) − log vol_D(S₀)` when a metric is configured.
    metric_shift: Vec<f64>,
    bases: Vec<DMatrix<f64>>,
}

impl TrackedFrame {
    fn new(name: String, basis: DMatrix<f64>) -> Self {
        Self {
            name,
            initial: basis.clone(),
            current: basis,
            column_logs: Vec::new(),
            metric_shift: Vec::new(),
            bases: Vec::new(),
        }
    }

    pub fn dim_sub(&self) -> usize {
        self.initial.ncols()
    }

    pub fn initial(&self) -> &DMatrix<f64> {
        &self.initial
    }

    /// Orthonormal basis of the pushed subspace at the final node.
    pub fn current(&self) -> &DMatrix<f64> {
        &self.current
    }

    /// Orthonormal bases at each node (empty unless recorded).
    pub fn bases(&self) -> &[DMatrix<f64>] {
        &self.bases
    }

    pub fn column_logs(&self, node: usize) -> &[f64] {
        &self.column_logs[node]
    }

    /// Accumulated log restricted determinant at each node.
    pub fn log_volumes(&self) -> Vec<f64> {
        (0..self.column_logs.len()).map(|k| self.log_volume(k)).collect()
    }

    pub fn log_volume(&self, node: usize) -> f64 {
        self.column_logs[node].iter().sum()
    }

    /// Log volume of the first `k` columns: the restricted determinant on their span.
    pub fn log_volume_prefix(&self, node: usize, k: usize) -> f64 {
        self.column_logs[node][..k].iter().sum()
    }

    /// Log volume measured in the configured metric (equal to [`Self::log_volumes`] without one).
    pub fn metric_log_volumes(&self) -> Vec<f64> {
        (0..self.column_logs.len())
            .map(|k| self.log_volume(k) + self.metric_shift.get(k).copied().unwrap_or(0.0))
            .collect()
    }

    /// `Σ max(L_i, 0)` over the accumulated column logs.
    pub fn positive_log_sum(&self, node: usize) -> f64 {
        self.column_logs[node].iter().map(|l| l.max(0.0)).sum()
    }

    /// Largest log volume over leading-column spans, including the empty one.
    pub fn best_prefix(&self, node: usize) -> f64 {
        let mut acc = 0.0;
        let mut best = 0.0_f64;
        for l in &self.column_logs[node] {
            acc += l;
            best = best.max(acc);
        }
        best
    }
}

/// Result of [`evolve_with_frames`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub frames: Vec<TrackedFrame>,
    /// Accumulated tangent maps at the nodes, when recorded.
    pub maps: Vec<DMatrix<f64>>,
    /// Largest window symplectic residual seen before a renormalization.
    pub symp_residual: f64,
    /// Largest `|H − H(x₀)|` over the nodes.
    pub energy_drift: f64,
    pub steps: usize,
    pub renormalizations: usize,
    pub scheme: Scheme,
}

impl TangentTrajectory {
    pub fn frame(&self, name: &str) -> Option<&TrackedFrame> {
        self.frames.iter().find(|f| f.name == name)
    }

    pub fn log_volumes(&self, name: &str) -> Option<Vec<f64>> {
        self.frame(name).map(TrackedFrame::log_volumes)
    }

    /// Lower bound for `log ex` at every node: the largest accumulated log volume among the
    /// leading-column spans of all full-rank tracked frames (the empty span counts as 0).
    ///
    /// For a frame whose columns are ordered by growth this is the sum of its positive log
    /// QR diagonals; taking prefixes keeps the bound valid when the ordering is not.
    pub fn log_expansion_proxy(&self) -> Option<Vec<f64>> {
        let d = self.points.first()?.as_slice().len();
        let full: Vec<&TrackedFrame> = self.frames.iter().filter(|f| f.dim_sub() == d).collect();
        if full.is_empty() {
            return None;
        }
        Some((0..self.times.len()).map(|k| full.iter().map(|f| f.best_prefix(k)).fold(0.0, f64::max)).collect())
    }
}

/// Column-major `out = a · b` for square `d × d` buffers.
#[inline]
fn matmul_square(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for j in 0..d {
        let bj = &b[j * d..(j + 1) * d];
        let oj = &mut out[j * d..(j + 1) * d];
        oj.fill(0.0);
        for (k, &bkj) in bj.iter().enumerate() {
            let ak = &a[k * d..(k + 1) * d];
            for i in 0..d {
                oj[i] += ak[i] * bkj;
            }
        }
    }
}

fn set_identity(m: &mut [f64], d: usize) {
    m.fill(0.0);
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
}

fn log_metric_volume(metric: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let mut scaled = basis.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= metric[i];
    }
    log_volume(&scaled)
}

/// Integrates from `x0` over `t_grid` while pushing every named frame through the exact
/// tangent map of the discrete flow. Node `k` holds data at time `t_grid[k]`.
pub fn evolve_with_frames(
    sys: &dyn HamiltonianSystem,
    x0: &PhasePoint,
    t_grid: &[f64],
    frames: &[(String, Frame)],
    opts: &EvolveOptions,
) -> Result<TangentTrajectory> {
    let n = sys.dof();
    let d = 2 * n;
    if x0.dof() != n {
        return invalid("initial point dimension does not match the system");
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return invalid("dt must be positive and finite");
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("time grid must be nonempty, nonnegative and strictly increasing");
    }
    if let RenormPolicy::GramCondition(c) = opts.renorm {
        if !(c > 1.0) {
            return invalid("Gram condition bound must exceed 1");
        }
    }
    if let RenormPolicy::EverySteps(0) = opts.renorm {
        return invalid("renormalization interval must be positive");
    }
    if let Some(m) = &opts.metric {
        if m.len() != d || m.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("metric diagonal must have 2n positive entries");
        }
    }
    let mut tracked = Vec::with_capacity(frames.len() + 1);
    for (name, f) in frames {
        if f.dim_ambient() != d {
            return invalid(format!("frame `{name}` lives in dimension {}, expected {d}", f.dim_ambient()));
        }
        if orthonormality_error(f.basis()) > ORTHONORMAL_TOL {
            return invalid(format!("frame `{name}` is not orthonormal"));
        }
        tracked.push(TrackedFrame::new(name.clone(), f.basis().clone()));
    }
    if opts.full_frame && !tracked.iter().any(|f| f.dim_sub() == d) {
        tracked.push(TrackedFrame::new("full".into(), DMatrix::identity(d, d)));
    }
    let needs_tangent = !tracked.is_empty() || opts.record_maps;

    let mut stepper = Stepper::new(sys, opts.scheme)?;
    let mut z = x0.as_slice().to_vec();
    let e0 = sys.energy(&z);
    let flush_norm = match opts.renorm {
        RenormPolicy::GramCondition(c) => c.powf(0.25),
        RenormPolicy::EverySteps(_) => f64::INFINITY,
    };
    let every = match opts.renorm {
        RenormPolicy::EverySteps(k) => k,
        RenormPolicy::GramCondition(_) => usize::MAX,
    };

    let mut jac = DMatrix::<f64>::zeros(d, d);
    let mut window = vec![0.0; d * d];
    let mut scratch = vec![0.0; d * d];
    set_identity(&mut window, d);
    let mut window_dirty = false;
    let mut window_steps = 0usize;
    let mut total = if opts.record_maps { Some(DMatrix::<f64>::identity(d, d)) } else { None };
    let mut logs: Vec<Vec<f64>> = tracked.iter().map(|f| vec![0.0; f.dim_sub()]).collect();
    let metric_base: Vec<f64> = match &opts.metric {
        Some(m) => tracked.iter().map(|f| log_metric_volume(m, &f.initial)).collect(),
        None => Vec::new(),
    };

    let mut traj = TangentTrajectory {
        times: t_grid.to_vec(),
        points: Vec::with_capacity(t_grid.len()),
        frames: Vec::new(),
        maps: Vec::new(),
        symp_residual: 0.0,
        energy_drift: 0.0,
        steps: 0,
        renormalizations: 0,
        scheme: stepper.scheme(),
    };

    let flush = |window: &mut [f64],
                 dirty: &mut bool,
                 tracked: &mut [TrackedFrame],
                 logs: &mut [Vec<f64>],
                 total: &mut Option<DMatrix<f64>>,
                 traj: &mut TangentTrajectory|
     -> Result<()> {
        if !*dirty {
            return Ok(());
        }
        let p = DMatrix::from_column_slice(d, d, window);
        let res = symplectic_residual(&p);
        traj.symp_residual = traj.symp_residual.max(res);
        if res > opts.symp_tol {
            return Err(Error::SymplecticDrift { residual: res, tol: opts.symp_tol });
        }
        for (f, l) in tracked.iter_mut().zip(logs.iter_mut()) {
            let pushed = &p * &f.current;
            let (q, diag) = thin_qr(&pushed);
            for (li, r) in l.iter_mut().zip(&diag) {
                *li += r.ln();
            }
            f.current = q;
        }
        if let Some(m) = total.as_mut() {
            *m = &p * &*m;
        }
        set_identity(window, d);
        *dirty = false;
        traj.renormalizations += 1;
        Ok(())
    };

    let mut t = 0.0;
    let mut last_good = 0.0;
    for (node, &t_node) in t_grid.iter().enumerate() {
        let span = t_node - t;
        if span > 0.0 {
            let nsteps = ((span / opts.dt).round() as usize).max(1);
            let h = span / nsteps as f64;
            for s in 0..nsteps {
                if needs_tangent {
                    stepper.step_with_jacobian(&mut z, h, &mut jac)?;
                    matmul_square(jac.as_slice(), &window, &mut scratch, d);
                    std::mem::swap(&mut window, &mut scratch);
                    window_dirty = true;
                    window_steps += 1;
                } else {
                    stepper.step(&mut z, h)?;
                }
                traj.steps += 1;
                if z.iter().any(|v| !v.is_finite()) || window.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { last_good_time: last_good });
                }
                last_good = t + (s + 1) as f64 * h;
                if needs_tangent && s + 1 < nsteps {
                    let frob = window.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if frob > flush_norm || window_steps >= every {
                        flush(&mut window, &mut window_dirty, &mut tracked, &mut logs, &mut total, &mut traj)?;
                        window_steps = 0;
                    }
                }
            }
            t = t_node;
        }
        flush(&mut window, &mut window_dirty, &mut tracked, &mut logs, &mut total, &mut traj)?;
        window_steps = 0;

        let drift = (sys.energy(&z) - e0).abs();
        traj.energy_drift = traj.energy_drift.max(drift);
        if let Some(bound) = opts.energy_bound {
            if drift > bound {
                return Err(Error::EnergyDrift { drift, bound });
            }
        }
        traj.points.push(PhasePoint::from_slice(&z)?);
        for (i, (f, l)) in tracked.iter_mut().zip(&logs).enumerate() {
            f.column_logs.push(l.clone());
            if let Some(m) = &opts.metric {
                f.metric_shift.push(log_metric_volume(m, &f.current) - metric_base[i]);
            }
            if opts.record_frames {
                f.bases.push(f.current.clone());
            }
        }
        if let Some(m) = &total {
            traj.maps.push(m.clone());
        }
        debug_assert_eq!(traj.points.len(), node + 1);
    }
    traj.frames = tracked;
    Ok(traj)
}

/// Uniform grid `{0, Δ, 2Δ, …}` up to and including `t_max` (within rounding).
pub fn uniform_grid(t_max: f64, spacing: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0 && spacing > 0.0 && t_max.is_finite()) {
        return invalid("grid needs t_max ≥ 0 and positive spacing");
    }
    let k = (t_max / spacing + 1e-9).floor() as usize;
    Ok((0..=k).map(|i| i as f64 * spacing).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::systems::*;
    use crate::symplin::LagrangianFrame;

    fn vertical(n: usize) -> Vec<(String, Frame)> {
        vec![("alpha".into(), LagrangianFrame::vertical(n).frame().clone())]
    }

    #[test]
    fn free_particle_vertical_volume() {
        let sys = FreeParticle::new(1).unwrap();
        let x = PhasePoint::new(&[0.2], &[1.0]).unwrap();
        let grid = uniform_grid(10.0, 0.5).unwrap();
        let tr = evolve_with_frames(&sys, &x, &grid, &vertical(1), &EvolveOptions::default()).unwrap();
        for (t, lv) in grid.iter().zip(tr.log_volumes("alpha").unwrap()) {
            assert!((lv - 0.5 * (1.0 + t * t).ln()).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn harmonic_vertical_volume_is_zero() {
        let x = PhasePoint::new(&[0.3], &[0.9]).unwrap();
        let grid = uniform_grid(20.0, 1.0).unwrap();
        let tr = evolve_with_frames(&HarmonicOscillator, &x, &grid, &vertical(1), &EvolveOptions::default()).unwrap();
        for lv in tr.log_volumes("alpha").unwrap() {
            assert!(lv.abs() < 1e-6);
        }
    }

    #[test]
    fn saddle_expansion_proxy() {
        let x = PhasePoint::new(&[1e-3], &[2e-3]).unwrap();
        let grid = uniform_grid(50.0, 5.0).unwrap();
        let alpha = LagrangianFrame::vertical(1);
        let completion = alpha.symplectic_completion().into_basis();
        let swapped =
            Frame::from_orthonormal(DMatrix::from_columns(&[completion.column(1), completion.column(0)])).unwrap();
        let frames = vec![("full".into(), alpha.symplectic_completion()), ("swapped".into(), swapped)];
        let tr = evolve_with_frames(&LinearSaddle, &x, &grid, &frames, &EvolveOptions::default()).unwrap();
        let proxy = tr.log_expansion_proxy().unwrap();
        assert!((proxy.last().unwrap() - 50.0).abs() < 1e-3);
        // the vertical column is the stable direction
        let stable = tr.frame("full").unwrap().log_volume_prefix(grid.len() - 1, 1);
        assert!((stable + 50.0).abs() < 1e-3);
    }

    #[test]
    fn additivity_along_pushed_frame() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.4, 1.3], &[0.9, -0.2]).unwrap();
        let opts = EvolveOptions::default();
        let whole = evolve_with_frames(&sys, &x, &[0.0, 2.0, 5.0], &vertical(2), &opts).unwrap();
        let first = evolve_with_frames(&sys, &x, &[2.0], &vertical(2), &opts).unwrap();
        let mid = first.points[0].clone();
        let pushed = Frame::from_orthonormal(first.frames[0].current().clone()).unwrap();
        let second = evolve_with_frames(&sys, &mid, &[3.0], &[("alpha".into(), pushed)], &opts).unwrap();
        let lhs = whole.frames[0].log_volume(2);
        let rhs = first.frames[0].log_volume(0) + second.frames[0].log_volume(0);
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn recorded_maps_agree_with_frames() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.4, 1.3], &[0.9, -0.2]).unwrap();
        let opts = EvolveOptions { record_maps: true, full_frame: true, ..EvolveOptions::default() };
        let grid = uniform_grid(6.0, 1.0).unwrap();
        let tr = evolve_with_frames(&sys, &x, &grid, &vertical(2), &opts).unwrap();
        let alpha = LagrangianFrame::vertical(2).frame().clone();
        for (k, m) in tr.maps.iter().enumerate() {
            let direct = crate::symplin::log_restricted_det(m, &alpha).unwrap();
            assert!((direct - tr.frames[0].log_volume(k)).abs() < 1e-9);
            assert!(symplectic_residual(m) < 1e-8 * m.amax().powi(2).max(1.0));
        }
        assert_eq!(tr.frames.len(), 2);
        assert_eq!(tr.frames[1].name, "full");
    }

    #[test]
    fn scalar_metric_leaves_volumes_unchanged() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.4, 1.3], &[0.9, -0.2]).unwrap();
        let grid = uniform_grid(4.0, 1.0).unwrap();
        let opts = EvolveOptions { metric: Some(DVector::from_element(4, 3.0)), ..EvolveOptions::default() };
        let tr = evolve_with_frames(&sys, &x, &grid, &vertical(2), &opts).unwrap();
        for (a, b) in tr.frames[0].log_volumes().iter().zip(tr.frames[0].metric_log_volumes()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = PhasePoint::new(&[0.0], &[1.0]).unwrap();
        let o = EvolveOptions::default();
        assert!(evolve_with_frames(&HarmonicOscillator, &x, &[], &[], &o).is_err());
        assert!(evolve_with_frames(&HarmonicOscillator, &x, &[1.0, 1.0], &[], &o).is_err());
        let bad = Frame::coordinate(4, &[0]).unwrap();
        assert!(evolve_with_frames(&HarmonicOscillator, &x, &[1.0], &[("b".into(), bad)], &o).is_err());
    }

    #[test]
    fn energy_bound_is_enforced() {
        let x = PhasePoint::new(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let opts = EvolveOptions { dt: 0.2, energy_bound: Some(1e-12), ..EvolveOptions::default() };
        let r = evolve_with_frames(&sys, &x, &[5.0], &[], &opts);
        assert!(matches!(r, Err(Error::EnergyDrift { .. })));
    }

    #[test]
    fn nonfinite_state_is_reported() {
        // H = -q³/3: p' = q², finite-time blow-up
        let sys = FnSystem::new(
            "blowup",
            1,
            vec![false],
            |z| 0.5 * z[1] * z[1] - z[0].powi(3) / 3.0,
            |z, g| {
                g[0] = -z[0] * z[0];
                g[1] = z[1];
            },
            |z, h| {
                h.fill(0.0);
                h[(0, 0)] = -2.0 * z[0];
                h[(1, 1)] = 1.0;
            },
        )
        .unwrap();
        let x = PhasePoint::new(&[10.0], &[10.0]).unwrap();
        let r = evolve_with_frames(&sys, &x, &[100.0], &[], &EvolveOptions::with_dt(0.05));
        assert!(matches!(r, Err(Error::NonFinite { .. }) | Err(Error::SolverDivergence { .. })), "{r:?}");
    }
}
