//! Positivity of the twist form and the near-tangency profile.
//!
//! For a curve `λ(h) = (dφ_h)(α(φ_{−h} x))` written as the graph `{Aξ + J₀A Z(h) ξ}` over
//! `α(x) = span A`, the form `(ζ, η) ↦ ω₀(ζ, Ṡ(0) η)` equals `Ż(0)` in the basis `A`. The
//! reported form is `B = σ Ż(0)` with `σ = −1`, so the vertical distribution gives `B = H_pp`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::distribution::LagrangianDistribution;
use crate::error::{invalid, Error, Result};
use crate::hamflow::{HamiltonianSystem, PhasePoint, Scheme, Stepper};
use crate::symplin::{angle, apply_j, omega, thin_qr, Frame};

/// Orientation sign linking the raw form to the `H_pp > 0` criterion.
pub const SIGMA: f64 = -1.0;
/// Central-difference step of the general path.
pub const FD_STEP: f64 = 1e-4;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormPath {
    Fast,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticityForm {
    /// Symmetrized `n × n` form in the orthonormal basis of `α(x)`.
    pub form: DMatrix<f64>,
    /// `max |B − Bᵀ|/2` before symmetrization.
    pub antisymmetry: f64,
    pub path: FormPath,
}

impl OpticityForm {
    pub fn min_eigenvalue(&self) -> f64 {
        if self.form.nrows() == 0 {
            return f64::INFINITY;
        }
        SymmetricEigen::new(self.form.clone()).eigenvalues.min()
    }
}

fn symmetrized(raw: DMatrix<f64>, path: FormPath) -> OpticityForm {
    let antisymmetry = (&raw - raw.transpose()).amax() / 2.0;
    let form = (&raw + raw.transpose()) * 0.5;
    OpticityForm { form, antisymmetry, path }
}

/// Fast path for locally constant distributions: `Ṡ(0)` is the cocycle generator.
pub fn opticity_form_fast(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
) -> Result<OpticityForm> {
    if !dist.locally_constant() {
        return invalid("fast path requires a locally constant distribution");
    }
    let a = dist.at(x)?.basis().clone();
    let gen = sys.cocycle_generator(x.as_slice());
    let raw = a.transpose() * omega(x.dof()) * gen * &a;
    Ok(symmetrized(raw * SIGMA, FormPath::Fast))
}

/// General path: central differences of the pushed curve at step `h`.
pub fn opticity_form_fd(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
    h: f64,
) -> Result<OpticityForm> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid("finite-difference step must be positive");
    }
    let d = 2 * sys.dof();
    let a = dist.at(x)?.basis().clone();
    let ja = apply_j(&a);
    let mut stepper = Stepper::new(sys, Scheme::Auto)?;
    let mut jac = DMatrix::zeros(d, d);
    let mut graph = |sign: f64| -> Result<DMatrix<f64>> {
        // base point φ_{∓h} x, then push its frame by ±h back to x
        let mut z = x.as_slice().to_vec();
        stepper.step(&mut z, -sign * h)?;
        let f = dist.at(&PhasePoint::from_slice(&z)?)?;
        stepper.step_with_jacobian(&mut z, sign * h, &mut jac)?;
        let l = &jac * f.basis();
        let xm = a.transpose() * &l;
        let ym = ja.transpose() * &l;
        let (_, diag) = thin_qr(&xm);
        let lead = diag.iter().cloned().fold(0.0, f64::max);
        if diag.iter().any(|r| *r <= 1e-8 * lead) {
            return Err(Error::Alignment(format!("pushed subspace is not a graph over α(x) at step {h:e}")));
        }
        let xinv = xm.try_inverse().ok_or_else(|| Error::Alignment("singular alignment block".into()))?;
        Ok(ym * xinv)
    };
    let plus = graph(1.0)?;
    let minus = graph(-1.0)?;
    let zdot = (plus - minus) / (2.0 * h);
    Ok(symmetrized(zdot * SIGMA, FormPath::FiniteDifference))
}

/// `B(ζ, η) = σ ω₀(ζ, Ṡ(0) η)` on `α(x)`.
pub fn opticity_form(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
) -> Result<OpticityForm> {
    if x.dof() != sys.dof() {
        return invalid("phase point dimension does not match the system");
    }
    if dist.locally_constant() {
        opticity_form_fast(sys, dist, x)
    } else {
        opticity_form_fd(sys, dist, x, FD_STEP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpticityReport {
    pub sample_count: usize,
    /// Smallest eigenvalue of the form at each sample.
    pub min_eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_antisymmetry: f64,
    /// Largest `|B_fast − B_fd|` over the cross-checked samples (locally constant only).
    pub fd_discrepancy: Option<f64>,
    pub tol: f64,
    pub optical: bool,
}

/// Number of samples on which the fast path is cross-checked by finite differences.
const FD_CROSS_CHECKS: usize = 8;

pub fn is_optical(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    samples: &[PhasePoint],
    tol: f64,
) -> Result<OpticityReport> {
    if samples.is_empty() {
        return invalid("opticity check needs at least one sample point");
    }
    let mut mins = Vec::with_capacity(samples.len());
    let mut max_eig = f64::NEG_INFINITY;
    let mut max_anti = 0.0_f64;
    let mut disc: Option<f64> = None;
    for (i, x) in samples.iter().enumerate() {
        let f = opticity_form(sys, dist, x)?;
        let eig = SymmetricEigen::new(f.form.clone()).eigenvalues;
        mins.push(eig.min());
        max_eig = max_eig.max(eig.max());
        max_anti = max_anti.max(f.antisymmetry);
        if f.path == FormPath::Fast && i < FD_CROSS_CHECKS {
            if let Ok(fd) = opticity_form_fd(sys, dist, x, FD_STEP) {
                let dv = (&fd.form - &f.form).amax();
                disc = Some(disc.map_or(dv, |d| d.max(dv)));
            }
        }
    }
    let min_eigenvalue = mins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OpticityReport {
        sample_count: samples.len(),
        min_eigenvalues: mins,
        min_eigenvalue,
        max_eigenvalue: max_eig,
        max_antisymmetry: max_anti,
        fd_discrepancy: disc,
        tol,
        optical: min_eigenvalue > tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwistProfile {
    pub deltas: Vec<f64>,
    /// Lebesgue measure of `{t ∈ [0, T] : angle < δ}` for each `δ`.
    pub measures: Vec<f64>,
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
}

/// Angle between `(dφ_t) α(x)` and `α(φ_t x)` on a grid of spacing `dt`, and the measure of
/// near-tangency times for each threshold.
pub fn twist_probe(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
    t_max: f64,
    deltas: &[f64],
    dt: f64,
) -> Result<TwistProfile> {
    if !(t_max > 0.0 && dt > 0.0 && dt.is_finite()) {
        return invalid("twist probe needs T > 0 and dt > 0");
    }
    if deltas.iter().any(|d| !(*d >= 0.0)) {
        return invalid("thresholds must be nonnegative");
    }
    let d = 2 * sys.dof();
    let steps = (t_max / dt).round().max(1.0) as usize;
    let h = t_max / steps as f64;
    let mut stepper = Stepper::new(sys, Scheme::Auto)?;
    let mut z = x.as_slice().to_vec();
    let mut jac = DMatrix::zeros(d, d);
    let mut pushed = dist.at(x)?.basis().clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut angles = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let here = PhasePoint::from_slice(&z)?;
        let a = angle(&Frame::from_orthonormal(pushed.clone())?, dist.at(&here)?.frame())?;
        times.push(k as f64 * h);
        angles.push(a);
        if k == steps {
            break;
        }
        stepper.step_with_jacobian(&mut z, h, &mut jac)?;
        let (q, _) = thin_qr(&(&jac * &pushed));
        pushed = q;
    }
    // each grid sample stands for a cell of width h (half cells at the ends)
    let measures = deltas
        .iter()
        .map(|&delta| {
            angles
                .iter()
                .enumerate()
                .filter(|(_, a)| **a < delta)
                .map(|(k, _)| if k == 0 || k == steps { 0.5 * h } else { h })
                .sum()
        })
        .collect();
    Ok(TwistProfile { deltas: deltas.to_vec(), measures, times, angles })
}
