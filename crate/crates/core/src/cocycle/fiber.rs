//! Linear cocycles over a flow and the composition check.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::hamflow::{evolve_with_frames, EvolveOptions, HamiltonianSystem, PhasePoint};

/// A linear cocycle `Φ_t(x)` over a flow `φ_t`.
pub trait FiberMap {
    fn dim(&self) -> usize;
    fn base_flow(&self, x: &PhasePoint, t: f64) -> Result<PhasePoint>;
    fn fiber(&self, x: &PhasePoint, t: f64) -> Result<DMatrix<f64>>;
}

/// The tangent cocycle of a Hamiltonian system, integrated at step `dt` (times `t ≥ 0`).
pub struct TangentCocycle<'a> {
    pub sys: &'a dyn HamiltonianSystem,
    pub opts: EvolveOptions,
}

impl<'a> TangentCocycle<'a> {
    pub fn new(sys: &'a dyn HamiltonianSystem, dt: f64) -> Self {
        Self { sys, opts: EvolveOptions { record_maps: true, ..EvolveOptions::with_dt(dt) } }
    }
}

impl FiberMap for TangentCocycle<'_> {
    fn dim(&self) -> usize {
        2 * self.sys.dof()
    }

    fn base_flow(&self, x: &PhasePoint, t: f64) -> Result<PhasePoint> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let tr =
            evolve_with_frames(self.sys, x, &[t], &[], &EvolveOptions { record_maps: false, ..self.opts.clone() })?;
        Ok(tr.points[0].clone())
    }

    fn fiber(&self, x: &PhasePoint, t: f64) -> Result<DMatrix<f64>> {
        if t == 0.0 {
            return Ok(DMatrix::identity(self.dim(), self.dim()));
        }
        let tr = evolve_with_frames(self.sys, x, &[t], &[], &self.opts)?;
        Ok(tr.maps[0].clone())
    }
}

/// Constant cocycle `Φ_t = exp(t A)` over the trivial flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialCocycle {
    pub generator: DMatrix<f64>,
}

impl FiberMap for ExponentialCocycle {
    fn dim(&self) -> usize {
        self.generator.nrows()
    }

    fn base_flow(&self, x: &PhasePoint, _t: f64) -> Result<PhasePoint> {
        Ok(x.clone())
    }

    fn fiber(&self, _x: &PhasePoint, t: f64) -> Result<DMatrix<f64>> {
        Ok((&self.generator * t).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleCheck {
    pub residual: f64,
    pub ok: bool,
}

/// `max |Φ_{t+s}(x) − Φ_t(φ_s x) Φ_s(x)|`.
pub fn verify_cocycle(fm: &dyn FiberMap, x: &PhasePoint, t: f64, s: f64, tol: f64) -> Result<CocycleCheck> {
    if t < 0.0 || s < 0.0 {
        return invalid("cocycle check uses nonnegative times");
    }
    let whole = fm.fiber(x, t + s)?;
    let first = fm.fiber(x, s)?;
    let y = fm.base_flow(x, s)?;
    let second = fm.fiber(&y, t)?;
    let residual = (whole - second * first).amax();
    Ok(CocycleCheck { residual, ok: residual <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{FreeParticle, MechanicalTorus};

    #[test]
    fn zero_times_are_exact() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        let c = verify_cocycle(&TangentCocycle::new(&sys, 1e-3), &x, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn free_particle_composes_exactly() {
        let sys = FreeParticle::new(2).unwrap();
        let x = PhasePoint::new(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        let fm = TangentCocycle::new(&sys, 1e-2);
        for (t, s) in [(0.5, 1.5), (3.0, 2.0), (0.0, 4.0)] {
            assert!(verify_cocycle(&fm, &x, t, s, 1e-12).unwrap().ok);
        }
    }

    #[test]
    fn mechanical_torus_composes() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.1, 2.2], &[0.9, -0.4]).unwrap();
        let c = verify_cocycle(&TangentCocycle::new(&sys, 1e-3), &x, 1.0, 1.0, 1e-6).unwrap();
        assert!(c.ok, "{}", c.residual);
    }

    #[test]
    fn exponential_cocycle() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let x = PhasePoint::new(&[0.0], &[0.0]).unwrap();
        let c = verify_cocycle(&ExponentialCocycle { generator: a }, &x, 0.7, 1.9, 1e-12).unwrap();
        assert!(c.ok, "{}", c.residual);
    }
}
