//! Flow-invariant hyperplane fields inside energy levels.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hamflow::{evolve_with_frames, gradient, hamiltonian_vector_field, hessian, sample_level, EvolveOptions};
use crate::hamflow::{HamiltonianSystem, PhasePoint};
use crate::symplin::Frame;

/// Absolute tolerance on `|P_{TΣ} ∇(p·H_p)|`.
pub const CONTACT_TOL: f64 = 1e-8;
/// Lower bound on `|p·H_p|` for the contact field to be transversal to `X_H`.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;
pub const PROBE_COUNT: usize = 32;
pub const PROBE_SEED: u64 = 0x5eed_f1e1d;
/// Relative tolerance for the invariance check of injected fields.
pub const CUSTOM_FIELD_TOL: f64 = 1e-6;
pub const CUSTOM_FIELD_HORIZON: f64 = 1.0;

type FieldEval = dyn Fn(&PhasePoint) -> Result<Frame> + Send + Sync;

#[derive(Clone)]
pub enum FieldKind {
    /// `ker(p·dq)` restricted to the level.
    Contact,
    Custom {
        name: String,
        eval: Arc<FieldEval>,
    },
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Contact => write!(f, "Contact"),
            Self::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperplaneReport {
    pub kind: String,
    pub probes: usize,
    /// Largest invariance residual over the probes.
    pub residual: f64,
    pub tol: f64,
    /// Range of `λ(X_H)` over the probes (`p·H_p` for the contact field).
    pub transversality_min: f64,
    pub transversality_max: f64,
}

/// A validated hyperplane field `T(x) ⊂ T_xΣ` on the level `H = e`.
#[derive(Debug, Clone)]
pub struct HyperplaneField {
    pub e: f64,
    pub kind: FieldKind,
    pub report: HyperplaneReport,
}

fn contact_parts(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> (DVector<f64>, f64, DVector<f64>) {
    let n = x.dof();
    let g = gradient(sys, x);
    let hess = hessian(sys, x);
    let p = DVector::from_column_slice(x.p());
    let hp = g.rows(n, n).into_owned();
    let lambda_xh = p.dot(&hp);
    // ∇(p·H_p) = (H_qp p, H_p + H_pp p)
    let mut d = DVector::zeros(2 * n);
    let hqp = hess.view((0, n), (n, n));
    let hpp = hess.view((n, n), (n, n));
    d.rows_mut(0, n).copy_from(&(hqp * &p));
    d.rows_mut(n, n).copy_from(&(&hp + hpp * &p));
    let gn2 = g.norm_squared();
    let tangential = if gn2 > 0.0 { &d - &g * (g.dot(&d) / gn2) } else { d };
    (g, lambda_xh, tangential)
}

/// `|P_{TΣ} ∇(p·H_p)|` at `x`: vanishes iff `ker(p·dq)|_Σ` is preserved to first order.
pub fn contact_residual(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> f64 {
    contact_parts(sys, x).2.norm()
}

/// The contact field on the level through `e`, validated on seeded probes.
pub fn hyperplane_field(sys: &dyn HamiltonianSystem, e: f64) -> Result<HyperplaneField> {
    let probes = sample_level(sys, e, PROBE_COUNT, PROBE_SEED, None)?;
    if probes.points.is_empty() {
        return invalid("no regular probe points on the level");
    }
    let mut residual = 0.0_f64;
    let mut tmin = f64::INFINITY;
    let mut tmax = f64::NEG_INFINITY;
    for x in &probes.points {
        let (_, lam, tang) = contact_parts(sys, x);
        tmin = tmin.min(lam.abs());
        tmax = tmax.max(lam.abs());
        if x.dof() > 1 {
            residual = residual.max(tang.norm());
        }
    }
    if tmin <= TRANSVERSALITY_TOL {
        return invalid(format!("contact field is not transversal to X_H: min |p·H_p| = {tmin:e}"));
    }
    if residual > CONTACT_TOL {
        return Err(Error::InvalidHyperplaneField { residual, tol: CONTACT_TOL });
    }
    Ok(HyperplaneField {
        e,
        kind: FieldKind::Contact,
        report: HyperplaneReport {
            kind: "contact".into(),
            probes: probes.points.len(),
            residual,
            tol: CONTACT_TOL,
            transversality_min: tmin,
            transversality_max: tmax,
        },
    })
}

/// Accepts a user field after checking, on seeded probes, that `T(x)` is a hyperplane of
/// `T_xΣ` and that the flow maps `T(x)` onto `T(φ_τ x)` up to [`CUSTOM_FIELD_TOL`].
pub fn hyperplane_field_custom(
    sys: &dyn HamiltonianSystem,
    e: f64,
    name: impl Into<String>,
    eval: impl Fn(&PhasePoint) -> Result<Frame> + Send + Sync + 'static,
    dt: f64,
) -> Result<HyperplaneField> {
    let eval: Arc<FieldEval> = Arc::new(eval);
    let probes = sample_level(sys, e, PROBE_COUNT, PROBE_SEED, None)?;
    let n = sys.dof();
    let mut residual = 0.0_f64;
    let mut tmin = f64::INFINITY;
    let mut tmax = f64::NEG_INFINITY;
    let opts = EvolveOptions { record_frames: true, ..EvolveOptions::with_dt(dt) };
    for x in &probes.points {
        let f = eval(x)?;
        if f.dim_ambient() != 2 * n || f.dim_sub() != 2 * n - 2 {
            return invalid("custom hyperplane field must return (2n − 2)-dimensional frames");
        }
        let (g, _, _) = contact_parts(sys, x);
        let off_level = (g.transpose() * f.basis()).amax() / g.norm();
        residual = residual.max(off_level);
        let xh = hamiltonian_vector_field(sys, x);
        let lam = (&xh - f.projector() * &xh).norm() / xh.norm();
        tmin = tmin.min(lam);
        tmax = tmax.max(lam);
        let traj = evolve_with_frames(sys, x, &[0.0, CUSTOM_FIELD_HORIZON], &[("field".into(), f)], &opts)?;
        let y = &traj.points[1];
        let pushed = &traj.frame("field").expect("tracked").bases()[1];
        let target = eval(y)?;
        let miss = (pushed - target.projector() * pushed).amax();
        residual = residual.max(miss);
    }
    if tmin <= TRANSVERSALITY_TOL {
        return invalid(format!("custom field contains X_H: min transversality {tmin:e}"));
    }
    if residual > CUSTOM_FIELD_TOL {
        return Err(Error::InvalidHyperplaneField { residual, tol: CUSTOM_FIELD_TOL });
    }
    let name = name.into();
    Ok(HyperplaneField {
        e,
        kind: FieldKind::Custom { name: name.clone(), eval },
        report: HyperplaneReport {
            kind: name,
            probes: probes.points.len(),
            residual,
            tol: CUSTOM_FIELD_TOL,
            transversality_min: tmin,
            transversality_max: tmax,
        },
    })
}

impl HyperplaneField {
    /// Orthonormal basis of `T(x)`.
    pub fn at(&self, sys: &dyn HamiltonianSystem, x: &PhasePoint) -> Result<Frame> {
        match &self.kind {
            FieldKind::Custom { eval, .. } => eval(x),
            FieldKind::Contact => {
                let n = x.dof();
                let (g, _, _) = contact_parts(sys, x);
                let mut lam = DVector::zeros(2 * n);
                lam.rows_mut(0, n).copy_from_slice(x.p());
                let constraints = DMatrix::from_columns(&[g, lam]);
                Ok(Frame::orthonormalize(&constraints)?.orth_complement())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{FnSystem, FreeParticle, JacobiBenchmark, MechanicalTorus};

    #[test]
    fn kinetic_field_accepted_with_exact_transversality() {
        let sys = FreeParticle::new(2).unwrap();
        let f = hyperplane_field(&sys, 0.5).unwrap();
        assert!(f.report.residual <= 1e-12);
        // p·H_p = 2H on the shell of half-width 1e-3 around e = 0.5
        assert!(f.report.transversality_min >= 1.0 - 2e-3 - 1e-12);
        assert!(f.report.transversality_max <= 1.0 + 2e-3 + 1e-12);
        let probes = sample_level(&sys, 0.5, 8, 3, None).unwrap();
        for x in &probes.points {
            let (_, lam, _) = contact_parts(&sys, x);
            assert!((lam - 2.0 * crate::hamflow::energy(&sys, x)).abs() < 1e-14);
        }
        let j = JacobiBenchmark::new(1.0).unwrap();
        assert!(hyperplane_field(&j, 0.5).is_ok());
    }

    #[test]
    fn potential_breaks_contact_invariance() {
        let sys = FnSystem::new(
            "cos-potential",
            2,
            vec![true, true],
            |z| 0.5 * (z[2] * z[2] + z[3] * z[3]) + z[0].cos(),
            |z, g| {
                g[0] = -z[0].sin();
                g[1] = 0.0;
                g[2] = z[2];
                g[3] = z[3];
            },
            |z, h| {
                h.fill(0.0);
                h[(0, 0)] = -z[0].cos();
                h[(2, 2)] = 1.0;
                h[(3, 3)] = 1.0;
            },
        )
        .unwrap()
        .with_box(vec![
            (0.0, 2.0 * std::f64::consts::PI),
            (0.0, 2.0 * std::f64::consts::PI),
            (-3.0, 3.0),
            (-3.0, 3.0),
        ]);
        let err = hyperplane_field(&sys, 2.0).unwrap_err();
        match err {
            Error::InvalidHyperplaneField { residual, .. } => assert!(residual > 0.1),
            other => panic!("unexpected {other:?}"),
        }
        let probes = sample_level(&sys, 2.0, 16, 7, None).unwrap();
        for x in &probes.points {
            // P_{TΣ}(−2∇V) with ∇V = (−sin q₁, 0, 0, 0)
            let r = contact_residual(&sys, x);
            let g = gradient(&sys, x);
            let dv = DVector::from_vec(vec![2.0 * x.q()[0].sin(), 0.0, 0.0, 0.0]);
            let expect = (&dv - &g * (g.dot(&dv) / g.norm_squared())).norm();
            assert!((r - expect).abs() < 1e-12);
        }
        let torus = MechanicalTorus::new(1.0, 0.8, 0.6);
        assert!(matches!(hyperplane_field(&torus, 1.0), Err(Error::InvalidHyperplaneField { .. })));
    }

    #[test]
    fn contact_frame_is_transversal_hyperplane() {
        let sys = FreeParticle::new(2).unwrap();
        let f = hyperplane_field(&sys, 0.5).unwrap();
        let x = PhasePoint::new(&[0.3, 1.0], &[0.6, 0.8]).unwrap();
        let t = f.at(&sys, &x).unwrap();
        assert_eq!(t.dim_sub(), 2);
        let xh = hamiltonian_vector_field(&sys, &x);
        assert!((t.basis().transpose() * &xh).amax() < 1e-12);
        assert!((t.basis().rows(0, 2).transpose() * DVector::from_column_slice(x.p())).amax() < 1e-12);
    }

    #[test]
    fn custom_contact_field_validates() {
        let sys = FreeParticle::new(2).unwrap();
        let contact = hyperplane_field(&sys, 0.5).unwrap();
        let sys2 = FreeParticle::new(2).unwrap();
        let f = hyperplane_field_custom(&sys, 0.5, "copy", move |x| contact.at(&sys2, x), 1e-2).unwrap();
        assert!(f.report.residual < 1e-9);
        // a constant field is not invariant
        let bad = hyperplane_field_custom(
            &sys,
            0.5,
            "fixed",
            |x| {
                let p = DVector::from_column_slice(x.p());
                let mut g = DVector::zeros(4);
                g.rows_mut(2, 2).copy_from(&p);
                let mut a = DVector::zeros(4);
                a[0] = 1.0;
                Ok(Frame::orthonormalize(&DMatrix::from_columns(&[g, a]))?.orth_complement())
            },
            1e-2,
        );
        assert!(bad.is_err());
    }
}
