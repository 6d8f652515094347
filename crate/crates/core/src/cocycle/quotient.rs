//! The reduced Lagrangian `α̃(x)` and the quotient `S(x) = T_xΣ / ⟨X_H⟩`.
//!
//! `S(x)` is represented by `W(x) = span{∇H, X_H}^⊥`, which is `J₀`-invariant; bases are
//! built in `J₀`-pairs `[w_1..w_k, J₀w_1..J₀w_k]`, so `ω_S` is the standard form.

use nalgebra::{DMatrix, DVector};

use super::distribution::LagrangianDistribution;
use crate::error::{invalid, Error, Result};
use crate::hamflow::{gradient, hamiltonian_vector_field, HamiltonianSystem, PhasePoint};
use crate::symplin::{apply_j, from_columns, omega, symplectic_residual, Frame, LagrangianFrame, RANK_TOL};

pub const CRITICAL_TOL: f64 = 1e-8;
pub const NULLSPACE_TOL: f64 = 1e-10;

fn regular_gradient(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> Result<DVector<f64>> {
    if x.dof() != sys.dof() {
        return invalid("phase point dimension does not match the system");
    }
    let g = gradient(sys, x);
    let norm = g.norm();
    if norm < CRITICAL_TOL {
        return Err(Error::NearCritical { grad_norm: norm });
    }
    Ok(g)
}

/// Orthonormal basis of `c^⊥ ⊂ ℝᵏ` (Gram-Schmidt over the coordinate axes).
fn complement_in(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let mut basis: Vec<DVector<f64>> = vec![c.normalize()];
    for axis in 0..k {
        if basis.len() == k {
            break;
        }
        let mut v = DVector::zeros(k);
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dot(&v);
                v -= b * coef;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
    }
    from_columns(k, &basis[1..])
}

/// Parts of `α̃(x) = (α(x) ∩ T_xΣ) + ⟨X_H(x)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeAlpha {
    pub frame: LagrangianFrame,
    /// Orthonormal basis of `α(x) ∩ T_xΣ`.
    pub intersection: DMatrix<f64>,
    pub xh_unit: DVector<f64>,
}

pub fn tilde_alpha_parts(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
) -> Result<TildeAlpha> {
    let n = x.dof();
    let g = regular_gradient(sys, x)?;
    let a = dist.at(x)?.basis().clone();
    let c = a.transpose() * &g;
    let intersection = if c.norm() <= NULLSPACE_TOL * g.norm() { a.clone() } else { &a * complement_in(&c) };
    let xh = hamiltonian_vector_field(sys, x);
    let xh_unit = &xh / xh.norm();
    let mut m = DMatrix::zeros(2 * n, intersection.ncols() + 1);
    m.set_column(0, &xh_unit);
    m.view_mut((0, 1), (2 * n, intersection.ncols())).copy_from(&intersection);
    let sv = m.singular_values();
    let lead = sv.max();
    let rank = sv.iter().filter(|s| **s > RANK_TOL * lead).count();
    if rank != n {
        return Err(Error::Degenerate { expected: n, found: rank });
    }
    let frame = if intersection.ncols() == n {
        // α ⊂ T_xΣ forces X_H ∈ α
        Frame::orthonormalize(&intersection)?
    } else {
        Frame::orthonormalize(&m)?
    };
    Ok(TildeAlpha { frame: LagrangianFrame::new(frame)?, intersection, xh_unit })
}

/// `α̃(x)`: an `n`-dimensional Lagrangian subspace of `T_xΣ` containing `X_H(x)`.
pub fn tilde_alpha(
    sys: &dyn HamiltonianSystem,
    dist: &LagrangianDistribution,
    x: &PhasePoint,
) -> Result<LagrangianFrame> {
    Ok(tilde_alpha_parts(sys, dist, x)?.frame)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientFrame {
    pub x: PhasePoint,
    pub normal: DVector<f64>,
    pub xh_unit: DVector<f64>,
    /// Orthonormal basis of `T_xΣ = ∇H^⊥` (dimension `2n − 1`), `X_H` first.
    pub tangent: DMatrix<f64>,
    /// Orthonormal basis of `W(x)` (dimension `2n − 2`).
    pub w: DMatrix<f64>,
    /// `ω_S` in the basis `w`.
    pub omega_s: DMatrix<f64>,
}

impl QuotientFrame {
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// `p_x`: coordinates in `W(x)` of the orthogonal projection.
    pub fn project(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.w.transpose() * v
    }
}

/// Builds `W(x)` from `J₀`-pairs, trying the columns of `seeds` before the coordinate axes.
pub fn quotient_space_seeded(
    sys: &dyn HamiltonianSystem,
    x: &PhasePoint,
    seeds: Option<&DMatrix<f64>>,
) -> Result<QuotientFrame> {
    let g = regular_gradient(sys, x)?;
    let n = x.dof();
    let d = 2 * n;
    let normal = &g / g.norm();
    let xh = hamiltonian_vector_field(sys, x);
    let xh_unit = &xh / xh.norm();
    let mut taken: Vec<DVector<f64>> = vec![normal.clone(), xh_unit.clone()];
    let mut firsts: Vec<DVector<f64>> = Vec::new();
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    if let Some(s) = seeds {
        if s.nrows() != d {
            return invalid("seed vectors must live in phase space");
        }
        candidates.extend(s.column_iter().map(|c| c.into_owned()));
    }
    for axis in 0..d {
        let mut v = DVector::zeros(d);
        v[axis] = 1.0;
        candidates.push(v);
    }
    let j = apply_j(&DMatrix::identity(d, d));
    for mut v in candidates {
        if firsts.len() == n - 1 {
            break;
        }
        for _ in 0..2 {
            for b in &taken {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let nv = v.norm();
        if nv <= 1e-6 {
            continue;
        }
        let v = v / nv;
        let jv = &j * &v;
        taken.push(v.clone());
        taken.push(jv);
        firsts.push(v);
    }
    if firsts.len() != n - 1 {
        return Err(Error::Degenerate { expected: 2 * n - 2, found: 2 * firsts.len() });
    }
    let mut cols = firsts.clone();
    cols.extend(firsts.iter().map(|v| &j * v));
    let w = from_columns(d, &cols);
    let mut tcols = vec![xh_unit.clone()];
    tcols.extend(cols.iter().cloned());
    let tangent = from_columns(d, &tcols);
    let omega_s = w.transpose() * omega(n) * &w;
    Ok(QuotientFrame { x: x.clone(), normal, xh_unit, tangent, w, omega_s })
}

pub fn quotient_space(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> Result<QuotientFrame> {
    quotient_space_seeded(sys, x, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescendedMap {
    /// `p_y ∘ M` restricted to `W(x)`, in the bases `w(x)`, `w(y)`.
    pub mat: DMatrix<f64>,
    /// `|n̂_yᵀ M W_x| / ‖M‖`: how far `M` pushes `W(x)` off `T_yΣ`.
    pub leakage: f64,
    /// `max |Dᵀ ω_S(y) D − ω_S(x)|`.
    pub symplectic_residual: f64,
}

impl DescendedMap {
    /// Log volume growth on the span of `coords` (coordinates in `W(x)`).
    pub fn log_det_on(&self, coords: &DMatrix<f64>) -> f64 {
        crate::symplin::log_volume(&(&self.mat * coords)) - crate::symplin::log_volume(coords)
    }
}

/// Default relative leakage tolerance for [`descend_cocycle`].
pub const LEAKAGE_TOL: f64 = 1e-6;

pub fn descend_cocycle(
    m: &DMatrix<f64>,
    qx: &QuotientFrame,
    qy: &QuotientFrame,
    leak_tol: f64,
) -> Result<DescendedMap> {
    let d = qx.x.as_slice().len();
    if m.nrows() != d || m.ncols() != d || qy.x.as_slice().len() != d {
        return invalid("map and quotient frames have inconsistent dimensions");
    }
    if qx.dim() == 0 {
        return Ok(DescendedMap { mat: DMatrix::zeros(0, 0), leakage: 0.0, symplectic_residual: 0.0 });
    }
    let pushed = m * &qx.w;
    let scale = m.norm().max(1.0);
    let leakage = (qy.normal.transpose() * &pushed).amax() / scale;
    if leakage > leak_tol {
        return Err(Error::LevelInvariance { leakage, tol: leak_tol });
    }
    let mat = qy.w.transpose() * pushed;
    let symplectic_residual = (mat.transpose() * &qy.omega_s * &mat - &qx.omega_s).amax();
    Ok(DescendedMap { mat, leakage, symplectic_residual })
}

/// Symplectic residual of a descended map with the standard quotient form.
pub fn quotient_symplectic_residual(d: &DescendedMap) -> f64 {
    if d.mat.nrows() == 0 {
        0.0
    } else {
        symplectic_residual(&d.mat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::fiber::{FiberMap, TangentCocycle};
    use crate::hamflow::{sample_shell, FreeParticle, HarmonicOscillator, MechanicalTorus, ShellSpec};

    #[test]
    fn free_particle_tilde_alpha() {
        let sys = FreeParticle::new(2).unwrap();
        let x = PhasePoint::new(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        let f = tilde_alpha(&sys, &LagrangianDistribution::Vertical, &x).unwrap();
        let proj = f.frame().projector();
        let mut expect = DMatrix::zeros(4, 4);
        expect[(0, 0)] = 1.0;
        expect[(3, 3)] = 1.0;
        assert!((proj - expect).amax() < 1e-14);
    }

    #[test]
    fn harmonic_tilde_alpha_is_flow_direction() {
        let x = PhasePoint::new(&[0.6], &[0.8]).unwrap();
        let f = tilde_alpha(&HarmonicOscillator, &LagrangianDistribution::Vertical, &x).unwrap();
        let xh = hamiltonian_vector_field(&HarmonicOscillator, &x);
        let b = f.basis().column(0).into_owned();
        assert!((b.dot(&xh).abs() - xh.norm()).abs() < 1e-14);
    }

    #[test]
    fn tilde_alpha_isotropic_on_shell() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let pts = sample_shell(&sys, &ShellSpec::new(1.0, 0.1, 1000, 8)).unwrap().points;
        for x in &pts {
            let f = tilde_alpha(&sys, &LagrangianDistribution::Vertical, x).unwrap();
            assert_eq!(f.half_dim(), 2);
            assert!(f.frame().isotropy_residual() <= 1e-10);
            let g = gradient(&sys, x);
            assert!((f.basis().transpose() * &g).amax() < 1e-10 * g.norm().max(1.0));
        }
    }

    #[test]
    fn critical_point_rejected() {
        let x = PhasePoint::new(&[0.0], &[0.0]).unwrap();
        let r = tilde_alpha(&HarmonicOscillator, &LagrangianDistribution::Vertical, &x);
        assert!(matches!(r, Err(Error::NearCritical { .. })));
        assert!(matches!(quotient_space(&HarmonicOscillator, &x), Err(Error::NearCritical { .. })));
    }

    #[test]
    fn quotient_examples() {
        let x1 = PhasePoint::new(&[0.2], &[0.9]).unwrap();
        let q1 = quotient_space(&HarmonicOscillator, &x1).unwrap();
        assert_eq!(q1.dim(), 0);
        assert_eq!(q1.omega_s.nrows(), 0);
        let sys = FreeParticle::new(2).unwrap();
        let x = PhasePoint::new(&[0.5, 0.5], &[0.6, 0.8]).unwrap();
        let q = quotient_space(&sys, &x).unwrap();
        assert_eq!(q.dim(), 2);
        assert!((&q.omega_s + q.omega_s.transpose()).amax() < 1e-15);
        assert!(q.omega_s[(0, 1)].abs() > 0.5);
        // ω_S on representatives is ω₀
        let v = q.w.column(0).into_owned();
        let w = q.w.column(1).into_owned();
        let direct = crate::symplin::symplectic_pairing(2, v.as_slice(), w.as_slice());
        assert!((direct - q.omega_s[(0, 1)]).abs() < 1e-12);
        assert!(crate::symplin::orthonormality_error(&q.tangent) < 1e-14);
    }

    #[test]
    fn descend_identity_and_harmonic() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let x = PhasePoint::new(&[0.2, 1.0], &[0.9, 0.3]).unwrap();
        let q = quotient_space(&sys, &x).unwrap();
        let d = descend_cocycle(&DMatrix::identity(4, 4), &q, &q, LEAKAGE_TOL).unwrap();
        assert!((d.mat - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        let x1 = PhasePoint::new(&[0.2], &[0.9]).unwrap();
        let q1 = quotient_space(&HarmonicOscillator, &x1).unwrap();
        let m = TangentCocycle::new(&HarmonicOscillator, 1e-3).fiber(&x1, 1.0).unwrap();
        let y = TangentCocycle::new(&HarmonicOscillator, 1e-3).base_flow(&x1, 1.0).unwrap();
        let d1 = descend_cocycle(&m, &q1, &quotient_space(&HarmonicOscillator, &y).unwrap(), LEAKAGE_TOL).unwrap();
        assert_eq!(d1.mat.nrows(), 0);
        assert_eq!(d1.log_det_on(&DMatrix::zeros(0, 0)), 0.0);
    }

    #[test]
    fn descended_maps_are_symplectic_and_compose() {
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        // the residual tracks the O(dt²) level drift of the discrete flow
        let fm = TangentCocycle::new(&sys, 1e-4);
        let x = PhasePoint::new(&[0.2, 1.0], &[0.9, 0.3]).unwrap();
        let qx = quotient_space(&sys, &x).unwrap();
        for t in [1.0, 5.0, 10.0] {
            let m = fm.fiber(&x, t).unwrap();
            let y = fm.base_flow(&x, t).unwrap();
            let qy = quotient_space(&sys, &y).unwrap();
            let d = descend_cocycle(&m, &qx, &qy, LEAKAGE_TOL).unwrap();
            assert!(d.symplectic_residual <= 1e-6, "t = {t}: {:e}", d.symplectic_residual);
        }
        let y1 = fm.base_flow(&x, 2.0).unwrap();
        let y2 = fm.base_flow(&y1, 3.0).unwrap();
        let (m1, m2) = (fm.fiber(&x, 2.0).unwrap(), fm.fiber(&y1, 3.0).unwrap());
        let (q1, q2) = (quotient_space(&sys, &y1).unwrap(), quotient_space(&sys, &y2).unwrap());
        let d1 = descend_cocycle(&m1, &qx, &q1, LEAKAGE_TOL).unwrap();
        let d2 = descend_cocycle(&m2, &q1, &q2, LEAKAGE_TOL).unwrap();
        let d12 = descend_cocycle(&(&m2 * &m1), &qx, &q2, LEAKAGE_TOL).unwrap();
        assert!((d12.mat - d2.mat * d1.mat).amax() < 1e-6);
    }

    #[test]
    fn leakage_is_detected() {
        let sys = FreeParticle::new(2).unwrap();
        let x = PhasePoint::new(&[0.5, 0.5], &[0.6, 0.8]).unwrap();
        let q = quotient_space(&sys, &x).unwrap();
        // rotate q1 into p1: mixes W into the normal direction
        let m = crate::symplin::random::plane_rotation(2, 0, 0.3);
        assert!(matches!(descend_cocycle(&m, &q, &q, LEAKAGE_TOL), Err(Error::LevelInvariance { .. })));
    }
}
