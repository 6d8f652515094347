//! Symplectic one-step maps and their exact Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::systems::{vector_field_jacobian, wrap_periodic, HamiltonianSystem, PhasePoint, Separable};
use crate::error::{invalid, Error, Result};

pub const NEWTON_MAX_ITER: usize = 20;
pub const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Leapfrog for separable systems, implicit midpoint otherwise.
    #[default]
    Auto,
    ImplicitMidpoint,
    Leapfrog,
}

/// Reusable one-step integrator holding all scratch buffers.
pub struct Stepper<'a> {
    sys: &'a dyn HamiltonianSystem,
    sep: Option<&'a dyn Separable>,
    n: usize,
    periodic: Vec<bool>,
    custom_fiber: bool,
    va: Vec<f64>,
    vb: Vec<f64>,
    blk_a: Vec<f64>,
    blk_b: Vec<f64>,
    blk_c: Vec<f64>,
    z0: Vec<f64>,
    mid: Vec<f64>,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a dyn HamiltonianSystem, scheme: Scheme) -> Result<Self> {
        let n = sys.dof();
        let sep = match scheme {
            Scheme::Auto => sys.separable(),
            Scheme::ImplicitMidpoint => None,
            Scheme::Leapfrog => match sys.separable() {
                Some(s) => Some(s),
                None => return invalid(format!("leapfrog requires a separable system; `{}` is not", sys.name())),
            },
        };
        let periodic = sys.periodic();
        if periodic.len() != n {
            return invalid("domain descriptor length differs from the number of degrees of freedom");
        }
        let mut probe = DMatrix::zeros(2 * n, 2 * n);
        let custom_fiber = sys.fiber_propagator(&vec![0.0; 2 * n], 0.0, &mut probe);
        Ok(Self {
            sys,
            sep,
            n,
            periodic,
            custom_fiber,
            va: vec![0.0; n],
            vb: vec![0.0; n],
            blk_a: vec![0.0; n * n],
            blk_b: vec![0.0; n * n],
            blk_c: vec![0.0; n * n],
            z0: vec![0.0; 2 * n],
            mid: vec![0.0; 2 * n],
            grad: vec![0.0; 2 * n],
            hess: DMatrix::zeros(2 * n, 2 * n),
        })
    }

    pub fn scheme(&self) -> Scheme {
        if self.sep.is_some() {
            Scheme::Leapfrog
        } else {
            Scheme::ImplicitMidpoint
        }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    /// Advances `z` by one step of size `dt`.
    pub fn step(&mut self, z: &mut [f64], dt: f64) -> Result<()> {
        self.advance(z, dt, None)
    }

    /// Advances `z` and writes the Jacobian of the step map (or the system's fiber
    /// propagator, when it overrides the cocycle) into `jac`.
    pub fn step_with_jacobian(&mut self, z: &mut [f64], dt: f64, jac: &mut DMatrix<f64>) -> Result<()> {
        if self.custom_fiber {
            self.sys.fiber_propagator(z, dt, jac);
            self.advance(z, dt, None)
        } else {
            self.advance(z, dt, Some(jac))
        }
    }

    fn advance(&mut self, z: &mut [f64], dt: f64, jac: Option<&mut DMatrix<f64>>) -> Result<()> {
        match self.sep {
            Some(sep) => self.leapfrog(sep, z, dt, jac),
            None => self.midpoint(z, dt, jac)?,
        }
        wrap_periodic(&self.periodic, z);
        Ok(())
    }

    /// Kick-drift-kick. With `a = −h/2 V_qq(q₀)`, `b = h K_pp(p½)`, `c = −h/2 V_qq(q₁)` the
    /// Jacobian is `[[I + ba, b], [a + c(I + ba), I + cb]]`.
    fn leapfrog(&mut self, sep: &dyn Separable, z: &mut [f64], h: f64, jac: Option<&mut DMatrix<f64>>) {
        let n = self.n;
        let want_jac = jac.is_some();
        if want_jac {
            sep.potential_hessian(&z[..n], &mut self.blk_a);
        }
        sep.potential_gradient(&z[..n], &mut self.va);
        for i in 0..n {
            z[n + i] -= 0.5 * h * self.va[i];
        }
        if want_jac {
            sep.kinetic_hessian(&z[n..], &mut self.blk_b);
        }
        sep.kinetic_gradient(&z[n..], &mut self.vb);
        for i in 0..n {
            z[i] += h * self.vb[i];
        }
        sep.potential_gradient(&z[..n], &mut self.va);
        for i in 0..n {
            z[n + i] -= 0.5 * h * self.va[i];
        }
        let Some(jac) = jac else { return };
        sep.potential_hessian(&z[..n], &mut self.blk_c);
        let (a, b, c) = (&mut self.blk_a, &mut self.blk_b, &mut self.blk_c);
        for v in a.iter_mut() {
            *v *= -0.5 * h;
        }
        for v in b.iter_mut() {
            *v *= h;
        }
        for v in c.iter_mut() {
            *v *= -0.5 * h;
        }
        // top-left: I + b a
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += b[i * n + k] * a[k * n + j];
                }
                jac[(i, j)] = s;
                jac[(i, n + j)] = b[i * n + j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut lo = a[i * n + j];
                let mut hi = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    lo += c[i * n + k] * jac[(k, j)];
                    hi += c[i * n + k] * b[k * n + j];
                }
                jac[(n + i, j)] = lo;
                jac[(n + i, n + j)] = hi;
            }
        }
    }

    /// Newton solve of `z₁ = z₀ + h X_H((z₀ + z₁)/2)`; the Jacobian is the Cayley transform
    /// `(I − h/2 A)⁻¹ (I + h/2 A)` with `A = D X_H` at the converged midpoint.
    fn midpoint(&mut self, z: &mut [f64], h: f64, jac: Option<&mut DMatrix<f64>>) -> Result<()> {
        let n = self.n;
        let d = 2 * n;
        self.z0.copy_from_slice(z);
        self.sys.gradient(z, &mut self.grad);
        for i in 0..n {
            z[i] += h * self.grad[n + i];
            z[n + i] -= h * self.grad[i];
        }
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            for i in 0..d {
                self.mid[i] = 0.5 * (self.z0[i] + z[i]);
            }
            self.sys.gradient(&self.mid, &mut self.grad);
            self.sys.hessian(&self.mid, &mut self.hess);
            let a = vector_field_jacobian(&self.hess);
            let f = DVector::from_fn(d, |i, _| {
                let x = if i < n { self.grad[n + i] } else { -self.grad[i - n] };
                z[i] - self.z0[i] - h * x
            });
            let df = DMatrix::identity(d, d) - &a * (0.5 * h);
            let Some(delta) = df.lu().solve(&f) else {
                residual = f.norm();
                break;
            };
            for i in 0..d {
                z[i] -= delta[i];
            }
            residual = delta.norm();
            let scale = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            if !residual.is_finite() {
                break;
            }
            if residual <= NEWTON_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            z.copy_from_slice(&self.z0);
            return Err(Error::SolverDivergence { iterations: NEWTON_MAX_ITER, residual });
        }
        if let Some(jac) = jac {
            for i in 0..d {
                self.mid[i] = 0.5 * (self.z0[i] + z[i]);
            }
            self.sys.hessian(&self.mid, &mut self.hess);
            let a = vector_field_jacobian(&self.hess) * (0.5 * h);
            let id = DMatrix::<f64>::identity(d, d);
            let lhs = &id - &a;
            let rhs = &id + &a;
            let sol = lhs.lu().solve(&rhs).ok_or(Error::Singular { sigma_min: 0.0 })?;
            jac.copy_from(&sol);
        }
        Ok(())
    }
}

/// Integrates `x` forward over `t` and back with the same scheme; returns the largest
/// coordinate error, measured modulo `2π` in periodic coordinates and relative to
/// `max(1, |x|_∞)`.
pub fn reversibility_error(
    sys: &dyn HamiltonianSystem,
    x: &PhasePoint,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<f64> {
    checked_point(sys, x, dt)?;
    if !(t >= 0.0 && dt > 0.0) {
        return invalid("reversibility check needs t ≥ 0 and dt > 0");
    }
    let steps = (t / dt).round() as usize;
    let mut z = x.as_slice().to_vec();
    let mut stepper = Stepper::new(sys, scheme)?;
    round_trip(&mut stepper, &mut z, steps, dt)?;
    Ok(periodic_distance(&sys.periodic(), &z, x.as_slice()))
}

/// Largest round-trip error over consecutive windows of length `window` covering `[0, t]`,
/// each started from the forward trajectory; insensitive to the exponential amplification
/// of rounding that a single round trip suffers on chaotic orbits.
pub fn windowed_reversibility_error(
    sys: &dyn HamiltonianSystem,
    x: &PhasePoint,
    t: f64,
    window: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<f64> {
    checked_point(sys, x, dt)?;
    if !(t >= 0.0 && dt > 0.0 && window >= dt) {
        return invalid("reversibility check needs t ≥ 0, dt > 0 and window ≥ dt");
    }
    let steps = (t / dt).round() as usize;
    let per = ((window / dt).round() as usize).max(1);
    let mut stepper = Stepper::new(sys, scheme)?;
    let mut z = x.as_slice().to_vec();
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < steps {
        let k = per.min(steps - done);
        let mut w = z.clone();
        round_trip(&mut stepper, &mut w, k, dt)?;
        worst = worst.max(periodic_distance(&sys.periodic(), &w, &z));
        for _ in 0..k {
            stepper.step(&mut z, dt)?;
        }
        done += k;
    }
    Ok(worst)
}

fn round_trip(stepper: &mut Stepper<'_>, z: &mut [f64], steps: usize, dt: f64) -> Result<()> {
    for _ in 0..steps {
        stepper.step(z, dt)?;
    }
    for _ in 0..steps {
        stepper.step(z, -dt)?;
    }
    Ok(())
}

fn periodic_distance(periodic: &[bool], z: &[f64], x: &[f64]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    z.iter()
        .zip(x)
        .enumerate()
        .map(|(i, (a, b))| {
            let d = a - b;
            if i < periodic.len() && periodic[i] {
                (d - tau * (d / tau).round()).abs()
            } else {
                d.abs()
            }
        })
        .fold(0.0, f64::max)
        / x.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn checked_point(sys: &dyn HamiltonianSystem, x: &PhasePoint, dt: f64) -> Result<()> {
    if x.dof() != sys.dof() {
        return invalid("phase point dimension does not match the system");
    }
    if dt == 0.0 || !dt.is_finite() {
        return invalid("time step must be finite and nonzero");
    }
    Ok(())
}

/// One symplectic step of size `dt` (leapfrog when separable, else implicit midpoint).
pub fn step(sys: &dyn HamiltonianSystem, x: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    checked_point(sys, x, dt)?;
    let mut z = x.as_slice().to_vec();
    Stepper::new(sys, Scheme::Auto)?.step(&mut z, dt)?;
    PhasePoint::from_slice(&z)
}

/// Multiplies `m` by the Jacobian of one step from `x`.
pub fn step_tangent(sys: &dyn HamiltonianSystem, x: &PhasePoint, m: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    checked_point(sys, x, dt)?;
    if m.nrows() != 2 * sys.dof() {
        return invalid("tangent matrix must have 2n rows");
    }
    let d = 2 * sys.dof();
    let mut z = x.as_slice().to_vec();
    let mut jac = DMatrix::zeros(d, d);
    Stepper::new(sys, Scheme::Auto)?.step_with_jacobian(&mut z, dt, &mut jac)?;
    Ok(jac * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::systems::*;
    use crate::symplin::check_symplectic;
    use std::f64::consts::TAU;

    #[test]
    fn free_particle_step_is_exact() {
        let fp = FreeParticle::new(2).unwrap();
        let x = PhasePoint::new(&[6.0, 0.5], &[0.7, -0.3]).unwrap();
        let dt = 0.5;
        let y = step(&fp, &x, dt).unwrap();
        assert_eq!(y.p(), x.p());
        assert!((y.q()[0] - (6.0 + 0.35f64).rem_euclid(TAU)).abs() < 1e-15);
        assert!((y.q()[1] - 0.35).abs() < 1e-15);
        let j = step_tangent(&fp, &x, &DMatrix::identity(4, 4), dt).unwrap();
        let mut expect = DMatrix::identity(4, 4);
        expect[(0, 2)] = dt;
        expect[(1, 3)] = dt;
        assert_eq!(j, expect);
    }

    #[test]
    fn harmonic_jacobian_is_rotation() {
        let dt: f64 = 1e-4;
        let x = PhasePoint::new(&[0.3], &[-0.8]).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[dt.cos(), dt.sin(), -dt.sin(), dt.cos()]);
        for scheme in [Scheme::Leapfrog, Scheme::ImplicitMidpoint] {
            let mut st = Stepper::new(&HarmonicOscillator, scheme).unwrap();
            let mut z = x.as_slice().to_vec();
            let mut jac = DMatrix::zeros(2, 2);
            st.step_with_jacobian(&mut z, dt, &mut jac).unwrap();
            assert!((&jac - &rot).amax() < 1e-12, "{scheme:?}");
        }
        // exact Cayley form of the midpoint rule at a coarser step
        let h = 1e-3;
        let c = (1.0 - h * h / 4.0) / (1.0 + h * h / 4.0);
        let s = h / (1.0 + h * h / 4.0);
        let mut st = Stepper::new(&HarmonicOscillator, Scheme::ImplicitMidpoint).unwrap();
        let mut z = x.as_slice().to_vec();
        let mut jac = DMatrix::zeros(2, 2);
        st.step_with_jacobian(&mut z, h, &mut jac).unwrap();
        let cayley = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((&jac - &cayley).amax() < 1e-15);
    }

    #[test]
    fn harmonic_returns_after_one_period() {
        let steps = (TAU / 1e-3).round() as usize;
        let dt = TAU / steps as f64;
        let x0 = [1.0, 0.0];
        for scheme in [Scheme::Leapfrog, Scheme::ImplicitMidpoint] {
            let mut st = Stepper::new(&HarmonicOscillator, scheme).unwrap();
            let mut z = x0.to_vec();
            for _ in 0..steps {
                st.step(&mut z, dt).unwrap();
            }
            let err = ((z[0] - x0[0]).powi(2) + (z[1] - x0[1]).powi(2)).sqrt();
            assert!(err < 1e-6, "{scheme:?}: {err}");
        }
    }

    #[test]
    fn jacobians_match_finite_differences_and_are_symplectic() {
        let systems: Vec<Box<dyn HamiltonianSystem>> =
            vec![Box::new(MechanicalTorus::new(1.0, 0.8, 0.6)), Box::new(LinearSaddle), Box::new(HarmonicOscillator)];
        let dt = 0.05;
        for sys in systems {
            for scheme in [Scheme::Auto, Scheme::ImplicitMidpoint] {
                let d = 2 * sys.dof();
                let z0: Vec<f64> = (0..d).map(|i| 0.3 + 0.4 * i as f64).collect();
                let mut st = Stepper::new(sys.as_ref(), scheme).unwrap();
                let mut z = z0.clone();
                let mut jac = DMatrix::zeros(d, d);
                st.step_with_jacobian(&mut z, dt, &mut jac).unwrap();
                assert!(check_symplectic(&jac, 1e-10).unwrap().ok);
                let eps = 1e-6;
                for k in 0..d {
                    let mut zp = z0.clone();
                    let mut zm = z0.clone();
                    zp[k] += eps;
                    zm[k] -= eps;
                    st.step(&mut zp, dt).unwrap();
                    st.step(&mut zm, dt).unwrap();
                    for i in 0..d {
                        let fd = (zp[i] - zm[i]) / (2.0 * eps);
                        assert!((fd - jac[(i, k)]).abs() < 1e-7, "{} {scheme:?}", sys.name());
                    }
                }
            }
        }
    }

    #[test]
    fn leapfrog_rejected_for_nonseparable() {
        assert!(Stepper::new(&LinearSaddle, Scheme::Leapfrog).is_err());
        assert_eq!(Stepper::new(&LinearSaddle, Scheme::Auto).unwrap().scheme(), Scheme::ImplicitMidpoint);
    }

    #[test]
    fn round_trips_return_to_start() {
        let x = PhasePoint::new(&[0.3, 1.0], &[0.4, -0.7]).unwrap();
        let sys = MechanicalTorus::new(1.0, 0.8, 0.6);
        let short = reversibility_error(&sys, &x, 2.0, 1e-3, Scheme::Auto).unwrap();
        assert!(short < 1e-11, "{short}");
        let whole = windowed_reversibility_error(&sys, &x, 2.0, 2.0, 1e-3, Scheme::Auto).unwrap();
        assert_eq!(whole, short);
        let windowed = windowed_reversibility_error(&sys, &x, 10.0, 1.0, 1e-3, Scheme::Auto).unwrap();
        assert!(windowed < 1e-11, "{windowed}");
        let saddle = PhasePoint::new(&[0.5], &[-0.2]).unwrap();
        assert!(reversibility_error(&LinearSaddle, &saddle, 5.0, 1e-3, Scheme::Auto).unwrap() < 1e-10);
        assert!(windowed_reversibility_error(&sys, &x, 1.0, 1e-4, 1e-3, Scheme::Auto).is_err());
    }

    #[test]
    fn step_rejects_zero_dt() {
        let x = PhasePoint::new(&[0.0], &[1.0]).unwrap();
        assert!(step(&HarmonicOscillator, &x, 0.0).is_err());
    }

    #[test]
    fn newton_divergence_is_reported() {
        // quartic oscillator H = (q² + p²)²/4 with a step far beyond its rotation period
        let sys = FnSystem::new(
            "quartic",
            1,
            vec![false],
            |z| (z[0] * z[0] + z[1] * z[1]).powi(2) / 4.0,
            |z, g| {
                let r2 = z[0] * z[0] + z[1] * z[1];
                g[0] = r2 * z[0];
                g[1] = r2 * z[1];
            },
            |z, h| {
                let r2 = z[0] * z[0] + z[1] * z[1];
                h[(0, 0)] = r2 + 2.0 * z[0] * z[0];
                h[(1, 1)] = r2 + 2.0 * z[1] * z[1];
                h[(0, 1)] = 2.0 * z[0] * z[1];
                h[(1, 0)] = h[(0, 1)];
            },
        )
        .unwrap();
        let x = PhasePoint::new(&[10.0], &[0.0]).unwrap();
        let r = step(&sys, &x, 10.0);
        assert!(matches!(r, Err(Error::SolverDivergence { iterations: NEWTON_MAX_ITER, .. })), "{r:?}");
        assert!(step(&sys, &x, 1e-4).is_ok());
    }
}
