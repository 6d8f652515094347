//! Hamiltonian systems on `T*(T^k × R^{n−k})` with the canonical form.
//!
//! State vectors are flat slices `z = (q_1..q_n, p_1..p_n)`. Evaluators write into
//! caller-owned buffers so that the stepping loops do not allocate.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// A point `x = (q, p)` of phase space. Periodic coordinates are stored in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    z: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return invalid("q and p must have the same positive length");
        }
        let mut z = DVector::zeros(2 * q.len());
        z.as_mut_slice()[..q.len()].copy_from_slice(q);
        z.as_mut_slice()[q.len()..].copy_from_slice(p);
        Ok(Self { z })
    }

    pub fn from_vector(z: DVector<f64>) -> Result<Self> {
        if !z.len().is_multiple_of(2) || z.is_empty() {
            return invalid("phase vector must have even positive length");
        }
        Ok(Self { z })
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        Self::from_vector(DVector::from_column_slice(z))
    }

    pub fn dof(&self) -> usize {
        self.z.len() / 2
    }

    pub fn q(&self) -> &[f64] {
        &self.z.as_slice()[..self.dof()]
    }

    pub fn p(&self) -> &[f64] {
        &self.z.as_slice()[self.dof()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.z.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.z
    }
}

/// Wraps periodic configuration coordinates of `z` into `[0, 2π)`.
pub fn wrap_periodic(periodic: &[bool], z: &mut [f64]) {
    for (i, &per) in periodic.iter().enumerate() {
        if per {
            let w = z[i].rem_euclid(TAU);
            // rem_euclid can round up to exactly TAU
            z[i] = if w >= TAU { 0.0 } else { w };
        }
    }
}

/// `H = K(p) + V(q)`, enabling the explicit leapfrog fast path.
pub trait Separable {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]);
    /// Row-major `n × n` block `K_pp`.
    fn kinetic_hessian(&self, p: &[f64], out: &mut [f64]);
    fn potential_gradient(&self, q: &[f64], out: &mut [f64]);
    /// Row-major `n × n` block `V_qq`.
    fn potential_hessian(&self, q: &[f64], out: &mut [f64]);
}

/// A smooth Hamiltonian with first and second derivatives.
pub trait HamiltonianSystem: Send + Sync {
    fn name(&self) -> &str;

    /// Degrees of freedom `n`; phase space has dimension `2n`.
    fn dof(&self) -> usize;

    /// Parameter values, in a fixed order, for reports.
    fn params(&self) -> Vec<(String, f64)> {
        Vec::new()
    }

    /// Per configuration coordinate: periodic with period `2π`?
    fn periodic(&self) -> Vec<bool>;

    fn energy(&self, z: &[f64]) -> f64;

    /// `∇H = (H_q, H_p)`.
    fn gradient(&self, z: &[f64], out: &mut [f64]);

    /// Symmetric `2n × 2n` Hessian in `(q, p)` block order.
    fn hessian(&self, z: &[f64], out: &mut DMatrix<f64>);

    fn separable(&self) -> Option<&dyn Separable> {
        None
    }

    /// Closed-form fiber propagator over `dt` starting at `z`, replacing the Jacobian of the
    /// discrete step. Returns `false` when the tangent cocycle is the derivative of the flow.
    fn fiber_propagator(&self, _z: &[f64], _dt: f64, _out: &mut DMatrix<f64>) -> bool {
        false
    }

    /// Infinitesimal generator of the tangent cocycle at `z`; `D X_H` unless overridden.
    fn cocycle_generator(&self, z: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(z.len(), z.len());
        self.hessian(z, &mut h);
        vector_field_jacobian(&h)
    }

    /// Box (per coordinate `[lo, hi]`) containing `{H ≤ e_max}`, when known.
    fn bounding_box(&self, _e_max: f64) -> Option<Vec<(f64, f64)>> {
        None
    }
}

impl fmt::Debug for dyn HamiltonianSystem + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSystem").field("name", &self.name()).field("params", &self.params()).finish()
    }
}

/// `D X_H = [[H_pq, H_pp], [−H_qq, −H_qp]]` from the Hessian.
pub fn vector_field_jacobian(hess: &DMatrix<f64>) -> DMatrix<f64> {
    let n = hess.nrows() / 2;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = hess[(n + i, j)];
            a[(i, n + j)] = hess[(n + i, n + j)];
            a[(n + i, j)] = -hess[(i, j)];
            a[(n + i, n + j)] = -hess[(i, n + j)];
        }
    }
    a
}

fn separable_gradient(s: &dyn Separable, n: usize, z: &[f64], out: &mut [f64]) {
    let (q, p) = z.split_at(n);
    let (gq, gp) = out.split_at_mut(n);
    s.potential_gradient(q, gq);
    s.kinetic_gradient(p, gp);
}

fn separable_hessian(s: &dyn Separable, n: usize, z: &[f64], out: &mut DMatrix<f64>) {
    let (q, p) = z.split_at(n);
    let mut vqq = vec![0.0; n * n];
    let mut kpp = vec![0.0; n * n];
    s.potential_hessian(q, &mut vqq);
    s.kinetic_hessian(p, &mut kpp);
    out.fill(0.0);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = vqq[i * n + j];
            out[(n + i, n + j)] = kpp[i * n + j];
        }
    }
}

/// Diagonal quadratic kinetic energy `Σ m_i p_i² / 2`.
fn quadratic_kinetic(masses: &[f64], p: &[f64]) -> f64 {
    masses.iter().zip(p).map(|(m, p)| 0.5 * m * p * p).sum()
}

/// Free particle `H = |p|²/2` on `T*T^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParticle {
    pub n: usize,
}

impl FreeParticle {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("free particle needs at least one degree of freedom");
        }
        Ok(Self { n })
    }
}

impl Separable for FreeParticle {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }
    fn kinetic_hessian(&self, _p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.n {
            out[i * self.n + i] = 1.0;
        }
    }
    fn potential_gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn potential_hessian(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl HamiltonianSystem for FreeParticle {
    fn name(&self) -> &str {
        "free_particle"
    }
    fn dof(&self) -> usize {
        self.n
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("n".into(), self.n as f64)]
    }
    fn periodic(&self) -> Vec<bool> {
        vec![true; self.n]
    }
    fn energy(&self, z: &[f64]) -> f64 {
        z[self.n..].iter().map(|p| 0.5 * p * p).sum()
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        separable_gradient(self, self.n, z, out)
    }
    fn hessian(&self, z: &[f64], out: &mut DMatrix<f64>) {
        separable_hessian(self, self.n, z, out)
    }
    fn separable(&self) -> Option<&dyn Separable> {
        Some(self)
    }
    fn bounding_box(&self, e_max: f64) -> Option<Vec<(f64, f64)>> {
        let pm = (2.0 * e_max.max(0.0)).sqrt() * (1.0 + 1e-9);
        let mut b = vec![(0.0, TAU); self.n];
        b.extend(std::iter::repeat_n((-pm, pm), self.n));
        Some(b)
    }
}

/// Harmonic oscillator `H = (q² + p²)/2` on `R²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarmonicOscillator;

impl Separable for HarmonicOscillator {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out[0] = p[0];
    }
    fn kinetic_hessian(&self, _p: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        out[0] = q[0];
    }
    fn potential_hessian(&self, _q: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
}

impl HamiltonianSystem for HarmonicOscillator {
    fn name(&self) -> &str {
        "harmonic"
    }
    fn dof(&self) -> usize {
        1
    }
    fn periodic(&self) -> Vec<bool> {
        vec![false]
    }
    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * (z[0] * z[0] + z[1] * z[1])
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[0];
        out[1] = z[1];
    }
    fn hessian(&self, _z: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 0)] = 1.0;
        out[(1, 1)] = 1.0;
    }
    fn separable(&self) -> Option<&dyn Separable> {
        Some(self)
    }
    fn bounding_box(&self, e_max: f64) -> Option<Vec<(f64, f64)>> {
        let r = (2.0 * e_max.max(0.0)).sqrt() * (1.0 + 1e-9);
        Some(vec![(-r, r), (-r, r)])
    }
}

/// `H = (m₁p₁² + m₂p₂²)/2 + c₁ cos q₁ + c₂ cos q₂ + c₃ cos(q₁ + q₂)` on `T*T²`.
///
/// With `m₁ = m₂ = 1` this is the standard nonintegrable mechanical system; negative
/// `m_i` produce indefinite kinetic energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalTorus {
    pub c: [f64; 3],
    pub m: [f64; 2],
}

impl MechanicalTorus {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self { c: [c1, c2, c3], m: [1.0, 1.0] }
    }

    pub fn with_masses(mut self, m1: f64, m2: f64) -> Self {
        self.m = [m1, m2];
        self
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        self.c[0] * q[0].cos() + self.c[1] * q[1].cos() + self.c[2] * (q[0] + q[1]).cos()
    }

    fn potential_bounds(&self) -> (f64, f64) {
        let s: f64 = self.c.iter().map(|c| c.abs()).sum();
        (-s, s)
    }
}

impl Separable for MechanicalTorus {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out[0] = self.m[0] * p[0];
        out[1] = self.m[1] * p[1];
    }
    fn kinetic_hessian(&self, _p: &[f64], out: &mut [f64]) {
        out[0] = self.m[0];
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = self.m[1];
    }
    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        let s12 = (q[0] + q[1]).sin();
        out[0] = -self.c[0] * q[0].sin() - self.c[2] * s12;
        out[1] = -self.c[1] * q[1].sin() - self.c[2] * s12;
    }
    fn potential_hessian(&self, q: &[f64], out: &mut [f64]) {
        let c12 = (q[0] + q[1]).cos();
        out[0] = -self.c[0] * q[0].cos() - self.c[2] * c12;
        out[1] = -self.c[2] * c12;
        out[2] = out[1];
        out[3] = -self.c[1] * q[1].cos() - self.c[2] * c12;
    }
}

impl HamiltonianSystem for MechanicalTorus {
    fn name(&self) -> &str {
        "mechanical_torus"
    }
    fn dof(&self) -> usize {
        2
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![
            ("c1".into(), self.c[0]),
            ("c2".into(), self.c[1]),
            ("c3".into(), self.c[2]),
            ("m1".into(), self.m[0]),
            ("m2".into(), self.m[1]),
        ]
    }
    fn periodic(&self) -> Vec<bool> {
        vec![true, true]
    }
    fn energy(&self, z: &[f64]) -> f64 {
        quadratic_kinetic(&self.m, &z[2..]) + self.potential(&z[..2])
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        separable_gradient(self, 2, z, out)
    }
    fn hessian(&self, z: &[f64], out: &mut DMatrix<f64>) {
        separable_hessian(self, 2, z, out)
    }
    fn separable(&self) -> Option<&dyn Separable> {
        Some(self)
    }
    fn bounding_box(&self, e_max: f64) -> Option<Vec<(f64, f64)>> {
        if self.m.iter().any(|&m| m <= 0.0) {
            return None;
        }
        let (vmin, _) = self.potential_bounds();
        let kmax = (e_max - vmin).max(0.0);
        let mut b = vec![(0.0, TAU); 2];
        for m in self.m {
            let pm = (2.0 * kmax / m).sqrt() * (1.0 + 1e-9);
            b.push((-pm, pm));
        }
        Some(b)
    }
}

/// Linear saddle `H = q p`, whose flow is `diag(e^t, e^{−t})`. Non-compact.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearSaddle;

impl HamiltonianSystem for LinearSaddle {
    fn name(&self) -> &str {
        "saddle"
    }
    fn dof(&self) -> usize {
        1
    }
    fn periodic(&self) -> Vec<bool> {
        vec![false]
    }
    fn energy(&self, z: &[f64]) -> f64 {
        z[0] * z[1]
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[1];
        out[1] = z[0];
    }
    fn hessian(&self, _z: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 1)] = 1.0;
        out[(1, 0)] = 1.0;
    }
}

/// Constant-curvature Jacobi benchmark.
///
/// The base flow is the free particle on `T*T²`; the tangent cocycle is replaced by the
/// linearized geodesic flow of a surface of curvature `−κ²`: along `p̂` it shears like the
/// free particle, while perpendicular Jacobi fields obey `u'' = κ²|p|² u`. The cocycle
/// generator is `[[0, I], [κ²(|p|² I − p pᵀ), 0]]` and its propagator is closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiBenchmark {
    pub kappa: f64,
    base: FreeParticleTwo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FreeParticleTwo;

impl JacobiBenchmark {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return invalid("kappa must be finite and nonnegative");
        }
        Ok(Self { kappa, base: FreeParticleTwo })
    }

    /// Closed-form propagator over time `t` for momentum `p`.
    pub fn propagator(&self, p: &[f64], t: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(4, 4);
        self.write_propagator(p, t, &mut out);
        out
    }

    fn write_propagator(&self, p: &[f64], t: f64, out: &mut DMatrix<f64>) {
        let s = (p[0] * p[0] + p[1] * p[1]).sqrt();
        out.fill(0.0);
        for i in 0..4 {
            out[(i, i)] = 1.0;
        }
        if s == 0.0 {
            out[(0, 2)] = t;
            out[(1, 3)] = t;
            return;
        }
        let u = [p[0] / s, p[1] / s];
        let ks = self.kappa * s;
        let x = ks * t;
        let (ch, sh) = (x.cosh(), x.sinh());
        let sh_over = if ks == 0.0 { t } else { sh / ks };
        for i in 0..2 {
            for j in 0..2 {
                let par = u[i] * u[j];
                let perp = if i == j { 1.0 } else { 0.0 } - par;
                out[(i, j)] = par + ch * perp;
                out[(i, 2 + j)] = t * par + sh_over * perp;
                out[(2 + i, j)] = ks * sh * perp;
                out[(2 + i, 2 + j)] = par + ch * perp;
            }
        }
    }
}

impl Separable for FreeParticleTwo {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }
    fn kinetic_hessian(&self, _p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    }
    fn potential_gradient(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn potential_hessian(&self, _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl HamiltonianSystem for JacobiBenchmark {
    fn name(&self) -> &str {
        "jacobi"
    }
    fn dof(&self) -> usize {
        2
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("kappa".into(), self.kappa)]
    }
    fn periodic(&self) -> Vec<bool> {
        vec![true, true]
    }
    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * (z[2] * z[2] + z[3] * z[3])
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        separable_gradient(&self.base, 2, z, out)
    }
    fn hessian(&self, z: &[f64], out: &mut DMatrix<f64>) {
        separable_hessian(&self.base, 2, z, out)
    }
    fn separable(&self) -> Option<&dyn Separable> {
        Some(&self.base)
    }
    fn fiber_propagator(&self, z: &[f64], dt: f64, out: &mut DMatrix<f64>) -> bool {
        self.write_propagator(&z[2..], dt, out);
        true
    }
    fn cocycle_generator(&self, z: &[f64]) -> DMatrix<f64> {
        let p = &z[2..];
        let s2 = p[0] * p[0] + p[1] * p[1];
        let k2 = self.kappa * self.kappa;
        let mut a = DMatrix::zeros(4, 4);
        for i in 0..2 {
            a[(i, 2 + i)] = 1.0;
            for j in 0..2 {
                let id = if i == j { s2 } else { 0.0 };
                a[(2 + i, j)] = k2 * (id - p[i] * p[j]);
            }
        }
        a
    }
    fn bounding_box(&self, e_max: f64) -> Option<Vec<(f64, f64)>> {
        let pm = (2.0 * e_max.max(0.0)).sqrt() * (1.0 + 1e-9);
        Some(vec![(0.0, TAU), (0.0, TAU), (-pm, pm), (-pm, pm)])
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type MatrixFn = dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync;

/// User-defined Hamiltonian from closures; always integrated by the implicit midpoint rule.
pub struct FnSystem {
    name: String,
    n: usize,
    periodic: Vec<bool>,
    energy: Box<ScalarFn>,
    gradient: Box<VectorFn>,
    hessian: Box<MatrixFn>,
    bounding_box: Option<Vec<(f64, f64)>>,
}

impl FnSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        periodic: Vec<bool>,
        energy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: impl Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 || periodic.len() != n {
            return invalid("periodic flags must match the number of degrees of freedom");
        }
        Ok(Self {
            name: name.into(),
            n,
            periodic,
            energy: Box::new(energy),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
            bounding_box: None,
        })
    }

    /// Sampling box returned for every energy.
    pub fn with_box(mut self, b: Vec<(f64, f64)>) -> Self {
        self.bounding_box = Some(b);
        self
    }
}

impl HamiltonianSystem for FnSystem {
    fn name(&self) -> &str {
        &self.name
    }
    fn dof(&self) -> usize {
        self.n
    }
    fn periodic(&self) -> Vec<bool> {
        self.periodic.clone()
    }
    fn energy(&self, z: &[f64]) -> f64 {
        (self.energy)(z)
    }
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        (self.gradient)(z, out)
    }
    fn hessian(&self, z: &[f64], out: &mut DMatrix<f64>) {
        (self.hessian)(z, out)
    }
    fn bounding_box(&self, _e_max: f64) -> Option<Vec<(f64, f64)>> {
        self.bounding_box.clone()
    }
}

/// Convenience evaluators on [`PhasePoint`]s.
pub fn energy(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> f64 {
    sys.energy(x.as_slice())
}

pub fn gradient(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> DVector<f64> {
    let mut g = DVector::zeros(x.as_slice().len());
    sys.gradient(x.as_slice(), g.as_mut_slice());
    g
}

pub fn hessian(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> DMatrix<f64> {
    let d = x.as_slice().len();
    let mut h = DMatrix::zeros(d, d);
    sys.hessian(x.as_slice(), &mut h);
    h
}

/// `X_H = (H_p, −H_q)`.
pub fn hamiltonian_vector_field(sys: &dyn HamiltonianSystem, x: &PhasePoint) -> DVector<f64> {
    let g = gradient(sys, x);
    let n = x.dof();
    DVector::from_fn(2 * n, |i, _| if i < n { g[n + i] } else { -g[i - n] })
}

/// Catalog entry for a built-in system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// `(parameter, default, description)`
    pub params: Vec<(&'static str, f64, &'static str)>,
}

pub fn catalog() -> Vec<SystemInfo> {
    vec![
        SystemInfo {
            name: "free_particle",
            description: "H = |p|^2/2 on the cotangent bundle of the n-torus",
            params: vec![("n", 2.0, "degrees of freedom")],
        },
        SystemInfo { name: "harmonic", description: "H = (q^2 + p^2)/2 on R^2", params: vec![] },
        SystemInfo {
            name: "mechanical_torus",
            description: "H = (m1 p1^2 + m2 p2^2)/2 + c1 cos q1 + c2 cos q2 + c3 cos(q1 + q2) on T*T^2",
            params: vec![
                ("c1", 1.0, "coefficient of cos q1"),
                ("c2", 0.8, "coefficient of cos q2"),
                ("c3", 0.6, "coefficient of cos(q1 + q2)"),
                ("m1", 1.0, "inverse mass of p1"),
                ("m2", 1.0, "inverse mass of p2"),
            ],
        },
        SystemInfo {
            name: "saddle",
            description: "H = q p on R^2 (non-compact; flow diag(e^t, e^-t))",
            params: vec![],
        },
        SystemInfo {
            name: "jacobi",
            description: "free particle on T*T^2 carrying the constant-curvature -kappa^2 Jacobi cocycle",
            params: vec![("kappa", 1.0, "square root of minus the curvature")],
        },
    ]
}

/// Builds a catalog system from `(name, params)`; unknown names or parameters are rejected.
pub fn build_system(name: &str, params: &[(String, f64)]) -> Result<Box<dyn HamiltonianSystem>> {
    let info = catalog()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| crate::Error::InvalidInput(format!("unknown system `{name}`")))?;
    for (k, _) in params {
        if !info.params.iter().any(|(p, _, _)| p == k) {
            return invalid(format!("unknown parameter `{k}` for system `{name}`"));
        }
    }
    let get = |key: &str| {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .or_else(|| info.params.iter().find(|(p, _, _)| *p == key).map(|(_, d, _)| *d))
            .expect("parameter is in the catalog")
    };
    Ok(match name {
        "free_particle" => {
            let n = get("n");
            if n.fract() != 0.0 || n < 1.0 {
                return invalid("parameter `n` must be a positive integer");
            }
            Box::new(FreeParticle::new(n as usize)?)
        }
        "harmonic" => Box::new(HarmonicOscillator),
        "mechanical_torus" => {
            Box::new(MechanicalTorus::new(get("c1"), get("c2"), get("c3")).with_masses(get("m1"), get("m2")))
        }
        "saddle" => Box::new(LinearSaddle),
        "jacobi" => Box::new(JacobiBenchmark::new(get("kappa"))?),
        _ => unreachable!("catalog and builder agree"),
    })
}
