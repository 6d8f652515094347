//! Linear algebra on the standard symplectic space `(R^{2n}, ω₀)`.
//!
//! Coordinates are ordered `(q_1..q_n, p_1..p_n)`. The fixed conventions are
//!
//! * `ω₀((a, b), (u, v)) = a·v − b·u`, i.e. `ω₀ = Σ dq_i ∧ dp_i`, with matrix `[[0, I], [−I, 0]]`;
//! * `J₀(q, p) = (−p, q)`, the complex structure compatible with `ω₀`, so that
//!   `ω₀(v, J₀ w) = ⟨v, w⟩` and `ω₀(v, J₀ v) > 0`;
//! * `X_H = ω₀-matrix · ∇H = (H_p, −H_q)`.
//!
//! Every other module takes these from here. Metric quantities (Gram matrices,
//! angles, orthonormality) use the Euclidean inner product, which is the metric
//! induced by `(ω₀, J₀)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Orthonormality tolerance for [`Frame`] columns.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Isotropy tolerance for [`LagrangianFrame`].
pub const ISOTROPY_TOL: f64 = 1e-10;
/// Rank threshold relative to the leading singular value.
pub const RANK_TOL: f64 = 1e-10;
/// Default tolerance of the symplectic invariant.
pub const SYMPLECTIC_TOL: f64 = 1e-8;
/// Singular values within this distance of 1 are treated as the neutral cluster.
const NEUTRAL_CLUSTER_TOL: f64 = 1e-9;

/// The standard symplectic vector space of half-dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SympSpace {
    n: usize,
    form: DMatrix<f64>,
    jmat: DMatrix<f64>,
}

impl SympSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("half-dimension must be positive");
        }
        Ok(Self { n, form: omega(n), jmat: complex_structure(n) })
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    pub fn jmat(&self) -> &DMatrix<f64> {
        &self.jmat
    }

    /// `ω₀(v, w)`.
    pub fn omega(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        symplectic_pairing(self.n, v.as_slice(), w.as_slice())
    }

    /// `g(v, w) = ω₀(v, J₀ w)`; equal to the Euclidean inner product.
    pub fn metric(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let jw = &self.jmat * w;
        self.omega(v, &jw)
    }
}

/// Matrix of `ω₀`: `[[0, I], [−I, 0]]`.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// Matrix of `J₀(q, p) = (−p, q)`: `[[0, −I], [I, 0]]`.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

/// `ω₀(v, w) = v_q·w_p − v_p·w_q` on raw slices of length `2n`.
pub fn symplectic_pairing(n: usize, v: &[f64], w: &[f64]) -> f64 {
    (0..n).map(|i| v[i] * w[n + i] - v[n + i] * w[i]).sum()
}

/// Applies `J₀` to every column of `m`.
pub fn apply_j(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for i in 0..n {
            out[(i, c)] = -m[(n + i, c)];
            out[(n + i, c)] = m[(i, c)];
        }
    }
    out
}

/// Subspace of `R^{2n}` carried by an orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    basis: DMatrix<f64>,
}

impl Frame {
    /// Wraps a basis that is already orthonormal (checked to [`ORTHONORMAL_TOL`]).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if !basis.nrows().is_multiple_of(2) || basis.nrows() == 0 {
            return invalid("ambient dimension must be even and positive");
        }
        if basis.ncols() > basis.nrows() {
            return invalid("more columns than ambient dimension");
        }
        let err = orthonormality_error(&basis);
        if err > ORTHONORMAL_TOL * (1 + basis.ncols()) as f64 {
            return invalid(format!("frame columns are not orthonormal (error {err:e})"));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes the columns of `m` by Gram-Schmidt. Fails if `m` is rank deficient
    /// at [`RANK_TOL`] relative to its largest column.
    pub fn orthonormalize(m: &DMatrix<f64>) -> Result<Self> {
        if !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return invalid("ambient dimension must be even and positive");
        }
        if m.ncols() == 0 {
            return Ok(Self { basis: DMatrix::zeros(m.nrows(), 0) });
        }
        if m.ncols() > m.nrows() {
            return Err(Error::Degenerate { expected: m.ncols(), found: m.nrows() });
        }
        let (q, diag) = thin_qr(m);
        let lead = diag.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        let rank = diag.iter().filter(|d| d.abs() > RANK_TOL * lead).count();
        if lead == 0.0 || rank < m.ncols() {
            return Err(Error::Degenerate { expected: m.ncols(), found: rank });
        }
        Ok(Self { basis: q })
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(dim: usize, axes: &[usize]) -> Result<Self> {
        let mut m = DMatrix::zeros(dim, axes.len());
        for (c, &a) in axes.iter().enumerate() {
            if a >= dim {
                return invalid(format!("axis {a} out of range for dimension {dim}"));
            }
            m[(a, c)] = 1.0;
        }
        Self::from_orthonormal(m)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn dim_ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim_sub(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Largest `|ω₀(v_i, v_j)|` over basis pairs.
    pub fn isotropy_residual(&self) -> f64 {
        let n = self.dim_ambient() / 2;
        let k = self.dim_sub();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in (i + 1)..k {
                let w = symplectic_pairing(n, self.basis.column(i).as_slice(), self.basis.column(j).as_slice());
                worst = worst.max(w.abs());
            }
        }
        worst
    }

    /// Orthonormal basis of the Euclidean orthogonal complement.
    pub fn orth_complement(&self) -> Frame {
        let dim = self.dim_ambient();
        let mut cols: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        let start = cols.len();
        for axis in 0..dim {
            if cols.len() == dim {
                break;
            }
            let mut v = DVector::zeros(dim);
            v[axis] = 1.0;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v.axpy(-d, c, 1.0);
                }
            }
            let nv = v.norm();
            if nv > 1e-8 {
                cols.push(v / nv);
            }
        }
        Frame { basis: from_columns(dim, &cols[start..]) }
    }
}

/// Stacks column vectors; an empty list gives a `dim × 0` matrix.
pub(crate) fn from_columns(dim: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// `max |SᵀS − I|` entrywise.
pub fn orthonormality_error(s: &DMatrix<f64>) -> f64 {
    let g = s.transpose() * s;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Thin QR by Gram-Schmidt with one reorthogonalization pass: returns `Q` (same shape as
/// `m`) and the diagonal of `R`, which is nonnegative. Exact zeros in structured inputs stay
/// exact. A column dependent on its predecessors gives a zero diagonal and a zero column.
pub(crate) fn thin_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (rows, cols) = m.shape();
    let mut q = m.clone();
    let mut diag = vec![0.0; cols];
    for j in 0..cols {
        let scale = q.column(j).amax();
        if scale == 0.0 {
            continue;
        }
        q.column_mut(j).unscale_mut(scale);
        for _ in 0..2 {
            for i in 0..j {
                if diag[i] == 0.0 {
                    continue;
                }
                let c = (0..rows).map(|r| q[(r, i)] * q[(r, j)]).sum::<f64>();
                for r in 0..rows {
                    let v = q[(r, i)];
                    q[(r, j)] -= c * v;
                }
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-15 {
            q.column_mut(j).fill(0.0);
            continue;
        }
        q.column_mut(j).unscale_mut(norm);
        diag[j] = norm * scale;
    }
    (q, diag)
}

/// Half-dimensional isotropic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    frame: Frame,
}

impl LagrangianFrame {
    pub fn new(frame: Frame) -> Result<Self> {
        if 2 * frame.dim_sub() != frame.dim_ambient() {
            return invalid(format!(
                "Lagrangian frame needs {} columns, got {}",
                frame.dim_ambient() / 2,
                frame.dim_sub()
            ));
        }
        let iso = frame.isotropy_residual();
        if iso > ISOTROPY_TOL {
            return invalid(format!("frame is not isotropic (residual {iso:e})"));
        }
        Ok(Self { frame })
    }

    /// The vertical subspace `{dq = 0}`.
    pub fn vertical(n: usize) -> Self {
        let axes: Vec<usize> = (n..2 * n).collect();
        Self { frame: Frame::coordinate(2 * n, &axes).expect("valid axes") }
    }

    /// The horizontal subspace `{dp = 0}`.
    pub fn horizontal(n: usize) -> Self {
        let axes: Vec<usize> = (0..n).collect();
        Self { frame: Frame::coordinate(2 * n, &axes).expect("valid axes") }
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        self.frame.basis()
    }

    pub fn half_dim(&self) -> usize {
        self.frame.dim_sub()
    }

    /// `[α, J₀α]`, an orthonormal symplectic basis of the whole space.
    pub fn symplectic_completion(&self) -> Frame {
        let a = self.basis();
        let ja = apply_j(a);
        let mut m = DMatrix::zeros(a.nrows(), 2 * a.ncols());
        m.columns_mut(0, a.ncols()).copy_from(a);
        m.columns_mut(a.ncols(), a.ncols()).copy_from(&ja);
        Frame { basis: m }
    }
}

/// Real `2n × 2n` matrix preserving `ω₀` (checked at construction).
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap {
    mat: DMatrix<f64>,
}

impl SymplecticMap {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(mat, SYMPLECTIC_TOL)
    }

    /// Accepts `mat` when `‖matᵀ ω₀ mat − ω₀‖ ≤ tol · max(1, ‖mat‖²)`.
    pub fn with_tolerance(mat: DMatrix<f64>, tol: f64) -> Result<Self> {
        let check = check_symplectic(&mat, tol)?;
        let scale = mat.amax().powi(2).max(1.0);
        if check.residual > tol * scale {
            return invalid(format!("matrix is not symplectic (residual {:e})", check.residual));
        }
        Ok(Self { mat })
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(2 * n, 2 * n) }
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn half_dim(&self) -> usize {
        self.mat.nrows() / 2
    }

    pub fn compose(&self, inner: &SymplecticMap) -> SymplecticMap {
        SymplecticMap { mat: &self.mat * &inner.mat }
    }

    /// Inverse via `M⁻¹ = −ω₀ Mᵀ ω₀`.
    pub fn inverse(&self) -> SymplecticMap {
        let w = omega(self.half_dim());
        SymplecticMap { mat: -(&w * self.mat.transpose() * &w) }
    }
}

/// Outcome of [`check_symplectic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticCheck {
    /// `max |MᵀωM − ω|` entrywise.
    pub residual: f64,
    pub ok: bool,
}

pub fn check_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<SymplecticCheck> {
    if m.nrows() != m.ncols() {
        return invalid("matrix must be square");
    }
    if !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
        return invalid("matrix dimension must be even and positive");
    }
    let residual = symplectic_residual(m);
    Ok(SymplecticCheck { residual, ok: residual <= tol })
}

/// `max |MᵀωM − ω|` entrywise, computed without allocating ω.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let dim = m.nrows();
    let n = dim / 2;
    let mut worst = 0.0_f64;
    for i in 0..dim {
        for j in 0..dim {
            let v = symplectic_pairing(n, m.column(i).as_slice(), m.column(j).as_slice());
            let target = if j == i + n && i < n {
                1.0
            } else if i == j + n && j < n {
                -1.0
            } else {
                0.0
            };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// `|det L|_S|`: the k-volume expansion of `l` on the subspace spanned by `s`.
///
/// Equals `√det(A)` with `A_ij = ⟨L v_i, L v_j⟩`; evaluated as `Π |r_ii|` from a QR
/// factorization of `L S`, which is never negative.
pub fn restricted_det(l: &DMatrix<f64>, s: &Frame) -> Result<f64> {
    Ok(log_restricted_det(l, s)?.exp())
}

/// Natural logarithm of [`restricted_det`]; `-inf` when `L` collapses `S`.
pub fn log_restricted_det(l: &DMatrix<f64>, s: &Frame) -> Result<f64> {
    if l.ncols() != s.dim_ambient() {
        return invalid(format!("map has {} columns but frame lives in dimension {}", l.ncols(), s.dim_ambient()));
    }
    if s.dim_sub() == 0 {
        return Ok(0.0);
    }
    let image = l * s.basis();
    Ok(log_volume(&image))
}

/// `log` of the k-volume spanned by the columns of `m`.
pub fn log_volume(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 0.0;
    }
    if m.ncols() > m.nrows() {
        return f64::NEG_INFINITY;
    }
    let (_, diag) = thin_qr(m);
    diag.iter().map(|d| d.abs().ln()).sum()
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `ex L`: product of the singular values `≥ 1` (empty product is 1).
pub fn expansion(l: &SymplecticMap) -> f64 {
    expansion_of(l.mat())
}

/// [`expansion`] for an arbitrary (possibly rectangular) linear map.
pub fn expansion_of(m: &DMatrix<f64>) -> f64 {
    log_expansion_of(m).exp()
}

/// `log ex L`.
pub fn log_expansion_of(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().filter(|&&s| s >= 1.0).map(|s| s.ln()).sum()
}

/// `ang(E₁, E₂) = |det(P|_{E₁})|` with `P` the orthogonal projection onto `E₂^⊥`.
pub fn angle(e1: &Frame, e2: &Frame) -> Result<f64> {
    if e1.dim_ambient() != e2.dim_ambient() {
        return invalid("frames live in different ambient spaces");
    }
    if e1.dim_sub() != e2.dim_sub() || 2 * e1.dim_sub() != e1.dim_ambient() {
        return invalid(format!(
            "angle needs half-dimensional frames, got {} and {} in dimension {}",
            e1.dim_sub(),
            e2.dim_sub(),
            e1.dim_ambient()
        ));
    }
    let b2 = e2.basis();
    let b1 = e1.basis();
    let projected = b1 - b2 * (b2.transpose() * b1);
    Ok(log_volume(&projected).exp().min(1.0))
}

/// Polar factors `M = O · L` with `O` orthogonal and `L` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct Polar {
    pub orthogonal: DMatrix<f64>,
    pub stretch: DMatrix<f64>,
}

pub fn polar_decompose(m: &SymplecticMap) -> Result<Polar> {
    polar_of(m.mat())
}

pub(crate) fn polar_of(m: &DMatrix<f64>) -> Result<Polar> {
    let svd = m.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let max = sigma.max();
    let min = sigma.min();
    if !(min > 1e-14 * max) {
        return Err(Error::Singular { sigma_min: min });
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let orthogonal = &u * &vt;
    let stretch = vt.transpose() * DMatrix::from_diagonal(sigma) * &vt;
    let stretch = (&stretch + stretch.transpose()) * 0.5;
    Ok(Polar { orthogonal, stretch })
}

/// Lagrangian subspace on which the full expansion of `m` is attained.
///
/// Spanned by right singular vectors with `σ > 1`. When `σ = 1` occurs with multiplicity,
/// the neutral eigenspace is `J₀`-invariant and is completed by a symplectic Gram-Schmidt
/// sweep over the projected `q`-axes (then `p`-axes), which keeps exactly one vector of each
/// `(v, J₀v)` pair.
pub fn max_expansion_lagrangian(m: &SymplecticMap) -> LagrangianFrame {
    let n = m.half_dim();
    let dim = 2 * n;
    let svd = m.mat().clone().svd(false, true);
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut neutral: Vec<DVector<f64>> = Vec::new();
    for &i in &order {
        let s = svd.singular_values[i];
        let v = vt.row(i).transpose();
        if s > 1.0 + NEUTRAL_CLUSTER_TOL && chosen.len() < n {
            chosen.push(v);
        } else if (s - 1.0).abs() <= NEUTRAL_CLUSTER_TOL {
            neutral.push(v);
        }
    }

    if chosen.len() < n {
        // projector onto the neutral cluster
        let mut proj = DMatrix::zeros(dim, dim);
        for v in &neutral {
            proj += v * v.transpose();
        }
        let candidates = (0..dim).map(|axis| {
            let mut e = DVector::zeros(dim);
            e[axis] = 1.0;
            &proj * e
        });
        for mut c in candidates {
            if chosen.len() == n {
                break;
            }
            for _ in 0..2 {
                for v in &chosen {
                    let d = v.dot(&c);
                    c.axpy(-d, v, 1.0);
                    let jv = apply_j(&DMatrix::from_column_slice(dim, 1, v.as_slice()));
                    let jv = jv.column(0).into_owned();
                    let d = jv.dot(&c);
                    c.axpy(-d, &jv, 1.0);
                }
            }
            let nc = c.norm();
            if nc > 1e-6 {
                chosen.push(c / nc);
            }
        }
    }

    let basis = from_columns(dim, &chosen);
    let frame = Frame::from_orthonormal(basis.clone())
        .or_else(|_| Frame::orthonormalize(&basis))
        .expect("chosen vectors are independent");
    LagrangianFrame { frame }
}

/// Random symplectic matrices built from symplectic shears and unitary rotations.
pub mod random {
    use nalgebra::DMatrix;
    use rand::Rng;

    use super::SymplecticMap;

    fn random_symmetric<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-scale..scale);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// `[[I, S], [0, I]]` with `S` symmetric.
    pub fn upper_shear(s: &DMatrix<f64>) -> DMatrix<f64> {
        let n = s.nrows();
        let mut m = DMatrix::identity(2 * n, 2 * n);
        m.view_mut((0, n), (n, n)).copy_from(s);
        m
    }

    /// `[[I, 0], [S, I]]` with `S` symmetric.
    pub fn lower_shear(s: &DMatrix<f64>) -> DMatrix<f64> {
        let n = s.nrows();
        let mut m = DMatrix::identity(2 * n, 2 * n);
        m.view_mut((n, 0), (n, n)).copy_from(s);
        m
    }

    /// Rotation by `theta` in the `(q_i, p_i)` plane.
    pub fn plane_rotation(n: usize, i: usize, theta: f64) -> DMatrix<f64> {
        let mut m = DMatrix::identity(2 * n, 2 * n);
        let (s, c) = theta.sin_cos();
        m[(i, i)] = c;
        m[(i, n + i)] = s;
        m[(n + i, i)] = -s;
        m[(n + i, n + i)] = c;
        m
    }

    /// `diag(A, A^{-T})` for an orthogonal `A` mixing `q_i, q_j`.
    pub fn config_rotation(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
        let mut m = DMatrix::identity(2 * n, 2 * n);
        let (s, c) = theta.sin_cos();
        for off in [0, n] {
            m[(off + i, off + i)] = c;
            m[(off + i, off + j)] = -s;
            m[(off + j, off + i)] = s;
            m[(off + j, off + j)] = c;
        }
        m
    }

    /// Product of `factors` random shears and rotations; entries of the shears are
    /// drawn uniformly from `(-scale, scale)`.
    pub fn random_symplectic<R: Rng + ?Sized>(n: usize, factors: usize, scale: f64, rng: &mut R) -> SymplecticMap {
        let mut m = DMatrix::identity(2 * n, 2 * n);
        for _ in 0..factors {
            let f = match rng.gen_range(0..4) {
                0 => upper_shear(&random_symmetric(n, scale, rng)),
                1 => lower_shear(&random_symmetric(n, scale, rng)),
                2 => plane_rotation(n, rng.gen_range(0..n), rng.gen_range(0.0..std::f64::consts::TAU)),
                _ if n > 1 => {
                    let i = rng.gen_range(0..n);
                    let j = (i + rng.gen_range(1..n)) % n;
                    config_rotation(n, i, j, rng.gen_range(0.0..std::f64::consts::TAU))
                }
                _ => plane_rotation(n, 0, rng.gen_range(0.0..std::f64::consts::TAU)),
            };
            m = f * m;
        }
        SymplecticMap { mat: m }
    }

    /// Random Lagrangian subspace: image of the vertical under a random symplectic map.
    pub fn random_lagrangian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> super::LagrangianFrame {
        let m = random_symplectic(n, 6, 1.0, rng);
        let image = m.mat() * super::LagrangianFrame::vertical(n).basis();
        let frame = super::Frame::orthonormalize(&image).expect("symplectic maps are injective");
        super::LagrangianFrame { frame }
    }

    /// Random k-dimensional subspace with Gaussian-like entries.
    pub fn random_frame<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> super::Frame {
        loop {
            let m = DMatrix::from_fn(dim, k, |_, _| rng.gen_range(-1.0..1.0));
            if let Ok(f) = super::Frame::orthonormalize(&m) {
                return f;
            }
        }
    }
}
