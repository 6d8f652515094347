//! Liouville sampling of energy shells and thin level neighbourhoods.
//!
//! Sample `i` draws from its own ChaCha8 stream `(seed, i)`, so results do not depend on
//! the number of worker threads or the order in which samples are produced.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::systems::{HamiltonianSystem, PhasePoint};
use crate::error::{invalid, Error, Result};

/// Proposal budget after which a low acceptance rate becomes an error.
pub const MAX_PROPOSALS: u64 = 10_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-6;
/// Half-width of the shell used to realize the measure on a level set.
pub const LEVEL_HALF_WIDTH: f64 = 1e-3;
pub const CRITICAL_GRAD: f64 = 1e-8;

/// `N_ε = H⁻¹(e − ε, e + ε)` together with a rejection box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub e: f64,
    pub epsilon: f64,
    /// `[lo, hi]` per phase coordinate; `None` uses the system's own box.
    pub bounding_box: Option<Vec<(f64, f64)>>,
    pub sample_count: usize,
    pub seed: u64,
}

impl ShellSpec {
    pub fn new(e: f64, epsilon: f64, sample_count: usize, seed: u64) -> Self {
        Self { e, epsilon, bounding_box: None, sample_count, seed }
    }

    pub fn with_box(mut self, b: Vec<(f64, f64)>) -> Self {
        self.bounding_box = Some(b);
        self
    }

    fn resolved_box(&self, sys: &dyn HamiltonianSystem) -> Result<Vec<(f64, f64)>> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite() && self.e.is_finite()) {
            return invalid("shell needs finite e and epsilon > 0");
        }
        let b = match &self.bounding_box {
            Some(b) => b.clone(),
            None => sys.bounding_box(self.e + self.epsilon).ok_or_else(|| {
                Error::InvalidInput(format!("system `{}` has no default bounding box; configure one", sys.name()))
            })?,
        };
        if b.len() != 2 * sys.dof() {
            return invalid("bounding box must give one interval per phase coordinate");
        }
        if b.iter().any(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
            return invalid("bounding box intervals must be finite and nonempty");
        }
        Ok(b)
    }
}

/// Accepted shell points and the number of proposals spent on them.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSamples {
    pub points: Vec<PhasePoint>,
    pub proposals: u64,
}

impl ShellSamples {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.points.len() as f64 / self.proposals as f64
        }
    }
}

/// Generator for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn propose(rng: &mut ChaCha8Rng, b: &[(f64, f64)], z: &mut [f64]) {
    for (zi, (lo, hi)) in z.iter_mut().zip(b) {
        *zi = rng.gen_range(*lo..*hi);
    }
}

/// Rejection sampling of one point with `accept(z)`; returns the point and proposals used.
fn draw_one(
    index: u64,
    seed: u64,
    b: &[(f64, f64)],
    accept: &(dyn Fn(&[f64]) -> bool + Sync),
) -> (Option<Vec<f64>>, u64) {
    let mut rng = sample_rng(seed, index);
    let mut z = vec![0.0; b.len()];
    let mut tries = 0u64;
    while tries < MAX_PROPOSALS {
        tries += 1;
        propose(&mut rng, b, &mut z);
        if accept(&z) {
            return (Some(z), tries);
        }
    }
    (None, tries)
}

fn sample_accepting(
    count: usize,
    seed: u64,
    b: &[(f64, f64)],
    accept: &(dyn Fn(&[f64]) -> bool + Sync),
) -> Result<(Vec<Vec<f64>>, u64)> {
    let draws: Vec<(Option<Vec<f64>>, u64)> =
        (0..count as u64).into_par_iter().map(|i| draw_one(i, seed, b, accept)).collect();
    let proposals: u64 = draws.iter().map(|d| d.1).sum();
    let mut pts = Vec::with_capacity(count);
    for (z, _) in draws {
        match z {
            Some(z) => pts.push(z),
            None => {
                let rate = pts.len() as f64 / proposals as f64;
                return Err(Error::Sampling { rate, proposals });
            }
        }
    }
    if proposals >= MAX_PROPOSALS {
        let rate = pts.len() as f64 / proposals as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::Sampling { rate, proposals });
        }
    }
    Ok((pts, proposals))
}

/// Uniform (Liouville) samples of `N_ε` by rejection from the box.
pub fn sample_shell(sys: &dyn HamiltonianSystem, shell: &ShellSpec) -> Result<ShellSamples> {
    let b = shell.resolved_box(sys)?;
    if shell.sample_count == 0 {
        return Ok(ShellSamples { points: Vec::new(), proposals: 0 });
    }
    let (lo, hi) = (shell.e - shell.epsilon, shell.e + shell.epsilon);
    let accept = |z: &[f64]| {
        let h = sys.energy(z);
        h > lo && h < hi
    };
    let (pts, proposals) = sample_accepting(shell.sample_count, shell.seed, &b, &accept)?;
    let points = pts.into_iter().map(|z| PhasePoint::from_slice(&z)).collect::<Result<_>>()?;
    Ok(ShellSamples { points, proposals })
}

/// Fraction of `proposals` uniform box points that land in the shell (stream `u64::MAX`).
pub fn shell_acceptance(sys: &dyn HamiltonianSystem, shell: &ShellSpec, proposals: u64) -> Result<f64> {
    let b = shell.resolved_box(sys)?;
    let mut rng = sample_rng(shell.seed, u64::MAX);
    let mut z = vec![0.0; b.len()];
    let mut hits = 0u64;
    for _ in 0..proposals {
        propose(&mut rng, &b, &mut z);
        let h = sys.energy(&z);
        if h > shell.e - shell.epsilon && h < shell.e + shell.epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / proposals.max(1) as f64)
}

/// Weighted samples realizing the invariant measure on `Σ = H⁻¹(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSamples {
    pub points: Vec<PhasePoint>,
    /// Normalized to sum to one.
    pub weights: Vec<f64>,
    /// Accepted shell points discarded because `|∇H| < CRITICAL_GRAD`.
    pub rejected_critical: usize,
    pub proposals: u64,
}

/// Samples the shell of half-width [`LEVEL_HALF_WIDTH`] around `e`.
///
/// By the coarea formula, Lebesgue measure on a thin shell is `2δ · dσ/|∇H|`, which is the
/// flow-invariant measure on `Σ`; uniform shell samples therefore carry equal weights.
pub fn sample_level(
    sys: &dyn HamiltonianSystem,
    e: f64,
    count: usize,
    seed: u64,
    bounding_box: Option<Vec<(f64, f64)>>,
) -> Result<LevelSamples> {
    let shell = ShellSpec { e, epsilon: LEVEL_HALF_WIDTH, bounding_box, sample_count: count, seed };
    let b = shell.resolved_box(sys)?;
    if count == 0 {
        return Ok(LevelSamples { points: Vec::new(), weights: Vec::new(), rejected_critical: 0, proposals: 0 });
    }
    let d = 2 * sys.dof();
    let accept = |z: &[f64]| {
        let h = sys.energy(z);
        h > e - LEVEL_HALF_WIDTH && h < e + LEVEL_HALF_WIDTH
    };
    // oversample lazily: sample k keeps drawing from stream k until it finds a regular point
    let draws: Vec<(Option<Vec<f64>>, u64, usize)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut z = vec![0.0; d];
            let mut g = vec![0.0; d];
            let mut tries = 0u64;
            let mut critical = 0usize;
            while tries < MAX_PROPOSALS {
                tries += 1;
                propose(&mut rng, &b, &mut z);
                if !accept(&z) {
                    continue;
                }
                sys.gradient(&z, &mut g);
                if DVector::from_column_slice(&g).norm() < CRITICAL_GRAD {
                    critical += 1;
                    continue;
                }
                return (Some(z), tries, critical);
            }
            (None, tries, critical)
        })
        .collect();
    let proposals: u64 = draws.iter().map(|d| d.1).sum();
    let rejected_critical = draws.iter().map(|d| d.2).sum();
    let mut points = Vec::with_capacity(count);
    for (z, _, _) in draws {
        match z {
            Some(z) => points.push(PhasePoint::from_slice(&z)?),
            None => {
                return Err(Error::Sampling { rate: points.len() as f64 / proposals as f64, proposals });
            }
        }
    }
    let weights = vec![1.0 / count as f64; count];
    Ok(LevelSamples { points, weights, rejected_critical, proposals })
}
