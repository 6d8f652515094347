//! Hamiltonian systems, symplectic stepping, tangent propagation and shell sampling.

pub mod evolve;
pub mod integrator;
pub mod sampling;
pub mod systems;

pub use evolve::{evolve_with_frames, uniform_grid, EvolveOptions, RenormPolicy, TangentTrajectory, TrackedFrame};
pub use integrator::{reversibility_error, step, step_tangent, windowed_reversibility_error, Scheme, Stepper};
pub use sampling::{sample_level, sample_rng, sample_shell, LevelSamples, ShellSamples, ShellSpec};
pub use systems::{
    build_system, catalog, energy, gradient, hamiltonian_vector_field, hessian, vector_field_jacobian, wrap_periodic,
    FnSystem, FreeParticle, HamiltonianSystem, HarmonicOscillator, JacobiBenchmark, LinearSaddle, MechanicalTorus,
    PhasePoint, Separable, SystemInfo,
};
