//! Symplectic cocycles over Hamiltonian flows: composition checks, opticity, twist probe,
//! the quotient construction on energy levels, and auditors for the volume inequalities.

pub mod audit;
pub mod distribution;
pub mod fiber;
pub mod opticity;
pub mod quotient;

pub use audit::{audit_mane_bound, audit_quotient_inequalities, ManeAudit, QuotientAudit};
pub use distribution::LagrangianDistribution;
pub use fiber::{verify_cocycle, CocycleCheck, ExponentialCocycle, FiberMap, TangentCocycle};
pub use opticity::{
    is_optical, opticity_form, opticity_form_fast, opticity_form_fd, twist_probe, FormPath, OpticityForm,
    OpticityReport, TwistProfile, POSITIVITY_TOL,
};
pub use quotient::{
    descend_cocycle, quotient_space, quotient_space_seeded, tilde_alpha, tilde_alpha_parts, DescendedMap,
    QuotientFrame, TildeAlpha,
};
