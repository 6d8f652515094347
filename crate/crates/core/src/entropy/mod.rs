//! Entropy estimators: growth series of phase-space averages, slope regression and the
//! `ε → 0` extrapolation.

pub mod estimators;
pub mod hyperplane;
pub mod regression;
pub mod series;

pub use estimators::{
    growth_series_expansion, growth_series_paired, growth_series_theorem_a, growth_series_theorem_b,
    growth_series_theorem_b_with_field, run_population, theorem_a_sample, PairedSeries, SampleLogs,
};
pub use hyperplane::{contact_residual, hyperplane_field, hyperplane_field_custom, HyperplaneField, HyperplaneReport};
pub use regression::{epsilon_extrapolate, estimate_slope, fit_window, EntropyEstimate, Extrapolation};
pub use series::{uniform_weights, weighted_log_mean_exp, GrowthSeries, Integrand};
