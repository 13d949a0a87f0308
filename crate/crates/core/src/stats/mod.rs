//! Disorder averages, replica identities and finite-size scaling.

mod aggregate;
mod experiments;
pub mod jackknife;
pub mod quadrature;

pub use aggregate::{
    aggregate, gg_residual, solve_realization, variance_relation_check, DisorderAggregate, Engine,
    GGResidual, RealizationStats,
};
pub use experiments::{
    concentration_sweep, gh_expectation, mu_continuity_check, ContinuityRow, DisorderAverage,
    ScalingRow, ScalingTable, MAX_QUADRATURE_DIMS,
};
pub use jackknife::{jackknife_by, jackknife_means, Stat};
pub use quadrature::GaussHermite;
