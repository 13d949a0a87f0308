//! Exact enumeration, Monte Carlo and disorder-averaging tools for overlap
//! statistics in disordered ferromagnetic Ising models (random field,
//! bond-diluted and site-diluted).

pub mod cli;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod mc;
pub mod models;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exact::{
    brute_force_replica, exact_solve, fkg_min, overlap_moments, GibbsSolution, OverlapMoments,
    ReplicaObservable,
};
pub use lattice::LatticeGeometry;
pub use mc::{detailed_balance_check, run_mc, MCConfig, MCEstimates, UpdateRule};
pub use models::{
    hamiltonian, sample_disorder, xi, DisorderRealization, Family, FieldDist, ModelSpec,
    SpinConfiguration,
};
pub use stats::{aggregate, gg_residual, DisorderAggregate, Engine, Stat};
