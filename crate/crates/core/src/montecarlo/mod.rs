//! Simulation harness: the Gaussian many-instrument DGP, size/power
//! experiments for all four tests, and the off-diagonal-mass sweep.
//!
//! Each replication draws from its own counter-based ChaCha stream keyed by
//! `(seed, rep)`, and tallies are integer counts, so results do not depend on
//! how replications are scheduled.

mod config;
mod dgp;
mod experiment;
mod sweep;

pub use config::{Design, SimConfig};
pub use dgp::{draw_replication, kappa, replication_rng, rho_from_mu2, toeplitz_cov, Replication, SimDesign};
pub use experiment::{
    run_experiment, CellOutcome, Experiment, GammaSummary, RepOutcome, SimResult, SimTally, TestCells,
};
pub use sweep::{assumption_sweep, SweepParams, SweepRow};
