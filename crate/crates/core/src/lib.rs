//! Simulation and verification toolkit for imitation-based social learning.
//!
//! A population of `N` individuals repeatedly chooses among `m` options
//! whose quality signals are Bernoulli draws. Each step an individual copies
//! the previous choice of a random peer (or explores uniformly with
//! probability `mu`) and then adopts it with a probability that depends on
//! the option's current signal. In the infinite-population limit this is a
//! stochastic multiplicative-weights update.
//!
//! Modules:
//! - [`params`]: parameters, preconditions and derived constants.
//! - [`rewards`]: reproducible reward streams and seed splitting.
//! - [`finite`]: the finite process (count and agent engines).
//! - [`infinite`]: the limit process and its log-potential audit.
//! - [`coupling`]: both processes on one reward stream.
//! - [`regret`]: regret estimation, epoch experiments and bound tables.
//! - [`oracle`]: exact enumeration for tiny instances.
//! - [`experiment`]: config files, dispatch and CSV/JSON artifacts.

pub mod coupling;
pub mod error;
pub mod experiment;
pub mod finite;
pub mod infinite;
pub mod oracle;
pub mod params;
pub mod record;
pub mod regret;
pub mod rewards;
pub mod stats;
pub mod trials;

pub use error::{Error, Result};
pub use finite::{AgentPopulation, Engine, FinitePopState};
pub use infinite::WeightDist;
pub use params::{DerivedBounds, ModelParams, ValidationReport};
pub use record::TrialRecord;
pub use rewards::{RewardStream, RewardVector};
