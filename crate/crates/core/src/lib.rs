//! Decentralized learning in repeated two-sided matching markets.
//!
//! Players (proposers) and arms (receivers) meet every round; players learn
//! their own preferences from noisy rewards and, depending on the scenario,
//! where they stand in each arm's ordering. The crate provides:
//!
//! - [`market`]: preference profiles, matchings, Gale-Shapley, stability and
//!   player-pessimal regret.
//! - [`prefgen`]: seeded uniform, beta-heterogeneous and edge-correlated
//!   market generators.
//! - [`belief`]: UCB indices, Gaussian posteriors, win-rate estimates and
//!   position beliefs.
//! - [`policies`]: CA-UCB, OCA-UCB and PCA-DAA players (UCB and Thompson
//!   variants) plus known-preference and learning arms.
//! - [`simulator`]: the round engine and episode runner.
//! - [`harness`]: parallel seeded experiments, aggregation, the convergence
//!   proxy and CSV/JSON persistence.

pub mod belief;
pub mod error;
pub mod harness;
pub mod market;
pub mod outcome;
pub mod policies;
pub mod prefgen;
pub mod simulator;

pub use error::{Error, Result};
pub use market::{ArmId, Matching, PlayerId, PreferenceProfile, Proposer, Side};
pub use outcome::{Conflict, RoundOutcome};
pub use policies::{ArmPolicyKind, PlayerPolicyKind};
pub use prefgen::{GeneratorKind, GeneratorSpec};
pub use simulator::{run_episode, Episode, EpisodeConfig, RunLog, Scenario, Snapshot};

/// Library version recorded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
