use serde::{Deserialize, Serialize};

use crate::market::{ArmId, Matching, PlayerId};

/// An arm that received two or more pull requests in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub arm: ArmId,
    /// Ascending by player index.
    pub requesters: Vec<PlayerId>,
    pub winner: PlayerId,
}

impl Conflict {
    pub fn involves(&self, p: PlayerId) -> bool {
        self.requesters.contains(&p)
    }
}

/// The public record of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: u64,
    /// Arm each player attempted, indexed by player.
    pub attempts: Vec<ArmId>,
    pub matching: Matching,
    /// Ascending by arm.
    pub conflicts: Vec<Conflict>,
    /// Sampled reward per player; exactly 0 when unmatched.
    pub player_rewards: Vec<f64>,
    /// Sampled reward per arm; exactly 0 when no request was accepted.
    pub arm_rewards: Vec<f64>,
}

impl RoundOutcome {
    pub fn conflict_count(&self) -> usize {
        self.conflicts.len()
    }

    pub fn conflict_at(&self, arm: ArmId) -> Option<&Conflict> {
        self.conflicts.iter().find(|c| c.arm == arm)
    }
}
