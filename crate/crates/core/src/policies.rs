//! Decision rules for players and arms.
//!
//! Players choose an arm to attempt from the previous round's public
//! matching and their own beliefs; arms pick one requester. Every choice is
//! a function of state that existed before the round started, so the round
//! engine can compute all attempts before resolving any conflict.
//!
//! Random draws come from the caller's stream. Per player and round the draw
//! order is: the delay coin (rounds >= 2), Thompson samples for arms in
//! ascending order, then one tie-break draw if the maximum is shared.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{
    ucb_index, ucb_win_prob, BetaWinCounts, GaussianPosterior, PositionBelief, RewardStats,
    WinStats,
};
use crate::error::{invalid, Result};
use crate::market::{ArmId, PlayerId, PreferenceProfile};
use crate::outcome::RoundOutcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerPolicyKind {
    /// Conflict-avoiding UCB with common-knowledge arm preferences.
    CaUcb,
    /// CA-UCB with optimistic, learned position beliefs.
    OcaUcb,
    /// Probabilistic conflict avoidance with UCB estimates.
    PcaUcb,
    /// Probabilistic conflict avoidance with Thompson estimates.
    PcaTs,
}

impl PlayerPolicyKind {
    pub fn is_pca(self) -> bool {
        matches!(self, PlayerPolicyKind::PcaUcb | PlayerPolicyKind::PcaTs)
    }

    fn uses_thompson(self) -> bool {
        self == PlayerPolicyKind::PcaTs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmPolicyKind {
    /// Picks the truly most preferred requester.
    KnownPrefs,
    /// Picks the requester with the highest UCB index.
    LearningUcb,
    /// Picks the requester with the highest posterior draw.
    LearningTs,
}

/// Tunables shared by every agent in an episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Probability of repeating the previous attempt, in `[0, 1)`.
    pub lambda: f64,
    pub prior_mean: f64,
    pub prior_precision: f64,
    /// Draw win probabilities from `Beta(alpha + 1, beta + 1)` instead of
    /// using the point estimate (Thompson players only).
    pub sample_win_beta: bool,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            lambda: 0.9,
            prior_mean: 0.0,
            prior_precision: 1e-6,
            sample_win_beta: false,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(invalid(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        GaussianPosterior::new(self.prior_mean, self.prior_precision)?;
        Ok(())
    }

    fn prior(&self) -> GaussianPosterior {
        GaussianPosterior::new(self.prior_mean, self.prior_precision).expect("validated")
    }
}

/// Reward beliefs over a set of partners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBeliefs {
    Ucb(Vec<RewardStats>),
    Thompson(Vec<GaussianPosterior>),
}

impl RewardBeliefs {
    fn new(thompson: bool, n: usize, params: &PolicyParams) -> Self {
        if thompson {
            RewardBeliefs::Thompson(vec![params.prior(); n])
        } else {
            RewardBeliefs::Ucb(vec![RewardStats::default(); n])
        }
    }

    pub fn record(&mut self, partner: usize, reward: f64) {
        match self {
            RewardBeliefs::Ucb(s) => s[partner].record(reward),
            RewardBeliefs::Thompson(s) => s[partner].record(reward),
        }
    }

    /// UCB index or one posterior draw for `partner` at round `t`.
    pub fn estimate<R: Rng + ?Sized>(&self, partner: usize, t: u64, rng: &mut R) -> f64 {
        match self {
            RewardBeliefs::Ucb(s) => ucb_index(&s[partner], t).expect("t >= 1"),
            RewardBeliefs::Thompson(s) => s[partner].sample(rng),
        }
    }

    /// Point estimate of the partner's mean, if anything was observed.
    pub fn mean_estimate(&self, partner: usize) -> Option<f64> {
        match self {
            RewardBeliefs::Ucb(s) => s[partner].mean(),
            RewardBeliefs::Thompson(s) => Some(s[partner].mean),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RewardBeliefs::Ucb(s) => s.len(),
            RewardBeliefs::Thompson(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pairwise conflict-win beliefs, indexed by `(opponent, arm)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinBeliefs {
    Ucb {
        n_arms: usize,
        stats: Vec<WinStats>,
    },
    Thompson {
        n_arms: usize,
        counts: Vec<BetaWinCounts>,
        sample: bool,
    },
}

impl WinBeliefs {
    fn new(thompson: bool, n_players: usize, n_arms: usize, sample: bool) -> Self {
        if thompson {
            WinBeliefs::Thompson {
                n_arms,
                counts: vec![BetaWinCounts::default(); n_players * n_arms],
                sample,
            }
        } else {
            WinBeliefs::Ucb {
                n_arms,
                stats: vec![WinStats::default(); n_players * n_arms],
            }
        }
    }

    pub fn record(&mut self, opponent: PlayerId, arm: ArmId, won: bool) {
        match self {
            WinBeliefs::Ucb { n_arms, stats } => stats[opponent.0 * *n_arms + arm.0].record(won),
            WinBeliefs::Thompson { n_arms, counts, .. } => {
                counts[opponent.0 * *n_arms + arm.0].record(won)
            }
        }
    }

    /// Believed probability of beating `opponent` at `arm` in round `t`.
    pub fn win_probability<R: Rng + ?Sized>(
        &self,
        opponent: PlayerId,
        arm: ArmId,
        t: u64,
        rng: &mut R,
    ) -> f64 {
        match self {
            WinBeliefs::Ucb { n_arms, stats } => {
                ucb_win_prob(&stats[opponent.0 * n_arms + arm.0], t).expect("t >= 1")
            }
            WinBeliefs::Thompson {
                n_arms,
                counts,
                sample,
            } => {
                let c = &counts[opponent.0 * n_arms + arm.0];
                if *sample {
                    c.sample(rng)
                } else {
                    c.point()
                }
            }
        }
    }

    /// Number of recorded conflicts against `opponent` at `arm`.
    pub fn conflicts(&self, opponent: PlayerId, arm: ArmId) -> u64 {
        match self {
            WinBeliefs::Ucb { n_arms, stats } => stats[opponent.0 * n_arms + arm.0].total,
            WinBeliefs::Thompson { n_arms, counts, .. } => {
                let c = counts[opponent.0 * n_arms + arm.0];
                c.alpha + c.beta
            }
        }
    }
}

/// What a player knows about arm preferences when building a plausible set.
#[derive(Clone, Copy, Debug)]
pub enum ArmKnowledge<'a> {
    /// Common knowledge of the true arm preferences.
    True(&'a PreferenceProfile),
    /// Learned position beliefs, one per arm.
    Positions(&'a [PositionBelief]),
}

/// Arms `player` could plausibly win next round given last round's matching:
/// unmatched arms, its own arm, and arms whose holder it believes the arm
/// ranks below it. All arms when there is no previous round. Ascending.
pub fn plausible_set(
    player: PlayerId,
    n_arms: usize,
    last: Option<&RoundOutcome>,
    knowledge: ArmKnowledge<'_>,
) -> Vec<ArmId> {
    let all = (0..n_arms).map(ArmId);
    let Some(last) = last else {
        return all.collect();
    };
    all.filter(|&a| match last.matching.player_of(a) {
        None => true,
        Some(holder) if holder == player => true,
        Some(holder) => match knowledge {
            ArmKnowledge::True(profile) => profile.arm_prefers(a, player, Some(holder)),
            ArmKnowledge::Positions(beliefs) => beliefs[a.0].believes_above(holder),
        },
    })
    .collect()
}

/// Index of a maximal score, ties broken uniformly. `None` if empty.
///
/// Draws from `rng` only when more than one candidate attains the maximum.
pub fn argmax_uniform<T: Copy, R: Rng + ?Sized>(scored: &[(T, f64)], rng: &mut R) -> Option<T> {
    let best = scored
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<T> = scored
        .iter()
        .filter(|&&(_, s)| s == best)
        .map(|&(x, _)| x)
        .collect();
    match ties.len() {
        0 => scored.first().map(|&(x, _)| x),
        1 => Some(ties[0]),
        n => Some(ties[rng.gen_range(0..n)]),
    }
}

fn delay_coin<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < lambda
}

/// CA-UCB / OCA-UCB choice: repeat the previous attempt with probability
/// `lambda`, otherwise take the highest UCB index within `plausible`.
///
/// An empty `plausible` falls back to every arm.
pub fn choose_arm_ca<R: Rng + ?Sized>(
    t: u64,
    plausible: &[ArmId],
    reward_beliefs: &[RewardStats],
    lambda: f64,
    last_attempt: Option<ArmId>,
    rng: &mut R,
) -> ArmId {
    if let Some(prev) = last_attempt {
        if delay_coin(lambda, rng) {
            return prev;
        }
    }
    let scored: Vec<(ArmId, f64)> = if plausible.is_empty() {
        (0..reward_beliefs.len()).map(ArmId).collect::<Vec<_>>()
    } else {
        plausible.to_vec()
    }
    .into_iter()
    .map(|a| (a, ucb_index(&reward_beliefs[a.0], t).expect("t >= 1")))
    .collect();
    argmax_uniform(&scored, rng).expect("at least one arm")
}

/// `reward * win_probability`, with a zero win probability dominating an
/// infinite reward estimate.
#[inline]
fn expected_value(reward: f64, win: f64) -> f64 {
    if win == 0.0 {
        0.0
    } else {
        reward * win
    }
}

/// PCA-DAA choice for rounds `t >= 2`: repeat the previous attempt with
/// probability `lambda`, otherwise maximize reward estimate times believed
/// probability of beating last round's holder of each arm.
#[allow(clippy::too_many_arguments)]
pub fn choose_arm_pca<R: Rng + ?Sized>(
    player: PlayerId,
    t: u64,
    last: &RoundOutcome,
    reward_beliefs: &RewardBeliefs,
    win_beliefs: &WinBeliefs,
    lambda: f64,
    last_attempt: Option<ArmId>,
    rng: &mut R,
) -> ArmId {
    if let Some(prev) = last_attempt {
        if delay_coin(lambda, rng) {
            return prev;
        }
    }
    let scored: Vec<(ArmId, f64)> = (0..reward_beliefs.len())
        .map(ArmId)
        .map(|a| {
            let reward = reward_beliefs.estimate(a.0, t, rng);
            let win = match last.matching.player_of(a) {
                Some(holder) if holder != player => win_beliefs.win_probability(holder, a, t, rng),
                _ => 1.0,
            };
            (a, expected_value(reward, win))
        })
        .collect();
    argmax_uniform(&scored, rng).expect("at least one arm")
}

/// Per-player learning state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerPolicyState {
    pub id: PlayerId,
    pub kind: PlayerPolicyKind,
    pub lambda: f64,
    pub last_attempt: Option<ArmId>,
    /// Successful pulls per arm.
    pub pulls: Vec<u64>,
    pub reward_beliefs: RewardBeliefs,
    /// PCA kinds only.
    pub win_beliefs: Option<WinBeliefs>,
    /// OCA-UCB only; one entry per arm.
    pub position_beliefs: Option<Vec<PositionBelief>>,
}

impl PlayerPolicyState {
    pub fn new(
        kind: PlayerPolicyKind,
        id: PlayerId,
        n_players: usize,
        n_arms: usize,
        params: &PolicyParams,
    ) -> Result<Self> {
        params.validate()?;
        if id.0 >= n_players || n_players > n_arms {
            return Err(invalid(format!(
                "player {id} does not fit a {n_players}x{n_arms} market"
            )));
        }
        let thompson = kind.uses_thompson();
        Ok(PlayerPolicyState {
            id,
            kind,
            lambda: params.lambda,
            last_attempt: None,
            pulls: vec![0; n_arms],
            reward_beliefs: RewardBeliefs::new(thompson, n_arms, params),
            win_beliefs: kind
                .is_pca()
                .then(|| WinBeliefs::new(thompson, n_players, n_arms, params.sample_win_beta)),
            position_beliefs: (kind == PlayerPolicyKind::OcaUcb).then(|| {
                (0..n_arms)
                    .map(|_| PositionBelief::optimistic(id, n_players))
                    .collect()
            }),
        })
    }

    pub fn n_arms(&self) -> usize {
        self.reward_beliefs.len()
    }

    /// The arm this player attempts in round `t`, given the previous round's
    /// outcome (`None` in round 1). Round 1 is uniform over all arms.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        t: u64,
        last: Option<&RoundOutcome>,
        profile: &PreferenceProfile,
        rng: &mut R,
    ) -> ArmId {
        let k = self.n_arms();
        let last = match last {
            Some(l) if t > 1 => l,
            _ => return ArmId(rng.gen_range(0..k)),
        };
        match self.kind {
            PlayerPolicyKind::CaUcb | PlayerPolicyKind::OcaUcb => {
                let knowledge = match &self.position_beliefs {
                    Some(b) => ArmKnowledge::Positions(b),
                    None => ArmKnowledge::True(profile),
                };
                let plausible = plausible_set(self.id, k, Some(last), knowledge);
                let RewardBeliefs::Ucb(stats) = &self.reward_beliefs else {
                    unreachable!("CA kinds track UCB statistics")
                };
                choose_arm_ca(t, &plausible, stats, self.lambda, self.last_attempt, rng)
            }
            PlayerPolicyKind::PcaUcb | PlayerPolicyKind::PcaTs => choose_arm_pca(
                self.id,
                t,
                last,
                &self.reward_beliefs,
                self.win_beliefs
                    .as_ref()
                    .expect("PCA kinds track win beliefs"),
                self.lambda,
                self.last_attempt,
                rng,
            ),
        }
    }

    /// Folds a published round into this player's beliefs.
    pub fn update_after_round(&mut self, outcome: &RoundOutcome) {
        let me = self.id;
        if let Some(a) = outcome.matching.arm_of(me) {
            self.pulls[a.0] += 1;
            self.reward_beliefs
                .record(a.0, outcome.player_rewards[me.0]);
        }
        let attempted = outcome.attempts[me.0];
        if let Some(positions) = &mut self.position_beliefs {
            if let Some(c) = outcome.conflict_at(attempted) {
                if c.winner != me {
                    positions[attempted.0]
                        .record_loss(c.winner)
                        .expect("winner is another player");
                }
            }
        }
        if let Some(wins) = &mut self.win_beliefs {
            for c in outcome.conflicts.iter().filter(|c| c.involves(me)) {
                if c.winner == me {
                    for &q in c.requesters.iter().filter(|&&q| q != me) {
                        wins.record(q, c.arm, true);
                    }
                } else {
                    wins.record(c.winner, c.arm, false);
                }
            }
        }
        self.last_attempt = Some(attempted);
    }

    pub fn digest(&self) -> PlayerBeliefDigest {
        let k = self.n_arms();
        PlayerBeliefDigest {
            player: self.id,
            kind: self.kind,
            pulls: self.pulls.clone(),
            mean_estimates: (0..k)
                .map(|a| self.reward_beliefs.mean_estimate(a))
                .collect(),
            higher: self.position_beliefs.as_ref().map(|b| {
                b.iter()
                    .map(|x| x.higher().iter().copied().collect())
                    .collect()
            }),
        }
    }
}

/// Functional form of [`PlayerPolicyState::update_after_round`].
pub fn update_player_after_round(
    state: &PlayerPolicyState,
    outcome: &RoundOutcome,
) -> PlayerPolicyState {
    let mut s = state.clone();
    s.update_after_round(outcome);
    s
}

/// Compact, serializable summary of a player's final beliefs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerBeliefDigest {
    pub player: PlayerId,
    pub kind: PlayerPolicyKind,
    pub pulls: Vec<u64>,
    pub mean_estimates: Vec<Option<f64>>,
    /// OCA-UCB only: per arm, the players believed to rank above this one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub higher: Option<Vec<Vec<PlayerId>>>,
}

/// Per-arm state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmPolicyState {
    pub id: ArmId,
    pub kind: ArmPolicyKind,
    /// Learning kinds only; indexed by player.
    pub reward_beliefs: Option<RewardBeliefs>,
}

impl ArmPolicyState {
    pub fn new(
        kind: ArmPolicyKind,
        id: ArmId,
        n_players: usize,
        params: &PolicyParams,
    ) -> Result<Self> {
        params.validate()?;
        let reward_beliefs = match kind {
            ArmPolicyKind::KnownPrefs => None,
            ArmPolicyKind::LearningUcb => Some(RewardBeliefs::new(false, n_players, params)),
            ArmPolicyKind::LearningTs => Some(RewardBeliefs::new(true, n_players, params)),
        };
        Ok(ArmPolicyState {
            id,
            kind,
            reward_beliefs,
        })
    }

    /// Folds the reward from an accepted pull.
    pub fn record(&mut self, player: PlayerId, reward: f64) {
        if let Some(b) = &mut self.reward_beliefs {
            b.record(player.0, reward);
        }
    }
}

/// The requester `arm` accepts in round `t`, or `None` without requests.
pub fn resolve_conflict<R: Rng + ?Sized>(
    requesters: &[PlayerId],
    arm_state: &ArmPolicyState,
    profile: &PreferenceProfile,
    t: u64,
    rng: &mut R,
) -> Option<PlayerId> {
    match requesters {
        [] => return None,
        [only] => return Some(*only),
        _ => {}
    }
    let arm = arm_state.id;
    let scored: Vec<(PlayerId, f64)> = match (&arm_state.kind, &arm_state.reward_beliefs) {
        (ArmPolicyKind::KnownPrefs, _) => requesters
            .iter()
            .map(|&p| (p, profile.arm_mean(arm, p)))
            .collect(),
        (_, Some(beliefs)) => requesters
            .iter()
            .map(|&p| (p, beliefs.estimate(p.0, t, rng)))
            .collect(),
        (_, None) => unreachable!("learning arms carry reward beliefs"),
    };
    argmax_uniform(&scored, rng)
}
