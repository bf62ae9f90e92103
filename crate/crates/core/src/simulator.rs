//! The round engine.
//!
//! One round: every player picks an attempt from the previous public
//! outcome, every requested arm accepts one requester, matched pairs draw
//! unit-variance Gaussian rewards, the matching is published, and all
//! beliefs are updated.
//!
//! An episode owns a single ChaCha8 stream seeded from `EpisodeConfig::seed`.
//! Draw order per round: players ascending, then arms ascending, then reward
//! draws for accepted pulls (arms ascending; player reward before arm reward).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    gale_shapley, is_stable, max_player_regret_against, ArmId, Matching, PlayerId,
    PreferenceProfile, Proposer,
};
use crate::outcome::{Conflict, RoundOutcome};
use crate::policies::{
    resolve_conflict, ArmPolicyKind, ArmPolicyState, PlayerBeliefDigest, PlayerPolicyKind,
    PlayerPolicyState, PolicyParams,
};
use crate::prefgen::GeneratorSpec;

/// How much agents know about arm preferences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scenario {
    /// Arm preferences are common knowledge.
    Apck,
    /// Arms know their preferences; players do not.
    Apkp,
    /// Nobody knows arm preferences.
    Apu,
}

impl Scenario {
    pub fn default_player_policy(self) -> PlayerPolicyKind {
        match self {
            Scenario::Apck => PlayerPolicyKind::CaUcb,
            Scenario::Apkp => PlayerPolicyKind::OcaUcb,
            Scenario::Apu => PlayerPolicyKind::PcaUcb,
        }
    }

    pub fn default_arm_policy(self, player: PlayerPolicyKind) -> ArmPolicyKind {
        match (self, player) {
            (Scenario::Apu, PlayerPolicyKind::PcaTs) => ArmPolicyKind::LearningTs,
            (Scenario::Apu, _) => ArmPolicyKind::LearningUcb,
            _ => ArmPolicyKind::KnownPrefs,
        }
    }

    fn admits(self, player: PlayerPolicyKind, arm: ArmPolicyKind) -> bool {
        match self {
            Scenario::Apck => player == PlayerPolicyKind::CaUcb && arm == ArmPolicyKind::KnownPrefs,
            Scenario::Apkp => {
                player == PlayerPolicyKind::OcaUcb && arm == ArmPolicyKind::KnownPrefs
            }
            Scenario::Apu => player.is_pca() && arm != ArmPolicyKind::KnownPrefs,
        }
    }
}

fn default_lambda() -> f64 {
    0.9
}

fn default_snapshot_every() -> u64 {
    10
}

fn default_prior_precision() -> f64 {
    1e-6
}

/// Everything needed to reproduce one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub scenario: Scenario,
    /// Defaults from the scenario when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player_policy: Option<PlayerPolicyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_policy: Option<ArmPolicyKind>,
    pub generator: GeneratorSpec,
    pub horizon: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "default_prior_precision")]
    pub prior_precision: f64,
    #[serde(default)]
    pub sample_win_beta: bool,
}

impl EpisodeConfig {
    /// A config with default settings for everything but the essentials.
    pub fn new(scenario: Scenario, generator: GeneratorSpec, horizon: u64, seed: u64) -> Self {
        EpisodeConfig {
            scenario,
            player_policy: None,
            arm_policy: None,
            generator,
            horizon,
            lambda: default_lambda(),
            snapshot_every: default_snapshot_every(),
            seed,
            prior_mean: 0.0,
            prior_precision: default_prior_precision(),
            sample_win_beta: false,
        }
    }

    pub fn with_player_policy(mut self, kind: PlayerPolicyKind) -> Self {
        self.player_policy = Some(kind);
        self
    }

    pub fn player_kind(&self) -> PlayerPolicyKind {
        self.player_policy
            .unwrap_or_else(|| self.scenario.default_player_policy())
    }

    pub fn arm_kind(&self) -> ArmPolicyKind {
        self.arm_policy
            .unwrap_or_else(|| self.scenario.default_arm_policy(self.player_kind()))
    }

    /// Same config with policy kinds filled in.
    pub fn resolved(&self) -> Self {
        EpisodeConfig {
            player_policy: Some(self.player_kind()),
            arm_policy: Some(self.arm_kind()),
            ..self.clone()
        }
    }

    pub fn params(&self) -> PolicyParams {
        PolicyParams {
            lambda: self.lambda,
            prior_mean: self.prior_mean,
            prior_precision: self.prior_precision,
            sample_win_beta: self.sample_win_beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.generator.validate().map_err(cfg)?;
        self.params().validate().map_err(cfg)?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        let (p, a) = (self.player_kind(), self.arm_kind());
        if !self.scenario.admits(p, a) {
            return Err(Error::Config(format!(
                "scenario {:?} cannot run player policy {p:?} with arm policy {a:?}",
                self.scenario
            )));
        }
        Ok(())
    }
}

/// Market state captured every `snapshot_every` rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub stable: bool,
    pub max_regret: f64,
    /// Conflicts summed over the rounds since the previous snapshot.
    pub conflicts: u64,
    pub matching: Matching,
}

/// Complete record of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: EpisodeConfig,
    pub profile: PreferenceProfile,
    pub snapshots: Vec<Snapshot>,
    pub final_beliefs: Vec<PlayerBeliefDigest>,
}

/// Stability, regret and conflict count of one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub stable: bool,
    pub max_regret: f64,
    pub conflicts: usize,
}

/// Metrics of `outcome` measured against true means.
pub fn snapshot_metrics(profile: &PreferenceProfile, outcome: &RoundOutcome) -> SnapshotMetrics {
    let pessimal = gale_shapley(profile, Proposer::Arms);
    metrics_against(profile, &pessimal, outcome)
}

fn metrics_against(
    profile: &PreferenceProfile,
    pessimal: &Matching,
    outcome: &RoundOutcome,
) -> SnapshotMetrics {
    SnapshotMetrics {
        stable: is_stable(profile, &outcome.matching),
        max_regret: max_player_regret_against(profile, pessimal, &outcome.matching),
        conflicts: outcome.conflict_count(),
    }
}

fn gaussian<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + z
}

/// Plays round `t`. `last` is the outcome of round `t - 1`, if any.
pub fn run_round<R: Rng + ?Sized>(
    profile: &PreferenceProfile,
    players: &mut [PlayerPolicyState],
    arms: &mut [ArmPolicyState],
    t: u64,
    last: Option<&RoundOutcome>,
    rng: &mut R,
) -> RoundOutcome {
    let n = profile.n_players();
    let k = profile.n_arms();

    let attempts: Vec<ArmId> = players
        .iter()
        .map(|p| p.choose(t, last, profile, rng))
        .collect();

    let mut requesters: Vec<Vec<PlayerId>> = vec![Vec::new(); k];
    for (i, a) in attempts.iter().enumerate() {
        requesters[a.0].push(PlayerId(i));
    }

    let mut matching = Matching::empty(n, k);
    let mut conflicts = Vec::new();
    for (arm_state, reqs) in arms.iter().zip(&requesters) {
        if let Some(w) = resolve_conflict(reqs, arm_state, profile, t, rng) {
            matching.pair(w, arm_state.id);
            if reqs.len() > 1 {
                conflicts.push(Conflict {
                    arm: arm_state.id,
                    requesters: reqs.clone(),
                    winner: w,
                });
            }
        }
    }

    let mut player_rewards = vec![0.0; n];
    let mut arm_rewards = vec![0.0; k];
    for a in profile.arms() {
        if let Some(p) = matching.player_of(a) {
            player_rewards[p.0] = gaussian(profile.player_mean(p, a), rng);
            arm_rewards[a.0] = gaussian(profile.arm_mean(a, p), rng);
        }
    }

    let outcome = RoundOutcome {
        round: t,
        attempts,
        matching,
        conflicts,
        player_rewards,
        arm_rewards,
    };

    for arm_state in arms.iter_mut() {
        if let Some(p) = outcome.matching.player_of(arm_state.id) {
            arm_state.record(p, outcome.arm_rewards[arm_state.id.0]);
        }
    }
    for player in players.iter_mut() {
        player.update_after_round(&outcome);
    }
    outcome
}

/// A running episode that can be stepped round by round.
#[derive(Debug, Clone)]
pub struct Episode {
    config: EpisodeConfig,
    profile: PreferenceProfile,
    pessimal: Matching,
    players: Vec<PlayerPolicyState>,
    arms: Vec<ArmPolicyState>,
    rng: ChaCha8Rng,
    t: u64,
    last: Option<RoundOutcome>,
    window_conflicts: u64,
    snapshots: Vec<Snapshot>,
}

impl Episode {
    /// Draws the market from `config.generator` and initializes every agent.
    pub fn new(config: &EpisodeConfig) -> Result<Self> {
        config.validate()?;
        let profile = config.generator.generate()?;
        Self::with_profile(config, profile)
    }

    /// Runs on a given market instead of a generated one. The generator's
    /// sizes are ignored.
    pub fn with_profile(config: &EpisodeConfig, profile: PreferenceProfile) -> Result<Self> {
        let config = config.resolved();
        let mut check = config.clone();
        check.generator.n_players = profile.n_players();
        check.generator.n_arms = profile.n_arms();
        check.validate()?;

        let params = config.params();
        let n = profile.n_players();
        let k = profile.n_arms();
        let players = profile
            .players()
            .map(|p| PlayerPolicyState::new(config.player_kind(), p, n, k, &params))
            .collect::<Result<Vec<_>>>()?;
        let arms = profile
            .arms()
            .map(|a| ArmPolicyState::new(config.arm_kind(), a, n, &params))
            .collect::<Result<Vec<_>>>()?;
        let capacity = (config.horizon / config.snapshot_every) as usize;
        Ok(Episode {
            pessimal: gale_shapley(&profile, Proposer::Arms),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            profile,
            players,
            arms,
            t: 0,
            last: None,
            window_conflicts: 0,
            snapshots: Vec::with_capacity(capacity),
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn profile(&self) -> &PreferenceProfile {
        &self.profile
    }

    pub fn players(&self) -> &[PlayerPolicyState] {
        &self.players
    }

    pub fn arms(&self) -> &[ArmPolicyState] {
        &self.arms
    }

    /// Rounds played so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn last_outcome(&self) -> Option<&RoundOutcome> {
        self.last.as_ref()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.horizon
    }

    /// Plays one more round, recording a snapshot when due.
    pub fn step(&mut self) -> &RoundOutcome {
        self.t += 1;
        let outcome = run_round(
            &self.profile,
            &mut self.players,
            &mut self.arms,
            self.t,
            self.last.as_ref(),
            &mut self.rng,
        );
        self.window_conflicts += outcome.conflict_count() as u64;
        if self.t.is_multiple_of(self.config.snapshot_every) {
            let m = metrics_against(&self.profile, &self.pessimal, &outcome);
            self.snapshots.push(Snapshot {
                t: self.t,
                stable: m.stable,
                max_regret: m.max_regret,
                conflicts: self.window_conflicts,
                matching: outcome.matching.clone(),
            });
            self.window_conflicts = 0;
        }
        self.last.insert(outcome)
    }

    /// Plays the remaining rounds and returns the log.
    pub fn run(mut self) -> RunLog {
        while !self.is_finished() {
            self.step();
        }
        self.into_log()
    }

    pub fn into_log(self) -> RunLog {
        RunLog {
            final_beliefs: self.players.iter().map(PlayerPolicyState::digest).collect(),
            config: self.config,
            profile: self.profile,
            snapshots: self.snapshots,
        }
    }
}

/// Generates the market and plays all `horizon` rounds.
pub fn run_episode(config: &EpisodeConfig) -> Result<RunLog> {
    Ok(Episode::new(config)?.run())
}
