//! Ground-truth market model.
//!
//! A market has `N` players and `K >= N` arms. Every agent holds a strictly
//! ordered vector of mean rewards over the other side; larger means are more
//! preferred. Being unmatched yields reward 0 and is strictly worse than any
//! partner (all generated means are at least 1).
//!
//! The functions here are pure and know nothing about learning: they are the
//! yardstick every policy run is measured against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dense index of a player in `[0, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

/// Dense index of an arm in `[0, K)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub usize);

impl PlayerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ArmId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Which side of the market an agent belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Player,
    Arm,
}

/// Ground-truth mean rewards for both sides.
///
/// Stored row-major: `player_means[i * K + j]` is player `i`'s mean for arm
/// `j`; `arm_means[j * N + i]` is arm `j`'s mean for player `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct PreferenceProfile {
    n_players: usize,
    n_arms: usize,
    player_means: Vec<f64>,
    arm_means: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    n_players: usize,
    n_arms: usize,
    player_means: Vec<Vec<f64>>,
    arm_means: Vec<Vec<f64>>,
}

impl TryFrom<ProfileRepr> for PreferenceProfile {
    type Error = crate::Error;

    fn try_from(r: ProfileRepr) -> Result<Self> {
        if r.player_means.len() != r.n_players || r.arm_means.len() != r.n_arms {
            return Err(invalid(format!(
                "declared size {}x{} does not match {} player rows / {} arm rows",
                r.n_players,
                r.n_arms,
                r.player_means.len(),
                r.arm_means.len()
            )));
        }
        PreferenceProfile::new(r.player_means, r.arm_means)
    }
}

impl From<PreferenceProfile> for ProfileRepr {
    fn from(p: PreferenceProfile) -> Self {
        ProfileRepr {
            n_players: p.n_players,
            n_arms: p.n_arms,
            player_means: p
                .player_means
                .chunks(p.n_arms)
                .map(<[f64]>::to_vec)
                .collect(),
            arm_means: p
                .arm_means
                .chunks(p.n_players)
                .map(<[f64]>::to_vec)
                .collect(),
        }
    }
}

fn has_distinct_entries(row: &[f64]) -> bool {
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[0] != w[1])
}

impl PreferenceProfile {
    /// Builds a profile from `N` player rows of length `K` and `K` arm rows
    /// of length `N`.
    pub fn new(player_means: Vec<Vec<f64>>, arm_means: Vec<Vec<f64>>) -> Result<Self> {
        let n = player_means.len();
        let k = arm_means.len();
        if n == 0 {
            return Err(invalid("a market needs at least one player"));
        }
        if n > k {
            return Err(invalid(format!("N = {n} players exceeds K = {k} arms")));
        }
        for (i, row) in player_means.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!(
                    "player row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
        }
        for (j, row) in arm_means.iter().enumerate() {
            if row.len() != n {
                return Err(invalid(format!(
                    "arm row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let rows = player_means
            .iter()
            .map(|r| (Side::Player, r))
            .chain(arm_means.iter().map(|r| (Side::Arm, r)));
        for (side, row) in rows {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{side:?} row contains a non-finite mean")));
            }
            if !has_distinct_entries(row) {
                return Err(invalid(format!(
                    "{side:?} row {row:?} has tied means; preferences must be strict"
                )));
            }
        }
        Ok(PreferenceProfile {
            n_players: n,
            n_arms: k,
            player_means: player_means.into_iter().flatten().collect(),
            arm_means: arm_means.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn n_players(&self) -> usize {
        self.n_players
    }

    #[inline]
    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Player `p`'s true mean reward from arm `a`.
    #[inline]
    pub fn player_mean(&self, p: PlayerId, a: ArmId) -> f64 {
        self.player_means[p.0 * self.n_arms + a.0]
    }

    /// Arm `a`'s true mean reward from player `p`.
    #[inline]
    pub fn arm_mean(&self, a: ArmId, p: PlayerId) -> f64 {
        self.arm_means[a.0 * self.n_players + p.0]
    }

    pub fn player_row(&self, p: PlayerId) -> &[f64] {
        &self.player_means[p.0 * self.n_arms..(p.0 + 1) * self.n_arms]
    }

    pub fn arm_row(&self, a: ArmId) -> &[f64] {
        &self.arm_means[a.0 * self.n_players..(a.0 + 1) * self.n_players]
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> + Clone {
        (0..self.n_players).map(PlayerId)
    }

    pub fn arms(&self) -> impl Iterator<Item = ArmId> + Clone {
        (0..self.n_arms).map(ArmId)
    }

    /// Player `p`'s mean under an optional match; unmatched is 0.
    #[inline]
    pub fn player_value(&self, p: PlayerId, a: Option<ArmId>) -> f64 {
        a.map_or(0.0, |a| self.player_mean(p, a))
    }

    #[inline]
    pub fn arm_value(&self, a: ArmId, p: Option<PlayerId>) -> f64 {
        p.map_or(0.0, |p| self.arm_mean(a, p))
    }

    /// Whether player `p` strictly prefers arm `a` over `b` (`None` = unmatched).
    #[inline]
    pub fn player_prefers(&self, p: PlayerId, a: ArmId, b: Option<ArmId>) -> bool {
        match b {
            None => true,
            Some(b) => self.player_mean(p, a) > self.player_mean(p, b),
        }
    }

    /// Whether arm `a` strictly prefers player `p` over `q` (`None` = unmatched).
    #[inline]
    pub fn arm_prefers(&self, a: ArmId, p: PlayerId, q: Option<PlayerId>) -> bool {
        match q {
            None => true,
            Some(q) => self.arm_mean(a, p) > self.arm_mean(a, q),
        }
    }

    /// Side-generic preference query on raw indices with range checks.
    ///
    /// `who` is an index on `side`; `a` and `b` index the opposite side.
    pub fn prefers(&self, side: Side, who: usize, a: usize, b: Option<usize>) -> Result<bool> {
        let (own, other) = match side {
            Side::Player => (self.n_players, self.n_arms),
            Side::Arm => (self.n_arms, self.n_players),
        };
        if who >= own {
            return Err(invalid(format!(
                "{side:?} index {who} out of range [0, {own})"
            )));
        }
        for x in std::iter::once(a).chain(b) {
            if x >= other {
                return Err(invalid(format!(
                    "partner index {x} out of range [0, {other})"
                )));
            }
        }
        Ok(match side {
            Side::Player => self.player_prefers(PlayerId(who), ArmId(a), b.map(ArmId)),
            Side::Arm => self.arm_prefers(ArmId(who), PlayerId(a), b.map(PlayerId)),
        })
    }
}

/// A one-to-one partial assignment of players to arms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "MatchingRepr", into = "MatchingRepr")]
pub struct Matching {
    by_player: Vec<Option<ArmId>>,
    by_arm: Vec<Option<PlayerId>>,
}

#[derive(Serialize, Deserialize)]
struct MatchingRepr {
    n_arms: usize,
    assignment: Vec<Option<ArmId>>,
}

impl TryFrom<MatchingRepr> for Matching {
    type Error = crate::Error;

    fn try_from(r: MatchingRepr) -> Result<Self> {
        Matching::from_assignment(r.assignment, r.n_arms)
    }
}

impl From<Matching> for MatchingRepr {
    fn from(m: Matching) -> Self {
        MatchingRepr {
            n_arms: m.by_arm.len(),
            assignment: m.by_player,
        }
    }
}

impl Matching {
    /// Nobody matched.
    pub fn empty(n_players: usize, n_arms: usize) -> Self {
        Matching {
            by_player: vec![None; n_players],
            by_arm: vec![None; n_arms],
        }
    }

    /// Builds a matching from a player-indexed assignment, rejecting arms
    /// assigned twice or out of range.
    pub fn from_assignment(assignment: Vec<Option<ArmId>>, n_arms: usize) -> Result<Self> {
        let mut by_arm = vec![None; n_arms];
        for (i, a) in assignment.iter().enumerate() {
            if let Some(a) = *a {
                let slot = by_arm
                    .get_mut(a.0)
                    .ok_or_else(|| invalid(format!("arm {a} out of range [0, {n_arms})")))?;
                if let Some(prev) = *slot {
                    return Err(invalid(format!("arm {a} assigned to both {prev} and p{i}")));
                }
                *slot = Some(PlayerId(i));
            }
        }
        Ok(Matching {
            by_player: assignment,
            by_arm,
        })
    }

    pub fn n_players(&self) -> usize {
        self.by_player.len()
    }

    pub fn n_arms(&self) -> usize {
        self.by_arm.len()
    }

    #[inline]
    pub fn arm_of(&self, p: PlayerId) -> Option<ArmId> {
        self.by_player[p.0]
    }

    #[inline]
    pub fn player_of(&self, a: ArmId) -> Option<PlayerId> {
        self.by_arm[a.0]
    }

    pub fn assignment(&self) -> &[Option<ArmId>] {
        &self.by_player
    }

    /// Matches `p` with `a`. Both must currently be free.
    pub(crate) fn pair(&mut self, p: PlayerId, a: ArmId) {
        debug_assert!(self.by_player[p.0].is_none() && self.by_arm[a.0].is_none());
        self.by_player[p.0] = Some(a);
        self.by_arm[a.0] = Some(p);
    }

    pub fn pairs(&self) -> impl Iterator<Item = (PlayerId, ArmId)> + '_ {
        self.by_player
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (PlayerId(i), a)))
    }

    pub fn matched_count(&self) -> usize {
        self.by_player.iter().flatten().count()
    }

    fn check_shape(&self, profile: &PreferenceProfile) -> Result<()> {
        if self.n_players() != profile.n_players() || self.n_arms() != profile.n_arms() {
            return Err(invalid(format!(
                "matching is {}x{} but the market is {}x{}",
                self.n_players(),
                self.n_arms(),
                profile.n_players(),
                profile.n_arms()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.by_player.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match a {
                Some(a) => write!(f, "p{i}->{a}")?,
                None => write!(f, "p{i}->_")?,
            }
        }
        write!(f, "}}")
    }
}

/// Which side proposes in deferred acceptance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposer {
    Players,
    Arms,
}

/// Round-based deferred acceptance, run until no free proposer has anyone
/// left to propose to. Returns the proposer-optimal stable matching.
///
/// With arms proposing this is the player-pessimal stable matching.
pub fn gale_shapley(profile: &PreferenceProfile, proposers: Proposer) -> Matching {
    let n = profile.n_players();
    let k = profile.n_arms();
    // Proposer side of size `np`, receiver side of size `nr`.
    let (np, nr) = match proposers {
        Proposer::Players => (n, k),
        Proposer::Arms => (k, n),
    };
    let proposer_mean = |i: usize, r: usize| match proposers {
        Proposer::Players => profile.player_mean(PlayerId(i), ArmId(r)),
        Proposer::Arms => profile.arm_mean(ArmId(i), PlayerId(r)),
    };
    let receiver_mean = |r: usize, i: usize| match proposers {
        Proposer::Players => profile.arm_mean(ArmId(r), PlayerId(i)),
        Proposer::Arms => profile.player_mean(PlayerId(r), ArmId(i)),
    };

    // Each proposer's list, most preferred first.
    let lists: Vec<Vec<usize>> = (0..np)
        .map(|i| {
            let mut l: Vec<usize> = (0..nr).collect();
            l.sort_by(|&x, &y| proposer_mean(i, y).total_cmp(&proposer_mean(i, x)));
            l
        })
        .collect();
    let mut next = vec![0usize; np];
    let mut held_by: Vec<Option<usize>> = vec![None; nr];
    let mut holding: Vec<Option<usize>> = vec![None; np];

    loop {
        let mut offers: Vec<Vec<usize>> = vec![Vec::new(); nr];
        let mut any = false;
        for i in 0..np {
            if holding[i].is_none() && next[i] < nr {
                offers[lists[i][next[i]]].push(i);
                next[i] += 1;
                any = true;
            }
        }
        if !any {
            break;
        }
        for (r, new) in offers.into_iter().enumerate() {
            if new.is_empty() {
                continue;
            }
            let best = held_by[r]
                .into_iter()
                .chain(new.iter().copied())
                .max_by(|&x, &y| receiver_mean(r, x).total_cmp(&receiver_mean(r, y)))
                .expect("nonempty");
            if let Some(prev) = held_by[r] {
                if prev != best {
                    holding[prev] = None;
                }
            }
            held_by[r] = Some(best);
            holding[best] = Some(r);
        }
    }

    let mut m = Matching::empty(n, k);
    for (i, r) in holding.iter().enumerate() {
        if let Some(r) = *r {
            match proposers {
                Proposer::Players => m.pair(PlayerId(i), ArmId(r)),
                Proposer::Arms => m.pair(PlayerId(r), ArmId(i)),
            }
        }
    }
    m
}

/// All `(p, a)` that would both rather be with each other than with their
/// current partners. Empty iff `m` is stable.
pub fn blocking_pairs(profile: &PreferenceProfile, m: &Matching) -> Vec<(PlayerId, ArmId)> {
    let mut out = Vec::new();
    for p in profile.players() {
        let current = m.arm_of(p);
        for a in profile.arms() {
            if Some(a) == current {
                continue;
            }
            if profile.player_prefers(p, a, current) && profile.arm_prefers(a, p, m.player_of(a)) {
                out.push((p, a));
            }
        }
    }
    out
}

/// Short-circuiting stability check.
pub fn is_stable(profile: &PreferenceProfile, m: &Matching) -> bool {
    profile.players().all(|p| {
        let current = m.arm_of(p);
        profile.arms().all(|a| {
            Some(a) == current
                || !(profile.player_prefers(p, a, current)
                    && profile.arm_prefers(a, p, m.player_of(a)))
        })
    })
}

/// `max_i (X_i - X_{i,m(i)})` measured in true means, where `X_i` is player
/// `i`'s mean in the player-pessimal stable matching.
pub fn max_player_regret(profile: &PreferenceProfile, m: &Matching) -> f64 {
    let pessimal = gale_shapley(profile, Proposer::Arms);
    max_player_regret_against(profile, &pessimal, m)
}

/// [`max_player_regret`] with a precomputed player-pessimal matching.
pub fn max_player_regret_against(
    profile: &PreferenceProfile,
    pessimal: &Matching,
    m: &Matching,
) -> f64 {
    profile
        .players()
        .map(|p| profile.player_value(p, pessimal.arm_of(p)) - profile.player_value(p, m.arm_of(p)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Upper bound on `N` for brute-force enumeration.
pub const ENUMERATION_MAX_PLAYERS: usize = 6;
/// Upper bound on `K` for brute-force enumeration.
pub const ENUMERATION_MAX_ARMS: usize = 12;

/// Every matching that assigns all players and has no blocking pair, found by
/// exhaustive search over injective player-to-arm maps. Sorted.
///
/// Intended as a test oracle; refuses markets above
/// [`ENUMERATION_MAX_PLAYERS`] x [`ENUMERATION_MAX_ARMS`].
pub fn enumerate_stable_matchings(profile: &PreferenceProfile) -> Result<Vec<Matching>> {
    let n = profile.n_players();
    let k = profile.n_arms();
    if n > ENUMERATION_MAX_PLAYERS || k > ENUMERATION_MAX_ARMS {
        return Err(invalid(format!(
            "enumeration limited to N <= {ENUMERATION_MAX_PLAYERS}, K <= {ENUMERATION_MAX_ARMS}; got {n}x{k}"
        )));
    }
    let mut out = Vec::new();
    let mut used = vec![false; k];
    let mut current = Matching::empty(n, k);
    enumerate_rec(profile, 0, &mut used, &mut current, &mut out);
    out.sort();
    Ok(out)
}

fn enumerate_rec(
    profile: &PreferenceProfile,
    i: usize,
    used: &mut [bool],
    current: &mut Matching,
    out: &mut Vec<Matching>,
) {
    if i == profile.n_players() {
        if is_stable(profile, current) {
            out.push(current.clone());
        }
        return;
    }
    for a in 0..profile.n_arms() {
        if used[a] {
            continue;
        }
        used[a] = true;
        current.pair(PlayerId(i), ArmId(a));
        enumerate_rec(profile, i + 1, used, current, out);
        current.by_player[i] = None;
        current.by_arm[a] = None;
        used[a] = false;
    }
}

/// Convenience check used by tests and the CLI.
pub fn check_matching(profile: &PreferenceProfile, m: &Matching) -> Result<()> {
    m.check_shape(profile)
}
