//! Belief-state primitives shared by the learning policies.
//!
//! Two estimator families are provided: optimistic upper confidence bounds
//! over empirical counts, and Thompson-style Gaussian posteriors with a
//! Bernoulli win-rate estimate. The position belief backs OCA-UCB's learned
//! view of where a player stands in each arm's ordering.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::market::PlayerId;

fn check_round(t: u64) -> Result<()> {
    if t < 1 {
        return Err(invalid("round index t must be at least 1"));
    }
    Ok(())
}

/// `sqrt(3 ln t / (2 n))`.
#[inline]
fn confidence_bonus(t: u64, n: u64) -> f64 {
    (3.0 * (t as f64).ln() / (2.0 * n as f64)).sqrt()
}

/// Pull count and reward sum for one (agent, partner) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub count: u64,
    pub sum: f64,
}

impl RewardStats {
    pub fn record(&mut self, reward: f64) {
        self.count += 1;
        self.sum += reward;
    }

    /// Empirical mean, `None` before the first observation.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Conflict wins and total conflicts against one opponent at one arm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinStats {
    pub wins: u64,
    pub total: u64,
}

impl WinStats {
    pub fn record(&mut self, won: bool) {
        self.total += 1;
        self.wins += u64::from(won);
    }
}

/// UCB reward index at round `t`; `stats` must hold observations up to
/// round `t - 1`. Unobserved partners get `+inf`.
pub fn ucb_index(stats: &RewardStats, t: u64) -> Result<f64> {
    check_round(t)?;
    Ok(match stats.count {
        0 => f64::INFINITY,
        n => stats.sum / n as f64 + confidence_bonus(t, n),
    })
}

/// Optimistic conflict-win probability, censored at 1.
pub fn ucb_win_prob(stats: &WinStats, t: u64) -> Result<f64> {
    check_round(t)?;
    Ok(match stats.total {
        0 => 1.0,
        n => (stats.wins as f64 / n as f64 + confidence_bonus(t, n)).min(1.0),
    })
}

/// Normal posterior over a mean reward with known observation precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub precision: f64,
    pub obs_precision: f64,
}

impl GaussianPosterior {
    /// Prior with the given mean and precision and unit observation variance.
    pub fn new(mean: f64, precision: f64) -> Result<Self> {
        if !precision.is_finite() || precision <= 0.0 || !mean.is_finite() {
            return Err(invalid(format!(
                "posterior needs a finite mean and positive finite precision, got ({mean}, {precision})"
            )));
        }
        Ok(GaussianPosterior {
            mean,
            precision,
            obs_precision: 1.0,
        })
    }

    /// Conjugate update with a batch of observations.
    pub fn updated(&self, rewards: &[f64]) -> GaussianPosterior {
        if rewards.is_empty() {
            return *self;
        }
        let n = rewards.len() as f64;
        let sum: f64 = rewards.iter().sum();
        let precision = self.precision + n * self.obs_precision;
        GaussianPosterior {
            mean: (self.precision * self.mean + self.obs_precision * sum) / precision,
            precision,
            obs_precision: self.obs_precision,
        }
    }

    pub fn record(&mut self, reward: f64) {
        *self = self.updated(&[reward]);
    }

    /// One draw from `Normal(mean, 1 / precision)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + z / self.precision.sqrt()
    }
}

/// Conflict wins (`alpha`) and losses (`beta`) against one opponent at one arm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaWinCounts {
    pub alpha: u64,
    pub beta: u64,
}

impl BetaWinCounts {
    pub fn record(&mut self, won: bool) {
        if won {
            self.alpha += 1;
        } else {
            self.beta += 1;
        }
    }

    /// `alpha / (alpha + beta)`, or 1 before any conflict.
    pub fn point(&self) -> f64 {
        bernoulli_point(self)
    }

    /// Draw from `Beta(alpha + 1, beta + 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.alpha as f64 + 1.0, self.beta as f64 + 1.0)
            .expect("shape parameters are at least 1")
            .sample(rng)
    }
}

pub fn bernoulli_point(counts: &BetaWinCounts) -> f64 {
    match counts.alpha + counts.beta {
        0 => 1.0,
        total => counts.alpha as f64 / total as f64,
    }
}

/// A player's belief about who an arm ranks above and below it.
///
/// `higher` and `lower` always partition every other player.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionBelief {
    owner: PlayerId,
    higher: BTreeSet<PlayerId>,
    lower: BTreeSet<PlayerId>,
}

impl PositionBelief {
    /// The owner believes it is ranked first.
    pub fn optimistic(owner: PlayerId, n_players: usize) -> Self {
        PositionBelief {
            owner,
            higher: BTreeSet::new(),
            lower: (0..n_players)
                .map(PlayerId)
                .filter(|&p| p != owner)
                .collect(),
        }
    }

    pub fn owner(&self) -> PlayerId {
        self.owner
    }

    pub fn higher(&self) -> &BTreeSet<PlayerId> {
        &self.higher
    }

    pub fn lower(&self) -> &BTreeSet<PlayerId> {
        &self.lower
    }

    /// Whether the owner currently believes it beats `other`.
    pub fn believes_above(&self, other: PlayerId) -> bool {
        self.lower.contains(&other)
    }

    /// Records that `winner` beat the owner in a conflict. Idempotent.
    pub fn record_loss(&mut self, winner: PlayerId) -> Result<()> {
        if winner == self.owner {
            return Err(invalid(format!(
                "{winner} cannot lose a conflict to itself"
            )));
        }
        if !self.higher.contains(&winner) && !self.lower.contains(&winner) {
            return Err(invalid(format!("{winner} is not a player in this market")));
        }
        self.lower.remove(&winner);
        self.higher.insert(winner);
        Ok(())
    }
}

/// Value-style wrapper around [`PositionBelief::record_loss`].
pub fn position_update_on_loss(
    belief: &PositionBelief,
    winner: PlayerId,
) -> Result<PositionBelief> {
    let mut b = belief.clone();
    b.record_loss(winner)?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ucb_index_values() {
        assert_eq!(
            ucb_index(&RewardStats::default(), 5).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            ucb_index(&RewardStats { count: 1, sum: 0.0 }, 1).unwrap(),
            0.0
        );
        assert!(ucb_index(&RewardStats::default(), 0).is_err());
    }

    #[test]
    fn win_prob_values() {
        assert_eq!(ucb_win_prob(&WinStats::default(), 3).unwrap(), 1.0);
        assert_eq!(
            ucb_win_prob(&WinStats { wins: 5, total: 5 }, 1).unwrap(),
            1.0
        );
        assert_eq!(
            ucb_win_prob(&WinStats { wins: 5, total: 5 }, 1000).unwrap(),
            1.0
        );
        assert_eq!(
            ucb_win_prob(&WinStats { wins: 1, total: 4 }, 1).unwrap(),
            0.25
        );
        assert!(ucb_win_prob(&WinStats::default(), 0).is_err());
    }

    #[test]
    fn gaussian_update_values() {
        let prior = GaussianPosterior::new(2.0, 4.0).unwrap();
        assert_eq!(prior.updated(&[]), prior);
        let post = prior.updated(&[2.0, 2.0]);
        assert_eq!(post.mean, 2.0);
        assert_eq!(post.precision, 6.0);
        assert!(GaussianPosterior::new(0.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_sample_degenerate_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tight = GaussianPosterior::new(3.5, 1e12).unwrap();
        assert!((tight.sample(&mut rng) - 3.5).abs() < 1e-4);

        let post = GaussianPosterior::new(0.0, 1.0).unwrap();
        let a = post.sample(&mut ChaCha8Rng::seed_from_u64(42));
        let b = post.sample(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_sample_mean_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let post = GaussianPosterior::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| post.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn bernoulli_point_values() {
        assert_eq!(bernoulli_point(&BetaWinCounts { alpha: 0, beta: 0 }), 1.0);
        assert_relative_eq!(bernoulli_point(&BetaWinCounts { alpha: 3, beta: 1 }), 0.75);
        assert_eq!(bernoulli_point(&BetaWinCounts { alpha: 0, beta: 5 }), 0.0);
    }

    #[test]
    fn beta_sample_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = BetaWinCounts { alpha: 2, beta: 7 };
        for _ in 0..1000 {
            let z = c.sample(&mut rng);
            assert!((0.0..=1.0).contains(&z));
        }
    }

    #[test]
    fn position_updates() {
        let fresh = PositionBelief::optimistic(PlayerId(0), 4);
        assert!(fresh.higher().is_empty());
        assert_eq!(fresh.lower().len(), 3);

        let once = position_update_on_loss(&fresh, PlayerId(2)).unwrap();
        assert_eq!(
            once.higher().iter().copied().collect::<Vec<_>>(),
            vec![PlayerId(2)]
        );
        assert!(!once.believes_above(PlayerId(2)));
        let twice = position_update_on_loss(&once, PlayerId(2)).unwrap();
        assert_eq!(once, twice);

        let mut all = fresh.clone();
        for p in 1..4 {
            all.record_loss(PlayerId(p)).unwrap();
        }
        assert!(all.lower().is_empty());

        assert!(position_update_on_loss(&fresh, PlayerId(0)).is_err());
        assert!(position_update_on_loss(&fresh, PlayerId(9)).is_err());
    }
}
