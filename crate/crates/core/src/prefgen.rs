//! Seeded preference generators.
//!
//! Every generator turns real-valued utilities into ranks, so a player row is
//! always a permutation of `1..=K` and an arm row a permutation of `1..=N`
//! with the most preferred partner holding the largest mean.

use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::market::PreferenceProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Independent uniform permutations on both sides.
    Uniform,
    /// Shared arm quality plus logistic noise on the player side.
    BetaHeterogeneous,
    /// One weight per (player, arm) edge ranked by both endpoints.
    EdgeCorrelated,
}

/// Describes how to draw a market.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n_players: usize,
    pub n_arms: usize,
    /// Heterogeneity control; only read by `beta_heterogeneous`.
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn uniform(n_players: usize, n_arms: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Uniform,
            n_players,
            n_arms,
            beta: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_players == 0 {
            return Err(invalid("n_players must be at least 1"));
        }
        if self.n_players > self.n_arms {
            return Err(invalid(format!(
                "n_players = {} exceeds n_arms = {}",
                self.n_players, self.n_arms
            )));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(invalid(format!(
                "beta must be a finite nonnegative number, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<PreferenceProfile> {
        match self.kind {
            GeneratorKind::Uniform => gen_uniform(self.n_players, self.n_arms, self.seed),
            GeneratorKind::BetaHeterogeneous => {
                gen_beta_heterogeneous(self.n_players, self.n_arms, self.beta, self.seed)
            }
            GeneratorKind::EdgeCorrelated => {
                gen_edge_correlated(self.n_players, self.n_arms, self.seed)
            }
        }
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > k {
        return Err(invalid(format!("need 1 <= n <= k, got n = {n}, k = {k}")));
    }
    Ok(())
}

fn random_permutation<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (1..=len).map(|x| x as f64).collect();
    row.shuffle(rng);
    row
}

/// `rank[j] = #{k : values[k] <= values[j]}`, or `None` on an exact tie.
pub(crate) fn ascending_ranks(values: &[f64]) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if order.windows(2).any(|w| values[w[0]] == values[w[1]]) {
        return None;
    }
    let mut ranks = vec![0.0; values.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = (r + 1) as f64;
    }
    Some(ranks)
}

/// Standard logistic draw by inverse CDF on an open-interval uniform.
fn logistic<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    (u / (1.0 - u)).ln()
}

/// Independent uniform random permutations on both sides.
pub fn gen_uniform(n: usize, k: usize, seed: u64) -> Result<PreferenceProfile> {
    check_sizes(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let players = (0..n).map(|_| random_permutation(k, &mut rng)).collect();
    let arms = (0..k).map(|_| random_permutation(n, &mut rng)).collect();
    PreferenceProfile::new(players, arms)
}

/// Player utilities `beta * x_j + eps_ij` with shared qualities
/// `x_j ~ U[0, 1]` and logistic noise, converted to ranks per player. Arm
/// rows are uniform permutations.
///
/// Larger `beta` makes players agree more; at `beta = 0` rows are
/// independent uniform permutations.
pub fn gen_beta_heterogeneous(
    n: usize,
    k: usize,
    beta: f64,
    seed: u64,
) -> Result<PreferenceProfile> {
    check_sizes(n, k)?;
    if !beta.is_finite() || beta < 0.0 {
        return Err(invalid(format!(
            "beta must be a finite nonnegative number, got {beta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quality: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let players = (0..n)
        .map(|_| loop {
            let utilities: Vec<f64> = quality
                .iter()
                .map(|&x| beta * x + logistic(&mut rng))
                .collect();
            if let Some(r) = ascending_ranks(&utilities) {
                break r;
            }
        })
        .collect();
    let arms = (0..k).map(|_| random_permutation(n, &mut rng)).collect();
    PreferenceProfile::new(players, arms)
}

/// Edge weights `w_ij ~ U[0, 1]` ranked by both endpoints.
pub fn gen_edge_correlated(n: usize, k: usize, seed: u64) -> Result<PreferenceProfile> {
    check_sizes(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen::<f64>()).collect())
            .collect();
        if let Ok(p) = profile_from_edge_weights(&weights) {
            return Ok(p);
        }
    }
}

/// Profile in which player `i` ranks arms by `weights[i][j]` and arm `j`
/// ranks players by the same `weights[i][j]`, higher weight preferred.
pub fn profile_from_edge_weights(weights: &[Vec<f64>]) -> Result<PreferenceProfile> {
    let n = weights.len();
    let k = weights.first().map_or(0, Vec::len);
    check_sizes(n, k)?;
    if weights.iter().any(|r| r.len() != k) {
        return Err(invalid("edge weight matrix is ragged"));
    }
    let tie = || invalid("tied edge weights");
    let players = weights
        .iter()
        .map(|row| ascending_ranks(row).ok_or_else(tie))
        .collect::<Result<Vec<_>>>()?;
    let arms = (0..k)
        .map(|j| {
            let column: Vec<f64> = weights.iter().map(|r| r[j]).collect();
            ascending_ranks(&column).ok_or_else(tie)
        })
        .collect::<Result<Vec<_>>>()?;
    PreferenceProfile::new(players, arms)
}
