//! Index and posterior formulas checked against independently computed values.

use approx::assert_relative_eq;
use matchbandit::belief::{
    bernoulli_point, position_update_on_loss, ucb_index, ucb_win_prob, BetaWinCounts,
    GaussianPosterior, PositionBelief, RewardStats, WinStats,
};
use matchbandit::PlayerId;

const REL: f64 = 1e-9;

#[test]
fn ucb_index_values() {
    assert_eq!(
        ucb_index(&RewardStats::default(), 1).unwrap(),
        f64::INFINITY
    );
    assert_eq!(
        ucb_index(&RewardStats { count: 1, sum: 0.0 }, 1).unwrap(),
        0.0
    );
    // 0.5 + sqrt(3 ln 10 / 4), evaluated at 30 digits.
    let v = ucb_index(&RewardStats { count: 2, sum: 1.0 }, 10).unwrap();
    assert_relative_eq!(v, 1.814_130_442_439_233, max_relative = REL);
    // 1 + sqrt(3 ln 7 / 6)
    let v = ucb_index(&RewardStats { count: 3, sum: 3.0 }, 7).unwrap();
    assert_relative_eq!(v, 1.986_384_851_124_375_6, max_relative = REL);
    assert!(ucb_index(&RewardStats::default(), 0).is_err());
}

#[test]
fn ucb_win_prob_values() {
    assert_eq!(ucb_win_prob(&WinStats::default(), 3).unwrap(), 1.0);
    assert_eq!(
        ucb_win_prob(&WinStats { wins: 5, total: 5 }, 1).unwrap(),
        1.0
    );
    assert_eq!(
        ucb_win_prob(&WinStats { wins: 5, total: 5 }, 1000).unwrap(),
        1.0
    );
    // 0.25 + 0.9297... = 1.179 before censoring.
    assert_eq!(
        ucb_win_prob(&WinStats { wins: 1, total: 4 }, 10).unwrap(),
        1.0
    );
    // Uncensored: t = 1 removes the bonus.
    assert_relative_eq!(
        ucb_win_prob(&WinStats { wins: 1, total: 4 }, 1).unwrap(),
        0.25,
        max_relative = REL
    );
    assert!(ucb_win_prob(&WinStats::default(), 0).is_err());
}

#[test]
fn gaussian_update_values() {
    let prior = GaussianPosterior::new(0.0, 1e-6).unwrap();
    assert_eq!(prior.updated(&[]), prior);

    let post = prior.updated(&[1.0]);
    assert_relative_eq!(post.mean, 0.999_999_000_001, max_relative = REL);
    assert_relative_eq!(post.precision, 1.000_001, max_relative = REL);

    let post = GaussianPosterior::new(2.0, 4.0)
        .unwrap()
        .updated(&[2.0, 2.0]);
    assert_relative_eq!(post.mean, 2.0, max_relative = REL);
    assert_relative_eq!(post.precision, 6.0, max_relative = REL);

    // (3 * 1 + 4 + 6) / (3 + 2) = 2.6
    let post = GaussianPosterior::new(1.0, 3.0)
        .unwrap()
        .updated(&[4.0, 6.0]);
    assert_relative_eq!(post.mean, 2.6, max_relative = REL);
    assert_relative_eq!(post.precision, 5.0, max_relative = REL);

    assert!(GaussianPosterior::new(0.0, 0.0).is_err());
    assert!(GaussianPosterior::new(f64::NAN, 1.0).is_err());
}

#[test]
fn bernoulli_point_values() {
    assert_eq!(bernoulli_point(&BetaWinCounts { alpha: 0, beta: 0 }), 1.0);
    assert_relative_eq!(
        bernoulli_point(&BetaWinCounts { alpha: 3, beta: 1 }),
        0.75,
        max_relative = REL
    );
    assert_eq!(bernoulli_point(&BetaWinCounts { alpha: 0, beta: 5 }), 0.0);
}

#[test]
fn position_update_values() {
    let fresh = PositionBelief::optimistic(PlayerId(0), 4);
    assert!(fresh.higher().is_empty());
    assert_eq!(fresh.lower().len(), 3);

    let once = position_update_on_loss(&fresh, PlayerId(2)).unwrap();
    assert_eq!(
        once.higher().iter().copied().collect::<Vec<_>>(),
        vec![PlayerId(2)]
    );
    assert_eq!(position_update_on_loss(&once, PlayerId(2)).unwrap(), once);

    let mut all = fresh.clone();
    for w in 1..4 {
        all.record_loss(PlayerId(w)).unwrap();
    }
    assert!(all.lower().is_empty());
    assert!(position_update_on_loss(&fresh, PlayerId(0)).is_err());
}
