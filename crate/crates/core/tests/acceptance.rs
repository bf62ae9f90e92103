//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any hard criterion fails.
//!
//! Built with `harness = false`; run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use matchbandit::belief::{
    bernoulli_point, position_update_on_loss, ucb_index, ucb_win_prob, BetaWinCounts,
    GaussianPosterior, PositionBelief, RewardStats, WinStats,
};
use matchbandit::harness::{
    convergence_proxy, first_reaching, run_experiment, write_aggregate_csv, write_runs_csv,
    ExperimentOutput,
};
use matchbandit::market::{blocking_pairs, enumerate_stable_matchings, gale_shapley};
use matchbandit::prefgen::gen_uniform;
use matchbandit::{
    ArmId, EpisodeConfig, GeneratorKind, GeneratorSpec, PlayerId, PlayerPolicyKind, Proposer,
    Scenario,
};

const MASTER_SEED: u64 = 42;
const RUNS: usize = 100;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    hard: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(f: impl FnOnce() -> (bool, String)) -> (bool, String, Duration) {
    let start = Instant::now();
    let (pass, detail) = f();
    (pass, detail, start.elapsed())
}

fn template(scenario: Scenario, n: usize, horizon: u64) -> EpisodeConfig {
    EpisodeConfig::new(scenario, GeneratorSpec::uniform(n, n, 0), horizon, 0)
}

fn run(template: &EpisodeConfig) -> ExperimentOutput {
    run_experiment(template, RUNS, MASTER_SEED, 0).expect("experiment runs")
}

fn final_stability(out: &ExperimentOutput) -> f64 {
    out.aggregate
        .last()
        .expect("at least one snapshot")
        .stability_rate
}

/// Snapshots with `t > horizon - rounds`; they cover exactly the last
/// `rounds` rounds when `rounds` is a multiple of the snapshot cadence.
fn tail(
    out: &ExperimentOutput,
    rounds: u64,
) -> impl Iterator<Item = &matchbandit::harness::AggregatePoint> {
    let horizon = out.template.horizon;
    out.aggregate.iter().filter(move |p| p.t + rounds > horizon)
}

fn conflict_free_tail_fraction(out: &ExperimentOutput, rounds: u64) -> f64 {
    let horizon = out.template.horizon;
    let clean = out
        .runs
        .iter()
        .filter(|r| {
            r.snapshots
                .iter()
                .filter(|s| s.t + rounds > horizon)
                .all(|s| s.conflicts == 0)
        })
        .count();
    clean as f64 / out.runs.len() as f64
}

fn oracle_equivalence() -> (bool, String) {
    let mut bad = 0;
    for seed in 0..500 {
        let profile = gen_uniform(3, 3, seed).unwrap();
        let all = enumerate_stable_matchings(&profile).unwrap();
        let players = gale_shapley(&profile, Proposer::Players);
        let arms = gale_shapley(&profile, Proposer::Arms);
        let ok_members = [&players, &arms]
            .iter()
            .all(|m| all.contains(m) && blocking_pairs(&profile, m).is_empty());
        let pessimal = all.iter().all(|m| {
            profile.players().all(|p| {
                profile.player_value(p, arms.arm_of(p)) <= profile.player_value(p, m.arm_of(p))
            })
        });
        bad += usize::from(!(ok_members && pessimal));
    }
    (
        bad == 0,
        format!("{bad} of 500 profiles disagree with brute force"),
    )
}

fn formula_units() -> (bool, String) {
    let rel = |a: f64, b: f64| ((a - b) / b).abs() <= 1e-9;
    let post = GaussianPosterior::new(0.0, 1e-6).unwrap().updated(&[1.0]);
    let checks = [
        (
            "ucb n=0",
            ucb_index(&RewardStats::default(), 5).unwrap() == f64::INFINITY,
        ),
        (
            "ucb n=1 t=1",
            ucb_index(&RewardStats { count: 1, sum: 0.0 }, 1).unwrap() == 0.0,
        ),
        (
            "ucb n=2 t=10",
            rel(
                ucb_index(&RewardStats { count: 2, sum: 1.0 }, 10).unwrap(),
                1.814_130_442_439_233,
            ),
        ),
        (
            "win n=0",
            ucb_win_prob(&WinStats::default(), 5).unwrap() == 1.0,
        ),
        (
            "win 5/5",
            ucb_win_prob(&WinStats { wins: 5, total: 5 }, 7).unwrap() == 1.0,
        ),
        (
            "win 1/4 t=10",
            ucb_win_prob(&WinStats { wins: 1, total: 4 }, 10).unwrap() == 1.0,
        ),
        ("gauss mean", rel(post.mean, 0.999_999_000_001)),
        ("gauss precision", rel(post.precision, 1.000_001)),
        ("gauss fixed", {
            let p = GaussianPosterior::new(2.0, 4.0)
                .unwrap()
                .updated(&[2.0, 2.0]);
            rel(p.mean, 2.0) && rel(p.precision, 6.0)
        }),
        (
            "bern 0/0",
            bernoulli_point(&BetaWinCounts { alpha: 0, beta: 0 }) == 1.0,
        ),
        (
            "bern 3/1",
            rel(bernoulli_point(&BetaWinCounts { alpha: 3, beta: 1 }), 0.75),
        ),
        (
            "bern 0/5",
            bernoulli_point(&BetaWinCounts { alpha: 0, beta: 5 }) == 0.0,
        ),
        (
            "position",
            position_update_on_loss(&PositionBelief::optimistic(PlayerId(0), 3), PlayerId(2))
                .unwrap()
                .higher()
                .contains(&PlayerId(2)),
        ),
    ];
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    (
        failed.is_empty(),
        format!("{} checks, failed: {failed:?}", checks.len()),
    )
}

fn main() {
    let mut verdicts = Vec::new();
    let mut push = |id, name, hard, (pass, detail, elapsed): (bool, String, Duration)| {
        verdicts.push(Verdict {
            id,
            name,
            pass,
            hard,
            detail,
            elapsed,
        });
    };

    let (pass, detail, elapsed) = timed(oracle_equivalence);
    push(
        1,
        "oracle equivalence",
        true,
        (pass && elapsed < Duration::from_secs(10), detail, elapsed),
    );

    push(2, "formula units", true, timed(formula_units));

    // Criteria 3, 4 and 9 share one APKP experiment.
    let apkp_template = template(Scenario::Apkp, 5, 3000);
    let start = Instant::now();
    let apkp = run(&apkp_template);
    let apkp_time = start.elapsed();
    {
        let stab = final_stability(&apkp);
        let tail_pts: Vec<f64> = tail(&apkp, 500).map(|p| p.mean_max_regret).collect();
        let regret = tail_pts.iter().sum::<f64>() / tail_pts.len() as f64;
        let pass = stab >= 0.90 && regret <= 0.25 && apkp_time < Duration::from_secs(60);
        push(
            3,
            "OCA-UCB convergence",
            true,
            (
                pass,
                format!("final stability {stab:.3} (>= 0.90), tail regret {regret:.4} (<= 0.25)"),
                apkp_time,
            ),
        );
    }

    push(
        4,
        "OCA-UCB belief soundness",
        true,
        timed(|| {
            let mut violations = 0;
            for log in &apkp.runs {
                for d in &log.final_beliefs {
                    for (arm, members) in d
                        .higher
                        .as_ref()
                        .expect("position beliefs")
                        .iter()
                        .enumerate()
                    {
                        violations += members
                            .iter()
                            .filter(|&&q| !log.profile.arm_prefers(ArmId(arm), q, Some(d.player)))
                            .count();
                    }
                }
            }
            (
                violations == 0,
                format!("{violations} unsound higher-set entries"),
            )
        }),
    );

    push(
        5,
        "beta-insensitivity of OCA-UCB",
        true,
        timed(|| {
            let rates: Vec<f64> = [0.0, 1000.0]
                .iter()
                .map(|&beta| {
                    let mut t = template(Scenario::Apkp, 10, 3000);
                    t.generator.kind = GeneratorKind::BetaHeterogeneous;
                    t.generator.beta = beta;
                    final_stability(&run(&t))
                })
                .collect();
            let diff = (rates[0] - rates[1]).abs();
            (
                diff <= 0.15,
                format!(
                    "final stability beta=0 {:.3}, beta=1000 {:.3}, diff {diff:.3} (<= 0.15)",
                    rates[0], rates[1]
                ),
            )
        }),
    );

    let apu = |kind| template(Scenario::Apu, 5, 8000).with_player_policy(kind);
    let start = Instant::now();
    let ucb = run(&apu(PlayerPolicyKind::PcaUcb));
    let ucb_time = start.elapsed();
    {
        let stab = final_stability(&ucb);
        let clean = conflict_free_tail_fraction(&ucb, 500);
        let pass = stab >= 0.80 && clean >= 0.80 && ucb_time < Duration::from_secs(300);
        push(
            6,
            "PCA-UCB convergence",
            true,
            (
                pass,
                format!("final stability {stab:.3} (>= 0.80), conflict-free last 500 rounds in {clean:.3} of runs (>= 0.80)"),
                ucb_time,
            ),
        );
    }

    let start = Instant::now();
    let ts = run(&apu(PlayerPolicyKind::PcaTs));
    let ts_time = start.elapsed();
    let (first_ts, first_ucb) = {
        let reach = |o: &ExperimentOutput| {
            first_reaching(&convergence_proxy(&o.aggregate, 1000, 0.9).unwrap(), 1.0)
        };
        (reach(&ts), reach(&ucb))
    };
    {
        let stab = final_stability(&ts);
        push(
            7,
            "PCA-TS convergence",
            true,
            (
                stab >= 0.85 && ts_time < Duration::from_secs(300),
                format!("final stability {stab:.3} (>= 0.85)"),
                ts_time,
            ),
        );
        let ordered = match (first_ts, first_ucb) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            _ => false,
        };
        push(
            7,
            "PCA-TS reaches proxy 1.0 no later than PCA-UCB (soft)",
            false,
            (
                ordered,
                format!("first round with proxy 1.0: TS {first_ts:?}, UCB {first_ucb:?}"),
                Duration::ZERO,
            ),
        );
    }

    push(
        8,
        "edge-correlation comparability",
        true,
        timed(|| {
            let reach = |kind| {
                let mut t = template(Scenario::Apkp, 10, 3000);
                t.generator.kind = kind;
                let out = run(&t);
                first_reaching(&convergence_proxy(&out.aggregate, 500, 0.9).unwrap(), 1.0)
            };
            let (uniform, edge) = (
                reach(GeneratorKind::Uniform),
                reach(GeneratorKind::EdgeCorrelated),
            );
            let pass = match (uniform, edge) {
                (Some(u), Some(e)) => e as f64 <= 1.5 * u as f64,
                _ => false,
            };
            (pass, format!("first round with proxy 1.0: uniform {uniform:?}, edge {edge:?} (edge <= 1.5x uniform)"))
        }),
    );

    push(
        9,
        "determinism",
        true,
        timed(|| {
            let bytes = |o: &ExperimentOutput| {
                let (mut r, mut a) = (Vec::new(), Vec::new());
                write_runs_csv(&mut r, &o.records()).unwrap();
                write_aggregate_csv(&mut a, &o.aggregate).unwrap();
                (r, a)
            };
            let reference = bytes(&apkp);
            let serial = bytes(&run_experiment(&apkp_template, RUNS, MASTER_SEED, 1).unwrap());
            let three = bytes(&run_experiment(&apkp_template, RUNS, MASTER_SEED, 3).unwrap());
            let pass = reference == serial && reference == three;
            (pass, format!("runs.csv {} bytes, aggregate.csv {} bytes, identical across 1/3/all workers: {pass}", reference.0.len(), reference.1.len()))
        }),
    );

    println!();
    println!("acceptance (master seed {MASTER_SEED}, {RUNS} runs per experiment)");
    let mut hard_failures = 0;
    for v in &verdicts {
        let status = match (v.pass, v.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "SOFT-FAIL",
        };
        hard_failures += usize::from(!v.pass && v.hard);
        println!(
            "criterion {}: {status} {} [{:.1}s] {}",
            v.id,
            v.name,
            v.elapsed.as_secs_f64(),
            v.detail
        );
    }
    println!();
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        std::process::exit(1);
    }
    println!("all hard criteria passed");
}
