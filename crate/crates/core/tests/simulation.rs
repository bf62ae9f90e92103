use matchbandit::harness::{
    aggregate, read_aggregate_csv, read_runs_csv, run_experiment, write_aggregate_csv,
    write_runs_csv, ExperimentSpec,
};
use matchbandit::market::{enumerate_stable_matchings, is_stable};
use matchbandit::{
    run_episode, ArmId, Episode, EpisodeConfig, GeneratorSpec, Matching, PlayerId,
    PlayerPolicyKind, PreferenceProfile, Scenario,
};

fn shared_top() -> PreferenceProfile {
    PreferenceProfile::new(
        vec![vec![2.0, 1.0], vec![2.0, 1.0]],
        vec![vec![2.0, 1.0], vec![2.0, 1.0]],
    )
    .unwrap()
}

#[test]
fn apck_settles_on_unique_stable_matching() {
    let profile = shared_top();
    let stable = enumerate_stable_matchings(&profile).unwrap();
    assert_eq!(stable.len(), 1);
    let expected = Matching::from_assignment(vec![Some(ArmId(0)), Some(ArmId(1))], 2).unwrap();
    assert_eq!(stable[0], expected);

    for seed in 0..20 {
        let cfg = EpisodeConfig::new(Scenario::Apck, GeneratorSpec::uniform(2, 2, 0), 2000, seed);
        let mut ep = Episode::with_profile(&cfg, profile.clone()).unwrap();
        let mut tail_conflicts = 0;
        while !ep.is_finished() {
            let o = ep.step();
            if o.round > 1800 {
                tail_conflicts += o.conflict_count();
            }
        }
        let last = ep.last_outcome().unwrap();
        assert_eq!(last.matching, expected, "seed {seed}");
        assert_eq!(tail_conflicts, 0, "seed {seed}");
    }
}

#[test]
fn oca_beliefs_stay_sound() {
    for seed in 0..20 {
        let cfg = EpisodeConfig::new(
            Scenario::Apkp,
            GeneratorSpec::uniform(5, 6, seed + 100),
            800,
            seed,
        );
        let log = run_episode(&cfg).unwrap();
        for d in &log.final_beliefs {
            let higher = d
                .higher
                .as_ref()
                .expect("OCA players carry position beliefs");
            for (arm, members) in higher.iter().enumerate() {
                for &q in members {
                    assert!(log.profile.arm_prefers(ArmId(arm), q, Some(d.player)));
                }
            }
        }
    }
}

#[test]
fn pca_players_start_uniform_then_learn() {
    let cfg = EpisodeConfig::new(Scenario::Apu, GeneratorSpec::uniform(3, 3, 8), 400, 2)
        .with_player_policy(PlayerPolicyKind::PcaTs);
    let log = run_episode(&cfg).unwrap();
    for d in &log.final_beliefs {
        let pulls: u64 = d.pulls.iter().sum();
        assert!(pulls > 0 && pulls <= 400);
        assert!(d.higher.is_none());
        assert_eq!(d.mean_estimates.len(), 3);
    }
    let last = log.snapshots.last().unwrap();
    assert_eq!(last.stable, is_stable(&log.profile, &last.matching));
}

fn small_template(seed: u64) -> EpisodeConfig {
    EpisodeConfig::new(Scenario::Apkp, GeneratorSpec::uniform(4, 4, 0), 200, seed)
}

#[test]
fn single_run_aggregate_is_its_snapshot_series() {
    let out = run_experiment(&small_template(0), 1, 77, 1).unwrap();
    let snaps = &out.runs[0].snapshots;
    assert_eq!(out.aggregate.len(), snaps.len());
    for (p, s) in out.aggregate.iter().zip(snaps) {
        assert_eq!(p.t, s.t);
        assert_eq!(p.stability_rate, if s.stable { 1.0 } else { 0.0 });
        assert_eq!(p.mean_max_regret, s.max_regret);
        assert_eq!(p.mean_conflicts, s.conflicts as f64);
    }
}

fn csv_bytes(out: &matchbandit::harness::ExperimentOutput) -> (Vec<u8>, Vec<u8>) {
    let (mut runs, mut agg) = (Vec::new(), Vec::new());
    write_runs_csv(&mut runs, &out.records()).unwrap();
    write_aggregate_csv(&mut agg, &out.aggregate).unwrap();
    (runs, agg)
}

#[test]
fn outputs_independent_of_worker_count() {
    let template = small_template(0);
    let serial = run_experiment(&template, 24, 5, 1).unwrap();
    let parallel = run_experiment(&template, 24, 5, 4).unwrap();
    assert_eq!(csv_bytes(&serial), csv_bytes(&parallel));
    assert_ne!(
        csv_bytes(&serial),
        csv_bytes(&run_experiment(&template, 24, 6, 4).unwrap())
    );
}

#[test]
fn runs_draw_distinct_markets() {
    let out = run_experiment(&small_template(0), 8, 1, 2).unwrap();
    let distinct: std::collections::BTreeSet<String> = out
        .runs
        .iter()
        .map(|r| serde_json::to_string(&r.profile).unwrap())
        .collect();
    assert!(distinct.len() > 1);
}

#[test]
fn aggregate_recomputed_from_csv_is_exact() {
    let out = run_experiment(&small_template(0), 10, 3, 0).unwrap();
    let (runs, agg) = csv_bytes(&out);
    let records = read_runs_csv(runs.as_slice()).unwrap();
    assert_eq!(aggregate(&records), out.aggregate);
    assert_eq!(read_aggregate_csv(agg.as_slice()).unwrap(), out.aggregate);
}

#[test]
fn experiment_spec_round_trips_through_toml() {
    let text = r#"
name = "demo"
n_runs = 3
master_seed = 9

[episode]
scenario = "APU"
player_policy = "pca_ts"
horizon = 50

[episode.generator]
kind = "beta_heterogeneous"
n_players = 3
n_arms = 4
beta = 10.0

[proxy]
window = 20

[[sweep]]
label = "b0"
beta = 0.0
"#;
    let spec = ExperimentSpec::from_toml(text).unwrap();
    assert_eq!(spec.proxy.threshold, 0.9);
    assert_eq!(spec.episode.lambda, 0.9);
    assert_eq!(
        ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap(),
        spec
    );
    assert_eq!(spec.points()[0].1.generator.beta, 0.0);

    assert!(ExperimentSpec::from_toml(&text.replace("n_runs = 3", "n_runs = 0")).is_err());
    assert!(
        ExperimentSpec::from_toml(&text.replace("horizon = 50", "horizon = 50\nbogus = 1"))
            .is_err()
    );
    assert!(ExperimentSpec::from_toml(&text.replace("\"pca_ts\"", "\"oca_ucb\"")).is_err());
}

#[test]
fn player_ids_and_arms_display() {
    assert_eq!(PlayerId(3).to_string(), "p3");
    assert_eq!(ArmId(0).to_string(), "a0");
}
