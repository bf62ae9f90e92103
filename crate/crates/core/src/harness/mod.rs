//! Batch experiments: many seeded episodes, cross-run aggregation and the
//! convergence proxy.
//!
//! Run `i` of an experiment uses `derive_run_seed(master_seed, i)` for its
//! dynamics and a second derived seed for its market, so each run draws a
//! fresh preference profile. Results are collected by run index, which makes
//! every output independent of the worker count.

mod io;
mod presets;

pub use io::{
    read_aggregate_csv, read_runs_csv, write_aggregate_csv, write_experiment_dir, write_proxy_csv,
    write_runs_csv, ExperimentEcho,
};
pub use presets::{preset, preset_names, PRESETS};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{ArmPolicyKind, PlayerPolicyKind};
use crate::prefgen::GeneratorKind;
use crate::simulator::{run_episode, EpisodeConfig, RunLog};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` under `master_seed`:
/// `splitmix64(master_seed ^ splitmix64(run))`.
pub fn derive_run_seed(master_seed: u64, run: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run))
}

/// Stream tag mixed into a run seed to obtain its market seed.
const MARKET_STREAM: u64 = 0x6d61_726b_6574; // "market"

/// The episode config of run `run`: the template with both seeds replaced.
pub fn episode_for_run(template: &EpisodeConfig, master_seed: u64, run: u64) -> EpisodeConfig {
    let seed = derive_run_seed(master_seed, run);
    let mut cfg = template.resolved();
    cfg.seed = seed;
    cfg.generator.seed = splitmix64(seed ^ MARKET_STREAM);
    cfg
}

fn default_window() -> u64 {
    1000
}

fn default_threshold() -> f64 {
    0.9
}

/// Convergence-proxy parameters. `window` is measured in rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySettings {
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for ProxySettings {
    fn default() -> Self {
        ProxySettings {
            window: default_window(),
            threshold: default_threshold(),
        }
    }
}

/// One point of a sweep; unset fields keep the template's values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOverride {
    pub label: String,
    /// Square market: sets both `n_players` and `n_arms`.
    pub n: Option<usize>,
    pub n_players: Option<usize>,
    pub n_arms: Option<usize>,
    pub beta: Option<f64>,
    pub generator: Option<GeneratorKind>,
    pub horizon: Option<u64>,
    pub lambda: Option<f64>,
    pub player_policy: Option<PlayerPolicyKind>,
    pub arm_policy: Option<ArmPolicyKind>,
}

impl SweepOverride {
    pub fn apply(&self, template: &EpisodeConfig) -> EpisodeConfig {
        let mut c = template.clone();
        if let Some(n) = self.n {
            c.generator.n_players = n;
            c.generator.n_arms = n;
        }
        if let Some(n) = self.n_players {
            c.generator.n_players = n;
        }
        if let Some(k) = self.n_arms {
            c.generator.n_arms = k;
        }
        if let Some(b) = self.beta {
            c.generator.beta = b;
        }
        if let Some(g) = self.generator {
            c.generator.kind = g;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(l) = self.lambda {
            c.lambda = l;
        }
        if self.player_policy.is_some() {
            // A new player policy also resets the arm policy to its default
            // unless the override pins one.
            c.player_policy = self.player_policy;
            c.arm_policy = self.arm_policy;
        } else if self.arm_policy.is_some() {
            c.arm_policy = self.arm_policy;
        }
        c
    }
}

fn default_runs() -> usize {
    1000
}

/// A batch of runs, optionally swept over several config overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 uses all available cores.
    #[serde(default)]
    pub workers: usize,
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub proxy: ProxySettings,
    #[serde(default)]
    pub sweep: Vec<SweepOverride>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Labelled episode templates: one per sweep entry, or the base template.
    pub fn points(&self) -> Vec<(String, EpisodeConfig)> {
        if self.sweep.is_empty() {
            vec![(
                self.name.clone().unwrap_or_else(|| "experiment".into()),
                self.episode.clone(),
            )]
        } else {
            self.sweep
                .iter()
                .map(|s| (s.label.clone(), s.apply(&self.episode)))
                .collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.proxy.threshold) || self.proxy.window == 0 {
            return Err(Error::Config(format!(
                "proxy needs window >= 1 and threshold in [0, 1], got {:?}",
                self.proxy
            )));
        }
        let mut labels = std::collections::BTreeSet::new();
        for s in &self.sweep {
            if s.label.is_empty() || s.label.contains(['/', '\\']) || !labels.insert(&s.label) {
                return Err(Error::Config(format!(
                    "sweep label {:?} must be unique, nonempty and path-safe",
                    s.label
                )));
            }
        }
        for (label, cfg) in self.points() {
            cfg.validate()
                .map_err(|e| Error::Config(format!("sweep point {label:?}: {e}")))?;
        }
        Ok(())
    }
}

/// One row of `runs.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub t: u64,
    pub stable: bool,
    pub max_regret: f64,
    pub conflicts: u64,
}

/// Flattens run logs into snapshot rows, `run_id` being the slice index.
pub fn run_records(runs: &[RunLog]) -> Vec<RunRecord> {
    runs.iter()
        .enumerate()
        .flat_map(|(run_id, log)| {
            log.snapshots.iter().map(move |s| RunRecord {
                run_id,
                t: s.t,
                stable: s.stable,
                max_regret: s.max_regret,
                conflicts: s.conflicts,
            })
        })
        .collect()
}

/// Cross-run averages at one snapshot round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: u64,
    pub stability_rate: f64,
    pub mean_max_regret: f64,
    pub mean_conflicts: f64,
}

pub type AggregateSeries = Vec<AggregatePoint>;

/// Averages snapshot rows per round. Sums run in `run_id` order so the
/// result depends only on the set of rows.
pub fn aggregate(records: &[RunRecord]) -> AggregateSeries {
    let mut by_t: BTreeMap<u64, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_t.entry(r.t).or_default().push(r);
    }
    by_t.into_iter()
        .map(|(t, mut rows)| {
            rows.sort_by_key(|r| r.run_id);
            let n = rows.len() as f64;
            let stable = rows.iter().filter(|r| r.stable).count() as f64;
            let regret: f64 = rows.iter().map(|r| r.max_regret).sum();
            let conflicts: f64 = rows.iter().map(|r| r.conflicts as f64).sum();
            AggregatePoint {
                t,
                stability_rate: stable / n,
                mean_max_regret: regret / n,
                mean_conflicts: conflicts / n,
            }
        })
        .collect()
}

/// One point of the convergence proxy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyPoint {
    pub t: u64,
    pub proxy: f64,
}

/// At each snapshot round `t`, the fraction of snapshot rounds in
/// `(t - window, t]` whose stability rate exceeds `threshold`.
///
/// `window` is in rounds. Input order does not matter.
pub fn convergence_proxy(
    series: &[AggregatePoint],
    window: u64,
    threshold: f64,
) -> Result<Vec<ProxyPoint>> {
    if window == 0 {
        return Err(crate::error::invalid(
            "proxy window must be at least 1 round",
        ));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(crate::error::invalid(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let mut pts: Vec<(u64, bool)> = series
        .iter()
        .map(|p| (p.t, p.stability_rate > threshold))
        .collect();
    pts.sort_by_key(|&(t, _)| t);

    let mut out = Vec::with_capacity(pts.len());
    let mut start = 0;
    let mut above = 0usize;
    for end in 0..pts.len() {
        let t = pts[end].0;
        above += usize::from(pts[end].1);
        while pts[start].0 + window <= t {
            above -= usize::from(pts[start].1);
            start += 1;
        }
        out.push(ProxyPoint {
            t,
            proxy: above as f64 / (end + 1 - start) as f64,
        });
    }
    Ok(out)
}

/// First round at which the proxy reaches `level`.
pub fn first_reaching(proxy: &[ProxyPoint], level: f64) -> Option<u64> {
    proxy.iter().find(|p| p.proxy >= level).map(|p| p.t)
}

/// Everything one batch produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub template: EpisodeConfig,
    pub master_seed: u64,
    pub runs: Vec<RunLog>,
    pub aggregate: AggregateSeries,
}

impl ExperimentOutput {
    pub fn records(&self) -> Vec<RunRecord> {
        run_records(&self.runs)
    }

    pub fn proxy(&self, settings: ProxySettings) -> Result<Vec<ProxyPoint>> {
        convergence_proxy(&self.aggregate, settings.window, settings.threshold)
    }
}

/// Runs `n_runs` seeded episodes of `template` on up to `workers` threads
/// (0 = all cores) and aggregates them.
pub fn run_experiment(
    template: &EpisodeConfig,
    n_runs: usize,
    master_seed: u64,
    workers: usize,
) -> Result<ExperimentOutput> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    template.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| run_episode(&episode_for_run(template, master_seed, i as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = aggregate(&run_records(&runs));
    Ok(ExperimentOutput {
        template: template.resolved(),
        master_seed,
        runs,
        aggregate,
    })
}

/// Runs every point of `spec` in order.
pub fn run_spec(spec: &ExperimentSpec) -> Result<Vec<(String, ExperimentOutput)>> {
    spec.validate()?;
    spec.points()
        .into_iter()
        .map(|(label, cfg)| {
            Ok((
                label,
                run_experiment(&cfg, spec.n_runs, spec.master_seed, spec.workers)?,
            ))
        })
        .collect()
}
