use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use matchbandit::harness::{
    aggregate, convergence_proxy, preset, preset_names, read_aggregate_csv, read_runs_csv,
    run_spec, write_aggregate_csv, write_experiment_dir, write_proxy_csv, ExperimentSpec,
};
use matchbandit::market::{
    enumerate_stable_matchings, gale_shapley, max_player_regret_against, Proposer,
    ENUMERATION_MAX_ARMS, ENUMERATION_MAX_PLAYERS,
};
use matchbandit::{GeneratorKind, GeneratorSpec, PreferenceProfile};

#[derive(Parser)]
#[command(
    name = "matchbandit",
    version,
    about = "Two-sided matching bandit simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write CSV/JSON outputs.
    Run(RunArgs),
    /// Recompute aggregate.csv from a runs.csv.
    Aggregate {
        runs: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the convergence proxy from an aggregate.csv.
    Proxy {
        aggregate: PathBuf,
        /// Window length in rounds.
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the stable matchings of a profile JSON file.
    Oracle { profile: PathBuf },
    /// Generate a preference profile as JSON.
    Gen(GenArgs),
    /// List bundled presets, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec in TOML.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Use a bundled preset instead of a spec file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the number of runs per sweep point.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec in TOML or JSON; flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "uniform")]
    kind: KindArg,
    #[arg(long, default_value_t = 5)]
    players: usize,
    #[arg(long, default_value_t = 5)]
    arms: usize,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Uniform,
    BetaHeterogeneous,
    EdgeCorrelated,
}

impl From<KindArg> for GeneratorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Uniform => GeneratorKind::Uniform,
            KindArg::BetaHeterogeneous => GeneratorKind::BetaHeterogeneous,
            KindArg::EdgeCorrelated => GeneratorKind::EdgeCorrelated,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Aggregate { runs, out } => {
            let records = read_runs_csv(open(&runs)?)
                .with_context(|| format!("reading {}", runs.display()))?;
            write_aggregate_csv(output(out.as_deref())?, &aggregate(&records))?;
            Ok(())
        }
        Command::Proxy {
            aggregate,
            window,
            threshold,
            out,
        } => {
            let series = read_aggregate_csv(open(&aggregate)?)
                .with_context(|| format!("reading {}", aggregate.display()))?;
            let proxy = convergence_proxy(&series, window, threshold)?;
            write_proxy_csv(output(out.as_deref())?, &proxy)?;
            Ok(())
        }
        Command::Oracle { profile } => cmd_oracle(&profile),
        Command::Gen(args) => cmd_gen(args),
        Command::Presets { name: None } => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            print!("{}", preset(&name)?.to_toml()?);
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            ExperimentSpec::from_toml(&text)
                .with_context(|| format!("invalid spec {}", path.display()))?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("give a spec file or --preset"),
    };
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    if let Some(n) = args.runs {
        spec.n_runs = n;
    }
    if let Some(s) = args.master_seed {
        spec.master_seed = s;
    }
    spec.validate()?;

    let swept = !spec.sweep.is_empty();
    for (label, out) in run_spec(&spec)? {
        let dir = if swept {
            args.out.join(&label)
        } else {
            args.out.clone()
        };
        write_experiment_dir(&dir, &label, &out, spec.proxy)
            .with_context(|| format!("writing {}", dir.display()))?;
        let last = out.aggregate.last();
        eprintln!(
            "{label}: {} runs, final stability {:.3}, mean max regret {:.3} -> {}",
            out.runs.len(),
            last.map_or(0.0, |p| p.stability_rate),
            last.map_or(0.0, |p| p.mean_max_regret),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_oracle(path: &Path) -> Result<()> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let profile: PreferenceProfile = serde_json::from_str(&text)
        .with_context(|| format!("invalid profile {}", path.display()))?;
    let pessimal = gale_shapley(&profile, Proposer::Arms);
    let optimal = gale_shapley(&profile, Proposer::Players);
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "players {} arms {}",
        profile.n_players(),
        profile.n_arms()
    )?;
    if profile.n_players() <= ENUMERATION_MAX_PLAYERS && profile.n_arms() <= ENUMERATION_MAX_ARMS {
        let all = enumerate_stable_matchings(&profile)?;
        writeln!(out, "stable matchings: {}", all.len())?;
        for m in &all {
            writeln!(
                out,
                "  {m}  max regret {}",
                max_player_regret_against(&profile, &pessimal, m)
            )?;
        }
    } else {
        writeln!(out, "market too large to enumerate stable matchings")?;
    }
    writeln!(out, "player-optimal: {optimal}")?;
    writeln!(out, "player-pessimal: {pessimal}")?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)?
            }
        }
        None => GeneratorSpec {
            kind: args.kind.into(),
            n_players: args.players,
            n_arms: args.arms,
            beta: args.beta,
            seed: args.seed,
        },
    };
    let profile = spec.generate()?;
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &profile)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
