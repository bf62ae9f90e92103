//! CSV and JSON persistence for experiment outputs.
//!
//! All files are UTF-8 with LF line endings and a header row. Floats are
//! written in shortest round-trip form so re-reading is exact.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    derive_run_seed, AggregatePoint, ExperimentOutput, ProxyPoint, ProxySettings, RunRecord,
};
use crate::error::{Error, Result};
use crate::simulator::EpisodeConfig;

pub const RUNS_HEADER: &str = "run_id,t,stable,max_regret,conflicts";
pub const AGGREGATE_HEADER: &str = "t,stability_rate,mean_max_regret,mean_conflicts";
pub const PROXY_HEADER: &str = "t,proxy";

pub fn write_runs_csv<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.run_id,
            r.t,
            u8::from(r.stable),
            r.max_regret,
            r.conflicts
        )?;
    }
    w.flush()
}

pub fn write_aggregate_csv<W: Write>(mut w: W, series: &[AggregatePoint]) -> std::io::Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for p in series {
        writeln!(
            w,
            "{},{},{},{}",
            p.t, p.stability_rate, p.mean_max_regret, p.mean_conflicts
        )?;
    }
    w.flush()
}

pub fn write_proxy_csv<W: Write>(mut w: W, proxy: &[ProxyPoint]) -> std::io::Result<()> {
    writeln!(w, "{PROXY_HEADER}")?;
    for p in proxy {
        writeln!(w, "{},{}", p.t, p.proxy)?;
    }
    w.flush()
}

/// Reads rows of `T` after checking the header, reporting 1-based line
/// numbers on failure.
fn read_rows<R: Read, T: DeserializeOwned>(
    r: R,
    header: &str,
    check: impl Fn(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.iter().ne(header.split(',')) {
        let found: Vec<&str> = headers.iter().collect();
        return Err(Error::Parse(format!(
            "line 1: expected header {header:?}, found {:?}",
            found.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(pos) => Error::Parse(format!("line {}: {e}", pos.line())),
            None => Error::Parse(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        check(&row).map_err(|msg| Error::Parse(format!("line {line}: {msg}")))?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RunRow {
    run_id: usize,
    t: u64,
    stable: u8,
    max_regret: f64,
    conflicts: u64,
}

pub fn read_runs_csv<R: Read>(r: R) -> Result<Vec<RunRecord>> {
    let rows: Vec<RunRow> = read_rows(r, RUNS_HEADER, |row: &RunRow| match row.stable {
        0 | 1 => Ok(()),
        other => Err(format!("stable must be 0 or 1, found {other}")),
    })?;
    Ok(rows
        .into_iter()
        .map(|r| RunRecord {
            run_id: r.run_id,
            t: r.t,
            stable: r.stable == 1,
            max_regret: r.max_regret,
            conflicts: r.conflicts,
        })
        .collect())
}

pub fn read_aggregate_csv<R: Read>(r: R) -> Result<Vec<AggregatePoint>> {
    read_rows(r, AGGREGATE_HEADER, |p: &AggregatePoint| {
        if (0.0..=1.0).contains(&p.stability_rate) {
            Ok(())
        } else {
            Err(format!(
                "stability_rate {} outside [0, 1]",
                p.stability_rate
            ))
        }
    })
}

/// JSON sidecar written next to the CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEcho {
    pub version: String,
    pub label: String,
    pub master_seed: u64,
    pub n_runs: usize,
    pub episode: EpisodeConfig,
    pub proxy: ProxySettings,
    /// Dynamics seed of each run, by `run_id`.
    pub run_seeds: Vec<u64>,
}

/// Writes `runs.csv`, `aggregate.csv`, `proxy.csv` and `config.json` into
/// `dir`, creating it if needed.
pub fn write_experiment_dir(
    dir: &Path,
    label: &str,
    output: &ExperimentOutput,
    proxy: ProxySettings,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_runs_csv(
        BufWriter::new(File::create(dir.join("runs.csv"))?),
        &output.records(),
    )?;
    write_aggregate_csv(
        BufWriter::new(File::create(dir.join("aggregate.csv"))?),
        &output.aggregate,
    )?;
    write_proxy_csv(
        BufWriter::new(File::create(dir.join("proxy.csv"))?),
        &output.proxy(proxy)?,
    )?;
    let echo = ExperimentEcho {
        version: crate::VERSION.to_string(),
        label: label.to_string(),
        master_seed: output.master_seed,
        n_runs: output.runs.len(),
        episode: output.template.clone(),
        proxy,
        run_seeds: (0..output.runs.len() as u64)
            .map(|i| derive_run_seed(output.master_seed, i))
            .collect(),
    };
    let mut f = BufWriter::new(File::create(dir.join("config.json"))?);
    serde_json::to_writer_pretty(&mut f, &echo)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}
