use std::fs;
use std::path::{Path, PathBuf};

use dualq_core::metrics::{load_run, write_run, RunRecord};
use dualq_core::scenario::ScenarioConfig;
use dualq_core::sim::run_scenario;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{Manifest, OutputKind, Staging};

pub const SCENARIO_FILE: &str = "scenario.json";
pub const RUNS_FILE: &str = "runs.csv";

pub fn run_dir_name(index: usize) -> String {
    format!("run_{index:04}")
}

/// Runs one scenario and writes it as a self-contained run directory.
pub fn emulate(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &Path,
    force: bool,
) -> Result<(PathBuf, RunRecord)> {
    let staging = Staging::new(out, force)?;
    let record = run_scenario(cfg, seed, run_dir_name(0))?;
    write_run(staging.path(), &record, cfg)?;
    let mut manifest = Manifest::new(OutputKind::Run);
    manifest.fingerprint = Some(record.fingerprint.clone());
    manifest.seeds = vec![seed];
    manifest.write(staging.path())?;
    Ok((staging.commit()?, record))
}

#[derive(Serialize)]
struct RunRow<'a> {
    run: &'a str,
    seed: u64,
    avg_throughput_mbps: f64,
    ecn_marks: u64,
    drops: u64,
    samples: usize,
}

/// How many runs, from which seed, on how many threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunPlan {
    pub runs: u32,
    pub seed_base: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl RunPlan {
    pub fn new(runs: u32, seed_base: u64) -> Self {
        RunPlan {
            runs,
            seed_base,
            jobs: None,
        }
    }
}

/// Summary of a corpus written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusSummary {
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub throughputs: Vec<f64>,
}

impl CorpusSummary {
    pub fn mean_throughput(&self) -> f64 {
        self.throughputs.iter().sum::<f64>() / self.throughputs.len() as f64
    }
}

/// Writes `plan.runs` run directories with seeds `plan.seed_base..` into
/// the existing directory `dir`, then its manifest.
pub fn write_corpus(cfg: &ScenarioConfig, plan: RunPlan, dir: &Path) -> Result<CorpusSummary> {
    let RunPlan {
        runs,
        seed_base,
        jobs,
    } = plan;
    if runs == 0 {
        return Err(CliError::config("runs must be >= 1"));
    }
    let seeds: Vec<u64> = (0..u64::from(runs))
        .map(|i| {
            seed_base
                .checked_add(i)
                .ok_or_else(|| CliError::config("seed range overflows u64"))
        })
        .collect::<Result<_>>()?;
    let mut corpus_cfg = cfg.clone();
    corpus_cfg.seed = seed_base;
    corpus_cfg.runs = runs;

    let work = || {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| {
                let name = run_dir_name(i);
                let record = run_scenario(&corpus_cfg, seed, name.clone())?;
                let run_dir = dir.join(&name);
                fs::create_dir(&run_dir)?;
                write_run(&run_dir, &record, &corpus_cfg)?;
                Ok(record)
            })
            .collect::<Result<Vec<RunRecord>>>()
    };
    let records = match jobs {
        Some(0) => return Err(CliError::config("--jobs must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::runtime(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut json = serde_json::to_vec_pretty(&corpus_cfg)?;
    json.push(b'\n');
    fs::write(dir.join(SCENARIO_FILE), json)?;
    let mut w = csv::Writer::from_path(dir.join(RUNS_FILE))?;
    for r in &records {
        w.serialize(RunRow {
            run: &r.run_id,
            seed: r.seed,
            avg_throughput_mbps: r.avg_throughput_mbps,
            ecn_marks: r.counters.ecn_marks(),
            drops: r.counters.drops_total,
            samples: r.series.len(),
        })?;
    }
    w.flush()?;

    let fingerprint = corpus_cfg.fingerprint();
    let mut manifest = Manifest::new(OutputKind::Corpus);
    manifest.fingerprint = Some(fingerprint.clone());
    manifest.runs = (0..records.len()).map(run_dir_name).collect();
    manifest.seeds = seeds.clone();
    manifest.write(dir)?;
    Ok(CorpusSummary {
        fingerprint,
        seeds,
        throughputs: records.iter().map(|r| r.avg_throughput_mbps).collect(),
    })
}

/// Runs a corpus into `out`. Nothing is left behind if any run fails.
pub fn batch(
    cfg: &ScenarioConfig,
    plan: RunPlan,
    out: &Path,
    force: bool,
) -> Result<(PathBuf, CorpusSummary)> {
    let staging = Staging::new(out, force)?;
    let summary = write_corpus(cfg, plan, staging.path())?;
    Ok((staging.commit()?, summary))
}

/// A verified run or corpus directory loaded into memory.
#[derive(Debug)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest_sha256: String,
    pub runs: Vec<RunRecord>,
}

/// Loads a run directory (one run) or a corpus after checking its manifest.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    if !dir.is_dir() {
        return Err(CliError::config(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let manifest = Manifest::verify(dir)?;
    let runs = match manifest.kind {
        OutputKind::Run => vec![load_run(dir)?.0],
        OutputKind::Corpus => {
            if manifest.runs.is_empty() {
                return Err(CliError::runtime(format!(
                    "{}: corpus lists no runs",
                    dir.display()
                )));
            }
            manifest
                .runs
                .par_iter()
                .map(|name| Ok(load_run(&dir.join(name))?.0))
                .collect::<Result<_>>()?
        }
        other => {
            return Err(CliError::config(format!(
                "{} holds {other:?} output, not runs",
                dir.display()
            )))
        }
    };
    Ok(Corpus {
        dir: dir.to_path_buf(),
        manifest_sha256: Manifest::digest(dir)?,
        runs,
    })
}
