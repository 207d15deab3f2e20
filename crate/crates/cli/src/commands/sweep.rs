use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use dualq_core::scenario::{ScenarioConfig, SWEEP_PARAMS};
use serde::Serialize;

use super::run::{write_corpus, CorpusSummary, RunPlan};
use crate::error::{CliError, Result};
use crate::output::{Manifest, OutputKind, Staging};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub corpus: String,
    pub runs: usize,
    pub mean_mbps: f64,
    pub sd_mbps: f64,
    /// Normal-approximation 95% interval of the mean.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn corpus_name(param: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{param}={clean}")
}

fn row(param: &str, value: &str, corpus: String, s: &CorpusSummary) -> SweepRow {
    let n = s.throughputs.len();
    let mean = s.mean_throughput();
    let sd = if n > 1 {
        (s.throughputs
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / (n as f64).sqrt();
    SweepRow {
        param: param.to_string(),
        value: value.to_string(),
        corpus,
        runs: n,
        mean_mbps: mean,
        sd_mbps: sd,
        ci_lo: mean - half,
        ci_hi: mean + half,
    }
}

/// One corpus per value of `param`, all with the same seeds, plus a
/// throughput summary.
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[String],
    plan: RunPlan,
    out: &Path,
    force: bool,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::config(format!(
            "unknown sweep parameter {param:?} (expected one of {})",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::config("--values needs at least one value"));
    }
    let mut configs = Vec::with_capacity(values.len());
    let mut names = HashSet::new();
    for v in values {
        let mut cfg = base.clone();
        cfg.set_param(param, v)?;
        let name = corpus_name(param, v.trim());
        if !names.insert(name.clone()) {
            return Err(CliError::config(format!("duplicate sweep value {v:?}")));
        }
        configs.push((v.trim().to_string(), name, cfg));
    }

    let staging = Staging::new(out, force)?;
    let mut rows = Vec::new();
    for (value, name, cfg) in &configs {
        let dir = staging.path().join(name);
        fs::create_dir(&dir)?;
        let summary = write_corpus(cfg, plan, &dir)?;
        rows.push(row(param, value, name.clone(), &summary));
    }
    let mut w = csv::Writer::from_path(staging.path().join(SUMMARY_FILE))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Manifest::new(OutputKind::Sweep).write(staging.path())?;
    Ok((staging.commit()?, rows))
}
