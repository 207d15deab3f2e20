//! Per-`tupdate` sampling, run summaries and run-directory export.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aqm::AqmCounters;
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::traffic::FlowKind;

pub const META_FILE: &str = "meta.json";
pub const SERIES_FILE: &str = "series.csv";
pub const FLOWS_FILE: &str = "flows.csv";

/// One sample of AQM state; counts cover the interval since the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_ns: u64,
    pub qocc_pkts: u64,
    pub qocc_bytes: u64,
    pub ecn_marks: u64,
    pub drops: u64,
}

/// Turns cumulative AQM counters into per-interval samples.
#[derive(Debug, Default)]
pub struct Sampler {
    last: AqmCounters,
    samples: Vec<TraceSample>,
}

impl Sampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample(
        &mut self,
        t_ns: u64,
        qocc_pkts: u64,
        qocc_bytes: u64,
        counters: &AqmCounters,
    ) -> TraceSample {
        let s = TraceSample {
            t_ns,
            qocc_pkts,
            qocc_bytes,
            ecn_marks: counters.ecn_marks() - self.last.ecn_marks(),
            drops: counters.drops_total - self.last.drops_total,
        };
        self.last = *counters;
        self.samples.push(s);
        s
    }

    /// Counters as of the most recent sample.
    pub fn last_counters(&self) -> &AqmCounters {
        &self.last
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<TraceSample> {
        self.samples
    }
}

/// Receiver-side totals for one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow_id: u32,
    pub kind: FlowKind,
    /// Seconds the flow was active within the run.
    pub active_s: f64,
    pub bytes: u64,
    pub mbps: f64,
    pub packets_sent: u64,
    pub packets_received: u64,
    pub ce_received: u64,
    pub lost: u64,
    pub reductions: u64,
    pub timeouts: u64,
}

/// Per-flow receiver counters collected by the event loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTotals {
    pub flow_id: u32,
    pub kind: FlowKind,
    pub active_s: f64,
    pub bytes: u64,
    pub packets_sent: u64,
    pub packets_received: u64,
    pub ce_received: u64,
    pub lost: u64,
    pub reductions: u64,
    pub timeouts: u64,
}

/// Self-checks gathered while the run executes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub events: u64,
    /// L packets served with a sojourn above `step_thresh`.
    pub l_over_step: u64,
    /// Of those, packets that left without CE.
    pub step_violations: u64,
    /// Events after which packet or byte conservation failed.
    pub conservation_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub fingerprint: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub duration_s: f64,
    /// Sum of the per-flow throughputs, in Mbps.
    pub avg_throughput_mbps: f64,
    pub flows: Vec<FlowSummary>,
    pub counters: AqmCounters,
    pub queued_at_end: u64,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub series: Vec<TraceSample>,
}

/// Bits per second over `secs`, expressed in Mbps.
pub fn mbps(bytes: u64, secs: f64) -> f64 {
    bytes as f64 * 8.0 / secs / 1e6
}

/// Per-flow throughput over each flow's active period; the run throughput
/// is their sum.
pub fn summarize_flows(duration_s: f64, flows: &[FlowTotals]) -> Result<(f64, Vec<FlowSummary>)> {
    if duration_s.is_nan() || duration_s <= 0.0 {
        return Err(Error::Record("run duration must be > 0".into()));
    }
    if flows.is_empty() {
        return Err(Error::Record("run has no flows".into()));
    }
    let summaries: Vec<FlowSummary> = flows
        .iter()
        .map(|f| FlowSummary {
            flow_id: f.flow_id,
            kind: f.kind,
            active_s: f.active_s,
            bytes: f.bytes,
            mbps: if f.active_s > 0.0 {
                mbps(f.bytes, f.active_s)
            } else {
                0.0
            },
            packets_sent: f.packets_sent,
            packets_received: f.packets_received,
            ce_received: f.ce_received,
            lost: f.lost,
            reductions: f.reductions,
            timeouts: f.timeouts,
        })
        .collect();
    let total = summaries.iter().map(|f| f.mbps).sum();
    Ok((total, summaries))
}

impl RunRecord {
    /// Interval sums over the whole series.
    pub fn series_totals(&self) -> (u64, u64) {
        self.series
            .iter()
            .fold((0, 0), |(m, d), s| (m + s.ecn_marks, d + s.drops))
    }

    /// Interval sums equal the final cumulative counters.
    pub fn counters_consistent(&self) -> bool {
        self.series_totals() == (self.counters.ecn_marks(), self.counters.drops_total)
    }

    /// Enqueued = dequeued + dropped + residual.
    pub fn conserved(&self) -> bool {
        let c = &self.counters;
        c.enq_total == c.deq_total + c.drops_total + self.queued_at_end
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    run_id: String,
    seed: u64,
    rng_algorithm: String,
    fingerprint: String,
    config: ScenarioConfig,
    summary: RunRecord,
    samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FlowRow {
    flow_id: u32,
    kind: FlowKind,
    bytes: u64,
    mbps: f64,
}

/// Writes `meta.json`, `series.csv` and `flows.csv` into `dir`, which must
/// exist.
pub fn write_run(dir: &Path, record: &RunRecord, config: &ScenarioConfig) -> Result<()> {
    let meta = Meta {
        run_id: record.run_id.clone(),
        seed: record.seed,
        rng_algorithm: record.rng_algorithm.clone(),
        fingerprint: record.fingerprint.clone(),
        config: config.clone(),
        summary: record.clone(),
        samples: record.series.len(),
    };
    let mut json = serde_json::to_vec_pretty(&meta)?;
    json.push(b'\n');
    fs::write(dir.join(META_FILE), json)?;

    let mut series = csv::Writer::from_path(dir.join(SERIES_FILE))?;
    for s in &record.series {
        series.serialize(s)?;
    }
    series.flush()?;

    let mut flows = csv::Writer::from_path(dir.join(FLOWS_FILE))?;
    for f in &record.flows {
        flows.serialize(FlowRow {
            flow_id: f.flow_id,
            kind: f.kind,
            bytes: f.bytes,
            mbps: f.mbps,
        })?;
    }
    flows.flush()?;
    Ok(())
}

/// Reads a run directory written by [`write_run`].
pub fn load_run(dir: &Path) -> Result<(RunRecord, ScenarioConfig)> {
    let meta_path = dir.join(META_FILE);
    let text =
        fs::read(&meta_path).map_err(|e| Error::Record(format!("{}: {e}", meta_path.display())))?;
    let meta: Meta = serde_json::from_slice(&text)
        .map_err(|e| Error::Record(format!("{}: {e}", meta_path.display())))?;
    let mut record = meta.summary;
    let mut reader = csv::Reader::from_path(dir.join(SERIES_FILE))
        .map_err(|e| Error::Record(format!("{}: {e}", dir.join(SERIES_FILE).display())))?;
    for row in reader.deserialize() {
        record.series.push(row?);
    }
    if record.series.len() != meta.samples {
        return Err(Error::Record(format!(
            "{}: expected {} samples, found {}",
            dir.display(),
            meta.samples,
            record.series.len()
        )));
    }
    Ok((record, meta.config))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Writes `contents` to `path` through a temporary file so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}
