use std::fs;
use std::path::{Path, PathBuf};

use dualq_statcheck::{
    bootstrap_ci, ci_width_curve, compare, improvement_check, BootstrapResult, DistanceMatrix,
    DtwOptions, Interval, Metric, TestResult,
};
use serde::{Deserialize, Serialize};

use super::run::Corpus;
use crate::error::{CliError, Result};
use crate::output::{Manifest, OutputKind, Staging};

pub const REPORT_FILE: &str = "report.csv";
pub const TEST_RESULT_FILE: &str = "test_result.json";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const BOOTSTRAP_FILE: &str = "bootstrap.json";
pub const CI_WIDTH_FILE: &str = "ci_width.csv";
pub const IMPROVEMENT_FILE: &str = "improvement.csv";

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub metrics: Vec<Metric>,
    pub dtw: DtwOptions,
    /// Bootstrap replicates; `None` skips the bootstrap.
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub bins: usize,
    /// Group sizes for the CI-width curve.
    pub ci_width: Vec<usize>,
    /// A previous bootstrap output to compare intervals against.
    pub baseline: Option<PathBuf>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            metrics: Metric::STANDARD.to_vec(),
            dtw: DtwOptions::default(),
            bootstrap: None,
            seed: 1,
            bins: 50,
            ci_width: Vec::new(),
            baseline: None,
        }
    }
}

/// Everything computed for one metric.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub result: TestResult,
    pub bootstrap: Option<BootstrapResult>,
    pub ci_width: Vec<(usize, f64)>,
    pub improved: Option<bool>,
}

#[derive(Serialize)]
struct ReportRow<'a> {
    metric: &'a str,
    n_m: usize,
    n_k: usize,
    eps_max: f64,
    p_hat_max: f64,
    ok: bool,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    significant: Option<bool>,
}

#[derive(Serialize)]
struct DistanceRow {
    label: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct HistogramRow {
    label: &'static str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

/// `bootstrap.json`: the interval plus all replicates in generation order.
#[derive(Serialize, Deserialize)]
struct BootstrapFile {
    metric: String,
    b: usize,
    seed: u64,
    lo_index: usize,
    hi_index: usize,
    ci_lo: f64,
    ci_hi: f64,
    significant: bool,
    replicate_mean: f64,
    replicates: Vec<f64>,
}

#[derive(Serialize)]
struct ImprovementRow<'a> {
    metric: &'a str,
    baseline_lo: f64,
    baseline_hi: f64,
    ci_lo: f64,
    ci_hi: f64,
    improved: bool,
}

/// Shared-edge histograms of the three distance sets.
fn histogram_rows(labelled: &[(&'static str, &[f64])], bins: usize) -> Vec<HistogramRow> {
    let all = labelled.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut rows = Vec::new();
    for &(label, values) in labelled {
        let mut counts = vec![0usize; bins];
        for &v in values {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        rows.extend(
            counts
                .into_iter()
                .enumerate()
                .map(|(i, count)| HistogramRow {
                    label,
                    bin_lo: lo + i as f64 * width,
                    bin_hi: lo + (i + 1) as f64 * width,
                    count,
                }),
        );
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_baseline(dir: &Path, metric: Metric) -> Result<Option<Interval>> {
    let path = dir.join(metric.name()).join(BOOTSTRAP_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let b: BootstrapFile = serde_json::from_slice(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(Some(Interval::new(b.ci_lo, b.ci_hi)))
}

fn analyse(
    matrix: &DistanceMatrix,
    result: TestResult,
    metric: Metric,
    opts: &ValidateOptions,
) -> Result<MetricReport> {
    let b = opts.bootstrap;
    let bootstrap = b.map(|b| bootstrap_ci(matrix, b, opts.seed)).transpose()?;
    let ci_width = if opts.ci_width.is_empty() {
        Vec::new()
    } else {
        let b = b.unwrap_or(dualq_statcheck::DEFAULT_REPLICATES);
        ci_width_curve(matrix, &opts.ci_width, b, opts.seed)?
    };
    let improved = match (&opts.baseline, &bootstrap) {
        (Some(dir), Some(boot)) => {
            read_baseline(dir, metric)?.map(|base| improvement_check(base, boot.ci))
        }
        _ => None,
    };
    Ok(MetricReport {
        result,
        bootstrap,
        ci_width,
        improved,
    })
}

/// Compares two corpora on each metric and writes the report files.
pub fn validate(
    a: &Corpus,
    b: &Corpus,
    opts: &ValidateOptions,
    out: &Path,
    force: bool,
) -> Result<(PathBuf, Vec<MetricReport>)> {
    if opts.metrics.is_empty() {
        return Err(CliError::config("no metrics requested"));
    }
    if opts.baseline.is_some() && opts.bootstrap.is_none() {
        return Err(CliError::config(
            "a baseline comparison needs bootstrap intervals",
        ));
    }
    let staging = Staging::new(out, force)?;
    let mut reports = Vec::new();
    for &metric in &opts.metrics {
        let (matrix, result) = compare(&a.runs, &b.runs, metric, opts.dtw)?;
        let report = analyse(&matrix, result, metric, opts)?;
        let dir = staging.path().join(metric.name());
        fs::create_dir(&dir)?;

        let mut json = serde_json::to_vec_pretty(&report.result)?;
        json.push(b'\n');
        fs::write(dir.join(TEST_RESULT_FILE), json)?;
        let sets = matrix.sets();
        let labelled: [(&'static str, &[f64]); 3] = [
            ("within_m", &sets.within_m),
            ("within_k", &sets.within_k),
            ("cross", &sets.cross),
        ];
        write_csv(
            &dir.join(DISTANCES_FILE),
            labelled
                .iter()
                .flat_map(|&(label, v)| v.iter().map(move |&value| DistanceRow { label, value })),
        )?;
        write_csv(
            &dir.join(HISTOGRAM_FILE),
            histogram_rows(&labelled, opts.bins),
        )?;
        if let Some(boot) = &report.bootstrap {
            let file = BootstrapFile {
                metric: metric.name().to_string(),
                b: boot.b,
                seed: boot.seed,
                lo_index: boot.lo_index,
                hi_index: boot.hi_index,
                ci_lo: boot.ci.lo,
                ci_hi: boot.ci.hi,
                significant: boot.significant,
                replicate_mean: boot.replicates.iter().sum::<f64>() / boot.b as f64,
                replicates: boot.replicates.clone(),
            };
            let mut json = serde_json::to_vec_pretty(&file)?;
            json.push(b'\n');
            fs::write(dir.join(BOOTSTRAP_FILE), json)?;
        }
        if !report.ci_width.is_empty() {
            #[derive(Serialize)]
            struct Row {
                n: usize,
                ci_width: f64,
            }
            write_csv(
                &dir.join(CI_WIDTH_FILE),
                report
                    .ci_width
                    .iter()
                    .map(|&(n, ci_width)| Row { n, ci_width }),
            )?;
        }
        reports.push(report);
    }

    write_csv(
        &staging.path().join(REPORT_FILE),
        reports.iter().map(|r| ReportRow {
            metric: &r.result.metric,
            n_m: r.result.n_m,
            n_k: r.result.n_k,
            eps_max: r.result.eps_max,
            p_hat_max: r.result.p_hat_max,
            ok: r.result.reject_h0,
            ci_lo: r.bootstrap.as_ref().map(|b| b.ci.lo),
            ci_hi: r.bootstrap.as_ref().map(|b| b.ci.hi),
            significant: r.bootstrap.as_ref().map(|b| b.significant),
        }),
    )?;
    if let Some(base) = &opts.baseline {
        let mut rows = Vec::new();
        for r in &reports {
            let metric: Metric = r.result.metric.parse()?;
            if let (Some(baseline), Some(boot), Some(improved)) =
                (read_baseline(base, metric)?, &r.bootstrap, r.improved)
            {
                rows.push(ImprovementRow {
                    metric: &r.result.metric,
                    baseline_lo: baseline.lo,
                    baseline_hi: baseline.hi,
                    ci_lo: boot.ci.lo,
                    ci_hi: boot.ci.hi,
                    improved,
                });
            }
        }
        write_csv(&staging.path().join(IMPROVEMENT_FILE), rows)?;
    }

    let mut manifest = Manifest::new(OutputKind::Validation);
    manifest.inputs = vec![a.manifest_sha256.clone(), b.manifest_sha256.clone()];
    manifest.write(staging.path())?;
    Ok((staging.commit()?, reports))
}
