//! `dualq`: runs emulator scenarios and compares run corpora.
//!
//! Every command writes into a fresh directory (refusing to overwrite
//! without `--force`) together with a `manifest.json` holding the SHA-256
//! of each emitted file. Relative output paths are resolved under
//! `$DUALQ_OUTPUT_ROOT` when it is set.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 statistical test undefined for the given inputs.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario_args;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dualq_statcheck::{DtwOptions, Metric, DEFAULT_REPLICATES};

use commands::run::{batch, emulate, load_corpus, RunPlan};
use commands::validate::{validate, MetricReport, ValidateOptions};
use error::{CliError, Result};
use output::resolve_out;
use scenario_args::ScenarioArgs;

#[derive(Debug, Parser)]
#[command(
    name = "dualq",
    version,
    about = "Dual-queue coupled AQM emulator and equivalence tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario.
    Emulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Seed; defaults to the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a corpus of independent runs with consecutive seeds.
    Batch {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare two corpora with the distance-based exceedance test.
    Validate(ValidateArgs),
    /// Like validate, with bootstrap confidence intervals.
    Bootstrap {
        #[command(flatten)]
        args: ValidateArgs,
        /// Bootstrap replicates.
        #[arg(short = 'B', long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        /// Earlier bootstrap output to check for an interval improvement.
        #[arg(long, value_name = "DIR")]
        baseline: Option<PathBuf>,
    },
    /// Run one corpus per value of an AQM parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// step_thresh, target, alpha, beta, coupling_k, classic_protection or tupdate.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 1ms,5ms,10ms.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// List the bandwidth-delay presets and parameter sets.
    Presets {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory (relative paths go under $DUALQ_OUTPUT_ROOT).
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory written by this tool.
    #[arg(long)]
    pub force: bool,
}

impl CorpusArgs {
    fn plan(&self, cfg: &dualq_core::scenario::ScenarioConfig) -> RunPlan {
        RunPlan {
            runs: self.runs.unwrap_or(cfg.runs),
            seed_base: self.seed_base.unwrap_or(cfg.seed),
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Number of runs; defaults to the scenario's.
    #[arg(long)]
    pub runs: Option<u32>,
    /// First seed; defaults to the scenario's.
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(short, long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Corpus (or single run) M.
    pub corpus_a: PathBuf,
    /// Corpus (or single run) K.
    pub corpus_b: PathBuf,
    /// Comma-separated metrics.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "throughput,queue_occupancy,ecn_marks,drops"
    )]
    pub metrics: Vec<String>,
    /// Sakoe-Chiba band half width for DTW.
    #[arg(long)]
    pub band: Option<usize>,
    /// Histogram bins.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Group sizes for a CI-width curve, e.g. 10,20,50,100.
    #[arg(long, value_delimiter = ',')]
    pub ci_width: Vec<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

impl ValidateArgs {
    fn options(
        &self,
        bootstrap: Option<usize>,
        baseline: Option<PathBuf>,
    ) -> Result<ValidateOptions> {
        let metrics = self
            .metrics
            .iter()
            .map(|m| m.parse::<Metric>().map_err(CliError::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(ValidateOptions {
            metrics,
            dtw: DtwOptions { band: self.band },
            bootstrap,
            seed: self.seed,
            bins: self.bins,
            ci_width: self.ci_width.clone(),
            baseline,
        })
    }
}

fn print_reports(reports: &[MetricReport]) {
    println!(
        "{:<16} {:>5} {:>5} {:>12} {:>10} {:>4}  95% CI",
        "metric", "n_m", "n_k", "eps_max", "p_hat_max", "ok"
    );
    for r in reports {
        let t = &r.result;
        let ci = r.bootstrap.as_ref().map_or(String::new(), |b| {
            format!(
                "[{:.3}, {:.3}]{}",
                b.ci.lo,
                b.ci.hi,
                if b.significant { " significant" } else { "" }
            )
        });
        let improved = match r.improved {
            Some(true) => "  improved",
            Some(false) => "  not improved",
            None => "",
        };
        println!(
            "{:<16} {:>5} {:>5} {:>12.4} {:>10.4} {:>4}  {ci}{improved}",
            t.metric,
            t.n_m,
            t.n_k,
            t.eps_max,
            t.p_hat_max,
            if t.reject_h0 { "yes" } else { "no" }
        );
    }
}

fn run_validate(
    args: &ValidateArgs,
    bootstrap: Option<usize>,
    baseline: Option<PathBuf>,
) -> Result<()> {
    let opts = args.options(bootstrap, baseline)?;
    let a = load_corpus(&args.corpus_a)?;
    let b = load_corpus(&args.corpus_b)?;
    let name = |p: &PathBuf| {
        p.file_name()
            .map_or("corpus".into(), |n| n.to_string_lossy().into_owned())
    };
    let default = format!(
        "validate-{}-vs-{}",
        name(&args.corpus_a),
        name(&args.corpus_b)
    );
    let out = resolve_out(args.out.out.as_deref(), &default);
    let (dir, reports) = validate(&a, &b, &opts, &out, args.out.force)?;
    print_reports(&reports);
    println!("wrote {}", dir.display());
    Ok(())
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Emulate {
            scenario,
            seed,
            out,
        } => {
            let cfg = scenario.resolve()?;
            let seed = seed.unwrap_or(cfg.seed);
            let default = format!("emulate-{}-seed{seed}", &cfg.fingerprint()[..12]);
            let target = resolve_out(out.out.as_deref(), &default);
            let (dir, r) = emulate(&cfg, seed, &target, out.force)?;
            println!(
                "{}: {:.3} Mbps, {} samples, {} marks, {} drops",
                dir.display(),
                r.avg_throughput_mbps,
                r.series.len(),
                r.counters.ecn_marks(),
                r.counters.drops_total
            );
        }
        Command::Batch {
            scenario,
            corpus,
            out,
        } => {
            let cfg = scenario.resolve()?;
            let plan = corpus.plan(&cfg);
            let default = format!(
                "batch-{}-seed{}x{}",
                &cfg.fingerprint()[..12],
                plan.seed_base,
                plan.runs
            );
            let target = resolve_out(out.out.as_deref(), &default);
            let (dir, s) = batch(&cfg, plan, &target, out.force)?;
            println!(
                "{}: {} runs, mean throughput {:.3} Mbps",
                dir.display(),
                s.throughputs.len(),
                s.mean_throughput()
            );
        }
        Command::Validate(args) => run_validate(&args, None, None)?,
        Command::Bootstrap {
            args,
            replicates,
            baseline,
        } => run_validate(&args, Some(replicates), baseline)?,
        Command::Sweep {
            scenario,
            param,
            values,
            corpus,
            out,
        } => {
            let cfg = scenario.resolve()?;
            let default = format!("sweep-{param}-{}", &cfg.fingerprint()[..12]);
            let target = resolve_out(out.out.as_deref(), &default);
            let (dir, rows) = commands::sweep::sweep(
                &cfg,
                &param,
                &values,
                corpus.plan(&cfg),
                &target,
                out.force,
            )?;
            println!(
                "{:<24} {:>5} {:>10} {:>22}",
                "value", "runs", "mean_mbps", "95% CI"
            );
            for r in &rows {
                println!(
                    "{:<24} {:>5} {:>10.3} [{:>9.3}, {:>9.3}]",
                    r.value, r.runs, r.mean_mbps, r.ci_lo, r.ci_hi
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Presets { json } => {
            let p = commands::presets::presets();
            if json {
                println!("{}", serde_json::to_string_pretty(&p)?);
            } else {
                print!("{}", commands::presets::render_table(&p));
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["dualq", "frobnicate"]), 1);
        assert_eq!(run(["dualq", "sweep", "--param", "alpha"]), 1);
        assert_eq!(run(["dualq", "--help"]), 0);
    }
}
