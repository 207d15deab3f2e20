use std::fs;
use std::path::Path;
use std::process::Command;

use dualq_cli::commands::run::{batch, emulate, load_corpus, RunPlan};
use dualq_cli::commands::sweep::sweep;
use dualq_cli::commands::validate::{validate, ValidateOptions};
use dualq_cli::output::Manifest;
use dualq_cli::scenario_args::ScenarioArgs;
use dualq_core::scenario::ScenarioConfig;
use dualq_statcheck::Metric;

fn short(preset: &str, pattern: &str, secs: u32) -> ScenarioConfig {
    let mut args = ScenarioArgs::preset(preset);
    args.pattern = Some(pattern.into());
    args.duration = Some(format!("{secs}s"));
    args.resolve().unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualq"))
}

fn files(dir: &Path) -> Vec<(String, String)> {
    Manifest::verify(dir)
        .unwrap()
        .files
        .into_iter()
        .map(|f| (f.path, f.sha256))
        .collect()
}

#[test]
fn emulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("low", "dual", 30);
    let (a, rec) = emulate(&cfg, 1, &tmp.path().join("a"), false).unwrap();
    let (b, _) = emulate(&cfg, 1, &tmp.path().join("b"), false).unwrap();
    assert_eq!(rec.series.len(), 1875);
    assert_eq!(files(&a), files(&b));
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn batch_is_independent_of_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("low", "dual", 4);
    let (one, s1) = batch(
        &cfg,
        RunPlan {
            jobs: Some(1),
            ..RunPlan::new(6, 10)
        },
        &tmp.path().join("one"),
        false,
    )
    .unwrap();
    let (many, s8) = batch(
        &cfg,
        RunPlan {
            jobs: Some(8),
            ..RunPlan::new(6, 10)
        },
        &tmp.path().join("many"),
        false,
    )
    .unwrap();
    assert_eq!(s1.seeds, (10..16).collect::<Vec<_>>());
    assert_eq!(s1.throughputs, s8.throughputs);
    assert_eq!(files(&one), files(&many));
    let m = Manifest::verify(&one).unwrap();
    assert_eq!(m.runs.len(), 6);
    assert_eq!(m.runs[5], "run_0005");
}

#[test]
fn single_run_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, _) = batch(
        &short("low", "l4s", 1),
        RunPlan::new(1, 3),
        &tmp.path().join("c"),
        false,
    )
    .unwrap();
    let m = Manifest::verify(&dir).unwrap();
    assert_eq!((m.runs.len(), m.seeds.clone()), (1, vec![3]));
    assert_eq!(load_corpus(&dir).unwrap().runs.len(), 1);
}

#[test]
fn overwrite_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("low", "l4s", 1);
    let out = tmp.path().join("x");
    emulate(&cfg, 1, &out, false).unwrap();
    assert_eq!(emulate(&cfg, 2, &out, false).unwrap_err().exit_code(), 1);
    let (_, r) = emulate(&cfg, 2, &out, true).unwrap();
    assert_eq!(r.seed, 2);
    assert!(Manifest::verify(&out).is_ok());
}

#[test]
fn validate_rejects_tampered_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, _) = batch(
        &short("low", "dual", 1),
        RunPlan::new(3, 1),
        &tmp.path().join("c"),
        false,
    )
    .unwrap();
    fs::write(dir.join("run_0001/series.csv"), "t_ns\n").unwrap();
    assert_eq!(load_corpus(&dir).unwrap_err().exit_code(), 2);
}

#[test]
fn idle_drops_give_zero_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("medium", "l4s", 2);
    let (a, _) = batch(&cfg, RunPlan::new(4, 1), &tmp.path().join("a"), false).unwrap();
    let (b, _) = batch(&cfg, RunPlan::new(4, 50), &tmp.path().join("b"), false).unwrap();
    let opts = ValidateOptions {
        metrics: vec![Metric::Drops],
        bootstrap: Some(200),
        ..Default::default()
    };
    let (out, reports) = validate(
        &load_corpus(&a).unwrap(),
        &load_corpus(&b).unwrap(),
        &opts,
        &tmp.path().join("v"),
        false,
    )
    .unwrap();
    let r = &reports[0].result;
    assert_eq!((r.eps_max, r.p_hat_max, r.reject_h0), (0.0, 0.0, true));
    let boot = reports[0].bootstrap.as_ref().unwrap();
    assert_eq!((boot.ci.lo, boot.ci.hi), (0.0, 0.0));
    for f in [
        "report.csv",
        "drops/test_result.json",
        "drops/distances.csv",
        "drops/histogram.csv",
        "drops/bootstrap.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let distances = fs::read_to_string(out.join("drops/distances.csv")).unwrap();
    assert_eq!(distances.lines().count(), 1 + 6 + 6 + 16);
    assert!(Manifest::verify(&out).is_ok());
}

#[test]
fn bootstrap_report_uses_order_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("low", "dual", 2);
    let (a, _) = batch(&cfg, RunPlan::new(5, 1), &tmp.path().join("a"), false).unwrap();
    let (b, _) = batch(&cfg, RunPlan::new(5, 100), &tmp.path().join("b"), false).unwrap();
    let status = bin()
        .args([
            "bootstrap",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--metrics",
            "throughput",
            "--ci-width",
            "3,5",
            "-o",
        ])
        .arg(tmp.path().join("v"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("v/throughput/bootstrap.json")).unwrap())
            .unwrap();
    assert_eq!(json["b"], 2000);
    assert_eq!(
        (json["lo_index"].as_u64(), json["hi_index"].as_u64()),
        (Some(50), Some(1950))
    );
    let mut reps: Vec<f64> = json["replicates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    reps.sort_by(f64::total_cmp);
    assert_eq!(json["ci_lo"].as_f64().unwrap(), reps[50]);
    assert_eq!(json["ci_hi"].as_f64().unwrap(), reps[1950]);
    let widths = fs::read_to_string(tmp.path().join("v/throughput/ci_width.csv")).unwrap();
    assert_eq!(widths.lines().count(), 3);

    let status = bin()
        .args([
            "bootstrap",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--metrics",
            "throughput",
            "--baseline",
        ])
        .arg(tmp.path().join("v"))
        .arg("-o")
        .arg(tmp.path().join("w"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let improvement = fs::read_to_string(tmp.path().join("w/improvement.csv")).unwrap();
    assert!(improvement.contains("throughput") && improvement.contains("false"));
}

#[test]
fn sweep_writes_one_corpus_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short("medium", "l4s", 2);
    let values = vec!["1ms".to_string(), "5ms".to_string(), "10ms".to_string()];
    let (dir, rows) = sweep(
        &cfg,
        "step_thresh",
        &values,
        RunPlan::new(2, 1),
        &tmp.path().join("s"),
        false,
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(Manifest::verify(&dir.join(&r.corpus)).is_ok());
    }
    assert!(Manifest::verify(&dir).is_ok());
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(rows[1].mean_mbps > rows[0].mean_mbps);

    assert_eq!(
        sweep(
            &cfg,
            "step_thresh",
            &[],
            RunPlan::new(2, 1),
            &tmp.path().join("e"),
            false
        )
        .unwrap_err()
        .exit_code(),
        1
    );
    assert_eq!(
        sweep(
            &cfg,
            "mtu",
            &values,
            RunPlan::new(2, 1),
            &tmp.path().join("u"),
            false
        )
        .unwrap_err()
        .exit_code(),
        1
    );
    assert!(!tmp.path().join("e").exists() && !tmp.path().join("u").exists());
}

#[test]
fn exit_codes_and_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        bin()
            .env("DUALQ_OUTPUT_ROOT", tmp.path())
            .args(args)
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    assert_eq!(
        run(&[
            "emulate",
            "--preset",
            "low",
            "--duration",
            "1s",
            "-o",
            "one"
        ]),
        0
    );
    assert!(tmp.path().join("one/meta.json").is_file());
    assert_eq!(
        run(&[
            "emulate",
            "--preset",
            "low",
            "--duration",
            "1s",
            "-o",
            "one"
        ]),
        1
    );
    assert_eq!(run(&["emulate", "--preset", "nowhere"]), 1);
    assert_eq!(
        run(&["emulate", "--preset", "low", "--set", "aqm.alpha=-1"]),
        1
    );
    let one = tmp.path().join("one");
    let one = one.to_str().unwrap();
    assert_eq!(run(&["validate", one, one, "-o", "v"]), 3);
    assert_eq!(run(&["validate", one, "/nonexistent/corpus"]), 1);
    assert_eq!(run(&["validate", one, one, "--metrics", "jitter"]), 1);
    assert_eq!(run(&["presets", "--json"]), 0);
}
