use std::path::Path;
use std::process::Command;

use aeroadapt::cli::run;

const SMALL: &str = "hidden_dim = 6\nattention_dim = 4\nmax_epochs = 2\nadapt_max_epochs = 1\nn_trees = 3\nmax_depth = 4\nmice_iterations = 2\n";

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("aeroadapt").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["train"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "batch_size = 0\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(cli(&["synth", "--config", s(&bad), "--out", s(&out)]), 1);
    assert_eq!(cli(&["evaluate", "--checkpoint", s(&bad), "--data", s(&bad), "--out", s(&out)]), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_aeroadapt");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["nope"]), Some(1));
    assert_eq!(code(&["report", "--data", "/nonexistent.csv", "--out", "/tmp"]), Some(2));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        assert_eq!(cli(&["synth", "--hours", "200", "--missing-rate", "0.1", "--seed", seed, "--out", s(out)]), 0);
    }
    let read = |d: &Path| std::fs::read(d.join("synthetic.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert!(a.join("synthetic_truth.csv").exists());
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let c = s(&cfg);
    let data_dir = root.join("data");
    assert_eq!(
        cli(&["synth", "--hours", "700", "--missing-rate", "0.1", "--station", "alpha", "--out", s(&data_dir)]),
        0
    );
    let data = data_dir.join("alpha.csv");
    let d = s(&data);

    let ing = root.join("ingest");
    assert_eq!(cli(&["ingest", "--input", d, "--out", s(&ing)]), 0);
    assert_eq!(std::fs::read(ing.join("alpha.csv")).unwrap(), std::fs::read(&data).unwrap());
    assert!(ing.join("alpha_issues.json").exists());

    let imp = root.join("impute");
    assert_eq!(cli(&["impute", "--data", d, "--config", c, "--out", s(&imp)]), 0);
    let imputed = std::fs::read_to_string(imp.join("imputed.csv")).unwrap();
    assert!(!imputed.contains(",,") && !imputed.lines().any(|l| l.ends_with(',')));

    let feat = root.join("features");
    assert_eq!(cli(&["features", "--data", d, "--config", c, "--method", "forest", "--top-k", "4", "--out", s(&feat)]), 0);
    for f in ["ranking.json", "correlation.csv", "schema.json"] {
        assert!(feat.join(f).exists(), "{f}");
    }
    let schema = feat.join("schema.json");

    let reg = root.join("reg");
    assert_eq!(cli(&["train", "--data", d, "--config", c, "--schema", s(&schema), "--out", s(&reg)]), 0);
    let history = std::fs::read_to_string(reg.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss"));

    let ev = root.join("eval");
    let ckpt = reg.join("model.ckpt");
    assert_eq!(cli(&["evaluate", "--checkpoint", s(&ckpt), "--data", d, "--out", s(&ev)]), 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ev.join("evaluation.json")).unwrap()).unwrap();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 18);
    for e in entries {
        assert!(e["regression"]["rmse"].is_number());
        assert!(e["regression"]["r2"].is_number());
        assert!(e["classification"]["accuracy"].is_number());
    }

    let fc = root.join("forecast");
    assert_eq!(cli(&["forecast", "--checkpoint", s(&ckpt), "--data", d, "--out", s(&fc)]), 0);
    let forecast: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fc.join("forecast.json")).unwrap()).unwrap();
    assert_eq!(forecast["horizons"].as_array().unwrap().len(), 6);

    let rep = root.join("report");
    assert_eq!(cli(&["report", "--data", d, "--checkpoint", s(&ckpt), "--out", s(&rep)]), 0);
    for f in ["seasonal.csv", "metrics.csv", "pm25_h4.svg"] {
        assert!(rep.join(f).exists(), "{f}");
    }

    for (task, extra) in [("cls", None), ("forest", Some("reg")), ("forest", Some("cls"))] {
        let out = root.join(format!("{task}-{}", extra.unwrap_or("")));
        let mut args = vec!["train", "--data", d, "--config", c, "--task", task, "--out", s(&out)];
        if let Some(e) = extra {
            args.extend(["--forest-task", e]);
        }
        assert_eq!(cli(&args), 0, "{task} {extra:?}");
        assert!(out.join("model.ckpt").exists());
        assert!(out.join("test_report.json").exists());
    }

    let ad = root.join("adapt");
    assert_eq!(cli(&["adapt", "--data", d, "--config", c, "--initial-hours", "360", "--out", s(&ad)]), 0);
    assert!(ad.join("comparative.csv").exists());
    assert!(ad.join("checkpoints/period_000.ckpt").exists());
    assert_eq!(cli(&["adapt", "--data", d, "--config", c, "--initial-hours", "9999", "--out", s(&ad)]), 2);
}
