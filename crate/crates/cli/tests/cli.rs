//! End-to-end tests of the mtc binary: exit codes, file outputs, and
//! determinism, all on a miniature corpus so they stay fast.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn gen_small(dir: &Path) {
    let out = mtc(&[
        "synthgen",
        "--out",
        dir.to_str().unwrap(),
        "--clips-per-class",
        "6",
        "--seed",
        "11",
    ]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert_eq!(v["train"], 20);
    assert_eq!(v["val"], 5);
    assert_eq!(v["test"], 5);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = mtc(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_segments_is_usage_error() {
    let out = mtc(&["train", "--data", "x", "--out", "y", "--segments", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("segments"), "stderr: {err}");
}

#[test]
fn missing_model_path_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("c.mtc1");
    fs::write(&clip, b"not a clip").unwrap();
    let out = mtc(&[
        "classify",
        "--clip",
        clip.to_str().unwrap(),
        "--model",
        tmp.path().join("missing.mtck").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2)); // nonexistent path -> usage
}

#[test]
fn macs_reports_linearity() {
    let out = mtc(&["macs", "--segments", "3"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("macs(T=3) / macs(T=1) = 3"), "{text}");
    // 3 * 921600 backbone + head once
    assert!(text.contains("2764800"), "{text}");
    assert!(text.contains("24896"), "{text}");
}

#[test]
fn gradcheck_passes() {
    let out = mtc(&["gradcheck"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("within 1e-5"), "{text}");
}

#[test]
fn synthgen_is_deterministic_and_parallel_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let out = mtc(&[
            "synthgen",
            "--out",
            dir.to_str().unwrap(),
            "--clips-per-class",
            "4",
            "--threads",
            threads,
        ]);
        assert_ok(&out);
    }
    for split in ["train", "val", "test"] {
        let mut names: Vec<_> = fs::read_dir(a.join(split))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let fa = fs::read(a.join(split).join(&name)).unwrap();
            let fb = fs::read(b.join(split).join(&name)).unwrap();
            let fc = fs::read(c.join(split).join(&name)).unwrap();
            assert_eq!(fa, fb, "rerun differs for {name:?}");
            assert_eq!(fa, fc, "threaded run differs for {name:?}");
        }
    }
}

#[test]
fn config_file_yields_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"clips_per_class": 3, "seed": 1}"#).unwrap();
    // flag overrides clips_per_class; config still supplies the seed
    let d1 = tmp.path().join("d1");
    let out = mtc(&[
        "synthgen",
        "--out",
        d1.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--clips-per-class",
        "4",
    ]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert_eq!(v["train"].as_u64().unwrap() + v["val"].as_u64().unwrap() + v["test"].as_u64().unwrap(), 20);
    // same settings spelled out fully -> identical bytes
    let d2 = tmp.path().join("d2");
    let out = mtc(&[
        "synthgen",
        "--out",
        d2.to_str().unwrap(),
        "--clips-per-class",
        "4",
        "--seed",
        "1",
    ]);
    assert_ok(&out);
    let name = fs::read_dir(d1.join("train")).unwrap().next().unwrap().unwrap().file_name();
    assert_eq!(
        fs::read(d1.join("train").join(&name)).unwrap(),
        fs::read(d2.join("train").join(&name)).unwrap()
    );
}

#[test]
fn bad_config_key_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"clip_count": 3}"#).unwrap();
    let out = mtc(&[
        "synthgen",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_train_eval_classify_retrieve_recommend() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_small(&data);

    // two identically seeded runs must agree byte for byte
    let ckpt = tmp.path().join("m.mtck");
    let ckpt2 = tmp.path().join("m2.mtck");
    let metrics = tmp.path().join("metrics.csv");
    for (out_path, metrics_args) in [
        (&ckpt, vec!["--metrics", metrics.to_str().unwrap()]),
        (&ckpt2, vec![]),
    ] {
        let mut args = vec![
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--epochs",
            "2",
            "--seed",
            "5",
        ];
        args.extend(metrics_args);
        let out = mtc(&args);
        assert_ok(&out);
        let v = stdout_json(&out);
        assert_eq!(v["kind"], "segment");
    }
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&ckpt2).unwrap());
    let metrics_text = fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.starts_with("epoch,lr,train_loss,train_acc,val_acc"));
    assert_eq!(metrics_text.lines().count(), 3); // header + 2 epochs

    let out = mtc(&["eval", "--data", data.join("test").to_str().unwrap(), "--model", ckpt.to_str().unwrap()]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert!(v["accuracy"].as_f64().unwrap() <= 1.0);
    assert_eq!(v["confusion"].as_array().unwrap().len(), 5);

    // classify one test clip
    let clip = fs::read_dir(data.join("test"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().map_or(false, |x| x == "mtc1"))
        .unwrap();
    let out = mtc(&["classify", "--clip", clip.to_str().unwrap(), "--model", ckpt.to_str().unwrap()]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert!(v["probs"].as_object().unwrap().len() == 5);

    // features + retrieval
    let store = tmp.path().join("test.mtfs");
    let out = mtc(&[
        "extract-features",
        "--data",
        data.join("test").to_str().unwrap(),
        "--model",
        ckpt.to_str().unwrap(),
        "--out",
        store.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert_eq!(v["records"], 5);
    assert_eq!(v["feature_dim"], 128);

    let id_stem = clip.file_stem().unwrap().to_str().unwrap().to_string();
    let out = mtc(&[
        "retrieve",
        "--store",
        store.to_str().unwrap(),
        "--query-id",
        &id_stem,
        "--k",
        "3",
    ]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "query_id,rank,neighbor_id,distance,neighbor_label"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with(&format!("{id_stem},1,")), "{first}");
    let neighbor = first.split(',').nth(2).unwrap();
    assert_ne!(neighbor, id_stem, "query not excluded: {first}");

    let out = mtc(&[
        "retrieve",
        "--store",
        store.to_str().unwrap(),
        "--loo-accuracy",
        "--k",
        "3",
    ]);
    assert_ok(&out);
    assert!(stdout_json(&out)["accuracy"].as_f64().unwrap() <= 1.0);

    // recommend with styled output
    let styled = tmp.path().join("styled.mtc1");
    let out = mtc(&[
        "recommend",
        "--clip",
        clip.to_str().unwrap(),
        "--model",
        ckpt.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        styled.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert!(v["motion"].is_string() && v["style"].is_string());
    assert!(styled.exists());
}

#[test]
fn apply_style_reverse_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = mtc(&[
        "synthgen",
        "--out",
        data.to_str().unwrap(),
        "--clips-per-class",
        "3",
    ]);
    assert_ok(&out);
    let clip = fs::read_dir(data.join("train"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().map_or(false, |x| x == "mtc1"))
        .unwrap();
    let once = tmp.path().join("rev.mtc1");
    let twice = tmp.path().join("rev2.mtc1");
    let out = mtc(&["apply-style", "--clip", clip.to_str().unwrap(), "--style", "reverse", "--out", once.to_str().unwrap()]);
    assert_ok(&out);
    let out = mtc(&["apply-style", "--clip", once.to_str().unwrap(), "--style", "reverse", "--out", twice.to_str().unwrap()]);
    assert_ok(&out);
    // payloads agree; header + payload are the whole format
    assert_eq!(fs::read(&clip).unwrap(), fs::read(&twice).unwrap());

    let looped = tmp.path().join("loop.mtc1");
    let out = mtc(&["apply-style", "--clip", clip.to_str().unwrap(), "--style", "loop", "--loop-count", "3", "--out", looped.to_str().unwrap()]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert_eq!(v["frames"], 90);

    let out = mtc(&["apply-style", "--clip", clip.to_str().unwrap(), "--style", "loop", "--loop-count", "1", "--out", looped.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let boom = tmp.path().join("boom");
    let out = mtc(&["apply-style", "--clip", clip.to_str().unwrap(), "--style", "boomerang", "--out", boom.to_str().unwrap()]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert_eq!(v["frames"], 59);
    assert!(boom.join("frame_00000.png").exists());
}

#[test]
fn baseline_train_and_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_small(&data);
    let ckpt = tmp.path().join("b.mtck");
    let out = mtc(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--baseline",
        "--epochs",
        "2",
    ]);
    assert_ok(&out);
    assert_eq!(stdout_json(&out)["kind"], "baseline");
    let out = mtc(&["eval", "--data", data.join("test").to_str().unwrap(), "--model", ckpt.to_str().unwrap()]);
    assert_ok(&out);
    let v = stdout_json(&out);
    assert!(v["accuracy"].as_f64().is_some());
    // a baseline checkpoint cannot be used where a segment model is needed
    let out = mtc(&[
        "extract-features",
        "--data",
        data.join("test").to_str().unwrap(),
        "--model",
        ckpt.to_str().unwrap(),
        "--out",
        tmp.path().join("s.mtfs").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
