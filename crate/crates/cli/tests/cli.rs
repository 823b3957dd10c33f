use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use mimo_align::codec::load_dataset;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-align")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, spec: &str) -> std::path::PathBuf {
    fs::create_dir_all(dir).unwrap();
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, spec).unwrap();
    let data = dir.join("data");
    ok(&["gen-data", "--spec", s(&spec_path), "--out", s(&data)]);
    data
}

#[test]
fn gen_data_is_loadable_and_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = r#"{"d": 8, "m": 8, "n": 64, "C": 2}"#;
    let a = gen(&tmp.path().join("a"), spec);
    let b = gen(&tmp.path().join("b"), spec);
    let ds = load_dataset(&a).unwrap();
    assert_eq!((ds.n(), ds.d(), ds.m(), ds.classes), (64, 8, 8, 2));
    for f in ["manifest.json", "tx.f32", "rx.f32", "labels.i32", "head_w.f32", "head_b.f32", "resolved_config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generated_head_fits_tight_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 16, "m": 32, "n": 500, "C": 5, "cluster_spread": 0.1}"#);
    let ds = load_dataset(&data).unwrap();
    let head = ds.head.as_ref().unwrap();
    let hits = (0..ds.n()).filter(|&i| head.predict(ds.rx.row(i).transpose().as_slice()) == ds.labels[i] as usize).count();
    assert!(hits as f64 / ds.n() as f64 >= 0.95, "{hits}/{}", ds.n());
}

#[test]
fn linear_training_on_reference_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 16, "m": 24, "n": 256, "C": 4}"#);
    let cfg = tmp.path().join("train.json");
    fs::write(&cfg, r#"{"channel": {"k": 1, "n_t": 4, "n_r": 4}}"#).unwrap();
    let model = tmp.path().join("model");
    let start = Instant::now();
    let stdout = ok(&["train", "linear", "--data", s(&data), "--config", s(&cfg), "--out", s(&model)]);
    assert!(start.elapsed() < Duration::from_secs(60));
    assert!(stdout.contains("feasible=true"), "{stdout}");
    let resolved: serde_json::Value = serde_json::from_str(&fs::read_to_string(model.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["admm"]["rho"], 100.0);
    assert_eq!(resolved["admm"]["iters"], 20);
    assert_eq!(resolved["snr_db"], 20.0);
}

#[test]
fn neural_training_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 8, "m": 8, "n": 100, "C": 2}"#);
    let cfg = tmp.path().join("train.json");
    fs::write(&cfg, r#"{"neural": {"epochs": 50, "eta": 0.001, "beta": 0, "gamma": 0}}"#).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out_a = ok(&["train", "neural", "--data", s(&data), "--config", s(&cfg), "--out", s(&a)]);
    let out_b = ok(&["train", "neural", "--data", s(&data), "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(out_a, out_b);
    for f in ["model.json", "w0.c64", "w3.c64", "b1.c64", "mask2.u8", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sparsity_sweep_grid_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 8, "m": 8, "n": 120, "C": 3}"#);
    let cfg = tmp.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"methods": ["neural", "linear"], "snr_db": [3, 17], "sparsity": [0, 10, 20, 30, 40, 50, 60, 70], "n_realizations": 2, "n_pilots": 80, "neural": {"epochs": 2}}"#,
    )
    .unwrap();
    let one = tmp.path().join("one.csv");
    let many = tmp.path().join("many.csv");
    ok(&["sweep", "--data", s(&data), "--config", s(&cfg), "--out", s(&one), "--threads", "1"]);
    ok(&["sweep", "--data", s(&data), "--config", s(&cfg), "--out", s(&many), "--threads", "4"]);
    let csv = fs::read_to_string(&one).unwrap();
    assert_eq!(csv, fs::read_to_string(&many).unwrap());
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2 * 8 * 2);
    for method in ["neural", "linear"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{method},"))).count(), 2 * 8 * 2);
    }
    let snrs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(snrs.into_iter().collect::<Vec<_>>(), vec!["17", "3"]);
    assert!(tmp.path().join("one.config.json").exists());
}

#[test]
fn flops_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["flops"]);
    assert!(stdout.contains("linear: 26868 FLOPs"), "{stdout}");
    assert!(stdout.contains("neural (formula): 1502208 FLOPs"), "{stdout}");
    assert!(stdout.contains("55.9"), "{stdout}");

    let cfg = tmp.path().join("arch.json");
    fs::write(
        &cfg,
        r#"{"linear": {"channel": {"k": 1, "n_t": 2, "n_r": 2}, "d": 384, "m": 768},
            "neural": {"i_p": 4, "h_p": 3, "o_p": 2, "l_p": 2, "i_d": 2, "h_d": 5, "o_d": 4, "l_d": 1},
            "sparsity": 1.0, "activation_cost": 7}"#,
    )
    .unwrap();
    let stdout = ok(&["flops", "--config", s(&cfg)]);
    assert!(stdout.contains("linear: 8444 FLOPs"), "{stdout}");
    // s = 1 leaves only the activations: 7 * (2*3 + 1*5)
    assert!(stdout.contains("neural (formula): 77 FLOPs"), "{stdout}");
}

#[test]
fn eval_scores_a_saved_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 8, "m": 8, "n": 200, "C": 2, "cluster_spread": 0.05}"#);
    let model = tmp.path().join("m");
    ok(&["train", "linear", "--data", s(&data), "--out", s(&model)]);
    let out = tmp.path().join("eval.json");
    let stdout = ok(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&out)]);
    assert!(stdout.starts_with("mse="), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["accuracy"].as_f64().unwrap() > 0.9, "{v}");
    assert!(tmp.path().join("eval.config.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen(tmp.path(), r#"{"d": 8, "m": 8, "n": 100, "C": 2}"#);
    let bad = tmp.path().join("bad.json");

    fs::write(&bad, r#"{"rho": 1}"#).unwrap();
    let out = run(&["train", "linear", "--data", s(&data), "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `rho`"));

    fs::write(&bad, r#"{"channel": {"k": 0, "n_t": 1, "n_r": 1}}"#).unwrap();
    let out = run(&["train", "linear", "--data", s(&data), "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists(), "nothing written for an invalid config");

    fs::write(&bad, r#"{"neural": {"eta": 1e100, "epochs": 3}}"#).unwrap();
    let out = run(&["train", "neural", "--data", s(&data), "--config", s(&bad), "--out", s(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["gen-data", "--out", s(&tmp.path().join("z")), "--spec", s(&tmp.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}
