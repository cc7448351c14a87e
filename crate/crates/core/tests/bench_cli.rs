use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pmhe(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmhe"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_file: &str, doc: &Value) {
    let schema = read_json(&repo().join("schemas").join(schema_file));
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:#?}");
}

fn verdict<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["assertion"] == name)
        .unwrap_or_else(|| panic!("no verdict {name:?}"))
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{"layers": 2, "neurons": [8, 2], "learning_rate": 0.1, "global_iters": 20,
            "batch_size": 8, "party_count": 2, "seed": 3,
            "activation": {"kind": "approx_relu", "d": 4, "sigma": 8, "delta": 0.01}}"#,
    )
    .unwrap();
    path
}

#[test]
fn microbench_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmhe(
        dir.path(),
        &["microbench", "rot", "--sizes", "8", "--repeat", "1000"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = read_json(&dir.path().join("microbench_rot.json"));
    assert_eq!(r["meter"]["rotations"], 1000);
    assert_valid("bench_report.schema.json", &r);

    let out = pmhe(
        dir.path(),
        &[
            "microbench",
            "he_transpose",
            "--sizes",
            "8",
            "--repeat",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = read_json(&dir.path().join("microbench_he_transpose.json"));
    assert_eq!(verdict(&r, "h=8 transpose diagonals")["measured"], 15.0);

    let out = pmhe(
        dir.path(),
        &[
            "--json",
            "microbench",
            "he_rect_mat_mult",
            "--sizes",
            "8",
            "--t",
            "2",
            "--repeat",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict(&r, "h=8 t=2 mul_ct")["measured"], 2.0);
    assert_valid("bench_report.schema.json", &r);

    let out = pmhe(dir.path(), &["microbench", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown operation"));
}

#[test]
fn sign_bench_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmhe(
        dir.path(),
        &[
            "sign-bench",
            "--d",
            "1",
            "--sigma",
            "1",
            "--delta",
            "0.5",
            "--grid",
            "2000",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let small = read_json(&dir.path().join("sign_bench.json"));
    assert!(small["parameters"]["k"].as_u64().unwrap() <= 3);
    assert!(small["parameters"]["max_error"].as_f64().unwrap() <= 0.5);
    assert_valid("bench_report.schema.json", &small);
    let csv = std::fs::read_to_string(dir.path().join("sign_error.csv")).unwrap();
    assert!(csv.starts_with("m,composite_value,abs_error"));
    assert_eq!(csv.lines().count(), 2001);

    let out = pmhe(
        dir.path(),
        &[
            "--json",
            "sign-bench",
            "--d",
            "4",
            "--sigma",
            "20",
            "--grid",
            "2000",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r20: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r20["parameters"]["max_error"].as_f64().unwrap() <= 2f64.powi(-20));
    let out = pmhe(
        dir.path(),
        &[
            "--json",
            "sign-bench",
            "--d",
            "4",
            "--sigma",
            "8",
            "--delta",
            "9.5367431640625e-7",
        ],
    );
    let r8: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r8["parameters"]["k"].as_u64() <= r20["parameters"]["k"].as_u64());
}

#[test]
fn matmul_bench_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmhe(
        dir.path(),
        &["--json", "matmul-bench", "--h", "4,16", "--repeat", "1"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("bench_report.schema.json", &r);
    let rows = r["rows"].as_array().unwrap();
    let find = |m: &str, h: u64| {
        rows.iter()
            .find(|x| x["method"] == m && x["h"] == h)
            .unwrap()
    };
    assert_eq!(find("packed", 4)["ops"]["mul_ct"], 4);
    assert!(find("naive", 16)["rotations"].as_f64() > find("packed", 16)["rotations"].as_f64());
    let poseidon = find("poseidon_ap", 16);
    assert_eq!(poseidon["analytic"], true);
    assert!(poseidon["ops"].is_null() && poseidon["wall_time_ms"].is_null());

    let out = pmhe(dir.path(), &["matmul-bench", "--h", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_valid_deterministic_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = pmhe(out, &["train", "--config", cfg.to_str().unwrap()]);
        assert_eq!(
            run.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        assert!(String::from_utf8_lossy(&run.stdout).contains("delta vs exact"));
    }
    let ma = std::fs::read(a.join("metrics.json")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("metrics.json")).unwrap());
    let metrics: Value = serde_json::from_slice(&ma).unwrap();
    assert_valid("metrics.schema.json", &metrics);
    assert_eq!(metrics["rounds"].as_array().unwrap().len(), 20);
    assert_valid(
        "bench_report.schema.json",
        &read_json(&a.join("train_report.json")),
    );
    assert!(a.join("model_layer_0.csv").exists() && a.join("model_layer_1.csv").exists());

    let tcp = dir.path().join("tcp");
    let run = pmhe(
        &tcp,
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--transport",
            "tcp",
        ],
    );
    assert_eq!(run.status.code(), Some(0));
    let mt = read_json(&tcp.join("metrics.json"));
    assert_eq!(mt["transport"], "tcp");
    assert_eq!(mt["rounds"], metrics["rounds"]);
}

#[test]
fn train_reads_generated_shards() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let gen = pmhe(&data, &["--seed", "3", "gen-data", "--parties", "2"]);
    assert_eq!(gen.status.code(), Some(0));
    let cfg = small_config(dir.path());
    let with_files = dir.path().join("files");
    let run = pmhe(
        &with_files,
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
        ],
    );
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let synthetic = dir.path().join("synthetic");
    pmhe(&synthetic, &["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        read_json(&with_files.join("metrics.json"))["rounds"],
        read_json(&synthetic.join("metrics.json"))["rounds"]
    );
}

#[test]
fn train_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let missing = dir.path().join("nowhere");
    let run = pmhe(
        dir.path(),
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            missing.to_str().unwrap(),
        ],
    );
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(
        err.contains(&missing.join("party_0.csv").display().to_string()),
        "{err}"
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n \"layers\": 1,\n \"learning_rte\": 0.1\n}").unwrap();
    let run = pmhe(dir.path(), &["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(
        err.contains("learning_rte") && err.contains("line 3"),
        "{err}"
    );

    let run = pmhe(
        dir.path(),
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--transport",
            "udp",
        ],
    );
    assert_eq!(run.status.code(), Some(2));
}
