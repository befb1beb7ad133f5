use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kmr_cli::format::{read_matrix, write_matrix};
use kmr_cli::report::ReportIndex;
use kmr_cli::results::read_rows;
use kmr_core::numerics::{thin_svd, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kmr(args);
    assert!(
        out.status.success(),
        "kmr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    kmr(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Smoothly varying low-rank-plus-noise data so kernel fits are well posed.
fn snapshots(seed: u64, n: usize, m: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, m, |i, j| {
        let x = i as f64 / n as f64;
        let t = j as f64 / m as f64 + 0.01 * rng.random_range(-1.0..1.0);
        (3.0 * x + 2.0 * t).sin() + (x * t * 5.0).cos() * t
    })
}

/// Imports random train/test matrices as a dataset; returns its directory.
fn import_dataset(root: &Path, name: &str, n: usize) -> PathBuf {
    let train = root.join(format!("{name}_train.kmat"));
    let test = root.join(format!("{name}_test.kmat"));
    write_matrix(&train, &snapshots(1, n, 24), None, None).unwrap();
    write_matrix(&test, &snapshots(2, n, 10), None, None).unwrap();
    let cfg = root.join(format!("{name}_import.json"));
    std::fs::write(
        &cfg,
        serde_json::json!({"train": train, "test": test}).to_string(),
    )
    .unwrap();
    let dir = root.join(name);
    ok(&["generate", "import", "--config", s(&cfg), "--out", s(&dir)]);
    dir
}

fn dataset_hash(dir: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("dataset.json")).unwrap()).unwrap();
    v["content_hash"].as_str().unwrap().to_string()
}

#[test]
fn advdiff_desk_generation_and_regeneration() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    ok(&["generate", "advdiff", "--preset", "desk", "--out", s(&a)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("dataset.json")).unwrap()).unwrap();
    assert_eq!(manifest["dim"], 4096);
    assert_eq!(manifest["train_snapshots"], 404);

    let b = tmp.path().join("b");
    ok(&["generate", "--replay", s(&a.join("dataset.json")), "--out", s(&b)]);
    assert_eq!(dataset_hash(&a), dataset_hash(&b));
    for f in ["train.kmat", "test.kmat"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn binary_header_is_bit_exact_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 12);
    let bytes = std::fs::read(ds.join("train.kmat")).unwrap();
    assert_eq!(&bytes[..8], b"KMRMAT\0\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 12);
    assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 24);
    assert_eq!(bytes.len(), 28 + 8 * 12 * 24);
    let (m, _) = read_matrix(&ds.join("train.kmat")).unwrap();
    assert_eq!(m, snapshots(1, 12, 24));
}

#[test]
fn train_replay_is_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 20);
    let km = tmp.path().join("km");
    ok(&[
        "train", "--dataset", s(&ds), "--out", s(&km), "--method", "kernel", "--r", "3", "--m", "4",
        "--kernel", "gaussian", "--eps", "0.5", "--lambda", "1e-8", "--normalize",
    ]);
    let again = tmp.path().join("again");
    ok(&["train", "--replay", s(&km.join("manifest.json")), "--out", s(&again)]);
    let fm = tmp.path().join("fm");
    ok(&["train", "--dataset", s(&ds), "--out", s(&fm), "--method", "fm-qm", "--r", "3", "--m", "4", "--lambda", "1e-3"]);
    let fm2 = tmp.path().join("fm2");
    ok(&["train", "--replay", s(&fm.join("manifest.json")), "--out", s(&fm2)]);

    for (a, b, files) in [
        (&km, &again, &["offset", "v", "v_bar", "singular_values", "omega", "train_inputs"][..]),
        (&fm, &fm2, &["offset", "v", "v_bar", "singular_values", "xi"][..]),
    ] {
        for f in files {
            let name = format!("{f}.kmat");
            assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name}");
        }
        let ma = kmr_cli::manifest::load_manifest(a).unwrap();
        let mb = kmr_cli::manifest::load_manifest(b).unwrap();
        assert_eq!((ma.config, ma.manifold, ma.metrics, ma.files), (mb.config, mb.manifold, mb.metrics, mb.files));
    }
}

#[test]
fn pod_train_records_m_zero_and_matches_tail_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 15);
    let pod = tmp.path().join("pod");
    ok(&["train", "--dataset", s(&ds), "--out", s(&pod), "--method", "pod", "--r", "4", "--zero-offset"]);
    let manifest = kmr_cli::manifest::load_manifest(&pod).unwrap();
    assert_eq!((manifest.manifold.kind.as_str(), manifest.manifold.m), ("pod_only", 0));

    let csv = tmp.path().join("res.csv");
    let args = [
        "evaluate", "--manifold", s(&pod), "--dataset", s(&ds), "--split", "train",
        "--metric", "rel_l2_trajectory", "--csv", s(&csv),
    ];
    ok(&args);
    ok(&args);
    let rows = read_rows(&csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);

    let sv = thin_svd(&snapshots(1, 15, 24)).unwrap().singular_values;
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let tail: f64 = sv[4..].iter().map(|s| s * s).sum();
    assert!((rows[0].value.unwrap() - (tail / total).sqrt()).abs() < 1e-10);
}

#[test]
fn mismatched_dimension_reports_both_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let small = import_dataset(tmp.path(), "small", 10);
    let big = import_dataset(tmp.path(), "big", 14);
    let pod = tmp.path().join("pod");
    ok(&["train", "--dataset", s(&small), "--out", s(&pod), "--method", "pod", "--r", "2"]);
    let out = kmr(&["evaluate", "--manifold", s(&pod), "--dataset", s(&big)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("10") && err.contains("14"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 12);
    let out = tmp.path().join("o");

    // Invalid config, with the offending field named.
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"nz": 10, "ntheta": 10, "n_mu1": 4, "n_mu2": 4, "dleta": 1}"#).unwrap();
    let o = kmr(&["generate", "surface-heating", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dleta"));
    assert_eq!(code(&["train", "--dataset", s(&ds), "--out", s(&out), "--method", "kernel", "--r", "2", "--m", "2", "--kernel", "bessel"]), 2);
    assert_eq!(code(&["train", "--dataset", s(&ds), "--out", s(&out), "--method", "pod", "--r", "30"]), 2);
    assert_eq!(code(&["bogus-subcommand"]), 2);

    // Numerical failure: requesting more modes than the data's rank.
    let rank1 = tmp.path().join("rank1.kmat");
    let col = Matrix::from_fn(12, 1, |i, _| i as f64 + 1.0);
    write_matrix(&rank1, &(&col * Matrix::from_fn(1, 8, |_, j| j as f64 + 1.0)), None, None).unwrap();
    let icfg = tmp.path().join("rank1.json");
    std::fs::write(&icfg, serde_json::json!({"train": rank1, "test": rank1}).to_string()).unwrap();
    let r1 = tmp.path().join("r1");
    ok(&["generate", "import", "--config", s(&icfg), "--out", s(&r1)]);
    assert_eq!(code(&["train", "--dataset", s(&r1), "--out", s(&out), "--method", "pod", "--r", "3", "--zero-offset"]), 3);

    // I/O and corrupted files.
    assert_eq!(code(&["train", "--dataset", s(&tmp.path().join("missing")), "--out", s(&out), "--method", "pod", "--r", "2"]), 4);
    let mut bytes = std::fs::read(ds.join("test.kmat")).unwrap();
    bytes[30] ^= 1;
    std::fs::write(ds.join("test.kmat"), bytes).unwrap();
    assert_eq!(code(&["train", "--dataset", s(&ds), "--out", s(&out), "--method", "pod", "--r", "2"]), 4);

    let o = Command::new(env!("CARGO_BIN_EXE_kmr"))
        .args(["report", "--csv", "x", "--out", "y"])
        .env("MF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn write_spec(path: &Path, spec: serde_json::Value) {
    std::fs::write(path, spec.to_string()).unwrap();
}

#[test]
fn sweep_row_count_order_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 20);
    let spec = tmp.path().join("spec.json");
    write_spec(
        &spec,
        serde_json::json!({
            "methods": [
                {"method": "pod", "r": [1, 2, 3, 40]},
                {"method": "kernel", "r": [2, 3], "m": {"times_r": [1, 2]},
                 "kernel": ["gaussian", "matern_basic"], "epsilon": [0.5, 2.0],
                 "lambda": {"logspace": {"from": 1e-10, "to": 1e-2, "num": 3}}, "normalize": [true]},
                {"method": "fm_qm", "r": [2], "m": {"fixed": [3]}, "lambda": [0.0, 1e-3]}
            ]
        }),
    );
    let csv = tmp.path().join("sweep.csv");
    let stdout = ok(&["sweep", "--dataset", s(&ds), "--spec", s(&spec), "--out", s(&csv)]);
    let expected = 4 + 2 * 2 * 2 * 2 * 3 + 2;
    assert!(stdout.contains(&format!("sweep: {expected} configurations")), "{stdout}");
    let rows = read_rows(&csv).unwrap();
    assert_eq!(rows.len(), expected);
    // r = 40 exceeds min(N, M) and fails in place.
    assert!(rows[3].error.is_some() && rows[3].value.is_none());
    assert!(rows.iter().filter(|r| r.error.is_some()).count() == 1);
    assert_eq!(rows[4].m, 2);
    assert_eq!(rows[4 + 24].m, 3);
    assert!(tmp.path().join("sweep.csv.summary.json").exists());

    let csv2 = tmp.path().join("sweep2.csv");
    ok(&["sweep", "--dataset", s(&ds), "--spec", s(&spec), "--out", s(&csv2)]);
    let again = read_rows(&csv2).unwrap();
    let strip = |rows: &[kmr_cli::results::ResultRow]| rows.iter().map(|r| r.without_timing()).collect::<Vec<_>>();
    assert_eq!(strip(&rows), strip(&again));
}

#[test]
fn single_point_sweep_equals_train_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = import_dataset(tmp.path(), "d", 20);
    let spec = tmp.path().join("spec.json");
    write_spec(
        &spec,
        serde_json::json!({"metric": "rel_l1_max", "methods": [
            {"method": "kernel", "r": [3], "m": {"fixed": [5]}, "kernel": ["matern_linear"],
             "epsilon": [0.8], "lambda": [1e-6]}]}),
    );
    let csv = tmp.path().join("sweep.csv");
    ok(&["sweep", "--dataset", s(&ds), "--spec", s(&spec), "--out", s(&csv)]);
    let km = tmp.path().join("km");
    ok(&[
        "train", "--dataset", s(&ds), "--out", s(&km), "--method", "kernel", "--r", "3", "--m", "5",
        "--kernel", "matern-linear", "--eps", "0.8", "--lambda", "1e-6",
    ]);
    let ev = tmp.path().join("ev.csv");
    ok(&["evaluate", "--manifold", s(&km), "--dataset", s(&ds), "--metric", "rel_l1_max", "--csv", s(&ev)]);
    let a = read_rows(&csv).unwrap();
    let b = read_rows(&ev).unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a[0].without_timing(), b[0].without_timing());
}

#[test]
fn report_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&["report", "--csv", s(&empty), "--out", s(&tmp.path().join("r0"))]), 2);

    let ds = import_dataset(tmp.path(), "d", 20);
    let spec = tmp.path().join("spec.json");
    write_spec(&spec, serde_json::json!({"methods": [{"method": "pod", "r": [2, 4, 6]}]}));
    let csv = tmp.path().join("sweep.csv");
    ok(&["sweep", "--dataset", s(&ds), "--spec", s(&spec), "--out", s(&csv)]);
    let pod = tmp.path().join("pod");
    ok(&["train", "--dataset", s(&ds), "--out", s(&pod), "--method", "pod", "--r", "3"]);

    let out = tmp.path().join("rep");
    ok(&["report", "--csv", s(&csv), "--out", s(&out), "--manifold", s(&pod)]);
    let index: ReportIndex = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let by_r = &index.plots["error_vs_r"].series;
    assert_eq!(by_r.len(), 1);
    assert_eq!(by_r["pod"].iter().map(|p| p.0).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0]);
    assert!(out.join("error_vs_r.svg").exists());
    assert!(out.join("results.md").exists());

    let (mf, _) = kmr_cli::manifest::load_manifold(&pod).unwrap();
    let sv = &mf.basis.singular_values;
    let text = std::fs::read_to_string(out.join("singular_values.csv")).unwrap();
    let ys: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ys.len(), sv.len());
    for (y, s) in ys.iter().zip(sv) {
        assert_eq!(*y, s / sv[0]);
    }
}
