use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyptree::embed::distortion;
use hyptree::hypgeom::kernel;
use hyptree::networks::{hnn_forward, Network};
use hyptree::trees::{tree_metric, WeightedTree};
use serde_json::Value;

fn hyptree(dir: &Path, args: &[&str]) -> Output {
    hyptree_env(dir, args, &[])
}

fn hyptree_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hyptree"));
    cmd.arg("--out-dir").arg(dir).args(args).env_remove("HYPTREE_THREADS").env_remove("SOURCE_DATE_EPOCH");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Header and rows of a CSV file; every row must have the header's width.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    for row in &rows {
        assert_eq!(row.len(), header.len());
    }
    (header, rows)
}

fn assert_manifest(path: &Path, command: &str, outputs: &[&str]) {
    let m = json(path);
    assert_eq!(m["command"], command);
    assert!(m["version"].is_string());
    assert!(m["seed"].is_u64());
    assert!(m["timestamp"].is_null());
    assert!(m["config"].is_object());
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for o in outputs {
        assert!(listed.contains(o), "{o} missing from {listed:?}");
    }
}

fn gen(dir: &Path, args: &[&str], file: &str) -> PathBuf {
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", file]);
    let path = dir.join(file);
    let mut a: Vec<String> = full.iter().map(|s| s.to_string()).collect();
    let last = a.len() - 1;
    a[last] = path.to_string_lossy().into_owned();
    let refs: Vec<&str> = a.iter().map(String::as_str).collect();
    ok(&hyptree(dir, &refs));
    path
}

#[test]
fn gen_writes_complete_trees() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&hyptree(dir.path(), &["gen", "--kind", "binary", "--depth", "3"]));
    assert_eq!(out.trim(), "nodes 15 edges 14 leaves 8");
    let t = WeightedTree::read(&dir.path().join("tree.json")).unwrap();
    assert_eq!(t.len(), 15);
    assert!(t.has_layout());
    assert_manifest(&dir.path().join("tree_manifest.json"), "gen", &["tree.json"]);

    let out = ok(&hyptree(dir.path(), &["gen", "--kind", "ternary", "--depth", "2", "-o", "t.json"]));
    assert_eq!(out.trim(), "nodes 13 edges 12 leaves 9");
}

#[test]
fn gen_random_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), &["--kind", "random", "--n", "60", "--seed", "4"], "a.json");
    let b = gen(dir.path(), &["--kind", "random", "--n", "60", "--seed", "4"], "b.json");
    let c = gen(dir.path(), &["--kind", "random", "--n", "60", "--seed", "5"], "c.json");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let t = WeightedTree::read(&a).unwrap();
    assert_eq!(t.edges().len(), 59);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(hyptree(d, &["gen", "--kind", "random"]).status.code(), Some(2));
    assert_eq!(hyptree(d, &["gen", "--kind", "oak", "--depth", "2"]).status.code(), Some(2));
    assert_eq!(hyptree(d, &["gen", "--kind", "binary", "--depth", "2", "--n", "4"]).status.code(), Some(2));
    assert_eq!(hyptree(d, &["frobnicate"]).status.code(), Some(2));
    let tree = gen(d, &["--kind", "binary", "--depth", "2"], "t.json");
    let tree = tree.to_str().unwrap();
    assert_eq!(hyptree(d, &["embed", "--tree", tree, "--lambda", "0.9"]).status.code(), Some(2));
    assert_eq!(hyptree(d, &["train", "--tree", tree, "--epochs", "0"]).status.code(), Some(2));

    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"tree_kind": "binary", "sizes": [15], "colour": "red"}"#).unwrap();
    assert_eq!(hyptree(d, &["grid", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&bad, r#"{"tree_kind": "binary"}"#).unwrap();
    assert_eq!(hyptree(d, &["grid", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(hyptree(d, &["grid", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hyptree(d, &["lowerbound", "--leaves", "0"]).status.code(), Some(2));
}

#[test]
fn embed_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    let tree = gen(dir.path(), &["--kind", "binary", "--n", "2"], "edge.json");
    ok(&hyptree(dir.path(), &["embed", "--tree", tree.to_str().unwrap(), "--lambda", "1.5"]));
    let r = json(&dir.path().join("embed_report.json"));
    assert!(r["dist"].as_f64().unwrap() <= 1.5);
    assert_eq!(r["manifest"], "embed_manifest.json");
    assert!(r["hnn"].is_null());
}

#[test]
fn embed_binary_tree_within_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "6"], "b6.json");
    let out = ok(&hyptree(d, &["embed", "--tree", tree.to_str().unwrap(), "--lambda", "1.1"]));
    assert!(out.starts_with("kappa "));
    let r = json(&d.join("embed_report.json"));
    for key in ["kappa", "tau", "alpha", "beta", "dist"] {
        assert!(r[key].is_f64(), "{key}");
    }
    assert!(r["injective"].as_bool().unwrap());
    let dist = r["dist"].as_f64().unwrap();
    assert!(dist <= 1.21, "dist {dist}");
    let tau = r["tau"].as_f64().unwrap();
    assert!(tau <= 64.0);
    assert_eq!(r["kappa"].as_f64().unwrap(), -tau * tau);
    let e = json(&d.join("embedding.json"));
    assert_eq!(e["points"].as_object().unwrap().len(), 127);
    assert_manifest(&d.join("embed_manifest.json"), "embed", &["embedding.json", "embed_report.json"]);
}

#[test]
fn unreachable_target_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "4"], "b4.json");
    let o = hyptree(d, &["embed", "--tree", tree.to_str().unwrap(), "--lambda", "1.01", "--tau-grid", "1,2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(d.join("embed_manifest.json").exists());
    assert!(!d.join("embedding.json").exists());
}

#[test]
fn realized_network_matches_reported_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "4"], "b4.json");
    let out = ok(&hyptree(d, &["embed", "--tree", tree.to_str().unwrap(), "--lambda", "1.1", "--realize-hnn"]));
    assert!(out.contains("hnn depth "));
    let r = json(&d.join("embed_report.json"));
    let hnn = &r["hnn"];
    assert_eq!(hnn["file"], "embed_hnn.json");
    assert!(hnn["realization_error"].as_f64().unwrap() <= 1e-6);
    for key in ["depth", "width", "par"] {
        assert!(hnn[key].is_u64(), "{key}");
    }

    let t = WeightedTree::read(&tree).unwrap();
    let (net, _) = Network::read(&d.join("embed_hnn.json")).unwrap();
    let Network::Hnn(p) = net else { panic!("expected an HNN") };
    let outputs: Vec<_> = (0..t.len()).map(|i| hnn_forward(&p, t.coords(i)).unwrap()).collect();
    let tau = r["tau"].as_f64().unwrap();
    let rep = distortion(&outputs, &tree_metric(&t), |a, b| kernel::dist(a.coords(), b.coords()) / tau);
    let reported = hnn["realized"]["dist"].as_f64().unwrap();
    assert!((rep.dist - reported).abs() <= 1e-5, "{} vs {reported}", rep.dist);
    assert!((reported - r["dist"].as_f64().unwrap()).abs() <= 1e-5);
}

#[test]
fn train_fits_a_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--n", "2"], "edge.json");
    let tree = tree.to_str().unwrap();
    ok(&hyptree(d, &["train", "--tree", tree, "--model", "mlp", "--epochs", "200"]));
    let (header, rows) = csv_rows(&d.join("train_mlp_d2_loss.csv"));
    assert_eq!(header, ["epoch", "train_mse", "test_mse"]);
    assert_eq!(rows.len(), 200);
    let last: f64 = rows[199][1].parse().unwrap();
    assert!(last < 1e-4, "final loss {last}");
    let r = json(&d.join("train_mlp_d2_report.json"));
    assert_eq!(r["model"], "mlp");
    assert_eq!(r["epochs"], 200);
    assert_manifest(
        &d.join("train_mlp_d2_manifest.json"),
        "train",
        &["train_mlp_d2_loss.csv", "train_mlp_d2_report.json", "train_mlp_d2_model.json"],
    );
    assert!(Network::read(&d.join("train_mlp_d2_model.json")).is_ok());
}

#[test]
fn train_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "3"], "b3.json");
    let tree = tree.to_str().unwrap();
    let run = |seed: &str| {
        ok(&hyptree(d, &["train", "--tree", tree, "--model", "hnn", "--epochs", "5", "--seed", seed]));
        fs::read(d.join("train_hnn_d2_loss.csv")).unwrap()
    };
    let (a, b, c) = (run("1"), run("1"), run("2"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn divergence_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "3"], "b3.json");
    let o = hyptree(
        d,
        &["train", "--tree", tree.to_str().unwrap(), "--optimizer", "sgd", "--lr", "1e300", "--epochs", "5"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hyperbolic_training_beats_euclidean_on_a_binary_tree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = gen(d, &["--kind", "binary", "--depth", "5"], "b5.json");
    let tree = tree.to_str().unwrap();
    let mse = |model: &str| {
        ok(&hyptree(d, &["train", "--tree", tree, "--model", model, "--dim", "2"]));
        json(&d.join(format!("train_{model}_d2_report.json")))["test_mse"].as_f64().unwrap()
    };
    let (mlp, hnn) = (mse("mlp"), mse("hnn"));
    assert!(hnn < mlp, "hnn {hnn} mlp {mlp}");
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("grid.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn small_grid_writes_rows_runs_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, r#"{"tree_kind": "binary", "depths": [5], "dims": [2], "seeds": [0]}"#);
    let out = ok(&hyptree(d, &["grid", "--config", cfg.to_str().unwrap(), "--svg"]));
    assert!(out.contains("hnn below mlp in"));
    let (header, rows) = csv_rows(&d.join("grid.csv"));
    assert_eq!(header, hyptree_cli::GRID_HEADER);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row[0], "binary");
        assert_eq!(row[1], "63");
        assert_eq!(row[8], "ok");
        for v in &row[5..8] {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
    for model in ["mlp", "hnn"] {
        let svg = fs::read_to_string(d.join(format!("grid_{model}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("</svg>"));
        let run = d.join(format!("runs/binary_n63_d2_{model}_s0.csv"));
        assert_eq!(csv_rows(&run).1.len(), 10);
    }
    assert_manifest(
        &d.join("grid_manifest.json"),
        "grid",
        &["grid.csv", "grid_mlp.svg", "grid_hnn.svg", "runs/binary_n63_d2_hnn_s0.csv"],
    );
}

#[test]
fn grid_covers_every_size_dim_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        r#"{"tree_kind": "random", "sizes": [127, 255, 511], "dims": [2, 4, 6, 8], "seeds": [0, 1],
            "train": {"epochs": 1, "hidden_width": 16, "hidden_layers": 2}}"#,
    );
    ok(&hyptree(d, &["grid", "--config", cfg.to_str().unwrap()]));
    let (_, rows) = csv_rows(&d.join("grid.csv"));
    assert_eq!(rows.len(), 48);
    for model in ["mlp", "hnn"] {
        let mine: Vec<_> = rows.iter().filter(|r| r[3] == model).collect();
        assert_eq!(mine.len(), 24);
        for n in ["127", "255", "511"] {
            assert_eq!(mine.iter().filter(|r| r[1] == n).count(), 8);
        }
    }
    assert_eq!(fs::read_dir(d.join("runs")).unwrap().count(), 48);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let body = r#"{"tree_kind": ["binary", "random"], "sizes": [40], "dims": [2, 3], "seeds": [0, 1],
        "train": {"epochs": 2, "hidden_width": 16, "hidden_layers": 2}}"#;
    let read = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), body);
        ok(&hyptree_env(dir.path(), &["grid", "--config", cfg.to_str().unwrap()], &[("HYPTREE_THREADS", threads)]));
        let mut files = vec![fs::read(dir.path().join("grid.csv")).unwrap()];
        let mut runs: Vec<_> = fs::read_dir(dir.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
        runs.sort();
        files.extend(runs.iter().map(|p| fs::read(p).unwrap()));
        files
    };
    assert_eq!(read("1"), read("3"));
}

#[test]
fn lowerbound_table_has_rows_and_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&hyptree(
        d,
        &["lowerbound", "--leaves", "2,8,16,32"],
    ));
    let (header, rows) = csv_rows(&d.join("lowerbound.csv"));
    assert_eq!(header, hyptree_cli::LOWERBOUND_HEADER);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], hyptree_cli::EXPONENT_ROW);
    assert!(rows[4][2].parse::<f64>().is_ok());
    for row in &rows[..4] {
        assert_eq!(row[9], "ok");
        let hnn: f64 = row[5].parse().unwrap();
        assert!(hnn <= 1.1, "hnn distortion {hnn}");
        assert!(row[2].parse::<f64>().unwrap() >= 1.0);
    }
    // A two-leaf spider is a path, which a line realizes isometrically.
    let control: f64 = rows[0][2].parse().unwrap();
    assert!(control < 1.5, "L=2 mlp distortion {control}");
    assert_manifest(&d.join("lowerbound_manifest.json"), "lowerbound", &["lowerbound.csv"]);
}

#[test]
fn manifests_take_timestamp_from_source_date_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = hyptree_env(d, &["gen", "--kind", "binary", "--depth", "1"], &[("SOURCE_DATE_EPOCH", "1700000000")]);
    ok(&o);
    assert_eq!(json(&d.join("tree_manifest.json"))["timestamp"], 1700000000u64);
}
