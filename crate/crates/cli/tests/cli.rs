use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn clipgeom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clipgeom"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = clipgeom(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    serde_json::from_str(lines[0]).unwrap()
}

fn paired(dir: &Path) {
    ok(
        dir,
        &[
            "synth-paired", "--dim", "8", "--count", "40", "--image-center", "3", "--text-center", "0,3",
            "--out", "i.emb", "--texts-out", "t.emb",
        ],
    );
}

#[test]
fn report_carries_manifest_with_input_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    ok(d, &["stats", "--in", "i.emb", "--out", "s.json"]);
    let report = json(d.join("s.json"));
    assert_eq!(report["manifest"], "s.json.manifest.json");
    assert_eq!(report["count"], 40);
    assert_eq!(report["dim"], 8);
    let m = json(d.join("s.json.manifest.json"));
    assert_eq!(m["command"], "stats");
    assert_eq!(m["argv"][0], "stats");
    assert_eq!(m["timestamp"], "1970-01-01T00:00:00Z");
    let digest = hex::encode(Sha256::digest(std::fs::read(d.join("i.emb")).unwrap()));
    assert_eq!(m["inputs"][0]["sha256"], digest);
    assert_eq!(m["parameters"]["covariance"], false);
}

#[test]
fn tables_start_with_manifest_comment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    ok(d, &["loss-sweep", "--images", "i.emb", "--texts", "t.emb", "--alphas", "0,0.5", "--out", "l.csv"]);
    let text = std::fs::read_to_string(d.join("l.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# manifest: l.csv.manifest.json");
    assert!(lines[1].starts_with("# tau: 0.01"));
    assert_eq!(
        lines[2],
        "alpha,total,alignment,uniformity,loss_correct,loss_misclassified,accuracy"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("0.0,"));
}

#[test]
fn exit_codes_and_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = clipgeom(d, &["stats", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let out = clipgeom(d, &["stats", "--in", "missing.emb", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_line(&out);
    assert_eq!(e["code"], 3);
    assert_eq!(e["error"], "input");

    std::fs::write(d.join("opp.csv"), "id,x,y\na,1,0\nb,-1,0\n").unwrap();
    ok(d, &["import-csv", "--in", "opp.csv", "--modality", "image", "--out", "opp.emb"]);
    let out = clipgeom(d, &["slerp", "--in", "opp.emb", "--a", "a", "--b", "b", "--out", "s.emb"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"], "numerical");
    assert!(!d.join("s.emb").exists());

    paired(d);
    let out = clipgeom(d, &["loss", "--images", "i.emb", "--texts", "t.emb", "--tau", "0", "--out", "l.json"]);
    assert_eq!(out.status.code(), Some(2));

    assert!(clipgeom(d, &["--help"]).status.success());
    assert!(clipgeom(d, &["--version"]).status.success());
}

#[test]
fn failure_leaves_no_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    let out = clipgeom(
        d,
        &[
            "feature-kl", "--images", "i.emb", "--texts", "t.emb", "--features", "0,99", "--hist-out", "h.tsv",
            "--out", "k.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = clipgeom(
        d,
        &[
            "synth-paired", "--dim", "4", "--count", "10", "--out", "a.emb", "--texts-out", "nodir/b.emb",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let mut names: Vec<String> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["i.emb", "i.emb.manifest.json", "t.emb"]);
}

#[test]
fn inputs_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    let before = std::fs::read(d.join("i.emb")).unwrap();
    let out = clipgeom(d, &["whiten", "--in", "i.emb", "--out", "./i.emb"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read(d.join("i.emb")).unwrap(), before);
}

#[test]
fn replay_checks_input_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    ok(d, &["conformity", "--in", "t.emb", "--instances-out", "c.tsv", "--out", "c.json"]);
    let report = std::fs::read(d.join("c.json")).unwrap();
    let table = std::fs::read(d.join("c.tsv")).unwrap();
    std::fs::remove_file(d.join("c.json")).unwrap();
    std::fs::remove_file(d.join("c.tsv")).unwrap();
    ok(d, &["replay", "--manifest", "c.json.manifest.json"]);
    assert_eq!(std::fs::read(d.join("c.json")).unwrap(), report);
    assert_eq!(std::fs::read(d.join("c.tsv")).unwrap(), table);

    ok(d, &["synth-paired", "--dim", "8", "--count", "40", "--seed", "9", "--out", "x.emb", "--texts-out", "t.emb"]);
    let out = clipgeom(d, &["replay", "--manifest", "c.json.manifest.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("changed"));
}

#[test]
fn whiten_then_check_is_isotropic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--dim", "6", "--count", "3000", "--center", "4,-1", "--scale", "3", "--out", "x.emb"]);
    ok(d, &["whiten", "--in", "x.emb", "--transform-out", "w.emb", "--out", "y.emb"]);
    ok(d, &["stats", "--in", "y.emb", "--covariance", "--out", "s.json"]);
    let s = json(d.join("s.json"));
    for (r, row) in s["covariance"].as_array().unwrap().iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((v.as_f64().unwrap() - want).abs() < 1e-6);
        }
    }
    let sidecar = json(d.join("w.emb.json"));
    assert_eq!(sidecar["dim"], 6);
    assert!((sidecar["mean"][0].as_f64().unwrap() - 4.0).abs() < 0.3);
    ok(d, &["whiten-check", "--in", "x.emb", "--fit", "--out", "c.json"]);
    let c = json(d.join("c.json"));
    assert!(c["rel_err_mean"].as_f64().unwrap() < 0.05);
}

#[test]
fn interpolation_rows_are_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    ok(d, &["slerp", "--in", "i.emb", "--a", "p0", "--b", "p1", "--ts", "0:1:0.5", "--out", "s.emb"]);
    let s = clipgeom_core::load_emb(d.join("s.emb")).unwrap();
    let src = clipgeom_core::load_emb(d.join("i.emb")).unwrap();
    assert_eq!(s.ids().unwrap(), ["t=0.0", "t=0.5", "t=1.0"]);
    // f32 storage on both sides
    assert_eq!(s.row(0), src.row(0));
    assert_eq!(s.row(2), src.row(1));
    ok(
        d,
        &["vslerp", "--in", "i.emb", "--a", "0", "--b", "1", "--ts", "0,1", "--alphas", "0,1", "--out", "v.emb"],
    );
    let v = clipgeom_core::load_emb(d.join("v.emb")).unwrap();
    assert_eq!(v.count(), 4);
    assert_eq!(v.ids().unwrap()[1], "alpha=0.0;t=1.0");
}

#[test]
fn train_sep_reports_held_out_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    paired(d);
    ok(
        d,
        &[
            "synth-paired", "--dim", "8", "--count", "40", "--image-center", "3", "--text-center", "0,3", "--seed",
            "5", "--out", "i2.emb", "--texts-out", "t2.emb",
        ],
    );
    ok(
        d,
        &[
            "train-sep", "--images", "i.emb", "--texts", "t.emb", "--test-images", "i2.emb", "--test-texts",
            "t2.emb", "--out", "m.json",
        ],
    );
    let m = json(d.join("m.json"));
    let features: Vec<u64> = m["model"]["feature_indices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(features.len(), 2);
    assert!(features.contains(&0) && features.contains(&1));
    assert!(m["test"]["accuracy"].as_f64().unwrap() > 0.9);
    let c = &m["test"]["confusion"];
    let total: u64 = ["true_pos", "false_neg", "false_pos", "true_neg"]
        .iter()
        .map(|k| c[*k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 80);
    assert_eq!(json(d.join("m.json.manifest.json"))["inputs"].as_array().unwrap().len(), 4);
}
