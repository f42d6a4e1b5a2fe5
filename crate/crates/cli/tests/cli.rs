//! Command-line behavior: exit codes, output files and determinism.

use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkability"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn digest_dir(dir: &Path) -> String {
    let mut names: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_encoded_bytes());
        h.update(std::fs::read(dir.join(&n)).unwrap());
    }
    hex::encode(h.finalize())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();
}

/// Small congested campus fleet, simulated and extracted once per test.
fn campus(dir: &Path, trips: &str) -> std::path::PathBuf {
    let sim = dir.join("sim");
    let feat = dir.join("feat");
    ok(&["simulate", "--fleet", trips, "--seed", "77", "--out", p(&sim)]);
    ok(&["extract", p(&sim.join("manifest.json")), "--out", p(&feat)]);
    feat
}

#[test]
fn extract_without_inputs_is_a_usage_error() {
    let out = run(&["extract"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no inputs"));
}

#[test]
fn null_scenario_gives_one_log_and_one_truth_deterministically() {
    let tmp = TempDir::new().unwrap();
    let scenario = tmp.path().join("null.json");
    std::fs::write(&scenario, r#"{"trip_id": "null", "route": [{"segment": "S6"}], "seed": 3}"#).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let printed = ok(&["simulate", p(&scenario), "--out", p(&a)]);
    assert!(String::from_utf8_lossy(&printed.stdout).contains("manifest.json"));
    ok(&["simulate", p(&scenario), "--out", p(&b)]);
    assert!(a.join("null.jsonl").exists());
    assert!(a.join("null.truth.json").exists());
    let logs = std::fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".jsonl"))
        .count();
    assert_eq!(logs, 1);
    assert_eq!(digest_dir(&a), digest_dir(&b));

    let checks = ok(&["validate", p(&a.join("null.jsonl"))]);
    assert!(String::from_utf8_lossy(&checks.stdout).contains(r#""ok":true"#));
}

#[test]
fn invalid_scenario_and_bad_log_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let scenario = tmp.path().join("bad.json");
    std::fs::write(&scenario, r#"{"route": [{"segment": "S99"}]}"#).unwrap();
    let out = run(&["simulate", p(&scenario), "--out", p(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("S99"));

    let log = tmp.path().join("broken.jsonl");
    std::fs::write(&log, "{\"t\": 1.0, \"type\": \"imu\"}\nnot json\n").unwrap();
    assert_eq!(run(&["validate", p(&log)]).status.code(), Some(2));
}

#[test]
fn extract_is_byte_identical_and_report_matches_independent_quartiles() {
    let tmp = TempDir::new().unwrap();
    let feat = campus(tmp.path(), "3");
    let again = tmp.path().join("again");
    ok(&["extract", p(&tmp.path().join("sim/manifest.json")), "--out", p(&again)]);
    let csv_a = std::fs::read(feat.join("features.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(again.join("features.csv")).unwrap());
    assert!(feat.join("summary.json").exists());

    let rep = tmp.path().join("report");
    ok(&["report", "--features", p(&feat.join("features.csv")), "--out", p(&rep)]);

    // Speeds fall with density in the congested campus scenario.
    let mut r = csv::Reader::from_path(rep.join("fd_scatter.csv")).unwrap();
    let pts: Vec<(f64, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap())
        })
        .collect();
    assert!(pts.len() >= 20);
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope < 0.0, "{slope}");

    // Quartiles of segment_avg_speed per segment, by rank interpolation.
    let mut r = csv::Reader::from_reader(csv_a.as_slice());
    let headers = r.headers().unwrap().clone();
    let (seg, col) = (
        headers.iter().position(|h| h == "segment_id").unwrap(),
        headers.iter().position(|h| h == "segment_avg_speed").unwrap(),
    );
    let mut by_seg: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for rec in r.records() {
        let rec = rec.unwrap();
        if let Ok(v) = rec[col].parse::<f64>() {
            by_seg.entry(rec[seg].to_string()).or_default().push(v);
        }
    }
    let boxes: serde_json::Value = serde_json::from_slice(&std::fs::read(rep.join("segment_boxes.json")).unwrap()).unwrap();
    let feature = boxes["features"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["feature"] == "segment_avg_speed")
        .unwrap();
    for (id, mut xs) in by_seg {
        xs.sort_by(f64::total_cmp);
        let pct = |q: f64| {
            let rank = q * (xs.len() - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            xs[lo] + (xs[hi] - xs[lo]) * (rank - lo as f64)
        };
        let b = &feature["segments"][&id];
        for (key, q) in [("q1", 0.25), ("median", 0.5), ("q3", 0.75)] {
            assert!((b[key].as_f64().unwrap() - pct(q)).abs() < 1e-9, "{id} {key}");
        }
    }
}

#[test]
fn correlate_recovers_planted_signs() {
    let tmp = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let rows: Vec<Vec<String>> = (0..60)
        .map(|i| {
            let a = i as f64 / 10.0;
            let up = a + noise.sample(&mut rng);
            let down = -2.0 * a + noise.sample(&mut rng);
            vec![format!("t{i}"), "S1".into(), a.to_string(), up.to_string(), down.to_string()]
        })
        .collect();
    let table = tmp.path().join("planted.csv");
    write_csv(&table, &["trip_id", "segment_id", "a", "up", "down"], &rows);
    ok(&["analyze", "correlate", "--features", p(&table), "--out", p(tmp.path())]);
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("correlation.json")).unwrap()).unwrap();
    assert_eq!(doc["features"], serde_json::json!(["a", "up", "down"]));
    let v: Vec<f64> = doc["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((v[0] - 1.0).abs() < 1e-12);
    assert!(v[1] > 0.9 && v[2] < -0.9 && v[5] < -0.9);
}

#[test]
fn regress_names_collinear_columns() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<Vec<String>> = (0..20)
        .map(|i| {
            let x = (i * 7 % 13) as f64;
            vec![format!("t{i}"), "S1".into(), (0.5 * x + (i % 3) as f64).to_string(), x.to_string(), (2.0 * x).to_string()]
        })
        .collect();
    let table = tmp.path().join("dup.csv");
    write_csv(&table, &["trip_id", "segment_id", "y", "x1", "x2"], &rows);
    let out = run(&[
        "analyze", "regress", "--features", p(&table), "--response", "y", "--predictors", "x1,x2",
        "--log-columns", "", "--out", p(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x1") && err.contains("x2"), "{err}");
}

#[test]
fn cluster_orders_labels_by_speed_variation() {
    let tmp = TempDir::new().unwrap();
    let centroids = [[0.266, 0.629, 0.089], [0.514, 0.456, 0.122], [0.405, 2.815, 0.240]];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rows = Vec::new();
    // Planted groups written in a shuffled order relative to their labels.
    for (c, n) in [(2, 60), (0, 50), (1, 55)] {
        for i in 0..n {
            let vals: Vec<String> = centroids[c]
                .iter()
                .map(|&m| Normal::new(m, 0.1 * m).unwrap().sample(&mut rng).to_string())
                .collect();
            let mut row = vec![format!("c{c}-{i}"), "S1".to_string()];
            row.extend(vals);
            rows.push(row);
        }
    }
    let table = tmp.path().join("peds.csv");
    write_csv(
        &table,
        &["trip_id", "segment_id", "ped_speed_variation", "ped_turns", "ped_path_deviation"],
        &rows,
    );
    ok(&["analyze", "cluster", "--features", p(&table), "--out", p(tmp.path())]);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("clusters.json")).unwrap()).unwrap();
    assert_eq!(doc["sizes"], serde_json::json!([50, 55, 60]));
    let sv = doc["summary"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["feature"] == "ped_speed_variation")
        .unwrap();
    let means: Vec<f64> = sv["clusters"].as_array().unwrap().iter().map(|c| c["mean"].as_f64().unwrap()).collect();
    for (m, planted) in means.iter().zip([0.266, 0.514, 0.405]) {
        assert!((m - planted).abs() < 0.1 * planted, "{means:?}");
    }
    let mut r = csv::Reader::from_path(tmp.path().join("assignments.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let planted = &rec[1][1..2];
        assert_eq!(planted, &rec[3], "row {}", &rec[0]);
    }
}

#[test]
fn analysis_needs_three_rows_and_report_handles_one() {
    let tmp = TempDir::new().unwrap();
    let table = tmp.path().join("one.csv");
    write_csv(
        &table,
        &["trip_id", "segment_id", "avg_ped_density", "avg_ped_speed"],
        &[vec!["t1".into(), "S1".into(), "0.05".into(), "1.3".into()]],
    );
    assert_eq!(run(&["analyze", "correlate", "--features", p(&table), "--out", p(tmp.path())]).status.code(), Some(2));
    ok(&["report", "--features", p(&table), "--out", p(tmp.path())]);
    let scatter = std::fs::read_to_string(tmp.path().join("fd_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 2);
    assert!(scatter.lines().nth(1).unwrap().ends_with(",S1"));
}
