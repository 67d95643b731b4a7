use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn driftlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = driftlap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn ball_spectrum_inside_bessel_sandwich() {
    let v = json(&["ball-spectrum", "--dim", "2", "--radius", "1", "--count", "1"]);
    assert_eq!(v["schema"], 1);
    let l = v["outputs"]["spectrum"][0]["lambda"].as_f64().unwrap();
    assert!((6.78319..=7.03319).contains(&l), "{l}");
}

#[test]
fn zero_count_is_usage_error() {
    assert_eq!(driftlap(&["ball-spectrum", "--dim", "2", "--radius", "1", "--count", "0"]).status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(driftlap(&["ball-spectrum", "--dim", "2", "--bogus"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["ball-spectrum", "--dim", "3", "--radius", "0.8", "--count", "4", "--no-timing"];
    assert_eq!(driftlap(&args).stdout, driftlap(&args).stdout);
    let csv = ["sweep", "--dim", "2", "--rmin", "0.5", "--rmax", "3", "--steps", "6", "--format", "csv"];
    assert_eq!(driftlap(&csv).stdout, driftlap(&csv).stdout);
}

#[test]
fn spectrum_csv_header() {
    let out = driftlap(&["ball-spectrum", "--dim", "2", "--radius", "1", "--count", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,lambda,ell,multiplicity,residual"));
    let total: usize = lines.map(|l| l.split(',').nth(3).unwrap().parse::<usize>().unwrap()).sum();
    assert!(total >= 3);
}

#[test]
fn sweep_decreases_to_plateau() {
    let v = json(&["sweep", "--dim", "2", "--rmin", "0.25", "--rmax", "8", "--steps", "40"]);
    let o = &v["outputs"];
    let l: Vec<f64> = o["lambda1"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(l.len(), 40);
    assert!(l.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(o["strictly_decreasing"], true);
    assert!(o["plateau"].as_f64().unwrap() >= 2.0 - 1e-3);
    assert!(o["distance_to_n"].is_f64());
    assert!(o["distance_to_three_halves_n"].is_f64());
}

#[test]
fn sweep_rejects_reversed_range() {
    assert_eq!(driftlap(&["sweep", "--dim", "2", "--rmin", "2", "--rmax", "1"]).status.code(), Some(2));
}

#[test]
fn chiti_sup_constant() {
    let v = json(&["chiti", "--dim", "2", "--lambda", "12", "--r", "2", "--q", "inf"]);
    assert!(v["outputs"]["constant"].as_f64().unwrap() > 0.0);
    assert_eq!(v["outputs"]["scale_invariance"]["passed"], true);
    assert_eq!(v["params"]["q"], "inf");
}

#[test]
fn chiti_rejects_r_not_below_q() {
    assert_eq!(driftlap(&["chiti", "--dim", "2", "--lambda", "12", "--r", "2", "--q", "2"]).status.code(), Some(2));
}

#[test]
fn domain_spectrum_of_disk_mask_matches_ball() {
    let mask = tmp("disk256.msk");
    json(&["mask", "--disk", "0,0,1", "--h", "0.00390625", "--out", mask.to_str().unwrap()]);
    let field = json(&["domain-spectrum", "--mask", mask.to_str().unwrap(), "--count", "3"]);
    let ball = json(&["ball-spectrum", "--dim", "2", "--radius", "1", "--count", "3"]);
    let expand = |v: &Value| -> Vec<f64> {
        v["outputs"]["spectrum"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|e| std::iter::repeat_n(e["lambda"].as_f64().unwrap(), e["multiplicity"].as_u64().unwrap() as usize))
            .collect()
    };
    let (a, b) = (expand(&field), expand(&ball));
    for j in 0..3 {
        assert!(((a[j] - b[j]) / b[j]).abs() <= 5e-3, "j={j}: {} vs {}", a[j], b[j]);
    }
}

#[test]
fn torsion_of_rectangle_is_positive() {
    let mask = tmp("rect.msk");
    json(&["mask", "--rect", "-1,0.5,-0.4,0.6", "--h", "0.03125", "--out", mask.to_str().unwrap()]);
    let csv = tmp("rect_w.csv");
    let v = json(&["torsion", "--mask", mask.to_str().unwrap(), "--domination", "2", "--out", csv.to_str().unwrap()]);
    assert!(v["outputs"]["min"].as_f64().unwrap() > 0.0);
    assert_eq!(v["outputs"]["domination"]["holds"], true);
    let rows = std::fs::read_to_string(csv).unwrap();
    assert_eq!(rows.lines().next(), Some("x,y,w"));
    assert_eq!(rows.lines().count() - 1, v["meta"]["grid"]["active_cells"].as_u64().unwrap() as usize);
}

#[test]
fn missing_or_malformed_mask_is_usage_error() {
    assert_eq!(driftlap(&["torsion", "--mask", "/nonexistent/x.msk"]).status.code(), Some(2));
    let bad = tmp("bad.msk");
    std::fs::write(&bad, "3 2 0 0\n101\n").unwrap();
    assert_eq!(driftlap(&["domain-spectrum", "--mask", bad.to_str().unwrap(), "--count", "1"]).status.code(), Some(2));
}

#[test]
fn overlapping_balls_rejected() {
    let out = driftlap(&["shape-search", "--k", "1", "--centers=-0.2,0.3", "--radii", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hardy_profiles_above_quarter() {
    let v = json(&["hardy", "--dim", "2", "--profiles", "10", "--sharpness", "10"]);
    assert!(v["outputs"]["random_profiles"]["min_ratio"].as_f64().unwrap() >= 0.25 - 1e-6);
    assert!(v["outputs"]["t"].as_f64().unwrap() > 0.0);
}

#[test]
fn quick_verify_passes() {
    let start = std::time::Instant::now();
    let out = driftlap(&["verify", "--quick"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(start.elapsed().as_secs() < 120);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outputs"]["passed"], true);
}
