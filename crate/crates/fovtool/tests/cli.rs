//! End-to-end tests of the `fovtool` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fovtool")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_profile(dir: &Path) -> PathBuf {
    let path = dir.join("profile.txt");
    std::fs::write(
        &path,
        "area = 0.0, 0.0, 0.02, 0.02\n\
         n_videos = 400\n\
         seed = 5\n\
         hotspots_auto = 3\n\
         variant = 100pct60\n",
    )
    .unwrap();
    path
}

fn gen_dataset(dir: &Path) -> PathBuf {
    let profile = write_profile(dir);
    let data = dir.join("data.csv");
    let out = run(&[
        "gen",
        "--profile",
        profile.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn gen_writes_dataset_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write_profile(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out_path in [&a, &b] {
        let out = run(&[
            "gen",
            "--profile",
            profile.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        assert!(stdout(&out).contains("400 rows"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gen_missing_out_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write_profile(dir.path());
    let out = run(&["gen", "--profile", profile.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_bad_profile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("bad.txt");
    std::fs::write(&profile, "area = 0,0,1,1\nn_videos = 10\nnope = 1\n").unwrap();
    let out = run(&[
        "gen",
        "--profile",
        profile.to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn gen_missing_profile_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen",
        "--profile",
        dir.path().join("absent.txt").to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn detect_args<'a>(data: &'a str, algo: &'a str) -> Vec<&'a str> {
    vec![
        "detect", "--data", data, "--area", "0.0,0.0,0.02,0.02", "--time",
        "0,2000000000", "--k", "5", "--cell", "0.0001", "--algo", algo,
    ]
}

#[test]
fn detect_naive_and_optimized_print_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let data = data.to_str().unwrap();
    let naive = run(&detect_args(data, "naive"));
    let optimized = run(&detect_args(data, "optimized"));
    assert!(naive.status.success() && optimized.status.success());
    let table = stdout(&naive);
    assert_eq!(table, stdout(&optimized));
    assert!(table.starts_with("rank,x,y,lat,lon,score\n"));
    assert_eq!(table.lines().count(), 6); // header + k rows
}

#[test]
fn detect_empty_area_prints_empty_table_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let out = run(&[
        "detect", "--data", data.to_str().unwrap(), "--area", "50.0,50.0,50.01,50.01",
        "--time", "0,2000000000", "--k", "5", "--cell", "0.0001", "--algo", "optimized",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "rank,x,y,lat,lon,score\n");
}

#[test]
fn detect_cis_same_seed_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let data = data.to_str().unwrap();
    let mut args = detect_args(data, "cis");
    args.extend_from_slice(&["--seed", "7"]);
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn detect_capacity_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let out = run(&[
        "detect", "--data", data.to_str().unwrap(), "--area", "-80.0,-170.0,80.0,170.0",
        "--time", "0,2000000000", "--k", "5", "--cell", "0.00001", "--algo", "optimized",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cap"), "stderr: {err}");
}

#[test]
fn detect_bad_area_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let out = run(&[
        "detect", "--data", data.to_str().unwrap(), "--area", "1.0,0.0,0.0,1.0",
        "--time", "0,10", "--k", "5", "--cell", "0.0001", "--algo", "naive",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_writes_heatmaps_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let data = data.to_str().unwrap();
    let pgm = dir.path().join("h.pgm");
    let csv = dir.path().join("h.csv");
    let json = dir.path().join("r.json");

    let mut args = detect_args(data, "optimized");
    args.extend_from_slice(&["--heatmap", pgm.to_str().unwrap(), "--report", json.to_str().unwrap()]);
    assert!(run(&args).status.success());

    let mut args = detect_args(data, "optimized");
    args.extend_from_slice(&["--heatmap", csv.to_str().unwrap()]);
    assert!(run(&args).status.success());

    let pgm_text = std::fs::read_to_string(&pgm).unwrap();
    let mut lines = pgm_text.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some("200 200"));
    assert_eq!(lines.next(), Some("255"));
    let pixels: Vec<u32> = lines
        .flat_map(|l| l.split_whitespace().map(|t| t.parse().unwrap()))
        .collect();
    assert_eq!(pixels.len(), 200 * 200);
    assert_eq!(pixels.iter().max(), Some(&255)); // normalized peak
    assert!(pixels.iter().all(|&v| v <= 255));

    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("x,y,lat,lon,value\n"));
    assert_eq!(csv_text.lines().count(), 1 + 200 * 200);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 5);
    assert!(report["report"]["fovs_processed"].as_u64().unwrap() > 0);
}

#[test]
fn bench_suite_runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let suite = dir.path().join("suite.txt");
    std::fs::write(
        &suite,
        "# reference first\noptimized\nnaive\nsample fraction=0.5\ncis clusters=4\n",
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    let out = run(&[
        "bench", "--data", data.to_str().unwrap(), "--area", "0.0,0.0,0.02,0.02",
        "--time", "0,2000000000", "--k", "5", "--cell", "0.0001",
        "--suite", suite.to_str().unwrap(), "--repeats", "2", "--seed", "1",
        "--out", results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&results).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "detector,params,run,seed,wall_ms,fovs_processed,cell_updates,sum_min_dist_m,correct_frac"
    );
    assert_eq!(lines.count(), 4 * 2); // 4 configs × 2 repeats
    // Optimized vs itself: zero difference, full correctness.
    for line in csv.lines().skip(1).take(2) {
        assert!(line.starts_with("optimized"));
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[cols.len() - 2], "0.000000");
        assert_eq!(cols[cols.len() - 1], "1.0000");
    }
    assert!(stdout(&out).contains("speedup"));
}

#[test]
fn bench_bad_suite_writes_no_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(dir.path());
    let suite = dir.path().join("suite.txt");
    std::fs::write(&suite, "warp9\n").unwrap();
    let results = dir.path().join("results.csv");
    let out = run(&[
        "bench", "--data", data.to_str().unwrap(), "--area", "0.0,0.0,0.02,0.02",
        "--time", "0,2000000000", "--k", "5", "--cell", "0.0001",
        "--suite", suite.to_str().unwrap(), "--repeats", "1", "--seed", "1",
        "--out", results.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!results.exists());
}
