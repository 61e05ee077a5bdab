//! End-to-end checks of the `stationkeep` binary: exit codes, file outputs,
//! and rerun determinism.

use stationkeep::geo::WindVector;
use stationkeep::grid::{GridKind, WindGrid};
use stationkeep::grid_io::{write_grid, PayloadEncoding};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stationkeep")
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn assert_identical_trees(a: &Path, b: &Path) {
    let fa = read_dir_files(a);
    let fb = read_dir_files(b);
    let names_a: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    let names_b: Vec<&String> = fb.iter().map(|(n, _)| n).collect();
    assert_eq!(names_a, names_b, "output file sets differ");
    for ((name, bytes_a), (_, bytes_b)) in fa.iter().zip(&fb) {
        assert_eq!(bytes_a, bytes_b, "{name} differs between reruns");
    }
}

fn zero_wind_grid() -> WindGrid {
    WindGrid::uniform(
        vec![30.0, 33.0, 36.0],
        vec![-111.0, -108.0, -105.0],
        vec![15_000.0, 20_000.0, 25_000.0],
        vec![0, 43_200, 86_400],
        WindVector::new(0.0, 0.0),
        GridKind::Synthetic,
    )
    .unwrap()
}

#[test]
fn synth_produces_46_level_grids_and_reruns_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let soundings = data_dir().join("soundings");
    for sub in ["a", "b"] {
        let out = run_in(
            tmp.path(),
            &[
                "synth",
                "--soundings",
                soundings.to_str().unwrap(),
                "--out",
                sub,
                "--seed",
                "1",
            ],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let header = fs::read_to_string(tmp.path().join("a/synthetic_native.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&header).unwrap();
    assert_eq!(parsed["levels"].as_array().unwrap().len(), 46);
    assert!(tmp.path().join("a/synthetic_dense.json").exists());
    assert_identical_trees(&tmp.path().join("a"), &tmp.path().join("b"));
}

#[test]
fn synth_on_empty_directory_exits_3_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = run_in(
        tmp.path(),
        &["synth", "--soundings", empty.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no soundings"));
}

#[test]
fn score_uniform_grid_is_zero_and_random_mode_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let grid_path = tmp.path().join("uniform.json");
    let uniform = WindGrid::uniform(
        vec![30.0, 33.0, 36.0],
        vec![-111.0, -108.0, -105.0],
        (0..8).map(|k| 15_500.0 + k as f64 * 1_200.0).collect(),
        vec![0, 43_200],
        WindVector::new(7.0, -3.0),
        GridKind::ForecastLike,
    )
    .unwrap();
    write_grid(&uniform, &grid_path, PayloadEncoding::Binary).unwrap();

    let out = run_in(
        tmp.path(),
        &[
            "score",
            "--grid",
            "uniform.json",
            "--coordinate",
            "33.0,-108.0",
            "--out",
            "coord",
            "--seed",
            "5",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let score: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("coord/score.json")).unwrap()).unwrap();
    assert_eq!(score["results"][0]["forecast_score"].as_f64().unwrap(), 0.0);

    for sub in ["r1", "r2"] {
        let out = run_in(
            tmp.path(),
            &[
                "score",
                "--grid",
                "uniform.json",
                "--random",
                "200",
                "--seed",
                "7",
                "--out",
                sub,
            ],
        );
        assert!(out.status.success());
    }
    assert_identical_trees(&tmp.path().join("r1"), &tmp.path().join("r2"));
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("r1/score_distribution.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["grids"][0]["zero_fraction"].as_f64().unwrap(), 1.0);
}

#[test]
fn score_constructed_opposing_grid_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let grid_path = tmp.path().join("opposing.json");
    let opposing = WindGrid::from_fn(
        vec![30.0, 36.0],
        vec![-111.0, -105.0],
        (0..8).map(|k| 15_500.0 + k as f64 * 1_200.0).collect(),
        vec![0],
        GridKind::Synthetic,
        |_, l, _, _| {
            if l % 2 == 0 {
                WindVector::new(6.0, 0.0)
            } else {
                WindVector::new(-6.0, 0.0)
            }
        },
    )
    .unwrap();
    write_grid(&opposing, &grid_path, PayloadEncoding::Binary).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "score",
            "--grid",
            "opposing.json",
            "--coordinate",
            "33.0,-108.0",
            "--out",
            "o",
            "--seed",
            "1",
        ],
    );
    assert!(out.status.success());
    let score: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/score.json")).unwrap()).unwrap();
    assert_eq!(score["results"][0]["forecast_score"].as_f64().unwrap(), 1.0);
}

#[test]
fn train_rejects_bad_learning_rate_before_any_compute() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[dqn]\nlearning_rate = 2.0\n").unwrap();
    // Deliberately missing grids too: config validation must fire first.
    let out = run_in(
        tmp.path(),
        &[
            "train",
            "--config",
            "bad.toml",
            "--truth",
            "missing.json",
            "--forecast",
            "missing.json",
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning rate"));
}

#[test]
fn eval_zero_wind_month_reports_perfect_twr50() {
    let tmp = tempfile::tempdir().unwrap();
    let grid_path = tmp.path().join("calm.json");
    write_grid(&zero_wind_grid(), &grid_path, PayloadEncoding::Binary).unwrap();
    fs::write(
        tmp.path().join("toy.toml"),
        "[dqn]\ntotal_steps = 400\nwarmup_steps = 100\nbatch_size = 16\nbuffer_capacity = 1000\nhidden_sizes = [8]\neval_interval = 400\neval_episodes = 1\n[sim]\nepisode_hours = 0.5\n",
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "train",
            "--config",
            "toy.toml",
            "--truth",
            "calm.json",
            "--forecast",
            "calm.json",
            "--seed",
            "3",
            "--out",
            "t",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run_in(
        tmp.path(),
        &[
            "eval",
            "--config",
            "toy.toml",
            "--checkpoint",
            "t/checkpoint",
            "--month",
            "calm=calm.json:calm.json",
            "--episodes",
            "5",
            "--seed",
            "9",
            "--export-trajectories",
            "--out",
            "e",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = fs::read_to_string(tmp.path().join("e/summary.csv")).unwrap();
    let row = summary.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "calm");
    assert_eq!(fields[2], "1", "mean TWR50 must be 1");

    // Heatmap dimensions follow the configured 0.1-wide bins.
    let heatmap = fs::read_to_string(tmp.path().join("e/heatmap_all.csv")).unwrap();
    let rows: Vec<&str> = heatmap.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 11); // header + 10 TWR bins
    assert_eq!(rows[0].split(',').count(), 11); // label + 10 FS bins

    let trajs: Vec<_> = fs::read_dir(tmp.path().join("e/trajectories")).unwrap().collect();
    assert_eq!(trajs.len(), 5);
    let one = fs::read_to_string(tmp.path().join("e/trajectories/calm_0000.csv")).unwrap();
    assert!(one.lines().any(|l| l.starts_with("time_utc,lat,lon,alt_m,action,reward,distance_km")));
    assert_eq!(one.lines().filter(|l| l.starts_with("1970")).count(), 30); // 0.5 h = 30 steps
}

#[test]
fn compare_identical_grids_reports_zero_difference() {
    let tmp = tempfile::tempdir().unwrap();
    let grid_path = tmp.path().join("g.json");
    write_grid(&zero_wind_grid(), &grid_path, PayloadEncoding::Binary).unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "compare", "--grid-a", "g.json", "--grid-b", "g.json", "--out", "c", "--seed", "1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("c/compare_report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["overall_mean_angular_deg"].as_f64().unwrap(), 0.0);
}

#[test]
fn omitted_seed_is_drawn_and_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let grid_path = tmp.path().join("g.json");
    write_grid(&zero_wind_grid(), &grid_path, PayloadEncoding::Binary).unwrap();
    let out = run_in(
        tmp.path(),
        &["score", "--grid", "g.json", "--random", "3", "--out", "s"],
    );
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("s/score_distribution.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["meta"]["seed"].as_u64().is_some());
}
