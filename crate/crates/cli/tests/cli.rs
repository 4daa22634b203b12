//! End-to-end runs of the `relfuse` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn relfuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relfuse")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = relfuse(dir, args);
    assert_eq!(code(&out), 0, "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn frames(v: &Value) -> Vec<f64> {
    v["frames"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|f| {
            f.as_array().unwrap().iter().flat_map(|j| j.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        })
        .collect()
}

fn write_sequence(path: PathBuf, positions: &[[[f64; 3]; 2]]) {
    let doc = serde_json::json!({
        "version": "1",
        "joint_count": 2,
        "dims": 3,
        "parents": [-1, 0],
        "units": "mm",
        "frames": positions,
    });
    fs::write(path, doc.to_string()).unwrap();
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let args = ["synth", "--seed", "7", "--joints", "chain:5", "--frames", "50", "--fps", "8", "--out", "seq.json"];
    let runs: Vec<PathBuf> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for run in &runs {
        fs::create_dir(run).unwrap();
        ok(run, &args);
    }
    let read = |run: &Path, n: &str| fs::read(run.join(n)).unwrap();
    assert_eq!(read(&runs[0], "seq.json"), read(&runs[1], "seq.json"));
    assert_eq!(read(&runs[0], "seq.problem.json"), read(&runs[1], "seq.problem.json"));

    let seq = read_json(runs[0].join("seq.json"));
    assert_eq!(seq["version"], "1");
    assert_eq!(seq["parents"], serde_json::json!([-1, 0, 1, 2, 3]));
    assert_eq!(seq["frames"].as_array().unwrap().len(), 50);
    assert_eq!(read_json(runs[0].join("seq.problem.json"))["sequence"], "seq.json");

    ok(&runs[0], &["synth", "--seed", "8", "--joints", "chain:5", "--frames", "50", "--out", "other.json"]);
    assert_ne!(read(&runs[0], "seq.json"), read(&runs[0], "other.json"));
}

#[test]
fn synth_rejects_unknown_frame_rate() {
    let dir = TempDir::new().unwrap();
    let out = relfuse(dir.path(), &["synth", "--seed", "1", "--fps", "99", "--out", "x.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("{25, 8, 2.5}"), "{}", stderr(&out));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn noiseless_round_trip_recovers_ground_truth() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--seed",
            "11",
            "--joints",
            "human17",
            "--frames",
            "30",
            "--sigma-single",
            "0",
            "--sigma-bone",
            "0",
            "--sigma-displ",
            "0",
            "--out",
            "gt.json",
        ],
    );
    ok(
        dir.path(),
        &[
            "track",
            "--problem",
            "gt.problem.json",
            "--preset",
            "mfb",
            "--alpha",
            "1",
            "--gamma",
            "1,1,1,1,1,1",
            "--out",
            "tracked.json",
            "--report",
            "report.json",
            "--gt",
            "gt.json",
        ],
    );
    let gt = frames(&read_json(dir.path().join("gt.json")));
    let tracked = frames(&read_json(dir.path().join("tracked.json")));
    assert_eq!(gt.len(), tracked.len());
    let worst = gt.iter().zip(&tracked).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-8, "max deviation {worst}");

    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["preset"], "mfb");
    assert_eq!(report["durations"], serde_json::json!([1, 2, 3, -1, -2, -3]));
    for key in ["objective", "residual_norm", "wall_time_ms", "joint_error_mm"] {
        assert!(report[key].is_number(), "report lacks {key}");
    }
}

#[test]
fn batch_multi_step_beats_forward_only() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_relfuse"))
        .current_dir(dir.path())
        .env("RELFUSE_THREADS", "4")
        .args([
            "track",
            "--seeds",
            "0..99",
            "--preset",
            "f,mfb",
            "--joints",
            "chain:6",
            "--frames",
            "30",
            "--out",
            "batch.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("batch.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "seed,single_frame_error_mm,f_error_mm,f_objective,mfb_error_mm,mfb_objective");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().enumerate().all(|(i, r)| r[0] == i as f64));

    let mean = |col: usize| rows.iter().map(|r| r[col]).sum::<f64>() / rows.len() as f64;
    let (single, f, mfb) = (mean(1), mean(2), mean(4));
    assert!(mfb <= f && f < single, "single {single}, f {f}, mfb {mfb}");
}

#[test]
fn batch_output_is_independent_of_thread_count() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_relfuse"))
            .current_dir(dir.path())
            .env("RELFUSE_THREADS", threads)
            .args(["track", "--seeds", "3..14", "--preset", "fb", "--joints", "star:4", "--frames", "12", "--out", out])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "one.csv"), run("5", "five.csv"));
}

#[test]
fn missing_displacement_block_names_the_duration() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["synth", "--seed", "2", "--joints", "chain:3", "--frames", "10", "--durations", "fb", "--out", "s.json"],
    );
    let out = relfuse(dir.path(), &["track", "--problem", "s.problem.json", "--preset", "mf", "--out", "t.json"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("duration 2"), "{}", stderr(&out));

    ok(
        dir.path(),
        &["track", "--problem", "s.problem.json", "--preset", "custom", "--durations", "-1", "--out", "t.json"],
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(code(&relfuse(p, &["track", "--problem", "absent.json", "--out", "t.json"])), 3);
    fs::write(p.join("garbage.json"), "{ not json").unwrap();
    assert_eq!(code(&relfuse(p, &["track", "--problem", "garbage.json", "--out", "t.json"])), 4);
    assert_eq!(code(&relfuse(p, &["synth", "--joints", "ring:3", "--out", "x.json"])), 2);
    assert_eq!(code(&relfuse(p, &["eval", "--pred", "a.json"])), 2);

    ok(p, &["synth", "--seed", "1", "--joints", "chain:3", "--frames", "5", "--out", "s.json"]);
    let out = relfuse(p, &["track", "--problem", "s.problem.json", "--out", "missing-dir/t.json"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn negative_weights_are_rejected_as_input() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--joints", "chain:3", "--frames", "5", "--out", "s.json"]);
    let out = relfuse(dir.path(), &["track", "--problem", "s.problem.json", "--alpha", "-5", "--out", "t.json"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn eval_identical_sequences_is_all_zero() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--seed", "4", "--joints", "chain:4", "--frames", "8", "--out", "gt.json"]);
    ok(dir.path(), &["eval", "--pred", "gt.json", "--gt", "gt.json", "--csv", "r.csv", "--json", "r.json"]);
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "joint,error_mm");
    let rows: Vec<(&str, f64)> =
        lines.map(|l| l.split_once(',').unwrap()).map(|(a, b)| (a, b.parse().unwrap())).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r.0).collect();
    assert_eq!(labels, ["0", "1", "2", "3", "x", "y", "z", "bone", "mean"]);
    assert!(rows.iter().all(|r| r.1 == 0.0));
    assert_eq!(read_json(dir.path().join("r.json"))["joint_error_mm"], 0.0);
}

#[test]
fn eval_offset_fixture_reports_five() {
    let dir = TempDir::new().unwrap();
    let gt = [[[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]], [[1.0, 2.0, 3.0], [11.0, 2.0, 3.0]]];
    let pred = gt.map(|f| f.map(|j| [j[0] + 3.0, j[1] + 4.0, j[2]]));
    write_sequence(dir.path().join("gt.json"), &gt);
    write_sequence(dir.path().join("pred.json"), &pred);
    ok(
        dir.path(),
        &[
            "eval",
            "--pred",
            "pred.json",
            "--gt",
            "gt.json",
            "--csv",
            "r.csv",
            "--pcf",
            "pcf.csv",
            "--thresholds",
            "0:10:1",
        ],
    );
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().last().unwrap(), "mean,5");
    assert!(csv.lines().any(|l| l == "x,3"));
    assert!(csv.lines().any(|l| l == "y,4"));
    assert!(csv.lines().any(|l| l == "bone,0"));

    let pcf = fs::read_to_string(dir.path().join("pcf.csv")).unwrap();
    let points: Vec<(f64, f64)> = pcf
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap())
        .map(|(a, b)| (a.parse().unwrap(), b.parse().unwrap()))
        .collect();
    assert_eq!(points.len(), 11);
    assert!(points.windows(2).all(|w| w[0].1 <= w[1].1));
    assert_eq!(points[5], (5.0, 0.0));
    assert_eq!(points[6], (6.0, 1.0));
}

#[test]
fn eval_pcf_is_monotone_on_noisy_data() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--seed", "9", "--frames", "20", "--out", "gt.json"]);
    ok(dir.path(), &["track", "--problem", "gt.problem.json", "--preset", "f", "--out", "pred.json"]);
    ok(dir.path(), &["eval", "--pred", "pred.json", "--gt", "gt.json", "--pcf", "pcf.csv"]);
    let pcf = fs::read_to_string(dir.path().join("pcf.csv")).unwrap();
    let fractions: Vec<f64> = pcf.lines().skip(1).map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    assert_eq!(fractions.len(), 17);
    assert!(fractions.windows(2).all(|w| w[0] <= w[1]));
    assert!(fractions[0] < *fractions.last().unwrap());
}

#[test]
fn eval_shape_mismatch_exits_four() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--joints", "chain:3", "--frames", "5", "--out", "a.json"]);
    ok(dir.path(), &["synth", "--seed", "1", "--joints", "chain:3", "--frames", "6", "--out", "b.json"]);
    assert_eq!(code(&relfuse(dir.path(), &["eval", "--pred", "a.json", "--gt", "b.json"])), 4);
}

fn write_maps(dir: &Path, anchor: [f64; 2], values: &[f64]) {
    let doc = serde_json::json!({
        "version": "1",
        "height": 2,
        "width": 3,
        "dims": 2,
        "maps": [
            {"joint": 1, "kind": "spatial", "anchor": anchor, "values": values},
            {"joint": 4, "kind": "temporal", "duration": -2, "anchor": [0.0, 1.0], "values": ([7.5, -1.0].repeat(6))},
        ],
    });
    fs::write(dir.join("maps.json"), doc.to_string()).unwrap();
}

fn decoded_values(dir: &Path, file: &str) -> Vec<Vec<f64>> {
    read_json(dir.join(file))["relations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

#[test]
fn decode_constant_maps_for_every_family() {
    let dir = TempDir::new().unwrap();
    write_maps(dir.path(), [1.3, 0.2], &[2.0, -3.0].repeat(6));
    for family in ["binary", "gaussian", "linear", "exponential", "joint-one", "full"] {
        ok(dir.path(), &["decode", "--maps", "maps.json", "--family", family, "--beta", "0.5", "--out", "d.json"]);
        let values = decoded_values(dir.path(), "d.json");
        for (got, want) in values.iter().zip([[2.0, -3.0], [7.5, -1.0]]) {
            assert!(got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-12 * w.abs()), "{family}: {got:?}");
        }
    }
}

#[test]
fn decode_binary_beta_zero_matches_joint_one_and_full_matches_mean() {
    let dir = TempDir::new().unwrap();
    let values: Vec<f64> = (0..12).map(|i| (i * i) as f64 - 4.0).collect();
    write_maps(dir.path(), [2.0, 1.0], &values);
    ok(dir.path(), &["decode", "--maps", "maps.json", "--family", "binary", "--beta", "0", "--out", "b.json"]);
    ok(dir.path(), &["decode", "--maps", "maps.json", "--family", "joint-one", "--out", "j.json"]);
    assert_eq!(decoded_values(dir.path(), "b.json"), decoded_values(dir.path(), "j.json"));
    assert_eq!(decoded_values(dir.path(), "j.json")[0], vec![values[10], values[11]]);

    ok(dir.path(), &["decode", "--maps", "maps.json", "--family", "full", "--out", "f.json"]);
    let mean = |c: usize| values.iter().skip(c).step_by(2).sum::<f64>() / 6.0;
    let full = &decoded_values(dir.path(), "f.json")[0];
    assert!((full[0] - mean(0)).abs() < 1e-12 && (full[1] - mean(1)).abs() < 1e-12, "{full:?}");
    assert_eq!(read_json(dir.path().join("f.json"))["relations"][0]["total_weight"], 6.0);
}

#[test]
fn decode_ensemble_and_zero_weight() {
    let dir = TempDir::new().unwrap();
    write_maps(dir.path(), [0.4, 0.6], &[1.0, 2.0].repeat(6));
    ok(dir.path(), &["decode", "--maps", "maps.json", "--ensemble", "gaussian:0.1,full", "--out", "e.json"]);
    assert_eq!(read_json(dir.path().join("e.json"))["weights"], serde_json::json!(["gaussian:0.1", "full"]));

    let out =
        relfuse(dir.path(), &["decode", "--maps", "maps.json", "--family", "binary", "--beta", "0", "--out", "z.json"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("[1]"), "{}", stderr(&out));
    assert!(!dir.path().join("z.json").exists());

    assert_eq!(code(&relfuse(dir.path(), &["decode", "--maps", "maps.json", "--out", "n.json"])), 2);
}

#[test]
fn eval_scores_displacements_from_a_problem_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "--seed", "6", "--joints", "chain:3", "--frames", "12", "--sigma-displ", "0", "--out", "gt.json"]);
    ok(
        p,
        &[
            "eval",
            "--pred",
            "gt.json",
            "--gt",
            "gt.json",
            "--problem",
            "gt.problem.json",
            "--duration",
            "-2",
            "--csv",
            "r.csv",
        ],
    );
    let csv = fs::read_to_string(p.join("r.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "displ,0"), "{csv}");

    let out = relfuse(
        p,
        &["eval", "--pred", "gt.json", "--gt", "gt.json", "--problem", "gt.problem.json", "--duration", "7"],
    );
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("duration 7"), "{}", stderr(&out));
}
