use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn polyvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyvi")).args(args).env_remove("POLYVI_SEED").output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", &format!("{name}.json")].iter().collect();
    p.to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_all_finds_both_complementarity_solutions() {
    let out = polyvi(&["solve", &fixture("ncp4"), "--all", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["outcome"], "solutions");
    assert_eq!(r["complete"], true);
    let sols = r["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    for s in sols {
        assert!(s["epsilon"].as_f64().unwrap().abs() <= 1e-6);
    }
    assert!(!r["log"].as_array().unwrap().is_empty());
}

#[test]
fn text_report_goes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("report.txt");
    let out = polyvi(&["solve", &fixture("ncp4"), "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dest).unwrap();
    assert!(text.starts_with("outcome     solutions"), "{text}");
}

#[test]
fn seed_falls_back_to_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_polyvi"))
        .args(["solve", &fixture("ncp4"), "--json"])
        .env("POLYVI_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["seed"], 17);
}

#[test]
fn exhausted_loop_budget_is_inconclusive() {
    let out = polyvi(&["solve", &fixture("ncp4"), "--max-loops", "0", "--json"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(json(&out)["outcome"], "inconclusive");
}

#[test]
fn garbage_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "garbage.json", "{\n  \"n\": 2,\n  \"F\": [\"x1\", ]\n}\n");
    let out = polyvi(&["solve", &f]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("line 3"), "{err}");

    let out = polyvi(&["solve", &dir.path().join("missing.json").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_polynomial_names_its_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"n": 2, "F": ["x1", "x3 + 1"], "constraints": [], "lme": {"kind": "orthant"}}"#;
    let out = polyvi(&["bound", &write(dir.path(), "bad.json", body)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("F[1]"), "{}", stderr(&out));
}

#[test]
fn verify_accepts_solution_and_rejects_origin() {
    let f = fixture("ncp4");
    let out = polyvi(&["verify", &f, "--point", "1.0,0,3,0", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["accepted"], true);
    assert!(r["epsilon"].as_f64().unwrap().abs() <= 1e-6);

    let out = polyvi(&["verify", &f, "--point", "0,0,0,0", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["accepted"], false);
    assert!(r["epsilon"].as_f64().unwrap() < -1e-6);

    let text = polyvi(&["verify", &f, "--point", "1,0,3,0"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("verdict     accepted"));
}

#[test]
fn malformed_points_exit_one() {
    let f = fixture("ncp4");
    for pt in ["1,0,3", "1,0,3,0,0", "1,zero,3,0", "1,0,inf,0"] {
        let out = polyvi(&["verify", &f, "--point", pt]);
        assert_eq!(out.status.code(), Some(1), "{pt}");
    }
}

#[test]
fn bound_for_plane_quadric() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
  "n": 2,
  "F": ["x1 + 2*x2 - 1", "3*x1 - x2"],
  "constraints": [{"poly": "1 - x1^2 - x2^2", "kind": "ineq"}],
  "lme": {"kind": "ball"}
}"#;
    let out = polyvi(&["bound", &write(dir.path(), "disc.json", body), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    // active branch: b1·S_1(1, 2) = 2·(1 + 2)
    let rows = r["rows"].as_array().unwrap();
    let active = rows.iter().find(|row| row["size"] == 1).unwrap();
    assert_eq!(active["bound"], "6");
    // inactive branch: S_2(1) = 1
    let inactive = rows.iter().find(|row| row["size"] == 0).unwrap();
    assert_eq!(inactive["bound"], "1");
    assert_eq!(r["total"], "7");
}

#[test]
fn gen_random_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = polyvi(&["gen-random", "ball", "4", "2", "--seed", "3"]);
    let b = polyvi(&["gen-random", "ball", "4", "2", "--seed", "3"]);
    let c = polyvi(&["gen-random", "ball", "4", "2", "--seed", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let f = write(dir.path(), "ball.json", &String::from_utf8(a.stdout).unwrap());
    assert_eq!(polyvi(&["bound", &f]).status.code(), Some(0));

    let dest = dir.path().join("cap.json");
    let out = polyvi(&["gen-random", "capital", "4", "2", "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dest).unwrap()).unwrap();
    assert_eq!(r["n"], 6);
    assert_eq!(r["lme"]["kind"], "orthant");

    assert_eq!(polyvi(&["gen-random", "ball", "4"]).status.code(), Some(1));
}

#[test]
fn empty_batch() {
    let out = polyvi(&["batch", "ball", "4", "2", "--count", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.contains("(4,2)"));

    let out = polyvi(&["batch", "ball", "4", "2", "--count", "0", "--json"]);
    let r = json(&out);
    assert_eq!(r["count"], 0);
    assert!(r["failures"].as_array().unwrap().is_empty());
}

#[test]
fn fixture_files_match_built_in_fixtures() {
    use polyvi_cli::problem_file::ProblemFile;
    for name in polyvi::fixtures::NAMES {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let from_file = ProblemFile::parse(&text).unwrap().to_problem().unwrap();
        let built = polyvi::fixtures::load(name).unwrap();
        assert_eq!(from_file.f, built.f, "{name}");
        assert_eq!(from_file.cs.g, built.cs.g, "{name}");
        assert_eq!(from_file.cs.kinds, built.cs.kinds, "{name}");
    }
}
