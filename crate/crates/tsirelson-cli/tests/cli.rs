//! End-to-end tests for the `tsirelson` binary: golden stdout, report files,
//! the exit-code contract, and byte-level determinism across reruns and
//! thread counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsirelson"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

const DERIVE_X3_TABLE: &str = "\
scenario: A=2 X=3
forbidden patterns: 111, 222
polytope dimension: 3
affine hull: full-dimensional
facets: 8 (2 tsirelson, 6 trivial)
  [trivial] p(1|3) <= 1
  [trivial] p(1|3) >= 0
  [trivial] p(1|2) <= 1
  [trivial] p(1|2) >= 0
  [trivial] p(1|1) <= 1
  [trivial] p(1|1) >= 0
  [tsirelson] p(1|1) + p(1|2) + p(1|3) <= 2
  [tsirelson] p(1|1) + p(1|2) + p(1|3) >= 1
";

#[test]
fn derive_prints_the_full_facet_table() {
    let out = run(&["derive", "--A", "2", "--X", "3", "--forbid", "111,222"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), DERIVE_X3_TABLE);
}

#[test]
fn derive_writes_a_machine_readable_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("facets.json");
    let out = run(&[
        "derive",
        "--A",
        "2",
        "--X",
        "3",
        "--forbid",
        "111,222",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).ends_with(&format!("wrote facet report to {}\n", path.display())));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["dimension"], 3);
    assert_eq!(report["equalities"].as_array().unwrap().len(), 0);
    let facets = report["facets"].as_array().unwrap();
    assert_eq!(facets.len(), 8);
    let tsirelson = facets
        .iter()
        .filter(|f| f["class"] == "tsirelson")
        .count();
    assert_eq!(tsirelson, 2);
    for f in facets {
        assert_eq!(f["coeffs"].as_array().unwrap().len(), 3);
        assert!(f["sense"] == "<=" || f["sense"] == ">=");
    }
}

#[test]
fn derive_reads_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, r#"{"A":2,"X":3,"forbidden":[[1,1,1],[2,2,2]]}"#).unwrap();
    let out = run(&["derive", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), DERIVE_X3_TABLE);
}

#[test]
fn derive_rejects_broken_scenario_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, r#"{"A":2,"X":}"#).unwrap();
    let out = run(&["derive", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn derive_rejects_forbidden_patterns_outside_the_scenario() {
    let out = run(&["derive", "--A", "2", "--X", "3", "--forbid", "131"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn oversized_scenarios_exit_with_the_cap_code() {
    let out = run(&["derive", "--A", "2", "--X", "9"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("cap"), "stderr: {}", stderr(&out));

    // (A-1)*X = 9 > 8 even though X is small.
    let out = run(&["derive", "--A", "4", "--X", "3"]);
    assert_eq!(code(&out), 3);

    let out = run(&["oscillator", "--X", "9", "--Nmax", "2"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oscillator_prints_a_sweep_table() {
    let out = run(&["oscillator", "--X", "3", "--Nmax", "2"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("oscillator scenario: X=3 mode=full"));
    assert_eq!(lines.next(), Some("N     type       bound                value violated"));
    assert_eq!(lines.next(), Some("1     type_t     upper     1.500000000 false"));
    assert_eq!(lines.next(), Some("2     type_t     upper     1.500000000 false"));
    assert_eq!(lines.next(), Some("1     type_t     lower     1.500000000 false"));
    assert_eq!(lines.next(), Some("2     type_t     lower     1.500000000 false"));
    assert_eq!(lines.next(), None);
}

#[test]
fn oscillator_writes_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "oscillator",
        "--X",
        "5",
        "--Nmax",
        "6",
        "--ineq",
        "type_t",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("wrote 12 rows"));
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,type,bound_side,value,violated"));
    assert_eq!(lines.next(), Some("1,type_t,upper,2.500000000,false"));
    assert!(csv.lines().any(|l| l == "6,type_t,upper,3.046274215,true"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn oscillator_rejects_even_probe_counts() {
    let out = run(&["oscillator", "--X", "4", "--Nmax", "3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("odd"), "stderr: {}", stderr(&out));
}

#[test]
fn oscillator_rejects_unknown_family_names() {
    let out = run(&["oscillator", "--X", "5", "--Nmax", "3", "--ineq", "bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oscillator_errors_when_the_family_filter_matches_nothing() {
    // X=3 has only the type-T family, so asking for type_1 selects no rows.
    let out = run(&["oscillator", "--X", "3", "--Nmax", "2", "--ineq", "type_1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn simulate_round_robin_cheating_is_deterministic() {
    let out = run(&[
        "shellgame-simulate",
        "--strategy",
        "cheat_remove",
        "--chooser",
        "round_robin",
        "--rounds",
        "6",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "round,x,outcome\n1,1,empty\n2,2,empty\n3,3,empty\n4,1,empty\n5,2,empty\n6,3,empty\n"
    );
}

#[test]
fn simulate_mixed_requires_a_cheat_probability() {
    let out = run(&[
        "shellgame-simulate",
        "--strategy",
        "mixed",
        "--rounds",
        "5",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 2);
}

fn write_trials(dir: &Path, name: &str, strategy: &str, seed: &str) -> String {
    let path = dir.join(name);
    let out = run(&[
        "shellgame-simulate",
        "--strategy",
        strategy,
        "--chooser",
        "round_robin",
        "--rounds",
        "300",
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), format!("wrote 300 trials to {}\n", path.display()));
    path.to_str().unwrap().to_owned()
}

#[test]
fn analyze_flags_a_ball_free_table() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_trials(dir.path(), "cheat.csv", "cheat_remove", "7");
    let out = run(&["shellgame-analyze", "--in", &log, "--seed", "7"]);
    assert_eq!(code(&out), 10);

    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["verdict"], "cheating_detected");
    assert_eq!(report["statistic"], 3.0);
    assert_eq!(report["threshold"], 2.0);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["epsilon"][0], 0.16887543448731968);
    assert_eq!(report["counts"][2]["trials"], 100);
    assert_eq!(report["counts"][2]["found"], 0);
    assert!(report["certificate"]
        .as_str()
        .unwrap()
        .contains("verdict: cheating_detected"));
    assert_eq!(report["inequality"]["coeffs"], serde_json::json!([1, 1, 1]));
}

#[test]
fn analyze_passes_an_honest_dealer() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_trials(dir.path(), "honest.csv", "honest_uniform", "11");
    let out = run(&["shellgame-analyze", "--in", &log]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["verdict"], "consistent");
    // No seed was given, so the report must not carry one.
    assert!(report.get("seed").is_none());
}

#[test]
fn analyze_writes_a_report_file_and_prints_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_trials(dir.path(), "cheat.csv", "cheat_remove", "7");
    let path = dir.path().join("report.json");
    let out = run(&["shellgame-analyze", "--in", &log, "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 10);
    let text = stdout(&out);
    assert!(text.contains("S = 3.000000; S - sum(epsilon) = 2.493374 vs classical bound 2"));
    assert!(text.ends_with(&format!("wrote report to {}\n", path.display())));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["verdict"], "cheating_detected");
}

#[test]
fn analyze_reports_the_line_of_a_malformed_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "round,x,outcome\n1,1,empty\nBADLINE\n").unwrap();
    let out = run(&["shellgame-analyze", "--in", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "stderr: {}", stderr(&out));

    fs::write(&path, "round,x,outcome\n1,4,empty\n").unwrap();
    let out = run(&["shellgame-analyze", "--in", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();

    for pass in 0..2 {
        let facets = dir.path().join(format!("facets{pass}.json"));
        let sweep = dir.path().join(format!("sweep{pass}.csv"));
        let trials = dir.path().join(format!("trials{pass}.csv"));
        let report = dir.path().join(format!("report{pass}.json"));

        let d = run(&[
            "derive", "--oscillator", "5", "--out", facets.to_str().unwrap(),
        ]);
        assert_eq!(code(&d), 0);
        let o = run(&[
            "oscillator", "--X", "5", "--Nmax", "5", "--out", sweep.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        let s = run(&[
            "shellgame-simulate", "--strategy", "mixed", "--cheat-prob", "0.5",
            "--balls", "2", "--rounds", "200", "--seed", "42",
            "--out", trials.to_str().unwrap(),
        ]);
        assert_eq!(code(&s), 0);
        let a = run(&[
            "shellgame-analyze", "--in", trials.to_str().unwrap(),
            "--seed", "42", "--out", report.to_str().unwrap(),
        ]);
        assert!(code(&a) == 0 || code(&a) == 10);

        let mut blob = Vec::new();
        for p in [&facets, &sweep, &trials, &report] {
            blob.extend(fs::read(p).unwrap());
        }
        let mut text = Vec::new();
        for out in [&d, &o, &s, &a] {
            // Paths differ between passes; strip lines that embed them.
            for line in stdout(out).lines() {
                if !line.contains(dir.path().to_str().unwrap()) {
                    text.extend(line.as_bytes());
                    text.push(b'\n');
                }
            }
        }
        artifacts.push((blob, text));
    }

    assert_eq!(artifacts[0].0, artifacts[1].0, "report files differ between runs");
    assert_eq!(
        String::from_utf8_lossy(&artifacts[0].1),
        String::from_utf8_lossy(&artifacts[1].1),
        "stdout differs between runs"
    );
}

#[test]
fn thread_count_does_not_change_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let path = dir.path().join(format!("sweep{threads}.csv"));
        let out = bin()
            .args(["oscillator", "--X", "5", "--Nmax", "5", "--out", path.to_str().unwrap()])
            .env("TSIRELSON_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        files.push(fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}
