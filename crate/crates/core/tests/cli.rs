use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn channel(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("channels").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_postcap")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_sample_channels() {
    for entry in std::fs::read_dir(channel("")).unwrap() {
        let path = entry.unwrap().path();
        let o = run(&["validate", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
        assert!(stdout(&o).starts_with("ok:"));
    }
}

#[test]
fn malformed_inputs_exit_2_and_name_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"input_size": 2, "output_size": 2, "kernels": [[[1, 0], [0, 1]], [[0.5, 0.3], [0.48, 0.7]]]}"#,
    );
    let o = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("column x=0 of kernel for state y'=1"), "{}", stderr(&o));

    let neg = write(
        dir.path(),
        "neg.json",
        r#"{"input_size": 2, "output_size": 2, "kernels": [[[1.1, 0], [-0.1, 1]], [[1, 0], [0, 1]]]}"#,
    );
    assert_eq!(run(&["fcap", neg.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["validate", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["fcap"]).status.code(), Some(2));
}

#[test]
fn fcap_reports_capacity_and_warns_when_disconnected() {
    let o = run(&["fcap", channel("bsc_0.1.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("C_f = 0.368064"), "{}", stdout(&o));

    let bits = run(&["--bits", "fcap", channel("bsc_0.1.json").to_str().unwrap()]);
    assert!(stdout(&bits).contains("C_f = 0.531004"), "{}", stdout(&bits));

    let o = run(&["fcap", channel("disconnected.json").to_str().unwrap()]);
    assert!(stdout(&o).contains("connectedness fails") || stderr(&o).contains("connectedness fails"));
}

#[test]
fn simulate_exit_codes() {
    let o = run(&["simulate", channel("near_pair.json").to_str().unwrap(), "--n", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("VALID for n = 1..4"));

    let o = run(&["simulate", channel("state_dependent.json").to_str().unwrap(), "--n", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("INVALID at (y0, x^n) = (1, [1, 1])"), "{}", stdout(&o));

    let o = run(&["simulate", channel("example1_eps0.05.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("|X| = 2 < |Y| = 3"));
}

#[test]
fn simulate_restricts_a_wide_channel_and_emits_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let wide = write(
        dir.path(),
        "wide.json",
        r#"{"input_size": 3, "output_size": 2, "kernels": [
            [[0.9, 0.2, 0.5], [0.1, 0.8, 0.5]],
            [[0.89, 0.21, 0.5], [0.11, 0.79, 0.5]]]}"#,
    );
    let o = run(&["simulate", wide.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--restrict-s"));

    let plan = dir.path().join("plan.json");
    let o = run(&[
        "simulate",
        wide.to_str().unwrap(),
        "--n",
        "3",
        "--restrict-s",
        "0,1",
        "--emit-plan",
        plan.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["input_symbols"], serde_json::json!([0, 1]));
    assert_eq!(v["vectors"][0].as_array().unwrap().len(), 8);
}

#[test]
fn diagnose_rejects_example_1() {
    let o = run(&["diagnose", channel("example1_eps0.05.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert_eq!(text.matches("infeasible (separator margin").count(), 3);
    assert!(text.contains("realizable without feedback at n = 2: no"));
}

#[test]
fn report_file_carries_exit_code_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = run(&[
        "--report",
        report.to_str().unwrap(),
        "analyze-w",
        channel("near_pair.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["command"], "analyze-w");
    assert_eq!(v["exit_code"], 0);
    assert_eq!(v["units"], "nats");
    assert_eq!(v["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("s{i}.csv"))).collect();
    let jobs = [None, None, Some("1")];
    for (p, j) in paths.iter().zip(jobs) {
        let mut args = vec![];
        if let Some(j) = j {
            args.extend(["--jobs", j]);
        }
        args.extend(["sweep", "--example", "2", "--eps", "0:0.02:0.005", "--out", p.to_str().unwrap()]);
        assert_eq!(run(&args).status.code(), Some(0));
    }
    let first = std::fs::read(&paths[0]).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 6);
    for p in &paths[1..] {
        assert_eq!(std::fs::read(p).unwrap(), first);
    }
}

#[test]
fn sweep_with_step_beyond_range_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let o = run(&["sweep", "--example", "1", "--eps", "0:0.01:0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "eps,c_f_nats,D,feasible_all,rank,min_plan_entry");
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
}

#[test]
fn sweep_rejects_bad_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for eps in ["0:0.1", "0:0.1:0", "a:b:c", "0.2:0.1:0.01"] {
        let o = run(&["sweep", "--example", "1", "--eps", eps, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "grid {eps}");
    }
    let o = run(&["sweep", "--example", "9", "--eps", "0:0.1:0.05", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fcap_exits_4_when_the_iteration_budget_runs_out() {
    let path = channel("example1_eps0.05.json");
    let o = run(&["fcap", path.to_str().unwrap(), "--max-iter", "1", "--tol", "1e-15"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("converged = false"));
}
