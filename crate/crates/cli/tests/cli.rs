use std::path::Path;
use std::process::{Command, Output};

fn cellfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellfree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn zero_realizations_is_a_config_error() {
    let o = cellfree(&["run", "--preset", "small-25x7", "--realizations", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_realizations"));
}

#[test]
fn malformed_spec_reports_parse_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, "{\"scenario\": ").unwrap();
    let o = cellfree(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn unknown_preset_and_solver_rejected() {
    assert_eq!(cellfree(&["run", "--preset", "tiny"]).status.code(), Some(1));
    let o = cellfree(&["run", "--preset", "small-25x7", "--solvers", "SCA,XYZ"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dry_run_prints_row_counts() {
    let o = cellfree(&["run", "--preset", "small-36x5", "--realizations", "3", "--solvers", "APG,HEU", "--dry-run"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("ue_se.csv rows: 30"), "{out}");
    assert!(out.contains("summary.csv rows: 6"), "{out}");
}

#[test]
fn run_from_spec_file_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = dir.path().join("spec.json");
    let text = serde_json::json!({
        "preset": "small-25x7",
        "num_realizations": 2,
        "solvers": ["HEU", "APG"],
        "network": { "rng_seed": 4 },
        "output_dir": out,
    });
    std::fs::write(&spec, text.to_string()).unwrap();
    let o = cellfree(&["run", spec.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(line_count(&out.join("ue_se.csv")), 1 + 2 * 2 * 7);
    assert_eq!(line_count(&out.join("summary.csv")), 1 + 2 * 2);
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spec.json")).unwrap()).unwrap();
    assert_eq!(written["network"]["rng_seed"], 4);
    assert_eq!(written["parallelism"], 2);
}

#[test]
fn seed_flag_changes_results_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = cellfree(&[
            "run", "--preset", "small-36x5", "--realizations", "2", "--solvers", "HEU",
            "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read_to_string(out.join("ue_se.csv")).unwrap()
    };
    let a = run("7", "a");
    assert_eq!(a, run("7", "b"));
    assert_ne!(a, run("8", "c"));
}

#[test]
fn validate_passes_on_fresh_checkout() {
    let o = cellfree(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{out}");
}

#[test]
fn bench_prints_time_ratio() {
    let o = cellfree(&["bench", "--preset", "small-36x5", "--realizations", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("APG/SCA time ratio:"), "{out}");
    assert!(out.contains("mean time [s]"), "{out}");
}
