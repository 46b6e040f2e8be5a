use std::path::Path;
use std::process::{Command, Output};

use zonosyn::pipeline::{ObstacleSpec, Scenario};

fn zonosyn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonosyn"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn partition_writes_the_cell_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = zonosyn(&["partition"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("partition: 4 zonotopes"));
    assert!(dir.path().join("partition.json").is_file());
    assert!(dir.path().join("partition.svg").is_file());
}

#[test]
fn verify_prints_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = zonosyn(&["verify", "--alternatives", "2"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("plan: π_")));
    assert!(dir.path().join("graph.dot").is_file());
}

#[test]
fn simulate_from_a_chosen_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = zonosyn(&["simulate", "--x0", "-12.5,-7.0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("satisfied: true"));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0.0,-12.5,-7.0,"));
}

#[test]
fn run_and_baseline_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert!(zonosyn(&["run"], dir.path()).status.success());
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["verification"], "satisfiable");
    assert_eq!(rep["verdict"]["satisfied"], true);
    assert!(zonosyn(&["baseline"], dir.path()).status.success());
    let base: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("baseline.json")).unwrap()).unwrap();
    assert!(base["transitions"].as_u64().unwrap() > rep["total_transitions"].as_u64().unwrap());
}

#[test]
fn sealed_goal_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = Scenario::vehicle2d();
    let g = sc.goals[0].clone();
    let (lo, hi) = ([g.lower()[0] - 1.0, g.lower()[1] - 1.0], [g.upper()[0] + 0.5, g.upper()[1] + 0.5]);
    let wall = |a: [f64; 2], b: [f64; 2]| ObstacleSpec::Box { lower: a.to_vec(), upper: b.to_vec() };
    sc.obstacles.extend([
        wall([lo[0] - 0.5, lo[1] - 0.5], [hi[0] + 0.5, lo[1]]),
        wall([lo[0] - 0.5, hi[1]], [hi[0] + 0.5, hi[1] + 0.5]),
        wall([lo[0] - 0.5, lo[1] - 0.5], [lo[0], hi[1] + 0.5]),
        wall([hi[0], lo[1] - 0.5], [hi[0] + 0.5, hi[1] + 0.5]),
    ]);
    let cfg = dir.path().join("sealed.toml");
    std::fs::write(&cfg, sc.to_toml()).unwrap();
    let o = zonosyn(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("abstractions").exists());
    let o = zonosyn(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "version = 1\nname = \"x\"\n").unwrap();
    let o = zonosyn(&["partition", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: config"));
}
