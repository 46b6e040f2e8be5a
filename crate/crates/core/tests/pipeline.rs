use std::fs;
use std::path::Path;

use zonosyn::abstraction::DynamicsRegistry;
use zonosyn::partition::CellKind;
use zonosyn::pipeline::{run_baseline, run_pipeline, Outcome, RunOptions, RunReport, Scenario};

fn run_into(dir: &Path, strict: bool) -> RunReport {
    let opts = RunOptions { out_dir: dir.to_path_buf(), strict_safety: strict, alternatives: 0 };
    run_pipeline(Scenario::vehicle2d(), opts, &DynamicsRegistry::default()).unwrap()
}

#[test]
fn vehicle2d_reaches_the_goal_without_contact() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_into(dir.path(), false);
    let v = rep.verdict.as_ref().unwrap();
    assert!(v.satisfied, "{v:?}");
    assert_eq!(v.first_violation, None);
    assert!(v.min_clearance >= 0.0);
    assert_eq!(rep.outcome, Some(Outcome::GoalReached));
    assert!(rep.trajectory_steps.unwrap() <= 200);
    assert_eq!(rep.total_transitions, rep.stages.iter().map(|s| s.transitions).sum::<usize>());
    assert!((5e4..=2e6).contains(&(rep.total_transitions as f64)), "{}", rep.total_transitions);
    assert!(rep
        .stages
        .iter()
        .any(|s| s.kind == CellKind::ConstrainedZonotope && (5e3..=2e5).contains(&(s.transitions as f64))));
    for name in ["partition.json", "partition.svg", "graph.dot", "plan.json", "controller.json", "trajectory.csv", "plot.svg", "report.json"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    for s in 0..rep.stages.len() {
        assert!(dir.path().join(format!("abstractions/stage{s}_pi{}.bin", &rep.stages[s].cell["π_".len()..])).is_file());
    }
}

#[test]
fn trajectory_rows_are_step_multiples_and_end_in_the_goal() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), false);
    let sc = Scenario::vehicle2d();
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,u1,u2,stage"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<f64>().unwrap(), k as f64 * sc.tau);
    }
    let last = rows.last().unwrap();
    assert_eq!((last[3], last[4]), ("", ""));
    let x: Vec<f64> = last[1..3].iter().map(|v| v.parse().unwrap()).collect();
    assert!(sc.goals[0].contains(&x, 1e-9), "final state {x:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path(), false);
    run_into(b.path(), false);
    for name in ["partition.json", "plan.json", "controller.json", "trajectory.csv", "graph.dot"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn strict_mode_keeps_the_inflated_clearance() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_into(dir.path(), true);
    let v = rep.verdict.unwrap();
    assert!(v.satisfied);
    // Clearance is measured against the inflated obstacles.
    assert!(v.min_clearance >= 0.0);
}

#[test]
fn baseline_is_larger_than_the_partitioned_run() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_into(dir.path(), false);
    let base = run_baseline(&Scenario::vehicle2d(), &DynamicsRegistry::default(), false).unwrap();
    assert!(base.transitions > rep.total_transitions, "{} vs {}", base.transitions, rep.total_transitions);
    assert!(base.init_covered);
}
