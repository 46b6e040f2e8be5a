//! Closed-loop simulation and specification checking.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::abstraction::SampledSystem;
use crate::geometry::{Point2, Polygon, TOL_FEAS};
use crate::graph::ForbiddenRegions;
use crate::synthesis::{Action, ComposedController};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub x: Point2,
    /// Input held over `[kτ, (k+1)τ)`; `None` on the last sample.
    pub u: Option<Vec<f64>>,
    pub stage: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    /// Unsafe stop: the controller had nothing for this sample.
    RefinementFailure { step: usize },
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tau: f64,
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.tau
    }

    /// `t,x1,x2,u1,u2,stage`; the last row has empty inputs.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x1,x2,u1,u2,stage\n");
        for smp in &self.samples {
            let (u1, u2) = match &smp.u {
                Some(u) => (format!("{:?}", u[0]), format!("{:?}", u[1])),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(s, "{:?},{:?},{:?},{u1},{u2},{}", self.time(smp.step), smp.x[0], smp.x[1], smp.stage);
        }
        s
    }
}

fn in_goal(g: &Polygon, x: Point2) -> bool {
    g.contains(x, TOL_FEAS)
}

/// Runs `cc` from `x0`. Terminates once every goal was visited in order,
/// on a refinement failure, or after `max_steps` steps.
pub fn simulate(sys: &SampledSystem, cc: &ComposedController, goals: &[Polygon], x0: Point2, max_steps: usize) -> Trajectory {
    let mut samples = Vec::new();
    let mut x = x0;
    let mut stage = 0;
    let mut next_goal = 0;
    let mut step = 0;
    let outcome = loop {
        while next_goal < goals.len() && in_goal(&goals[next_goal], x) {
            next_goal += 1;
        }
        if next_goal == goals.len() {
            break Outcome::GoalReached;
        }
        if step == max_steps {
            break Outcome::MaxSteps;
        }
        let action = loop {
            match cc.refine(x, stage) {
                Ok(Action::Advance) => {
                    log::debug!("step {step}: stage {stage} -> {}", stage + 1);
                    stage += 1;
                }
                other => break other,
            }
        };
        let Ok(Action::Input { input, .. }) = action else {
            log::warn!("refinement failure at step {step}, x = {x:?}");
            break Outcome::RefinementFailure { step };
        };
        let u = cc.input_vector(stage, input).to_vec();
        let xn = sys.integrate2(x, &u);
        samples.push(Sample { step, x, u: Some(u), stage });
        x = xn;
        step += 1;
    };
    samples.push(Sample { step, x, u: None, stage });
    Trajectory { tau: sys.tau, samples, outcome }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub satisfied: bool,
    /// First sample inside an obstacle.
    pub first_violation: Option<usize>,
    pub goals_visited: usize,
    /// Smallest obstacle clearance over the samples.
    pub min_clearance: f64,
}

/// Sampled-state check: no sample inside an obstacle (touching counts) and
/// the goals visited in order.
pub fn check_trajectory(traj: &Trajectory, goals: &[Polygon], obstacles: &ForbiddenRegions) -> Verdict {
    let mut first_violation = None;
    let mut min_clearance = f64::INFINITY;
    let mut visited = 0;
    for (i, s) in traj.samples.iter().enumerate() {
        min_clearance = min_clearance.min(obstacles.clearance(s.x));
        if first_violation.is_none() && obstacles.contains(s.x) {
            first_violation = Some(i);
        }
        while visited < goals.len() && in_goal(&goals[visited], s.x) {
            visited += 1;
        }
    }
    Verdict { satisfied: first_violation.is_none() && visited == goals.len(), first_violation, goals_visited: visited, min_clearance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;

    fn traj(points: &[Point2]) -> Trajectory {
        let samples = points.iter().enumerate().map(|(i, &x)| Sample { step: i, x, u: None, stage: 0 }).collect();
        Trajectory { tau: 0.5, samples, outcome: Outcome::MaxSteps }
    }

    fn boxp(lo: Point2, hi: Point2) -> Polygon {
        AxisBox::planar(lo, hi).unwrap().polygon().unwrap()
    }

    #[test]
    fn obstacle_contact_is_reported_with_index() {
        let obs = ForbiddenRegions::new(vec![AxisBox::planar([1.0, -1.0], [2.0, 1.0]).unwrap().to_cz()]).unwrap();
        let goal = boxp([4.0, -1.0], [5.0, 1.0]);
        let v = check_trajectory(&traj(&[[0.0, 0.0], [1.0, 0.0], [4.5, 0.0]]), &[goal.clone()], &obs);
        assert!(!v.satisfied);
        assert_eq!(v.first_violation, Some(1));
        let ok = check_trajectory(&traj(&[[0.0, 0.0], [0.0, 2.0], [4.5, 0.0]]), &[goal], &obs);
        assert!(ok.satisfied);
        assert!(ok.min_clearance > 0.0);
    }

    #[test]
    fn goals_out_of_order_fail() {
        let g1 = boxp([0.0, 0.0], [1.0, 1.0]);
        let g2 = boxp([3.0, 0.0], [4.0, 1.0]);
        let t = traj(&[[3.5, 0.5], [0.5, 0.5]]);
        let v = check_trajectory(&t, &[g1.clone(), g2.clone()], &ForbiddenRegions::none());
        assert!(!v.satisfied);
        assert_eq!(v.goals_visited, 1);
        let t = traj(&[[0.5, 0.5], [3.5, 0.5]]);
        assert!(check_trajectory(&t, &[g1, g2], &ForbiddenRegions::none()).satisfied);
    }

    #[test]
    fn csv_times_are_step_multiples() {
        let t = traj(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let csv = t.to_csv();
        let times: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(times, vec!["0.0", "0.5", "1.0"]);
    }
}
