//! Reach-avoid fixpoints on finite abstractions and their sequential
//! composition along a plan.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{Abstraction, TransitionTable};
use crate::geometry::{Point2, Polygon, TOL_FEAS};
use crate::graph::{ForbiddenRegions, PathPlan, Waypoint};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("stage {stage} (cell π_{cell}): {} initial states not winning", uncovered.len())]
    InitNotCovered { stage: usize, cell: usize, uncovered: Vec<u32> },
    #[error("seam after stage {stage} (cell π_{cell}): no target state hands off to the next stage")]
    EmptySeam { stage: usize, cell: usize },
    #[error("composition: {0}")]
    Composition(String),
    #[error("refinement failed at stage {stage}: no winning state related to {x:?}")]
    Refinement { stage: usize, x: Point2 },
}

/// Anything with indexed states, inputs and successor sets.
pub trait TransitionSystem: Sync {
    fn num_states(&self) -> usize;
    fn num_inputs(&self) -> usize;
    /// Ascending successor list; empty when `v` is not enabled at `q`.
    fn successors(&self, q: usize, v: usize) -> &[u32];
}

impl TransitionSystem for Abstraction {
    fn num_states(&self) -> usize {
        Abstraction::num_states(self)
    }
    fn num_inputs(&self) -> usize {
        Abstraction::num_inputs(self)
    }
    fn successors(&self, q: usize, v: usize) -> &[u32] {
        Abstraction::successors(self, q, v)
    }
}

/// A transition system given by explicit successor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitSystem {
    pub num_states: usize,
    pub num_inputs: usize,
    /// Row `q * num_inputs + v`.
    pub rows: Vec<Vec<u32>>,
}

impl ExplicitSystem {
    pub fn new(num_states: usize, num_inputs: usize, mut rows: Vec<Vec<u32>>) -> Self {
        assert_eq!(rows.len(), num_states * num_inputs, "one row per state-input pair");
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        Self { num_states, num_inputs, rows }
    }
}

impl From<TransitionTable> for ExplicitSystem {
    fn from(t: TransitionTable) -> Self {
        Self::new(t.num_states, t.num_inputs, t.rows)
    }
}

impl TransitionSystem for ExplicitSystem {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn num_inputs(&self) -> usize {
        self.num_inputs
    }
    fn successors(&self, q: usize, v: usize) -> &[u32] {
        &self.rows[q * self.num_inputs + v]
    }
}

/// Init, target and avoid sets of one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalTask {
    pub cell: usize,
    pub init: Vec<u32>,
    pub target: Vec<u32>,
    pub avoid: Vec<u32>,
}

/// One-step controllable predecessor: states outside `avoid` with an
/// enabled input whose every successor lies in `w`.
pub fn controllable_predecessor<T: TransitionSystem + ?Sized>(sys: &T, w: &[bool], avoid: &[bool]) -> Vec<bool> {
    (0..sys.num_states())
        .map(|q| {
            !avoid[q]
                && (0..sys.num_inputs()).any(|v| {
                    let s = sys.successors(q, v);
                    !s.is_empty() && s.iter().all(|&x| w[x as usize])
                })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerEntry {
    pub state: u32,
    /// `None` on target states.
    pub input: Option<u32>,
    pub steps_to_go: u32,
}

/// State-feedback map on the winning set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractController {
    /// Indexed by state; `None` outside the winning set.
    entries: Vec<Option<(Option<u32>, u32)>>,
}

impl AbstractController {
    pub fn get(&self, q: usize) -> Option<(Option<u32>, u32)> {
        self.entries.get(q).copied().flatten()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.get(q).is_some()
    }

    pub fn winning(&self) -> Vec<bool> {
        self.entries.iter().map(Option::is_some).collect()
    }

    pub fn winning_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn table(&self) -> Vec<ControllerEntry> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(q, e)| e.map(|(input, steps_to_go)| ControllerEntry { state: q as u32, input, steps_to_go }))
            .collect()
    }
}

fn mask(n: usize, set: &[u32]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &q in set {
        m[q as usize] = true;
    }
    m
}

/// Maximal winning set of the reach-avoid game, level by level. Each state
/// added at level `k + 1` takes the lowest input whose successors all
/// entered by level `k`.
pub fn winning_controller<T: TransitionSystem + ?Sized>(sys: &T, target: &[u32], avoid: &[bool]) -> AbstractController {
    let (n, m) = (sys.num_states(), sys.num_inputs());
    let mut remaining: Vec<u32> = Vec::with_capacity(n * m);
    let mut pred_count = vec![0u32; n + 1];
    for q in 0..n {
        for v in 0..m {
            let s = sys.successors(q, v);
            remaining.push(s.len() as u32);
            for &x in s {
                pred_count[x as usize + 1] += 1;
            }
        }
    }
    let mut pred_off = vec![0usize; n + 1];
    for i in 0..n {
        pred_off[i + 1] = pred_off[i] + pred_count[i + 1] as usize;
    }
    let mut fill = pred_off.clone();
    let mut preds = vec![0u32; pred_off[n]];
    for q in 0..n {
        for v in 0..m {
            for &x in sys.successors(q, v) {
                preds[fill[x as usize]] = (q * m + v) as u32;
                fill[x as usize] += 1;
            }
        }
    }
    let mut entries: Vec<Option<(Option<u32>, u32)>> = vec![None; n];
    let mut frontier: Vec<usize> = Vec::new();
    for &t in target {
        let t = t as usize;
        if !avoid[t] && entries[t].is_none() {
            entries[t] = Some((None, 0));
            frontier.push(t);
        }
    }
    frontier.sort_unstable();
    let mut level = 0u32;
    while !frontier.is_empty() {
        let mut ready: BTreeSet<usize> = BTreeSet::new();
        for &s in &frontier {
            for &row in &preds[pred_off[s]..pred_off[s + 1]] {
                let row = row as usize;
                remaining[row] -= 1;
                if remaining[row] == 0 {
                    let q = row / m;
                    if entries[q].is_none() && !avoid[q] {
                        ready.insert(q);
                    }
                }
            }
        }
        level += 1;
        for &q in &ready {
            let v = (0..m)
                .find(|&v| remaining[q * m + v] == 0 && !sys.successors(q, v).is_empty())
                .expect("ready state has a completed input");
            entries[q] = Some((Some(v as u32), level));
        }
        frontier = ready.into_iter().collect();
    }
    AbstractController { entries }
}

/// Fixpoint synthesis that must cover the task's initial states.
pub fn solve_reach_avoid<T: TransitionSystem + ?Sized>(sys: &T, task: &LocalTask) -> Result<AbstractController, SynthesisError> {
    let avoid = mask(sys.num_states(), &task.avoid);
    let ctrl = winning_controller(sys, &task.target, &avoid);
    let uncovered: Vec<u32> = task.init.iter().copied().filter(|&q| !ctrl.contains(q as usize)).collect();
    if !uncovered.is_empty() {
        return Err(SynthesisError::InitNotCovered { stage: 0, cell: task.cell, uncovered });
    }
    Ok(ctrl)
}

/// One plan stage with its abstraction and local controller.
#[derive(Clone, Debug)]
pub struct Stage {
    /// 0-based cell index.
    pub cell: usize,
    pub abstraction: Arc<Abstraction>,
    pub controller: AbstractController,
    pub task: LocalTask,
    pub entry: Waypoint,
    pub exit: Waypoint,
    pub synthesis_seconds: f64,
}

/// `C_a`: stages in plan order.
#[derive(Clone, Debug)]
pub struct ComposedController {
    pub stages: Vec<Stage>,
    pub obstacles: ForbiddenRegions,
}

/// What the refined controller does at a concrete state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Action {
    /// Hand control to the next stage.
    Advance,
    /// Apply this input (index into the stage's input grid) via this state.
    Input { input: u32, state: u32 },
}

impl ComposedController {
    /// Stage `s` may pass control at `x`: `x` is in the exit waypoint, and
    /// the next stage relates `x` to one of its winning states.
    pub fn can_advance(&self, s: usize, x: Point2) -> bool {
        let Some(next) = self.stages.get(s + 1) else { return false };
        if !self.stages[s].exit.region.contains_free(x, &self.obstacles) {
            return false;
        }
        next.abstraction.quantizer().quantize(x).iter().any(|&q| next.controller.contains(q as usize))
    }

    /// `C(x) = C_a(ℱ(x))` with the selection rule: fewest steps to go, then
    /// nearest in G-norm, then lowest index.
    pub fn refine(&self, x: Point2, s: usize) -> Result<Action, SynthesisError> {
        if self.can_advance(s, x) {
            return Ok(Action::Advance);
        }
        let st = &self.stages[s];
        let abs = &st.abstraction;
        let mut best: Option<((u32, f64, u32), u32)> = None;
        for q in abs.quantizer().quantize(x) {
            let Some((Some(input), steps)) = st.controller.get(q as usize) else { continue };
            let p = abs.point(q as usize);
            let d = abs.gnorm.eval2([x[0] - p[0], x[1] - p[1]]);
            let key = (steps, d, q);
            if best.map_or(true, |(b, _)| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                best = Some((key, input));
            }
        }
        match best {
            Some(((_, _, q), input)) => Ok(Action::Input { input, state: q }),
            None => Err(SynthesisError::Refinement { stage: s, x }),
        }
    }

    pub fn input_vector(&self, s: usize, input: u32) -> &[f64] {
        &self.stages[s].abstraction.inputs.inputs[input as usize]
    }
}

/// States whose quantizer ball touches an obstacle or leaves the state box.
pub fn unsafe_states(abs: &Abstraction, obstacles: &ForbiddenRegions, state_box: &Polygon) -> Vec<bool> {
    (0..abs.num_states())
        .map(|q| {
            let ball = abs.ball(abs.point(q), abs.quantizer_radius);
            obstacles.intersects(&ball) || !state_box.contains_polygon(&ball, TOL_FEAS)
        })
        .collect()
}

/// The ball around `center` (in `ball`) is covered by the quantizer balls of
/// winning states of `next`.
fn covered_by_next(ball: &Polygon, center: Point2, next: &Abstraction, winning: &[bool]) -> bool {
    let reach = ball
        .vertices()
        .iter()
        .map(|v| next.gnorm.eval2([v[0] - center[0], v[1] - center[1]]))
        .fold(0.0, f64::max);
    let mut cand = Vec::new();
    next.lattice.within(&next.gnorm, center, reach + next.quantizer_radius, &mut cand);
    let mut pieces = vec![ball.clone()];
    for q in cand {
        if !winning[q as usize] {
            continue;
        }
        let cover = next.ball(next.point(q as usize), next.quantizer_radius);
        pieces = pieces.into_iter().flat_map(|p| p.difference(&cover, 1e-10)).collect();
        if pieces.is_empty() {
            return true;
        }
    }
    pieces.is_empty()
}

/// Backward sequential synthesis over the plan: the last stage targets the
/// goal, every earlier stage targets states whose quantizer ball sits in
/// the exit waypoint and is covered by the next stage's winning states.
pub fn synthesize_plan(
    plan: &PathPlan,
    abstractions: &[Arc<Abstraction>],
    obstacles: &ForbiddenRegions,
    state_box: &Polygon,
) -> Result<ComposedController, SynthesisError> {
    if abstractions.len() != plan.stages() {
        return Err(SynthesisError::Composition("one abstraction per plan stage required".into()));
    }
    let mut stages: Vec<Stage> = Vec::with_capacity(plan.stages());
    for s in (0..plan.stages()).rev() {
        let start = Instant::now();
        let abs = &abstractions[s];
        let cell = plan.cells[s];
        let bad = unsafe_states(abs, obstacles, state_box);
        let exit = &plan.waypoints[s + 1];
        let next = stages.last();
        let next_winning = next.map(|n| n.controller.winning());
        let target: Vec<u32> = (0..abs.num_states() as u32)
            .filter(|&q| {
                let q = q as usize;
                if bad[q] {
                    return false;
                }
                let ball = abs.ball(abs.point(q), abs.quantizer_radius);
                if !exit.region.polygon.contains_polygon(&ball, TOL_FEAS) {
                    return false;
                }
                match (next, &next_winning) {
                    (Some(n), Some(w)) => covered_by_next(&ball, abs.point(q), &n.abstraction, w),
                    _ => true,
                }
            })
            .collect();
        if target.is_empty() {
            return Err(SynthesisError::EmptySeam { stage: s, cell: cell + 1 });
        }
        let entry = &plan.waypoints[s];
        // The first stage must handle every concrete initial state, so it
        // takes all states related to the initial region.
        let init: Vec<u32> = (0..abs.num_states() as u32)
            .filter(|&q| {
                let (q, p) = (q as usize, abs.point(q as usize));
                !bad[q]
                    && if s == 0 {
                        entry.region.polygon.intersects(&abs.ball(p, abs.quantizer_radius), TOL_FEAS)
                    } else {
                        entry.region.polygon.contains(p, TOL_FEAS)
                    }
            })
            .collect();
        let avoid: Vec<u32> = (0..abs.num_states() as u32).filter(|&q| bad[q as usize]).collect();
        let task = LocalTask { cell, init, target, avoid };
        let controller = winning_controller(abs.as_ref(), &task.target, &bad);
        log::info!(
            "stage {s} (π_{}): {} targets, {} winning of {} states",
            cell + 1,
            task.target.len(),
            controller.winning_count(),
            abs.num_states()
        );
        let uncovered: Vec<u32> = task.init.iter().copied().filter(|&q| !controller.contains(q as usize)).collect();
        if !uncovered.is_empty() {
            if s == 0 {
                return Err(SynthesisError::InitNotCovered { stage: s, cell: cell + 1, uncovered });
            }
            log::info!("stage {s}: {} of {} entry states not winning", uncovered.len(), task.init.len());
        }
        if s > 0 && task.init.iter().all(|&q| !controller.contains(q as usize)) {
            return Err(SynthesisError::InitNotCovered { stage: s, cell: cell + 1, uncovered });
        }
        stages.push(Stage {
            cell,
            abstraction: Arc::clone(abs),
            controller,
            task,
            entry: entry.clone(),
            exit: exit.clone(),
            synthesis_seconds: start.elapsed().as_secs_f64(),
        });
    }
    stages.reverse();
    Ok(ComposedController { stages, obstacles: obstacles.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ExplicitSystem {
        // q0 -> q1 -> q2, single input.
        ExplicitSystem::new(3, 1, vec![vec![1], vec![2], vec![]])
    }

    #[test]
    fn predecessor_of_chain_end() {
        let sys = chain();
        let pre = controllable_predecessor(&sys, &[false, false, true], &[false; 3]);
        assert_eq!(pre, vec![false, true, false]);
        let all = controllable_predecessor(&sys, &[true; 3], &[false; 3]);
        assert_eq!(all, vec![true, true, false]);
    }

    #[test]
    fn nondeterminism_is_adversarial() {
        let sys = ExplicitSystem::new(3, 1, vec![vec![1, 2], vec![], vec![]]);
        let pre = controllable_predecessor(&sys, &[false, true, false], &[false; 3]);
        assert!(!pre[0]);
    }

    #[test]
    fn chain_steps_to_go() {
        let task = LocalTask { cell: 0, init: vec![0], target: vec![2], avoid: vec![] };
        let c = solve_reach_avoid(&chain(), &task).unwrap();
        let steps: Vec<u32> = (0..3).map(|q| c.get(q).unwrap().1).collect();
        assert_eq!(steps, vec![2, 1, 0]);
        assert_eq!(c.get(2).unwrap().0, None);
    }

    #[test]
    fn surrounded_init_fails() {
        // q0 can only move to q1, which is avoided.
        let sys = ExplicitSystem::new(3, 1, vec![vec![1], vec![2], vec![]]);
        let task = LocalTask { cell: 0, init: vec![0], target: vec![2], avoid: vec![1] };
        assert!(matches!(solve_reach_avoid(&sys, &task), Err(SynthesisError::InitNotCovered { .. })));
    }

    #[test]
    fn lowest_input_wins_ties() {
        let sys = ExplicitSystem::new(2, 3, vec![vec![], vec![1], vec![1], vec![], vec![], vec![]]);
        let c = winning_controller(&sys, &[1], &[false; 2]);
        assert_eq!(c.get(0), Some((Some(1), 1)));
    }
}
