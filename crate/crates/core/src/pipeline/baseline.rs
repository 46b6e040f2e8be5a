//! Uniform-grid baseline: one abstraction over all of `X`, one global
//! synthesis.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Scenario};
use crate::abstraction::{approx_input_set, approx_state_set, basic_generators, build_abstraction, AbstractionParams, DynamicsRegistry};
use crate::geometry::TOL_FEAS;
use crate::partition::{Cell, CellKind};
use crate::synthesis::{unsafe_states, winning_controller};

/// Largest grid the baseline will build.
pub const MAX_STATES: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub spacing: f64,
    pub states: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub winning: usize,
    /// Every safe initial lattice point is winning.
    pub init_covered: bool,
    pub t_abs: f64,
    pub t_con: f64,
}

pub fn run_baseline(sc: &Scenario, registry: &DynamicsRegistry, strict_safety: bool) -> Result<BaselineReport, PipelineError> {
    sc.validate()?;
    let sys = sc.sampled_system(registry)?;
    let obstacles = if strict_safety { sc.strict_obstacles()? } else { sc.obstacles()? };
    let spacing = sc.min_spacing();
    let cell = Cell::new(1, CellKind::ConstrainedZonotope, sc.state_box.to_cz(), 0.0)?;
    let basic = basic_generators(cell.gnorm_generators(), spacing, sc.epsilon)?;
    let estimate: usize = basic.iter().map(|b| 2 * b.count + 1).product();
    if estimate > MAX_STATES {
        return Err(PipelineError::Baseline(format!("grid of about {estimate} states exceeds {MAX_STATES}")));
    }
    let start = Instant::now();
    let lattice = approx_state_set(&cell, &basic)?;
    let inputs = approx_input_set(&sc.input_box, sc.input_spacing)?;
    let abs = build_abstraction(&sys, &cell, lattice, inputs, AbstractionParams { radius_scale: sc.abstraction.radius_scale })?;
    let t_abs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let x = sc.state_box.polygon()?;
    let bad = unsafe_states(&abs, &obstacles, &x);
    let mut winning = vec![true; abs.num_states()];
    let mut ctrl = None;
    for g in sc.goals.iter().rev() {
        let gp = g.polygon()?;
        let target: Vec<u32> = (0..abs.num_states() as u32)
            .filter(|&q| {
                let q = q as usize;
                winning[q] && !bad[q] && gp.contains_polygon(&abs.ball(abs.point(q), abs.quantizer_radius), TOL_FEAS)
            })
            .collect();
        let c = winning_controller(&abs, &target, &bad);
        winning = c.winning();
        ctrl = Some(c);
    }
    let t_con = start.elapsed().as_secs_f64();
    let init = sc.init_box.polygon()?;
    let init_covered = (0..abs.num_states()).filter(|&q| !bad[q] && init.contains(abs.point(q), TOL_FEAS)).all(|q| winning[q]);
    Ok(BaselineReport {
        spacing,
        states: abs.num_states(),
        inputs: abs.num_inputs(),
        transitions: abs.transition_count(),
        winning: ctrl.map_or(0, |c| c.winning_count()),
        init_covered,
        t_abs,
        t_con,
    })
}
