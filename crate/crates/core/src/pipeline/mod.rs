//! End-to-end orchestration: partition, verify, abstract, synthesize,
//! simulate. Every phase writes its artifacts into the output directory
//! once it is done.

pub mod baseline;
pub mod scenario;
pub mod sim;
pub mod svg;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{run_baseline, BaselineReport};
pub use scenario::{DynamicsSpec, ObstacleSpec, Scenario};
pub use sim::{check_trajectory, simulate, Outcome, Sample, Trajectory, Verdict};

use crate::abstraction::{
    approx_input_set, approx_state_set, basic_generators, build_abstraction, Abstraction, AbstractionError,
    AbstractionParams, DynamicsRegistry, SampledSystem,
};
use crate::geometry::{GeometryError, Polygon};
use crate::graph::{
    build_adjacency, compile_spec, extend_graph, find_paths, to_dot, validate_accepting, ForbiddenRegions, GraphError,
    PathPlan, TaskGraph,
};
use crate::partition::{partition, CellKind, Partition, PartitionError};
use crate::synthesis::{synthesize_plan, ComposedController, SynthesisError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("verify: {0}")]
    Verify(#[from] GraphError),
    #[error("abstract: {0}")]
    Abstract(#[from] AbstractionError),
    #[error("synthesize: {0}")]
    Synthesize(#[from] SynthesisError),
    #[error("simulate: refinement failed at step {step}, x = {x:?}")]
    Refinement { step: usize, x: [f64; 2] },
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("baseline: {0}")]
    Baseline(String),
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Verify(GraphError::Unsatisfiable(_) | GraphError::UnreachableInit) => 2,
            PipelineError::Synthesize(_) => 3,
            PipelineError::Refinement { .. } => 4,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub strict_safety: bool,
    /// Alternative plans to list next to the chosen one.
    pub alternatives: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub partition: f64,
    pub verify: f64,
    #[serde(rename = "abstract")]
    pub abstraction: f64,
    pub synthesize: f64,
    pub simulate: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub cell: String,
    pub kind: CellKind,
    pub spacing: f64,
    pub states: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub winning: usize,
    pub t_abs: f64,
    pub t_con: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub strict_safety: bool,
    pub zonotope_cells: usize,
    pub constrained_cells: usize,
    pub adjacency_edges: usize,
    /// `satisfiable` or `unsatisfiable`.
    pub verification: String,
    pub plan: Vec<String>,
    pub alternatives: Vec<Vec<String>>,
    pub stages: Vec<StageReport>,
    pub total_transitions: usize,
    pub trajectory_steps: Option<usize>,
    pub outcome: Option<Outcome>,
    pub verdict: Option<Verdict>,
    pub timings: Timings,
    pub config: Scenario,
}

/// All artifacts of a verification phase.
pub struct Verification {
    pub graph: TaskGraph,
    /// Chosen plan first, then alternatives.
    pub plans: Vec<PathPlan>,
}

/// Runs phases of one scenario against one output directory.
pub struct Pipeline {
    pub scenario: Scenario,
    pub options: RunOptions,
    pub system: SampledSystem,
    /// Obstacles used by every phase; inflated in strict mode.
    pub obstacles: ForbiddenRegions,
    pub timings: Timings,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

impl Pipeline {
    pub fn new(scenario: Scenario, options: RunOptions, registry: &DynamicsRegistry) -> Result<Self, PipelineError> {
        scenario.validate()?;
        let system = scenario.sampled_system(registry)?;
        let obstacles = if options.strict_safety { scenario.strict_obstacles()? } else { scenario.obstacles()? };
        fs::create_dir_all(&options.out_dir).map_err(io_err(&options.out_dir))?;
        Ok(Self { scenario, options, system, obstacles, timings: Timings::default() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.options.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&p, contents).map_err(io_err(&p))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
        s.push('\n');
        self.write(name, s)
    }

    /// Writes `partition.json` and `partition.svg`.
    pub fn partition(&mut self) -> Result<Partition, PipelineError> {
        let start = Instant::now();
        let p = partition(&self.scenario.state_box, &self.scenario.partition_config())?;
        self.timings.partition = start.elapsed().as_secs_f64();
        self.write_json("partition.json", &p)?;
        self.write("partition.svg", svg::partition_svg(&p, &self.obstacles))?;
        Ok(p)
    }

    /// Writes `graph.dot` and, when satisfiable, `plan.json`.
    pub fn verify(&mut self, p: &Partition) -> Result<Verification, PipelineError> {
        let start = Instant::now();
        let r = connection_resolution(self.scenario.epsilon);
        let spec = self.scenario.spec(self.obstacles.clone());
        let accepting = match self.scenario.accepting()? {
            Some(a) => {
                validate_accepting(&a, spec.goals.len())?;
                a
            }
            None => compile_spec(&spec)?,
        };
        let adj = build_adjacency(&p.cells, &self.obstacles, r);
        let graph = extend_graph(adj, &p.cells, &self.scenario.init_box.to_cz(), &spec, r)?;
        let found = find_paths(&graph, &accepting, &p.cells, &self.obstacles, r, self.options.alternatives);
        self.timings.verify = start.elapsed().as_secs_f64();
        let plans = match found {
            Ok(plans) => plans,
            Err(e) => {
                self.write("graph.dot", to_dot(&graph, None))?;
                return Err(e.into());
            }
        };
        self.write("graph.dot", to_dot(&graph, plans.first()))?;
        self.write_json("plan.json", &plans)?;
        log::info!("plan: {}", plan_labels(&plans[0]).join(" -> "));
        Ok(Verification { graph, plans })
    }

    /// One abstraction per plan stage; dumps go to `abstractions/`.
    pub fn abstraction(&mut self, p: &Partition, plan: &PathPlan) -> Result<Vec<Arc<Abstraction>>, PipelineError> {
        let start = Instant::now();
        let inputs = approx_input_set(&self.scenario.input_box, self.scenario.input_spacing)?;
        let params = AbstractionParams { radius_scale: self.scenario.abstraction.radius_scale };
        let mut out: Vec<Arc<Abstraction>> = Vec::with_capacity(plan.stages());
        for (s, &c) in plan.cells.iter().enumerate() {
            let spacing = self.scenario.spacing(s);
            let reuse = (0..s).find(|&t| plan.cells[t] == c && self.scenario.spacing(t) == spacing);
            let abs = match reuse {
                Some(t) => Arc::clone(&out[t]),
                None => {
                    let cell = &p.cells[c];
                    let basic = basic_generators(cell.gnorm_generators(), spacing, self.scenario.epsilon)?;
                    let lattice = approx_state_set(cell, &basic)?;
                    let abs = build_abstraction(&self.system, cell, lattice, inputs.clone(), params)?;
                    log::info!(
                        "abstraction {}: {} states, {} transitions, {:.3}s",
                        cell.label(),
                        abs.num_states(),
                        abs.transition_count(),
                        abs.build_seconds
                    );
                    Arc::new(abs)
                }
            };
            let name = format!("abstractions/stage{s}_pi{}.bin", c + 1);
            let path = self.path(&name);
            fs::create_dir_all(path.parent().expect("has parent")).map_err(io_err(&path))?;
            let f = fs::File::create(&path).map_err(io_err(&path))?;
            abs.write_transitions(BufWriter::new(f))?;
            out.push(abs);
        }
        self.timings.abstraction = start.elapsed().as_secs_f64();
        Ok(out)
    }

    /// Writes `controller.json`.
    pub fn synthesize(&mut self, plan: &PathPlan, abstractions: &[Arc<Abstraction>]) -> Result<ComposedController, PipelineError> {
        let start = Instant::now();
        let x = self.scenario.state_box.polygon()?;
        let cc = synthesize_plan(plan, abstractions, &self.obstacles, &x)?;
        self.timings.synthesize = start.elapsed().as_secs_f64();
        self.write("controller.json", controller_json(&cc))?;
        Ok(cc)
    }

    /// Writes `trajectory.csv` and `plot.svg`.
    pub fn simulate(&mut self, p: &Partition, plan: &PathPlan, cc: &ComposedController, x0: [f64; 2]) -> Result<(Trajectory, Verdict), PipelineError> {
        let start = Instant::now();
        let goals = self.goal_polygons()?;
        let traj = simulate(&self.system, cc, &goals, x0, self.scenario.max_steps);
        let verdict = check_trajectory(&traj, &goals, &self.obstacles);
        self.timings.simulate = start.elapsed().as_secs_f64();
        self.write("trajectory.csv", traj.to_csv())?;
        self.write("plot.svg", svg::plot_svg(&self.scenario, p, Some(plan), &self.obstacles, Some(&traj))?)?;
        Ok((traj, verdict))
    }

    pub fn goal_polygons(&self) -> Result<Vec<Polygon>, PipelineError> {
        Ok(self.scenario.goals.iter().map(|g| g.polygon()).collect::<Result<Vec<_>, _>>()?)
    }

    fn report(&self, p: &Partition, graph: Option<&TaskGraph>, plans: &[PathPlan]) -> RunReport {
        RunReport {
            scenario: self.scenario.name.clone(),
            seed: self.scenario.seed,
            strict_safety: self.options.strict_safety,
            zonotope_cells: p.zonotope_count(),
            constrained_cells: p.residual_count(),
            adjacency_edges: graph.map_or(0, |g| g.adjacency.edge_count()),
            verification: if plans.is_empty() { "unsatisfiable" } else { "satisfiable" }.into(),
            plan: plans.first().map(plan_labels).unwrap_or_default(),
            alternatives: plans.iter().skip(1).map(plan_labels).collect(),
            stages: Vec::new(),
            total_transitions: 0,
            trajectory_steps: None,
            outcome: None,
            verdict: None,
            timings: self.timings.clone(),
            config: self.scenario.clone(),
        }
    }

    /// All phases. `report.json` is written even when a phase fails after
    /// the partition.
    pub fn run(&mut self) -> Result<RunReport, PipelineError> {
        let start = Instant::now();
        let p = self.partition()?;
        let ver = match self.verify(&p) {
            Ok(v) => v,
            Err(e) => {
                let mut rep = self.report(&p, None, &[]);
                rep.timings.total = start.elapsed().as_secs_f64();
                self.write_json("report.json", &rep)?;
                return Err(e);
            }
        };
        let plan = ver.plans[0].clone();
        let abs = self.abstraction(&p, &plan)?;
        let mut rep = self.report(&p, Some(&ver.graph), &ver.plans);
        let synth = self.synthesize(&plan, &abs);
        rep.stages = plan
            .cells
            .iter()
            .enumerate()
            .map(|(s, &c)| StageReport {
                stage: s,
                cell: format!("π_{}", c + 1),
                kind: p.cells[c].kind(),
                spacing: self.scenario.spacing(s),
                states: abs[s].num_states(),
                inputs: abs[s].num_inputs(),
                transitions: abs[s].transition_count(),
                winning: synth.as_ref().map_or(0, |cc| cc.stages[s].controller.winning_count()),
                t_abs: abs[s].build_seconds,
                t_con: synth.as_ref().map_or(0.0, |cc| cc.stages[s].synthesis_seconds),
            })
            .collect();
        rep.total_transitions = rep.stages.iter().map(|s| s.transitions).sum();
        let cc = match synth {
            Ok(cc) => cc,
            Err(e) => {
                rep.timings = self.timings.clone();
                rep.timings.total = start.elapsed().as_secs_f64();
                self.write_json("report.json", &rep)?;
                return Err(e);
            }
        };
        let (traj, verdict) = self.simulate(&p, &plan, &cc, self.scenario.initial_state)?;
        rep.trajectory_steps = Some(traj.steps());
        rep.outcome = Some(traj.outcome);
        rep.verdict = Some(verdict);
        rep.timings = self.timings.clone();
        rep.timings.total = start.elapsed().as_secs_f64();
        self.write_json("report.json", &rep)?;
        if let Outcome::RefinementFailure { step } = traj.outcome {
            return Err(PipelineError::Refinement { step, x: traj.samples.last().expect("nonempty").x });
        }
        Ok(rep)
    }
}

/// Raster resolution of the connectivity checks.
pub fn connection_resolution(epsilon: f64) -> f64 {
    epsilon / 5.0
}

pub fn plan_labels(plan: &PathPlan) -> Vec<String> {
    plan.symbols().iter().map(|k| format!("π_{k}")).collect()
}

#[derive(Serialize)]
struct StageTable {
    stage: usize,
    cell: String,
    states: usize,
    inputs: usize,
    quantizer_radius: f64,
    /// `[state, input, steps_to_go]`; input is -1 on target states.
    entries: Vec<[i64; 3]>,
}

/// Per-stage controller tables, one entry per line.
pub fn controller_json(cc: &ComposedController) -> String {
    let mut s = String::from("{\"stages\": [\n");
    for (i, st) in cc.stages.iter().enumerate() {
        let table = StageTable {
            stage: i,
            cell: format!("π_{}", st.cell + 1),
            states: st.abstraction.num_states(),
            inputs: st.abstraction.num_inputs(),
            quantizer_radius: st.abstraction.quantizer_radius,
            entries: st
                .controller
                .table()
                .iter()
                .map(|e| [e.state as i64, e.input.map_or(-1, |v| v as i64), e.steps_to_go as i64])
                .collect(),
        };
        s.push_str(&serde_json::to_string(&table).expect("table serializes"));
        s.push_str(if i + 1 < cc.stages.len() { ",\n" } else { "\n" });
    }
    s.push_str("]}\n");
    s
}

/// Full pipeline into `options.out_dir`.
pub fn run_pipeline(scenario: Scenario, options: RunOptions, registry: &DynamicsRegistry) -> Result<RunReport, PipelineError> {
    Pipeline::new(scenario, options, registry)?.run()
}
