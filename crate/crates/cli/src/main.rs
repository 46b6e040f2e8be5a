use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zonosyn::abstraction::DynamicsRegistry;
use zonosyn::pipeline::{run_baseline, Outcome, Pipeline, PipelineError, RunOptions, Scenario};

#[derive(Parser, Debug)]
#[command(name = "zonosyn", version, about = "Partition-based symbolic controller synthesis")]
struct Cli {
    /// Scenario file; the bundled vehicle2d scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Inflate obstacles by the worst inter-sample excursion.
    #[arg(long, global = true)]
    strict_safety: bool,
    /// Number of alternative plans to list.
    #[arg(long, global = true, default_value_t = 0)]
    alternatives: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the cell cover.
    Partition,
    /// Check the specification on the cell graph.
    Verify,
    /// Build per-stage abstractions along the plan.
    Abstract,
    /// Synthesize the composed controller.
    Synthesize,
    /// Simulate the closed loop from a chosen state.
    Simulate {
        /// Initial state `x1,x2`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// All phases plus `report.json`.
    Run,
    /// Uniform grid over the whole state box.
    Baseline,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, PipelineError> {
    let mut sc = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::vehicle2d(),
    };
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    if let Command::Simulate { x0: Some(v), .. } = &cli.command {
        if v.len() != 2 {
            return Err(PipelineError::Config("--x0 takes two values `x1,x2`".into()));
        }
    }
    let registry = DynamicsRegistry::default();
    if let Command::Baseline = cli.command {
        let rep = run_baseline(&sc, &registry, cli.strict_safety)?;
        std::fs::create_dir_all(&cli.out_dir).map_err(|source| PipelineError::Io { path: cli.out_dir.clone(), source })?;
        let path = cli.out_dir.join("baseline.json");
        let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
        std::fs::write(&path, text).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        println!(
            "baseline: {} states, {} inputs, {} transitions, t_abs {:.3}s, t_con {:.3}s, init covered: {}",
            rep.states, rep.inputs, rep.transitions, rep.t_abs, rep.t_con, rep.init_covered
        );
        return Ok(0);
    }
    let opts = RunOptions { out_dir: cli.out_dir.clone(), strict_safety: cli.strict_safety, alternatives: cli.alternatives };
    if let Command::Simulate { max_steps: Some(m), .. } = &cli.command {
        sc.max_steps = *m;
    }
    let mut pl = Pipeline::new(sc, opts, &registry)?;
    if let Command::Run = cli.command {
        let rep = pl.run()?;
        println!("plan: {}", rep.plan.join(" -> "));
        for alt in &rep.alternatives {
            println!("alternative: {}", alt.join(" -> "));
        }
        for s in &rep.stages {
            println!(
                "stage {} {}: {} states, {} transitions, {} winning, t_abs {:.3}s, t_con {:.3}s",
                s.stage, s.cell, s.states, s.transitions, s.winning, s.t_abs, s.t_con
            );
        }
        println!("total transitions: {}", rep.total_transitions);
        let v = rep.verdict.expect("run simulates");
        println!("trajectory: {} steps, satisfied: {}", rep.trajectory_steps.unwrap_or(0), v.satisfied);
        return Ok(if v.satisfied { 0 } else { 1 });
    }
    let p = pl.partition()?;
    println!("partition: {} zonotopes, {} constrained zonotopes", p.zonotope_count(), p.residual_count());
    if let Command::Partition = cli.command {
        return Ok(0);
    }
    let ver = pl.verify(&p)?;
    println!("plan: {}", zonosyn::pipeline::plan_labels(&ver.plans[0]).join(" -> "));
    for alt in &ver.plans[1..] {
        println!("alternative: {}", zonosyn::pipeline::plan_labels(alt).join(" -> "));
    }
    if let Command::Verify = cli.command {
        return Ok(0);
    }
    let plan = ver.plans[0].clone();
    let abs = pl.abstraction(&p, &plan)?;
    let total: usize = abs.iter().map(|a| a.transition_count()).sum();
    println!("abstractions: {} stages, {total} transitions", abs.len());
    if let Command::Abstract = cli.command {
        return Ok(0);
    }
    let cc = pl.synthesize(&plan, &abs)?;
    for (i, st) in cc.stages.iter().enumerate() {
        println!("stage {i} π_{}: {} winning of {}", st.cell + 1, st.controller.winning_count(), st.abstraction.num_states());
    }
    if let Command::Synthesize = cli.command {
        return Ok(0);
    }
    let x0 = match &cli.command {
        Command::Simulate { x0: Some(v), .. } => [v[0], v[1]],
        _ => pl.scenario.initial_state,
    };
    let (traj, verdict) = pl.simulate(&p, &plan, &cc, x0)?;
    println!("trajectory: {} steps, outcome {:?}, satisfied: {}", traj.steps(), traj.outcome, verdict.satisfied);
    if let Outcome::RefinementFailure { step } = traj.outcome {
        return Err(PipelineError::Refinement { step, x: traj.samples.last().expect("nonempty").x });
    }
    Ok(if verdict.satisfied { 0 } else { 1 })
}
