//! Acceptance suite: one line per criterion, nonzero exit when any fails.
//!
//! Run with `cargo test -p zonosyn-cli --test acceptance`.

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use zonosyn::abstraction::{
    approx_input_set, approx_state_set, basic_generators, build_abstraction, check_frr, AbstractionParams, DynamicsRegistry,
};
use zonosyn::geometry::{zonotope_polygon, AxisBox, ConstrainedZonotope, Point2, Polygon, TOL_FEAS};
use zonosyn::partition::partition;
use zonosyn::pipeline::{ObstacleSpec, Pipeline, RunOptions, Scenario};
use zonosyn::synthesis::{winning_controller, ExplicitSystem};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zonosyn(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_zonosyn")).args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).expect("file exists")).expect("valid json")
}

fn c1_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = zonosyn(&["run"], dir.path());
    let secs = start.elapsed().as_secs_f64();
    let rep = read_json(&dir.path().join("report.json"));
    let v = &rep["verdict"];
    let steps = rep["trajectory_steps"].as_u64().unwrap_or(u64::MAX);
    let ok = o.status.success()
        && v["satisfied"] == true
        && v["first_violation"].is_null()
        && rep["outcome"]["kind"] == "goal_reached"
        && steps <= 200
        && secs < 60.0;
    check(ok, format!("goal reached in {steps} steps, clearance {:.3}, {secs:.1}s", v["min_clearance"].as_f64().unwrap_or(f64::NAN)))
}

fn c2_transition_counts() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    zonosyn(&["run"], dir.path());
    let rep = read_json(&dir.path().join("report.json"));
    let total = rep["total_transitions"].as_u64().unwrap_or(0) as f64;
    let stages = rep["stages"].as_array().cloned().unwrap_or_default();
    let cz: Vec<(String, u64)> = stages
        .iter()
        .filter(|s| s["kind"] == "constrained_zonotope")
        .map(|s| (s["cell"].as_str().unwrap_or("?").to_string(), s["transitions"].as_u64().unwrap_or(0)))
        .collect();
    let hit = cz.iter().find(|(_, t)| (5e3..=2e5).contains(&(*t as f64)));
    check(
        (5e4..=2e6).contains(&total) && hit.is_some(),
        format!("total {total}, constrained cells {cz:?}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c3_baseline() -> Outcome {
    let (mut part_t, mut base_t) = (Vec::new(), Vec::new());
    let (mut part_n, mut base_n) = (0, 0);
    for _ in 0..3 {
        let dir = tempfile::tempdir().unwrap();
        zonosyn(&["run"], dir.path());
        zonosyn(&["baseline"], dir.path());
        let rep = read_json(&dir.path().join("report.json"));
        let base = read_json(&dir.path().join("baseline.json"));
        part_n = rep["total_transitions"].as_u64().unwrap_or(u64::MAX);
        base_n = base["transitions"].as_u64().unwrap_or(0);
        part_t.push(rep["stages"].as_array().map_or(f64::NAN, |s| s.iter().filter_map(|s| s["t_abs"].as_f64()).sum()));
        base_t.push(base["t_abs"].as_f64().unwrap_or(0.0));
    }
    let (pt, bt) = (median(part_t), median(base_t));
    let ratio = bt / pt;
    check(
        base_n > part_n && ratio > 1.5,
        format!("baseline {base_n} vs partitioned {part_n} transitions, t_abs {bt:.3}s vs {pt:.3}s (ratio {ratio:.2})"),
    )
}

fn all_cell_abstractions(radius_scale: f64) -> Vec<(String, usize, usize, usize, usize)> {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::vehicle2d();
    let opts = RunOptions { out_dir: dir.path().to_path_buf(), strict_safety: false, alternatives: 0 };
    let mut pl = Pipeline::new(sc.clone(), opts, &DynamicsRegistry::default()).unwrap();
    let p = pl.partition().unwrap();
    let plan = pl.verify(&p).unwrap().plans.remove(0);
    let inputs = approx_input_set(&sc.input_box, sc.input_spacing).unwrap();
    p.cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let spacing = plan.cells.iter().position(|&c| c == i).map_or(sc.abstraction.default_spacing, |s| sc.spacing(s));
            let basic = basic_generators(cell.gnorm_generators(), spacing, sc.epsilon).unwrap();
            let lat = approx_state_set(cell, &basic).unwrap();
            let abs = build_abstraction(&pl.system, cell, lat, inputs.clone(), AbstractionParams { radius_scale }).unwrap();
            let r = check_frr(&pl.system, &abs, 10_000, i as u64);
            (cell.label(), r.checked, r.applicability_violations, r.inclusion_violations, abs.transition_count())
        })
        .collect()
}

fn c4_feedback_refinement() -> Outcome {
    let sound = all_cell_abstractions(1.0);
    let bad: usize = sound.iter().map(|r| r.2 + r.3).sum();
    let checked: usize = sound.iter().map(|r| r.1).sum();
    let mutated: usize = all_cell_abstractions(0.5).iter().map(|r| r.3).sum();
    // Sliver cells can end up with no enabled pair at all; the relation then
    // holds vacuously and there is nothing to sample.
    let vacuous: Vec<&str> = sound.iter().filter(|r| r.4 == 0).map(|r| r.0.as_str()).collect();
    check(
        bad == 0 && mutated > 0 && sound.iter().all(|r| r.4 == 0 || r.1 > 0),
        format!(
            "{} cells, {checked} checks, {bad} violations; halved radius: {mutated} violations; no enabled pairs in {vacuous:?}",
            sound.len()
        ),
    )
}

fn kleene(sys: &ExplicitSystem, target: &[bool], avoid: &[bool]) -> Vec<bool> {
    let n = sys.num_states;
    let mut w: Vec<bool> = (0..n).map(|q| target[q] && !avoid[q]).collect();
    loop {
        let mut changed = false;
        for q in 0..n {
            if w[q] || avoid[q] {
                continue;
            }
            let wins = (0..sys.num_inputs).any(|v| {
                let s = &sys.rows[q * sys.num_inputs + v];
                !s.is_empty() && s.iter().all(|&x| w[x as usize])
            });
            if wins {
                w[q] = true;
                changed = true;
            }
        }
        if !changed {
            return w;
        }
    }
}

fn c5_fixpoint() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut winners = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=50);
        let m = rng.gen_range(1..=5);
        let rows = (0..n * m)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    return Vec::new();
                }
                let k = rng.gen_range(1..=3);
                (0..k).map(|_| rng.gen_range(0..n as u32)).collect()
            })
            .collect();
        let sys = ExplicitSystem::new(n, m, rows);
        let target: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let avoid: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let tlist: Vec<u32> = (0..n as u32).filter(|&q| target[q as usize]).collect();
        let got = winning_controller(&sys, &tlist, &avoid).winning();
        let want = kleene(&sys, &target, &avoid);
        winners += want.iter().filter(|&&b| b).count();
        if got != want {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("100 instances, {mismatches} mismatches, {winners} winning states in total"))
}

fn random_cz(rng: &mut ChaCha8Rng, ng: usize) -> (ConstrainedZonotope, Vec<f64>) {
    let c = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
    let g = DMatrix::from_fn(2, ng, |_, _| rng.gen_range(-1.0..1.0));
    let a: Vec<f64> = (0..ng).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let xi0: Vec<f64> = (0..ng).map(|_| rng.gen_range(-0.25..0.25)).collect();
    let b: f64 = a.iter().zip(&xi0).map(|(p, q)| p * q).sum();
    let cz = ConstrainedZonotope::new(c, g, DMatrix::from_row_slice(1, ng, &a), DVector::from_element(1, b)).unwrap();
    (cz, a)
}

/// Feasible-ξ grid samples and a Hausdorff bound for their hull.
fn xi_samples(cz: &ConstrainedZonotope, a: &[f64], per_axis: usize) -> (Vec<Point2>, f64) {
    let ng = a.len();
    let b = cz.constraint_offset()[0];
    let j = (0..ng).max_by(|&p, &q| a[p].abs().total_cmp(&a[q].abs())).unwrap();
    let free: Vec<usize> = (0..ng).filter(|&k| k != j).collect();
    let h = 2.0 / (per_axis - 1) as f64;
    let g = cz.generators();
    let gsum: f64 = (0..ng).map(|k| g.column(k).norm()).sum();
    let bound = (2.0 * (ng as f64 - 1.0) * h / 1.5 + h) * gsum;
    let mut out = Vec::new();
    let total = per_axis.pow(free.len() as u32);
    for flat in 0..total {
        let mut xi = vec![0.0; ng];
        let mut rest = flat;
        for &k in &free {
            xi[k] = -1.0 + (rest % per_axis) as f64 * h;
            rest /= per_axis;
        }
        let s: f64 = free.iter().map(|&k| a[k] * xi[k]).sum();
        xi[j] = (b - s) / a[j];
        if xi[j].abs() <= 1.0 {
            let p = cz.center() + g * DVector::from_column_slice(&xi);
            out.push([p[0], p[1]]);
        }
    }
    (out, bound)
}

fn corner_hull(c: &DVector<f64>, g: &DMatrix<f64>) -> Polygon {
    let k = g.ncols();
    let pts: Vec<Point2> = (0..1u32 << k)
        .map(|mask| {
            let mut p = [c[0], c[1]];
            for j in 0..k {
                let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                p[0] += s * g[(0, j)];
                p[1] += s * g[(1, j)];
            }
            p
        })
        .collect();
    Polygon::hull(&pts, 1e-12).unwrap()
}

fn c6_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tol = 10.0 * TOL_FEAS;
    let mut errors = Vec::new();
    let mut decided = 0;
    for i in 0..1000 {
        let ng = rng.gen_range(2..=4);
        let (cz, a) = random_cz(&mut rng, ng);
        let (pts, delta) = xi_samples(&cz, &a, 31);
        if pts.iter().step_by(53).any(|p| cz.residual(p).unwrap() > tol) {
            errors.push(format!("cz {i}: sampled point rejected"));
        }
        let Some(inner) = Polygon::hull(&pts, 1e-12) else { continue };
        let (lo, hi) = inner.bounding_box();
        for _ in 0..10 {
            let x = [rng.gen_range(lo[0] - 1.0..hi[0] + 1.0), rng.gen_range(lo[1] - 1.0..hi[1] + 1.0)];
            let d = inner.signed_distance(x);
            let inside = cz.contains(&x).unwrap();
            if (d < -1e-9 && !inside) || (d > delta && inside) {
                errors.push(format!("cz {i}: {x:?}"));
            }
            decided += usize::from(d < -1e-9 || d > delta);
        }
    }
    let mut vertex_errors = 0;
    for _ in 0..500 {
        let k = rng.gen_range(1..=6);
        let c = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
        let g = DMatrix::from_fn(2, k, |_, _| rng.gen_range(-1.0..1.0));
        let truth = corner_hull(&c, &g);
        let lp = ConstrainedZonotope::zonotope(c.clone(), g.clone()).unwrap().vertices_2d().unwrap();
        let near = |p: &Point2, s: &[Point2]| s.iter().any(|q| (p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6);
        let same = lp.len() == truth.len() && lp.iter().all(|p| near(p, truth.vertices())) && truth.vertices().iter().all(|p| near(p, &lp));
        let closed = zonotope_polygon(&c, &g);
        if !same || !closed.vertices().iter().all(|p| near(p, truth.vertices())) {
            vertex_errors += 1;
        }
    }
    let mut identity_errors = 0;
    for _ in 0..200 {
        let (na, nb) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let (a, _) = random_cz(&mut rng, na);
        let (b, _) = random_cz(&mut rng, nb);
        let ab = a.intersect(&b).unwrap();
        let eps = rng.gen_range(0.0..1.0);
        let k = rng.gen_range(1..=5);
        let c = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
        let g = DMatrix::from_fn(2, k, |_, _| rng.gen_range(-1.0..1.0));
        let z = ConstrainedZonotope::zonotope(c.clone(), g.clone()).unwrap().expand(eps).unwrap();
        let shifted: Vec<Point2> = corner_hull(&c, &g)
            .vertices()
            .iter()
            .flat_map(|v| [[-eps, -eps], [eps, -eps], [eps, eps], [-eps, eps]].map(|s: Point2| [v[0] + s[0], v[1] + s[1]]))
            .collect();
        let expanded = Polygon::hull(&shifted, 1e-12).unwrap();
        for _ in 0..20 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let (ra, rb, rab) = (a.residual(&x).unwrap(), b.residual(&x).unwrap(), ab.residual(&x).unwrap());
            if (ra <= TOL_FEAS && rb <= TOL_FEAS && rab > tol) || (rab <= TOL_FEAS && (ra > tol || rb > tol)) {
                identity_errors += 1;
            }
            let d = expanded.signed_distance(x);
            if d.abs() > 1e-7 && (z.residual(&x).unwrap() <= tol) != (d < 0.0) {
                identity_errors += 1;
            }
        }
    }
    check(
        errors.is_empty() && vertex_errors == 0 && identity_errors == 0,
        format!(
            "1000 CZs ({decided} decisive queries, {} membership errors), 500 zonotope hulls ({vertex_errors} errors), {identity_errors} identity errors",
            errors.len()
        ),
    )
}

fn c7_covering() -> Outcome {
    let sc = Scenario::vehicle2d();
    let p = partition(&sc.state_box, &sc.partition_config()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let spacings = sc.abstraction.spacings.iter().copied().chain([sc.abstraction.default_spacing]);
    let spacings: Vec<f64> = spacings.fold(Vec::new(), |mut v, s| {
        if !v.contains(&s) {
            v.push(s);
        }
        v
    });
    for &spacing in &spacings {
        for cell in &p.cells {
            let basic = basic_generators(cell.gnorm_generators(), spacing, sc.epsilon).unwrap();
            let lat = approx_state_set(cell, &basic).unwrap();
            let half = 0.5 * basic.iter().map(|b| b.step[0].hypot(b.step[1])).fold(0.0, f64::max);
            let (lo, hi) = cell.base_polygon().bounding_box();
            let mut n = 0;
            while n < 1000 {
                let x = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
                if !cell.base_polygon().contains(x, 0.0) || !sc.state_box.contains(&x, 0.0) {
                    continue;
                }
                n += 1;
                let gn = cell.gnorm();
                let d = lat.points.iter().map(|q| gn.eval2([x[0] - q[0], x[1] - q[1]])).fold(f64::INFINITY, f64::min);
                worst = worst.max(d / (2.0 * half));
                if d > half + 1e-9 {
                    failures.push(format!("{} at {spacing}", cell.label()));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!("{} cells x spacings {spacings:?}, worst distance {worst:.3} of max|g_l|, {} failures", p.cells.len(), failures.len()),
    )
}

fn boxed(lo: Point2, hi: Point2) -> ObstacleSpec {
    ObstacleSpec::Box { lower: lo.to_vec(), upper: hi.to_vec() }
}

fn scene(seed: u64, sealed: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = Scenario::vehicle2d();
    sc.seed = seed;
    sc.name = format!("scene{seed}");
    sc.state_box = AxisBox::planar([-10.0, -8.0], [10.0, 8.0]).unwrap();
    sc.init_box = AxisBox::planar([-9.0, -7.0], [-8.0, -6.0]).unwrap();
    sc.initial_state = [-8.5, -6.5];
    let (gx, gy) = (rng.gen_range(4.0..7.0), rng.gen_range(-5.0..5.0));
    sc.goals = vec![AxisBox::planar([gx, gy], [gx + 1.0, gy + 1.0]).unwrap()];
    sc.obstacles = if sealed {
        let (lo, hi, t) = ([gx - 1.0, gy - 1.0], [gx + 2.0, gy + 2.0], 0.5);
        vec![
            boxed([lo[0] - t, lo[1] - t], [hi[0] + t, lo[1]]),
            boxed([lo[0] - t, hi[1]], [hi[0] + t, hi[1] + t]),
            boxed([lo[0] - t, lo[1] - t], [lo[0], hi[1] + t]),
            boxed([hi[0], lo[1] - t], [hi[0] + t, hi[1] + t]),
        ]
    } else {
        (0..rng.gen_range(1..=4))
            .map(|_| {
                let x = rng.gen_range(-6.0..3.0);
                let w = rng.gen_range(0.5..2.0);
                let (y0, y1) = if rng.gen_bool(0.5) { (-8.0, rng.gen_range(-4.0..7.0)) } else { (rng.gen_range(-7.0..4.0), 8.0) };
                boxed([x, y0], [x + w, y1])
            })
            .collect()
    };
    sc
}

/// 4-connected flood of free raster points of `X` kept by `keep`.
fn raster_reach(sc: &Scenario, keep: impl Fn(Point2) -> bool) -> bool {
    const RES: f64 = 0.1;
    let obs: Vec<AxisBox> = sc
        .obstacles
        .iter()
        .map(|o| match o {
            ObstacleSpec::Box { lower, upper } => AxisBox::new(lower.clone(), upper.clone()).unwrap(),
            ObstacleSpec::Polygon { .. } => unreachable!(),
        })
        .collect();
    let inb = |b: &AxisBox, p: Point2| (0..2).all(|d| p[d] >= b.lower()[d] && p[d] <= b.upper()[d]);
    let x = &sc.state_box;
    let (i0, i1) = ((x.lower()[0] / RES).ceil() as i64, (x.upper()[0] / RES).floor() as i64);
    let (j0, j1) = ((x.lower()[1] / RES).ceil() as i64, (x.upper()[1] / RES).floor() as i64);
    let pt = |i: i64, j: i64| [i as f64 * RES, j as f64 * RES];
    let free = |i: i64, j: i64| (i0..=i1).contains(&i) && (j0..=j1).contains(&j) && !obs.iter().any(|o| inb(o, pt(i, j))) && keep(pt(i, j));
    let mut seen = HashSet::new();
    let mut queue: VecDeque<(i64, i64)> = (i0..=i1)
        .flat_map(|i| (j0..=j1).map(move |j| (i, j)))
        .filter(|&(i, j)| inb(&sc.init_box, pt(i, j)) && free(i, j))
        .collect();
    seen.extend(queue.iter().copied());
    while let Some((i, j)) = queue.pop_front() {
        if inb(&sc.goals[0], pt(i, j)) {
            return true;
        }
        for nb in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            if free(nb.0, nb.1) && seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    false
}

fn c8_verification() -> Outcome {
    let mut problems = Vec::new();
    let (mut sat, mut unsat) = (0, 0);
    for (seed, sealed) in (0..10).map(|s| (s, false)).chain((100..110).map(|s| (s, true))) {
        let sc = scene(seed, sealed);
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out_dir: dir.path().to_path_buf(), strict_safety: false, alternatives: 0 };
        let mut pl = Pipeline::new(sc.clone(), opts, &DynamicsRegistry::default()).unwrap();
        let p = pl.partition().unwrap();
        match pl.verify(&p) {
            Ok(v) => {
                sat += 1;
                let bodies: Vec<Polygon> = v.plans[0].cells.iter().map(|&c| p.cells[c].body_polygon().clone()).collect();
                if sealed || !raster_reach(&sc, |q| bodies.iter().any(|b| b.contains(q, 1e-9))) {
                    problems.push(format!("scene {seed}: satisfiable without a raster corridor"));
                }
            }
            Err(e) => {
                unsat += 1;
                if sealed {
                    let cfg = dir.path().join("scene.toml");
                    std::fs::write(&cfg, sc.to_toml()).unwrap();
                    let code = zonosyn(&["verify", "--config", cfg.to_str().unwrap()], dir.path()).status.code();
                    if code != Some(2) || e.exit_code() != 2 {
                        problems.push(format!("scene {seed}: exit code {code:?}"));
                    }
                } else if raster_reach(&sc, |_| true) {
                    log_note(&format!("scene {seed}: reachable in the raster but no plan ({e})"));
                }
            }
        }
    }
    check(problems.is_empty(), format!("20 scenes: {sat} satisfiable, {unsat} unsatisfiable; {problems:?}"))
}

fn log_note(s: &str) {
    println!("  note: {s}");
}

fn c9_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    zonosyn(&["run"], a.path());
    zonosyn(&["run"], b.path());
    let differ: Vec<&str> = ["partition.json", "controller.json", "trajectory.csv"]
        .into_iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok() || !a.path().join(f).is_file())
        .collect();
    check(differ.is_empty(), format!("partition.json, controller.json, trajectory.csv; differing: {differ:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("end-to-end vehicle2d run", c1_end_to_end),
        ("transition-count magnitude", c2_transition_counts),
        ("baseline comparison", c3_baseline),
        ("feedback refinement", c4_feedback_refinement),
        ("fixed-point oracle", c5_fixpoint),
        ("geometry oracles", c6_geometry),
        ("covering bound", c7_covering),
        ("verification soundness", c8_verification),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {}: PASS {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
