//! Adjacency of cells under obstacles, the task graph, and plan search.
//!
//! Connectivity questions are answered on an origin-anchored raster of
//! spacing `r_conn`, shared by every region so that raster points of
//! overlapping regions coincide exactly.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConstrainedZonotope, GeometryError, Point2, Polygon, TOL_FEAS};
use crate::partition::Cell;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("specification unsatisfiable on this partition: {0}")]
    Unsatisfiable(String),
    #[error("initial region does not meet any admissible cell")]
    UnreachableInit,
    #[error("specification has no goals")]
    EmptySpec,
    #[error("invalid accepting path: {0}")]
    InvalidAccepting(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

type Key = (i64, i64);

/// Obstacles `𝒪_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ConstrainedZonotope>", into = "Vec<ConstrainedZonotope>")]
pub struct ForbiddenRegions {
    regions: Vec<ConstrainedZonotope>,
    polygons: Vec<Polygon>,
}

impl TryFrom<Vec<ConstrainedZonotope>> for ForbiddenRegions {
    type Error = GeometryError;
    fn try_from(v: Vec<ConstrainedZonotope>) -> Result<Self, Self::Error> {
        ForbiddenRegions::new(v)
    }
}

impl From<ForbiddenRegions> for Vec<ConstrainedZonotope> {
    fn from(f: ForbiddenRegions) -> Self {
        f.regions
    }
}

impl ForbiddenRegions {
    pub fn new(regions: Vec<ConstrainedZonotope>) -> Result<Self, GeometryError> {
        let polygons = regions.iter().map(ConstrainedZonotope::polygon).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { regions, polygons })
    }

    pub fn none() -> Self {
        Self { regions: Vec::new(), polygons: Vec::new() }
    }

    pub fn regions(&self) -> &[ConstrainedZonotope] {
        &self.regions
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Point lies in some closed obstacle.
    pub fn contains(&self, x: Point2) -> bool {
        self.polygons.iter().any(|p| p.contains(x, 0.0))
    }

    /// Closed polygon touches some obstacle.
    pub fn intersects(&self, poly: &Polygon) -> bool {
        self.polygons.iter().any(|p| p.intersects(poly, 0.0))
    }

    /// Smallest Euclidean-bound clearance proxy: the largest obstacle
    /// half-plane violation, minimized over obstacles. Positive outside all.
    pub fn clearance(&self, x: Point2) -> f64 {
        self.polygons.iter().map(|p| p.signed_distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Every region grown by `r` in the infinity norm.
    pub fn inflate(&self, r: f64) -> Result<Self, GeometryError> {
        Self::new(self.regions.iter().map(|o| o.expand(r)).collect::<Result<Vec<_>, _>>()?)
    }
}

/// A planar region with its constrained-zonotope form. Free membership
/// additionally excludes obstacles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub set: ConstrainedZonotope,
    #[serde(skip_serializing)]
    #[serde(default = "empty_polygon")]
    pub polygon: Polygon,
}

fn empty_polygon() -> Polygon {
    Polygon::from_ccw_unchecked(Vec::new())
}

impl Region {
    pub fn new(set: ConstrainedZonotope) -> Result<Self, GeometryError> {
        let polygon = set.polygon()?;
        Ok(Self { set, polygon })
    }

    pub fn from_polygon(polygon: Polygon) -> Result<Self, GeometryError> {
        let set = ConstrainedZonotope::from_vertices(polygon.vertices())?;
        Ok(Self { set, polygon })
    }

    pub fn contains(&self, x: Point2) -> bool {
        self.polygon.contains(x, TOL_FEAS)
    }

    pub fn contains_free(&self, x: Point2, obstacles: &ForbiddenRegions) -> bool {
        self.contains(x) && !obstacles.contains(x)
    }
}

/// Raster points of an origin-anchored grid inside a polygon.
pub fn raster_keys(poly: &Polygon, r: f64) -> Vec<Key> {
    if poly.is_empty() {
        return Vec::new();
    }
    let (lo, hi) = poly.bounding_box();
    let (i0, i1) = ((lo[0] / r - 1e-9).ceil() as i64, (hi[0] / r + 1e-9).floor() as i64);
    let (j0, j1) = ((lo[1] / r - 1e-9).ceil() as i64, (hi[1] / r + 1e-9).floor() as i64);
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            if poly.contains(key_point((i, j), r), TOL_FEAS) {
                out.push((i, j));
            }
        }
    }
    out
}

#[inline]
pub fn key_point(k: Key, r: f64) -> Point2 {
    [k.0 as f64 * r, k.1 as f64 * r]
}

/// Raster points of `poly` outside every obstacle.
fn free_keys(poly: &Polygon, obstacles: &ForbiddenRegions, r: f64) -> Vec<Key> {
    raster_keys(poly, r).into_iter().filter(|k| !obstacles.contains(key_point(*k, r))).collect()
}

/// Points reachable from `seeds` through `domain` by 4-neighbor steps.
pub fn flood(domain: &HashSet<Key>, seeds: impl IntoIterator<Item = Key>) -> HashSet<Key> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if domain.contains(&s) && seen.insert(s) {
            queue.push_back(s);
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        for nb in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            if domain.contains(&nb) && seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    seen
}

fn is_connected(domain: &HashSet<Key>) -> bool {
    match domain.iter().min() {
        None => true,
        Some(&start) => flood(domain, [start]).len() == domain.len(),
    }
}

/// Whether the raster of `poly` lies entirely inside obstacles.
fn swallowed(poly: &Polygon, obstacles: &ForbiddenRegions, r: f64) -> bool {
    if obstacles.polygons.iter().any(|o| o.contains_polygon(poly, 0.0)) {
        return true;
    }
    let keys = raster_keys(poly, r);
    !keys.is_empty() && keys.iter().all(|k| obstacles.contains(key_point(*k, r)))
}

/// Overlap `Ω = a ∩ b` when it is admissible: both sets not swallowed by
/// obstacles, `Ω \ 𝒪` holds a raster point, and `(a ∪ b) \ (Ω ∩ 𝒪)` is
/// raster-connected.
pub fn admissible_overlap(a: &Polygon, b: &Polygon, obstacles: &ForbiddenRegions, r: f64) -> Option<Polygon> {
    if !a.intersects(b, 0.0) {
        return None;
    }
    let omega = a.intersection(b, 1e-12)?;
    if swallowed(a, obstacles, r) || swallowed(b, obstacles, r) {
        return None;
    }
    let omega_keys: Vec<Key> = raster_keys(&omega, r);
    if !omega_keys.iter().any(|k| !obstacles.contains(key_point(*k, r))) {
        return None;
    }
    let blocked: HashSet<Key> = omega_keys.into_iter().filter(|k| obstacles.contains(key_point(*k, r))).collect();
    let domain: HashSet<Key> = raster_keys(a, r)
        .into_iter()
        .chain(raster_keys(b, r))
        .filter(|k| !blocked.contains(k))
        .collect();
    is_connected(&domain).then_some(omega)
}

/// Admissible intersection of two cells.
pub fn admissible_intersection(a: &Cell, b: &Cell, obstacles: &ForbiddenRegions, r: f64) -> Option<Region> {
    let omega = admissible_overlap(a.body_polygon(), b.body_polygon(), obstacles, r)?;
    let set = a.body().intersect(b.body()).ok()?;
    Some(Region { set, polygon: omega })
}

/// Symmetric adjacency matrix `Υ` with intersection regions.
#[derive(Clone, Debug)]
pub struct AdjacencyGraph {
    matrix: Vec<Vec<bool>>,
    /// Keyed by 0-based cell indices with `i < j`.
    intersections: std::collections::BTreeMap<(usize, usize), Region>,
}

impl AdjacencyGraph {
    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.matrix[i][j]
    }

    pub fn matrix(&self) -> &[Vec<bool>] {
        &self.matrix
    }

    pub fn intersection(&self, i: usize, j: usize) -> Option<&Region> {
        self.intersections.get(&(i.min(j), i.max(j)))
    }

    pub fn edge_count(&self) -> usize {
        self.intersections.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.matrix[i].iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }
}

/// Pairwise admissibility over all cells.
pub fn build_adjacency(cells: &[Cell], obstacles: &ForbiddenRegions, r: f64) -> AdjacencyGraph {
    let n = cells.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let found: Vec<((usize, usize), Option<Region>)> = pairs
        .into_par_iter()
        .map(|(i, j)| ((i, j), admissible_intersection(&cells[i], &cells[j], obstacles, r)))
        .collect();
    let mut matrix = vec![vec![false; n]; n];
    let mut intersections = std::collections::BTreeMap::new();
    for ((i, j), reg) in found {
        if let Some(reg) = reg {
            matrix[i][j] = true;
            matrix[j][i] = true;
            intersections.insert((i, j), reg);
        }
    }
    AdjacencyGraph { matrix, intersections }
}

/// Sequenced reach-avoid: visit the goals in order, never touch obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachAvoidSpec {
    pub goals: Vec<ConstrainedZonotope>,
    pub obstacles: ForbiddenRegions,
    /// State space; corridors may not leave it.
    pub domain: Option<Polygon>,
}

/// Vertices of the task graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    Init,
    /// 0-based goal index.
    Goal(usize),
    /// 0-based cell index.
    Cell(usize),
}

impl Symbol {
    pub fn label(&self) -> String {
        match self {
            Symbol::Init => "π_0".into(),
            Symbol::Goal(l) => format!("π_φ{}", l + 1),
            Symbol::Cell(i) => format!("π_{}", i + 1),
        }
    }

    /// Parses `pi0`, `phi<l>` (1-based) and `pi<k>` (1-based symbol index).
    pub fn parse(s: &str) -> Result<Self, GraphError> {
        let t = s.trim().replace(['π', '_'], "pi").replace("φ", "phi");
        let bad = || GraphError::InvalidAccepting(format!("unknown symbol `{s}`"));
        if let Some(rest) = t.strip_prefix("piphi").or_else(|| t.strip_prefix("phi")) {
            let l: usize = rest.parse().map_err(|_| bad())?;
            return l.checked_sub(1).map(Symbol::Goal).ok_or_else(bad);
        }
        let rest = t.strip_prefix("pi").ok_or_else(bad)?;
        let rest = rest.trim_start_matches("pi");
        match rest.parse::<usize>().map_err(|_| bad())? {
            0 => Ok(Symbol::Init),
            k => Ok(Symbol::Cell(k - 1)),
        }
    }
}

/// `Ḡ`: cell adjacency plus edges to the initial and goal vertices.
#[derive(Clone, Debug)]
pub struct TaskGraph {
    pub adjacency: AdjacencyGraph,
    pub init_region: Region,
    pub goal_regions: Vec<Region>,
    /// Cells admissibly meeting the initial region, ascending.
    pub init_edges: Vec<usize>,
    /// Init neighbors whose body holds the whole initial region.
    pub init_covering: Vec<usize>,
    /// Per goal, cells admissibly meeting it, ascending.
    pub goal_edges: Vec<Vec<usize>>,
    pub domain: Option<Polygon>,
}

impl TaskGraph {
    pub fn edges(&self) -> Vec<(Symbol, Symbol)> {
        let mut out = Vec::new();
        for &c in &self.init_edges {
            out.push((Symbol::Init, Symbol::Cell(c)));
        }
        for (i, j) in self.adjacency.intersections.keys() {
            out.push((Symbol::Cell(*i), Symbol::Cell(*j)));
        }
        for (l, cs) in self.goal_edges.iter().enumerate() {
            for &c in cs {
                out.push((Symbol::Cell(c), Symbol::Goal(l)));
            }
        }
        out
    }
}

/// Adds the initial and goal vertices.
pub fn extend_graph(
    adjacency: AdjacencyGraph,
    cells: &[Cell],
    init: &ConstrainedZonotope,
    spec: &ReachAvoidSpec,
    r: f64,
) -> Result<TaskGraph, GraphError> {
    if spec.goals.is_empty() {
        return Err(GraphError::EmptySpec);
    }
    let init_region = Region::new(init.clone())?;
    let goal_regions = spec.goals.iter().map(|g| Region::new(g.clone())).collect::<Result<Vec<_>, _>>()?;
    let touching = |reg: &Region| -> Vec<usize> {
        cells
            .par_iter()
            .enumerate()
            .filter(|(_, c)| admissible_overlap(&reg.polygon, c.body_polygon(), &spec.obstacles, r).is_some())
            .map(|(i, _)| i)
            .collect()
    };
    let init_edges = touching(&init_region);
    if init_edges.is_empty() {
        return Err(GraphError::UnreachableInit);
    }
    let goal_edges = goal_regions.iter().map(touching).collect();
    let init_covering = init_edges
        .iter()
        .copied()
        .filter(|&c| cells[c].body_polygon().contains_polygon(&init_region.polygon, TOL_FEAS))
        .collect();
    Ok(TaskGraph { adjacency, init_region, goal_regions, init_edges, init_covering, goal_edges, domain: spec.domain.clone() })
}

/// Accepting path of the sequenced fragment: `π_0, π_φ1, …, π_φK`.
pub fn compile_spec(spec: &ReachAvoidSpec) -> Result<Vec<Symbol>, GraphError> {
    if spec.goals.is_empty() {
        return Err(GraphError::EmptySpec);
    }
    Ok(std::iter::once(Symbol::Init).chain((0..spec.goals.len()).map(Symbol::Goal)).collect())
}

/// Checks an externally supplied accepting path.
pub fn validate_accepting(path: &[Symbol], goal_count: usize) -> Result<(), GraphError> {
    if path.first() != Some(&Symbol::Init) {
        return Err(GraphError::InvalidAccepting("must start at π_0".into()));
    }
    if path.len() < 2 {
        return Err(GraphError::InvalidAccepting("needs at least one goal".into()));
    }
    for s in &path[1..] {
        match s {
            Symbol::Goal(l) if *l < goal_count => {}
            other => return Err(GraphError::InvalidAccepting(format!("{} is not a goal symbol", other.label()))),
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaypointKind {
    Init,
    /// Overlap of two consecutive cells (0-based).
    Handoff { from: usize, to: usize },
    /// 0-based goal index.
    Goal { goal: usize },
}

/// Region where control passes between stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub kind: WaypointKind,
    pub region: Region,
}

/// Per-stage outcome of the corridor check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorridorCheck {
    /// The cell minus obstacles is one raster component.
    pub cell_connected: bool,
    /// Raster points of the exit region reached from the entry.
    pub reached_exit_points: usize,
}

/// Cells to traverse, one per stage, and the waypoints between them.
/// `waypoints[i]` enters stage `i` and `waypoints[i + 1]` leaves it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    /// 0-based cell index per stage.
    pub cells: Vec<usize>,
    pub waypoints: Vec<Waypoint>,
    pub checks: Vec<CorridorCheck>,
}

impl PathPlan {
    pub fn stages(&self) -> usize {
        self.cells.len()
    }

    pub fn symbols(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c + 1).collect()
    }
}

/// Product-graph node: cell and number of goals already visited.
type Node = (usize, usize);

fn node_successors(tg: &TaskGraph, order: &[usize], banned: &BTreeSet<usize>, (c, k): Node) -> Vec<(Node, u32)> {
    let mut out = Vec::new();
    if k < order.len() && tg.goal_edges[order[k]].contains(&c) {
        out.push(((c, k + 1), 0));
    }
    for nb in tg.adjacency.neighbors(c) {
        if !banned.contains(&nb) {
            out.push(((nb, k), 1));
        }
    }
    out
}

/// Fewest-cell node sequence realizing the goal order; ties go to the
/// lexicographically smallest symbol sequence.
fn shortest_nodes(tg: &TaskGraph, order: &[usize], banned: &BTreeSet<usize>) -> Option<Vec<Node>> {
    let n = tg.adjacency.size();
    let kk = order.len();
    let idx = |(c, k): Node| k * n + c;
    let mut dist = vec![u32::MAX; n * (kk + 1)];
    let mut dq = VecDeque::new();
    for c in 0..n {
        if !banned.contains(&c) {
            dist[idx((c, kk))] = 0;
            dq.push_back((c, kk));
        }
    }
    // 0-1 BFS on reversed edges.
    while let Some((c, k)) = dq.pop_front() {
        let d = dist[idx((c, k))];
        let mut preds: Vec<(Node, u32)> = Vec::new();
        if k > 0 && tg.goal_edges[order[k - 1]].contains(&c) {
            preds.push(((c, k - 1), 0));
        }
        for nb in tg.adjacency.neighbors(c) {
            if !banned.contains(&nb) {
                preds.push(((nb, k), 1));
            }
        }
        for (p, w) in preds {
            if d + w < dist[idx(p)] {
                dist[idx(p)] = d + w;
                if w == 0 {
                    dq.push_front(p);
                } else {
                    dq.push_back(p);
                }
            }
        }
    }
    // Starting cells that hold all of the initial region come first.
    let start = tg
        .init_edges
        .iter()
        .filter(|c| !banned.contains(c))
        .map(|&c| (c, 0))
        .filter(|&s| dist[idx(s)] != u32::MAX)
        .min_by_key(|&s| (!tg.init_covering.contains(&s.0), dist[idx(s)], s.0))?;
    let mut path = vec![start];
    let mut cur = start;
    while cur.1 < kk {
        let d = dist[idx(cur)];
        let next = node_successors(tg, order, banned, cur)
            .into_iter()
            .filter(|&(nx, w)| dist[idx(nx)] != u32::MAX && dist[idx(nx)] + w == d)
            .min_by_key(|&((c, _), w)| (w, c))?
            .0;
        path.push(next);
        cur = next;
    }
    Some(path)
}

fn nodes_to_plan(tg: &TaskGraph, cells: &[Cell], order: &[usize], nodes: &[Node]) -> Result<PathPlan, GraphError> {
    let first = nodes[0].0;
    let init_poly = tg
        .init_region
        .polygon
        .intersection(cells[first].body_polygon(), 1e-12)
        .ok_or_else(|| GraphError::Unsatisfiable("initial region misses the first cell".into()))?;
    let mut waypoints = vec![Waypoint { kind: WaypointKind::Init, region: Region::from_polygon(init_poly)? }];
    let mut stage_cells = vec![first];
    for w in nodes.windows(2) {
        let ((c0, k0), (c1, k1)) = (w[0], w[1]);
        if k1 > k0 {
            let goal = order[k0];
            let poly = tg.goal_regions[goal]
                .polygon
                .intersection(cells[c0].body_polygon(), 1e-12)
                .ok_or_else(|| GraphError::Unsatisfiable("goal misses its cell".into()))?;
            waypoints.push(Waypoint { kind: WaypointKind::Goal { goal }, region: Region::from_polygon(poly)? });
            if k1 == order.len() {
                break;
            }
            stage_cells.push(c0);
        } else {
            let reg = tg.adjacency.intersection(c0, c1).expect("adjacent cells have an overlap").clone();
            waypoints.push(Waypoint { kind: WaypointKind::Handoff { from: c0, to: c1 }, region: reg });
            stage_cells.push(c1);
        }
    }
    Ok(PathPlan { cells: stage_cells, waypoints, checks: Vec::new() })
}

/// Propagates raster reachability along the plan. Returns the first stage
/// whose exit region cannot be reached from its entry, or the checks.
fn corridor(plan: &PathPlan, cells: &[Cell], obstacles: &ForbiddenRegions, bounds: Option<&Polygon>, r: f64) -> Result<Vec<CorridorCheck>, usize> {
    let keys = |poly: &Polygon| -> Vec<Key> {
        let mut k = free_keys(poly, obstacles, r);
        if let Some(b) = bounds {
            k.retain(|k| b.contains(key_point(*k, r), TOL_FEAS));
        }
        k
    };
    let mut reached: HashSet<Key> = keys(&plan.waypoints[0].region.polygon).into_iter().collect();
    let mut checks = Vec::new();
    for (s, &c) in plan.cells.iter().enumerate() {
        let domain: HashSet<Key> = keys(cells[c].body_polygon()).into_iter().collect();
        let cell_connected = is_connected(&domain);
        let seen = flood(&domain, reached.iter().copied());
        let exit: Vec<Key> = keys(&plan.waypoints[s + 1].region.polygon);
        reached = exit.into_iter().filter(|k| seen.contains(k)).collect();
        if reached.is_empty() {
            return Err(s);
        }
        checks.push(CorridorCheck { cell_connected, reached_exit_points: reached.len() });
    }
    Ok(checks)
}

fn goal_order(accepting: &[Symbol], goal_count: usize) -> Result<Vec<usize>, GraphError> {
    validate_accepting(accepting, goal_count)?;
    Ok(accepting[1..]
        .iter()
        .map(|s| match s {
            Symbol::Goal(l) => *l,
            _ => unreachable!("validated"),
        })
        .collect())
}

fn search(tg: &TaskGraph, cells: &[Cell], order: &[usize], obstacles: &ForbiddenRegions, r: f64, mut banned: BTreeSet<usize>) -> Result<(PathPlan, BTreeSet<usize>), GraphError> {
    loop {
        let Some(nodes) = shortest_nodes(tg, order, &banned) else {
            return Err(GraphError::Unsatisfiable(format!(
                "no realizing path in the task graph ({} cells pruned)",
                banned.len()
            )));
        };
        let mut plan = nodes_to_plan(tg, cells, order, &nodes)?;
        match corridor(&plan, cells, obstacles, tg.domain.as_ref(), r) {
            Ok(checks) => {
                plan.checks = checks;
                return Ok((plan, banned));
            }
            Err(stage) => {
                log::debug!("pruning cell {} (no corridor)", plan.cells[stage] + 1);
                banned.insert(plan.cells[stage]);
            }
        }
    }
}

/// Shortest plan whose cells carry an obstacle-free raster corridor.
pub fn find_path(tg: &TaskGraph, accepting: &[Symbol], cells: &[Cell], obstacles: &ForbiddenRegions, r: f64) -> Result<PathPlan, GraphError> {
    let order = goal_order(accepting, tg.goal_regions.len())?;
    search(tg, cells, &order, obstacles, r, BTreeSet::new()).map(|(p, _)| p)
}

/// The best plan followed by up to `limit` alternatives, each found by
/// banning one cell of the best plan.
pub fn find_paths(
    tg: &TaskGraph,
    accepting: &[Symbol],
    cells: &[Cell],
    obstacles: &ForbiddenRegions,
    r: f64,
    limit: usize,
) -> Result<Vec<PathPlan>, GraphError> {
    let order = goal_order(accepting, tg.goal_regions.len())?;
    let (best, pruned) = search(tg, cells, &order, obstacles, r, BTreeSet::new())?;
    let mut alts: Vec<PathPlan> = Vec::new();
    let distinct: BTreeSet<usize> = best.cells.iter().copied().collect();
    for c in distinct {
        let mut banned = pruned.clone();
        banned.insert(c);
        if let Ok((p, _)) = search(tg, cells, &order, obstacles, r, banned) {
            if p.cells != best.cells && !alts.iter().any(|a| a.cells == p.cells) {
                alts.push(p);
            }
        }
    }
    alts.sort_by(|a, b| a.cells.len().cmp(&b.cells.len()).then_with(|| a.cells.cmp(&b.cells)));
    alts.truncate(limit);
    Ok(std::iter::once(best).chain(alts).collect())
}

/// DOT rendering of `Ḡ`; plan edges drawn bold.
pub fn to_dot(tg: &TaskGraph, plan: Option<&PathPlan>) -> String {
    let mut on_plan: BTreeSet<(Symbol, Symbol)> = BTreeSet::new();
    if let Some(p) = plan {
        let mut prev = Symbol::Init;
        for (s, &c) in p.cells.iter().enumerate() {
            let cur = Symbol::Cell(c);
            if prev != cur {
                on_plan.insert((prev.min(cur), prev.max(cur)));
            }
            prev = cur;
            if let WaypointKind::Goal { goal } = p.waypoints[s + 1].kind {
                on_plan.insert((cur.min(Symbol::Goal(goal)), cur.max(Symbol::Goal(goal))));
            }
        }
    }
    let mut s = String::from("graph task {\n  node [shape=circle];\n");
    let _ = writeln!(s, "  \"{}\" [shape=box];", Symbol::Init.label());
    for l in 0..tg.goal_regions.len() {
        let _ = writeln!(s, "  \"{}\" [shape=doublecircle];", Symbol::Goal(l).label());
    }
    for c in 0..tg.adjacency.size() {
        let _ = writeln!(s, "  \"{}\";", Symbol::Cell(c).label());
    }
    for (a, b) in tg.edges() {
        let key = (a.min(b), a.max(b));
        let style = if on_plan.contains(&key) { " [penwidth=3, color=red]" } else { "" };
        let _ = writeln!(s, "  \"{}\" -- \"{}\"{};", a.label(), b.label(), style);
    }
    s.push_str("}\n");
    s
}
