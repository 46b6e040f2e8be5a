//! SVG drawings of the partition and of a closed-loop run.

use std::fmt::Write as _;

use super::{PipelineError, Scenario, Trajectory};
use crate::geometry::{AxisBox, Point2, Polygon};
use crate::graph::{ForbiddenRegions, PathPlan};
use crate::partition::{CellKind, Partition};

const SCALE: f64 = 20.0;
const MARGIN: f64 = 10.0;

struct Canvas {
    lo: Point2,
    hi: Point2,
    body: String,
}

impl Canvas {
    fn new(x: &AxisBox) -> Self {
        Self { lo: [x.lower()[0], x.lower()[1]], hi: [x.upper()[0], x.upper()[1]], body: String::new() }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (MARGIN + (p[0] - self.lo[0]) * SCALE, MARGIN + (self.hi[1] - p[1]) * SCALE)
    }

    fn points(&self, pts: &[Point2]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn polygon(&mut self, p: &Polygon, style: &str) {
        if p.is_empty() {
            return;
        }
        let pts = self.points(p.vertices());
        let _ = writeln!(self.body, "<polygon points=\"{pts}\" {style}/>");
    }

    fn polyline(&mut self, pts: &[Point2], style: &str) {
        let pts = self.points(pts);
        let _ = writeln!(self.body, "<polyline points=\"{pts}\" fill=\"none\" {style}/>");
    }

    fn circle(&mut self, p: Point2, r: f64, style: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" {style}/>");
    }

    fn text(&mut self, p: Point2, s: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"10\" text-anchor=\"middle\">{s}</text>");
    }

    fn finish(self) -> String {
        let w = 2.0 * MARGIN + (self.hi[0] - self.lo[0]) * SCALE;
        let h = 2.0 * MARGIN + (self.hi[1] - self.lo[1]) * SCALE;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn cell_style(kind: CellKind) -> &'static str {
    match kind {
        CellKind::Zonotope => "fill=\"none\" stroke=\"#2a7f3f\" stroke-width=\"1\"",
        CellKind::ConstrainedZonotope => "fill=\"none\" stroke=\"#7a7a7a\" stroke-width=\"0.7\" stroke-dasharray=\"4 2\"",
    }
}

const OBSTACLE: &str = "fill=\"#9a9a9a\" stroke=\"none\"";

/// Cell bases, centers and the neighbor connections.
pub fn partition_svg(p: &Partition, obstacles: &ForbiddenRegions) -> String {
    let mut c = Canvas::new(&p.state_box);
    for o in obstacles.polygons() {
        c.polygon(o, OBSTACLE);
    }
    for cell in &p.cells {
        c.polygon(cell.base_polygon(), cell_style(cell.kind()));
        c.text(cell.base_polygon().vertex_mean(), &cell.label());
    }
    for (i, nbrs) in p.connections.iter().enumerate() {
        let a = [p.centers[i][0], p.centers[i][1]];
        for &j in nbrs {
            c.polyline(&[a, [p.centers[j][0], p.centers[j][1]]], "stroke=\"#c03030\" stroke-width=\"0.8\"");
        }
        c.circle(a, 3.0, "fill=\"#c03030\"");
    }
    c.finish()
}

/// Obstacles grey, init dark blue, goals orange, waypoints purple,
/// trajectory red.
pub fn plot_svg(
    sc: &Scenario,
    p: &Partition,
    plan: Option<&PathPlan>,
    obstacles: &ForbiddenRegions,
    traj: Option<&Trajectory>,
) -> Result<String, PipelineError> {
    let mut c = Canvas::new(&sc.state_box);
    for cell in &p.cells {
        c.polygon(cell.base_polygon(), cell_style(cell.kind()));
    }
    if let Some(plan) = plan {
        for w in &plan.waypoints[1..plan.waypoints.len() - 1] {
            c.polygon(&w.region.polygon, "fill=\"#8e44ad\" fill-opacity=\"0.45\" stroke=\"none\"");
        }
    }
    for o in obstacles.polygons() {
        c.polygon(o, OBSTACLE);
    }
    c.polygon(&sc.init_box.polygon()?, "fill=\"#1f2f8f\" stroke=\"none\"");
    for g in &sc.goals {
        c.polygon(&g.polygon()?, "fill=\"#f39c12\" stroke=\"none\"");
    }
    if let Some(t) = traj {
        let pts: Vec<Point2> = t.samples.iter().map(|s| s.x).collect();
        c.polyline(&pts, "stroke=\"#d62728\" stroke-width=\"1.5\"");
    }
    Ok(c.finish())
}
