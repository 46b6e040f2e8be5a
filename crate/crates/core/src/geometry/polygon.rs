//! Planar convex polygons in vertex form.
//!
//! Used as the fast path for membership and clipping whenever the state
//! space is two-dimensional. Vertices are stored counterclockwise without
//! repetition; one- and two-vertex polygons represent points and segments.

use serde::{Deserialize, Serialize};

pub type Point2 = [f64; 2];

#[inline]
pub(crate) fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

/// A closed half-plane `normal · x <= offset` with unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: Point2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Point2, offset: f64) -> Self {
        let len = norm(normal);
        Self {
            normal: [normal[0] / len, normal[1] / len],
            offset: offset / len,
        }
    }

    #[inline]
    pub fn violation(&self, p: Point2) -> f64 {
        dot(self.normal, p) - self.offset
    }

    pub fn flipped(&self) -> Self {
        Self {
            normal: [-self.normal[0], -self.normal[1]],
            offset: -self.offset,
        }
    }
}

/// Convex polygon, counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Convex hull of an arbitrary point cloud. Points closer than `tol`
    /// are merged and collinear boundary points are dropped.
    pub fn hull(points: &[Point2], tol: f64) -> Option<Self> {
        let mut pts: Vec<Point2> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
        if pts.is_empty() {
            return None;
        }
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut uniq: Vec<Point2> = Vec::with_capacity(pts.len());
        for p in pts {
            // Sorted by x, so only the trailing window can be within tol.
            if !uniq.iter().rev().take_while(|q| q[0] >= p[0] - tol).any(|q| norm(sub(p, *q)) <= tol) {
                uniq.push(p);
            }
        }
        if uniq.len() <= 2 {
            return Some(Self { vertices: uniq }.normalized_segment(tol));
        }
        let turn = |o: Point2, a: Point2, b: Point2| {
            let u = sub(a, o);
            let v = sub(b, o);
            let scale = norm(u).max(norm(v)).max(1.0);
            cross(u, v) / scale
        };
        let mut lower: Vec<Point2> = Vec::new();
        for &p in &uniq {
            while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point2> = Vec::new();
        for &p in uniq.iter().rev() {
            while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Some(Self { vertices: lower }.normalized_segment(tol))
    }

    fn normalized_segment(self, tol: f64) -> Self {
        // A collinear cloud collapses to its two extreme points.
        if self.vertices.len() == 2 && norm(sub(self.vertices[0], self.vertices[1])) <= tol {
            return Self { vertices: vec![self.vertices[0]] };
        }
        self
    }

    /// Wraps vertices that are already convex and counterclockwise.
    pub fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(lower: Point2, upper: Point2) -> Self {
        Self::hull(
            &[lower, [upper[0], lower[1]], upper, [lower[0], upper[1]]],
            0.0,
        )
        .expect("four finite corners")
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            s += cross(self.vertices[i], self.vertices[(i + 1) % n]);
        }
        0.5 * s
    }

    pub fn vertex_mean(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self.vertices.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(norm(sub(*a, *b)));
            }
        }
        d
    }

    /// Outward half-planes, one per edge. Only meaningful for three or more
    /// vertices.
    pub fn halfplanes(&self) -> Vec<HalfPlane> {
        let n = self.vertices.len();
        if n < 3 {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let e = sub(b, a);
                let normal = [e[1], -e[0]];
                HalfPlane::new(normal, dot(normal, a))
            })
            .collect()
    }

    /// Largest half-plane violation. Negative inside (the distance to the
    /// boundary), positive outside (a lower bound of the distance).
    pub fn signed_distance(&self, p: Point2) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => norm(sub(p, self.vertices[0])),
            2 => segment_distance(p, self.vertices[0], self.vertices[1]),
            _ => self
                .halfplanes()
                .iter()
                .map(|h| h.violation(p))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        match n {
            0 => false,
            1 | 2 => self.signed_distance(p) <= tol,
            _ => {
                for i in 0..n {
                    let a = self.vertices[i];
                    let b = self.vertices[(i + 1) % n];
                    let e = sub(b, a);
                    let len = norm(e);
                    if cross(e, sub(p, a)) < -tol * len {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Intersection with a half-plane.
    pub fn clip(&self, h: &HalfPlane, tol: f64) -> Option<Polygon> {
        let n = self.vertices.len();
        if n == 0 {
            return None;
        }
        let mut out: Vec<Point2> = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let da = h.violation(a);
            let db = h.violation(b);
            if da <= 0.0 {
                out.push(a);
            }
            if n > 1 && ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
                let t = da / (da - db);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        if out.is_empty() {
            return None;
        }
        Polygon::hull(&out, tol)
    }

    pub fn intersection(&self, other: &Polygon, tol: f64) -> Option<Polygon> {
        if other.len() < 3 {
            // Degenerate clipper: keep the parts of `other` inside `self`.
            let inside: Vec<Point2> = other.vertices.iter().copied().filter(|p| self.contains(*p, tol)).collect();
            return Polygon::hull(&inside, tol);
        }
        let mut acc = self.clone();
        for h in other.halfplanes() {
            acc = acc.clip(&h, tol)?;
        }
        Some(acc)
    }

    /// Closed sets overlap (up to `tol`). Separating-axis test.
    pub fn intersects(&self, other: &Polygon, tol: f64) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let mut axes: Vec<Point2> = Vec::new();
        for poly in [self, other] {
            match poly.len() {
                1 => {}
                2 => {
                    let e = sub(poly.vertices[1], poly.vertices[0]);
                    axes.push([e[1], -e[0]]);
                    axes.push(e);
                }
                _ => axes.extend(poly.halfplanes().iter().map(|h| h.normal)),
            }
        }
        if axes.is_empty() {
            return norm(sub(self.vertices[0], other.vertices[0])) <= tol;
        }
        for axis in axes {
            let len = norm(axis);
            if len == 0.0 {
                continue;
            }
            let ax = [axis[0] / len, axis[1] / len];
            let (amin, amax) = project(&self.vertices, ax);
            let (bmin, bmax) = project(&other.vertices, ax);
            if amax < bmin - tol || bmax < amin - tol {
                return false;
            }
        }
        true
    }

    /// `self \ other` as a list of convex pieces with pairwise disjoint
    /// interiors. Pieces thinner than `tol` are dropped.
    pub fn difference(&self, other: &Polygon, tol: f64) -> Vec<Polygon> {
        if other.len() < 3 || !self.intersects(other, 0.0) {
            return vec![self.clone()];
        }
        let mut pieces = Vec::new();
        let mut rest = Some(self.clone());
        for h in other.halfplanes() {
            let Some(current) = rest.take() else { break };
            if let Some(outside) = current.clip(&h.flipped(), tol) {
                if outside.is_fat(tol) {
                    pieces.push(outside);
                }
            }
            rest = current.clip(&h, tol);
        }
        pieces
    }

    /// Has nonnegligible width: area over diameter exceeds `tol`.
    pub fn is_fat(&self, tol: f64) -> bool {
        self.len() >= 3 && self.area() > tol * self.diameter().max(1.0)
    }

    /// Translates and scales a template anchored at the origin.
    pub fn scaled_translate(&self, scale: f64, offset: Point2) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| [offset[0] + scale * p[0], offset[1] + scale * p[1]])
                .collect(),
        }
    }

    /// Every vertex of `other` lies in `self`.
    pub fn contains_polygon(&self, other: &Polygon, tol: f64) -> bool {
        other.vertices.iter().all(|p| self.contains(*p, tol))
    }
}

fn project(points: &[Point2], axis: Point2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let s = dot(*p, axis);
        (lo.min(s), hi.max(s))
    })
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let e = sub(b, a);
    let len2 = dot(e, e);
    let t = if len2 == 0.0 { 0.0 } else { (dot(sub(p, a), e) / len2).clamp(0.0, 1.0) };
    norm(sub(p, [a[0] + t * e[0], a[1] + t * e[1]]))
}
