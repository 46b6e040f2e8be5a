//! Zonotopes, constrained zonotopes and the set predicates built on them.
//!
//! A constrained zonotope is `{c + Gξ : ‖ξ‖∞ ≤ 1, Aξ = b}`. Plain zonotopes
//! are the case with no constraint rows. Membership and emptiness are
//! decided by small LPs; planar vertex enumeration uses support queries.

mod gnorm;
mod lp;
pub mod polygon;

pub use gnorm::{g_norm, GNorm};
pub use polygon::{HalfPlane, Point2, Polygon};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on LP constraint residuals.
pub const TOL_FEAS: f64 = 1e-9;
/// Tolerance for vertex deduplication and boundary classification.
pub const TOL_GEO: f64 = 1e-7;

/// Planar vertex list, counterclockwise.
pub type VertexList = Vec<Point2>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("set has no generators")]
    NoGenerators,
    #[error("non-finite entry in set data")]
    NonFinite,
    #[error("expansion radius must be nonnegative, got {0}")]
    NegativeExpansion(f64),
    #[error("operation supports planar sets only (n = {0})")]
    UnsupportedDimension(usize),
    #[error("set is empty")]
    EmptySet,
    #[error("generator column {0} is zero")]
    ZeroGenerator(usize),
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("vertex list is empty")]
    NoVertices,
    #[error("box bounds are inconsistent")]
    InvalidBox,
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRecord", into = "BoxRecord")]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct BoxRecord {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRecord> for AxisBox {
    type Error = GeometryError;
    fn try_from(r: BoxRecord) -> Result<Self, Self::Error> {
        AxisBox::new(r.lower, r.upper)
    }
}

impl From<AxisBox> for BoxRecord {
    fn from(b: AxisBox) -> Self {
        BoxRecord { lower: b.lower, upper: b.upper }
    }
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::Dimension { expected: lower.len(), found: upper.len() });
        }
        if lower.is_empty() {
            return Err(GeometryError::InvalidBox);
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(GeometryError::InvalidBox);
        }
        Ok(Self { lower, upper })
    }

    pub fn planar(lower: Point2, upper: Point2) -> Result<Self, GeometryError> {
        Self::new(lower.to_vec(), upper.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|k| other.lower[k] >= self.lower[k] && other.upper[k] <= self.upper[k])
    }

    /// Diagonal-generator encoding. Zero-width axes keep a zero column so the
    /// generator count stays at `n`.
    pub fn to_cz(&self) -> ConstrainedZonotope {
        let n = self.dim();
        let g = DMatrix::from_diagonal(&DVector::from_vec(self.half_widths()));
        ConstrainedZonotope::zonotope(DVector::from_vec(self.center()), g).unwrap_or_else(|_| unreachable!("box of dimension {n} is well-formed"))
    }

    pub fn polygon(&self) -> Result<Polygon, GeometryError> {
        if self.dim() != 2 {
            return Err(GeometryError::UnsupportedDimension(self.dim()));
        }
        Polygon::hull(
            &[
                [self.lower[0], self.lower[1]],
                [self.upper[0], self.lower[1]],
                [self.upper[0], self.upper[1]],
                [self.lower[0], self.upper[1]],
            ],
            0.0,
        )
        .ok_or(GeometryError::EmptySet)
    }

    /// Grows every side by `r` (may shrink for negative `r`, clamped at the center).
    pub fn inflate(&self, r: f64) -> AxisBox {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for k in 0..self.dim() {
            let c = 0.5 * (lower[k] + upper[k]);
            lower[k] = (lower[k] - r).min(c);
            upper[k] = (upper[k] + r).max(c);
        }
        AxisBox { lower, upper }
    }
}

/// `{c + Gξ : ‖ξ‖∞ ≤ 1, Aξ = b}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CzRecord", into = "CzRecord")]
pub struct ConstrainedZonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
    constraint_offset: DVector<f64>,
}

/// Row-major text layout.
#[derive(Clone, Serialize, Deserialize)]
struct CzRecord {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
    constraint_matrix: Vec<Vec<f64>>,
    constraint_offset: Vec<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, GeometryError> {
    for row in rows {
        if row.len() != ncols {
            return Err(GeometryError::Dimension { expected: ncols, found: row.len() });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl TryFrom<CzRecord> for ConstrainedZonotope {
    type Error = GeometryError;
    fn try_from(r: CzRecord) -> Result<Self, Self::Error> {
        let ng = r.generators.first().map_or(0, Vec::len);
        let g = matrix_from_rows(&r.generators, ng)?;
        let a = matrix_from_rows(&r.constraint_matrix, ng)?;
        ConstrainedZonotope::new(DVector::from_vec(r.center), g, a, DVector::from_vec(r.constraint_offset))
    }
}

impl From<ConstrainedZonotope> for CzRecord {
    fn from(s: ConstrainedZonotope) -> Self {
        CzRecord {
            center: s.center.iter().copied().collect(),
            generators: rows_of(&s.generators),
            constraint_matrix: rows_of(&s.constraint_matrix),
            constraint_offset: s.constraint_offset.iter().copied().collect(),
        }
    }
}

impl ConstrainedZonotope {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        constraint_matrix: DMatrix<f64>,
        constraint_offset: DVector<f64>,
    ) -> Result<Self, GeometryError> {
        let n = center.len();
        if generators.nrows() != n {
            return Err(GeometryError::Dimension { expected: n, found: generators.nrows() });
        }
        if generators.ncols() == 0 {
            return Err(GeometryError::NoGenerators);
        }
        if constraint_matrix.ncols() != generators.ncols() && constraint_matrix.nrows() > 0 {
            return Err(GeometryError::Dimension { expected: generators.ncols(), found: constraint_matrix.ncols() });
        }
        if constraint_offset.len() != constraint_matrix.nrows() {
            return Err(GeometryError::Dimension { expected: constraint_matrix.nrows(), found: constraint_offset.len() });
        }
        let finite = center.iter().chain(generators.iter()).chain(constraint_matrix.iter()).chain(constraint_offset.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let constraint_matrix = if constraint_matrix.nrows() == 0 {
            DMatrix::zeros(0, generators.ncols())
        } else {
            constraint_matrix
        };
        Ok(Self { center, generators, constraint_matrix, constraint_offset })
    }

    pub fn zonotope(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self, GeometryError> {
        let ng = generators.ncols();
        Self::new(center, generators, DMatrix::zeros(0, ng), DVector::zeros(0))
    }

    pub fn point(p: &[f64]) -> Self {
        let n = p.len();
        Self::zonotope(DVector::from_column_slice(p), DMatrix::zeros(n, 1)).expect("point is well-formed")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn is_zonotope(&self) -> bool {
        self.num_constraints() == 0
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn constraint_offset(&self) -> &DVector<f64> {
        &self.constraint_offset
    }

    /// Nonzero generator columns, the reference directions of the G-norm.
    pub fn nonzero_generators(&self) -> DMatrix<f64> {
        let cols: Vec<_> = (0..self.num_generators())
            .filter(|&k| self.generators.column(k).norm() > 0.0)
            .map(|k| self.generators.column(k).into_owned())
            .collect();
        if cols.is_empty() {
            return DMatrix::zeros(self.dim(), 0);
        }
        DMatrix::from_columns(&cols)
    }

    fn check_dim(&self, n: usize) -> Result<(), GeometryError> {
        if n != self.dim() {
            return Err(GeometryError::Dimension { expected: self.dim(), found: n });
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        if self.is_zonotope() {
            return false;
        }
        lp::min_residual(&self.constraint_matrix, &self.constraint_offset) > TOL_FEAS
    }

    /// Smallest `t` such that some `ξ` with `‖ξ‖∞ ≤ 1` satisfies both
    /// `c + Gξ = x` and `Aξ = b` up to `t` in every row.
    pub fn residual(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x.len())?;
        let n = self.dim();
        let nc = self.num_constraints();
        let ng = self.num_generators();
        let mut m = DMatrix::zeros(n + nc, ng);
        m.rows_mut(0, n).copy_from(&self.generators);
        m.rows_mut(n, nc).copy_from(&self.constraint_matrix);
        let mut rhs = DVector::zeros(n + nc);
        for k in 0..n {
            rhs[k] = x[k] - self.center[k];
        }
        for k in 0..nc {
            rhs[n + k] = self.constraint_offset[k];
        }
        Ok(lp::min_residual(&m, &rhs))
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.residual(x)? <= TOL_FEAS)
    }

    /// Infinity-norm ε-expansion.
    pub fn expand(&self, eps: f64) -> Result<Self, GeometryError> {
        if !(eps >= 0.0) {
            return Err(GeometryError::NegativeExpansion(eps));
        }
        let n = self.dim();
        let ng = self.num_generators();
        let mut g = DMatrix::zeros(n, ng + n);
        g.columns_mut(0, ng).copy_from(&self.generators);
        for k in 0..n {
            g[(k, ng + k)] = eps;
        }
        let mut a = DMatrix::zeros(self.num_constraints(), ng + n);
        a.columns_mut(0, ng).copy_from(&self.constraint_matrix);
        Self::new(self.center.clone(), g, a, self.constraint_offset.clone())
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, GeometryError> {
        self.check_dim(other.dim())?;
        let n = self.dim();
        let (na, nb) = (self.num_generators(), other.num_generators());
        let (ca, cb) = (self.num_constraints(), other.num_constraints());
        let mut g = DMatrix::zeros(n, na + nb);
        g.columns_mut(0, na).copy_from(&self.generators);
        let mut a = DMatrix::zeros(ca + cb + n, na + nb);
        a.view_mut((0, 0), (ca, na)).copy_from(&self.constraint_matrix);
        a.view_mut((ca, na), (cb, nb)).copy_from(&other.constraint_matrix);
        a.view_mut((ca + cb, 0), (n, na)).copy_from(&self.generators);
        a.view_mut((ca + cb, na), (n, nb)).copy_from(&(-&other.generators));
        let mut b = DVector::zeros(ca + cb + n);
        b.rows_mut(0, ca).copy_from(&self.constraint_offset);
        b.rows_mut(ca, cb).copy_from(&other.constraint_offset);
        b.rows_mut(ca + cb, n).copy_from(&(&other.center - &self.center));
        Self::new(self.center.clone(), g, a, b)
    }

    /// A maximizer of `d · x` over the set, or `None` when empty.
    pub fn support_point(&self, d: &[f64]) -> Result<Option<DVector<f64>>, GeometryError> {
        self.check_dim(d.len())?;
        let w = self.generators.transpose() * DVector::from_column_slice(d);
        Ok(lp::maximize(&w, &self.constraint_matrix, &self.constraint_offset).map(|xi| &self.center + &self.generators * xi))
    }

    /// Axis-aligned bounding box from 2n support queries.
    pub fn bounding_box(&self) -> Result<AxisBox, GeometryError> {
        let n = self.dim();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        if self.is_zonotope() {
            for k in 0..n {
                let r: f64 = self.generators.row(k).iter().map(|v| v.abs()).sum();
                lower[k] = self.center[k] - r;
                upper[k] = self.center[k] + r;
            }
            return AxisBox::new(lower, upper);
        }
        for k in 0..n {
            let mut d = vec![0.0; n];
            d[k] = 1.0;
            upper[k] = self.support_point(&d)?.ok_or(GeometryError::EmptySet)?[k];
            d[k] = -1.0;
            lower[k] = self.support_point(&d)?.ok_or(GeometryError::EmptySet)?[k];
        }
        AxisBox::new(lower, upper)
    }

    /// Counterclockwise vertices of a planar set.
    pub fn vertices_2d(&self) -> Result<VertexList, GeometryError> {
        if self.dim() != 2 {
            return Err(GeometryError::UnsupportedDimension(self.dim()));
        }
        let support = |d: Point2| -> Result<Option<Point2>, GeometryError> {
            Ok(self.support_point(&d)?.map(|p| [p[0], p[1]]))
        };
        let scale = 1.0 + self.generators.iter().map(|v| v.abs()).fold(0.0, f64::max) * self.num_generators() as f64;
        let tol = TOL_GEO * scale;
        let mut pts: Vec<Point2> = Vec::new();
        for d in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            pts.push(support(d)?.ok_or(GeometryError::EmptySet)?);
        }
        let mut hull = Polygon::hull(&pts, tol).ok_or(GeometryError::EmptySet)?;
        // Refine: every edge whose outward normal exposes a point beyond it
        // gets that point inserted, until no edge moves.
        loop {
            let verts = hull.vertices().to_vec();
            let mut normals: Vec<Point2> = Vec::new();
            match verts.len() {
                1 => break,
                2 => {
                    let e = polygon::sub(verts[1], verts[0]);
                    normals.push([e[1], -e[0]]);
                    normals.push([-e[1], e[0]]);
                }
                _ => {
                    for i in 0..verts.len() {
                        let e = polygon::sub(verts[(i + 1) % verts.len()], verts[i]);
                        normals.push([e[1], -e[0]]);
                    }
                }
            }
            let mut grew = false;
            for nrm in normals {
                let len = nrm[0].hypot(nrm[1]);
                if len == 0.0 {
                    continue;
                }
                let u = [nrm[0] / len, nrm[1] / len];
                let best = verts.iter().map(|v| polygon::dot(*v, u)).fold(f64::NEG_INFINITY, f64::max);
                if let Some(p) = support(u)? {
                    if polygon::dot(p, u) > best + tol {
                        pts.push(p);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
            hull = Polygon::hull(&pts, tol).ok_or(GeometryError::EmptySet)?;
        }
        Ok(hull.vertices().to_vec())
    }

    /// Planar polygon of the set. Plain zonotopes use the closed form.
    pub fn polygon(&self) -> Result<Polygon, GeometryError> {
        if self.dim() != 2 {
            return Err(GeometryError::UnsupportedDimension(self.dim()));
        }
        if self.is_zonotope() {
            return Ok(zonotope_polygon(&self.center, &self.generators));
        }
        if self.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        Ok(Polygon::from_ccw_unchecked(self.vertices_2d()?))
    }

    /// Lattice points `k · resolution` inside the bounding box that belong to
    /// the set. Planar sets test membership against their polygon.
    pub fn rasterize(&self, resolution: f64) -> Result<Vec<Vec<f64>>, GeometryError> {
        if !(resolution > 0.0) {
            return Err(GeometryError::NonPositiveResolution(resolution));
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let bb = self.bounding_box()?;
        let n = self.dim();
        let lo: Vec<i64> = bb.lower().iter().map(|v| (v / resolution - 1e-9).ceil() as i64).collect();
        let hi: Vec<i64> = bb.upper().iter().map(|v| (v / resolution + 1e-9).floor() as i64).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Ok(Vec::new());
        }
        let poly = if n == 2 { Some(self.polygon()?) } else { None };
        let mut out = Vec::new();
        let mut idx = lo.clone();
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| i as f64 * resolution).collect();
            let inside = match &poly {
                Some(p) => p.contains([x[0], x[1]], TOL_FEAS),
                None => self.contains(&x)?,
            };
            if inside {
                out.push(x);
            }
            // Odometer over the integer box, last axis slowest.
            let mut k = 0;
            loop {
                if k == n {
                    return Ok(out);
                }
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }

    /// Exact constrained-zonotope form of a planar convex hull.
    pub fn from_vertices(v: &[Point2]) -> Result<Self, GeometryError> {
        polytope_to_cz(v)
    }
}

/// Closed-form polygon of a planar zonotope: the support point in direction
/// `d` is `c + Σ sign(d·g_k) g_k`.
pub fn zonotope_polygon(center: &DVector<f64>, g: &DMatrix<f64>) -> Polygon {
    let c = [center[0], center[1]];
    let mut gens: Vec<Point2> = (0..g.ncols()).map(|k| [g[(0, k)], g[(1, k)]]).filter(|v| v[0] != 0.0 || v[1] != 0.0).collect();
    if gens.is_empty() {
        return Polygon::from_ccw_unchecked(vec![c]);
    }
    // Orient each generator into the upper half-plane and walk them by angle.
    for v in &mut gens {
        if v[1] < 0.0 || (v[1] == 0.0 && v[0] < 0.0) {
            *v = [-v[0], -v[1]];
        }
    }
    gens.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    let mut p = c;
    for v in &gens {
        p = [p[0] - v[0], p[1] - v[1]];
    }
    let mut pts = Vec::with_capacity(2 * gens.len());
    for v in gens.iter().chain(gens.iter()) {
        pts.push(p);
        let sign = if pts.len() <= gens.len() { 2.0 } else { -2.0 };
        p = [p[0] + sign * v[0], p[1] + sign * v[1]];
    }
    let scale = 1.0 + gens.iter().map(|v| v[0].abs() + v[1].abs()).sum::<f64>();
    Polygon::hull(&pts, TOL_FEAS * scale).expect("finite generators")
}

/// V-representation to constrained zonotope.
///
/// The hull is boxed by its bounding box `m + diag(w) ξ_x`; each facet
/// `n·x ≤ o` that cuts the box becomes an equality with one slack factor
/// whose state-space generator is zero.
pub fn polytope_to_cz(v: &[Point2]) -> Result<ConstrainedZonotope, GeometryError> {
    if v.is_empty() {
        return Err(GeometryError::NoVertices);
    }
    let hull = Polygon::hull(v, TOL_GEO * 1e-3).ok_or(GeometryError::NonFinite)?;
    let verts = hull.vertices();
    match verts.len() {
        1 => return Ok(ConstrainedZonotope::point(&verts[0])),
        2 => {
            let c = DVector::from_vec(vec![0.5 * (verts[0][0] + verts[1][0]), 0.5 * (verts[0][1] + verts[1][1])]);
            let g = DMatrix::from_column_slice(2, 1, &[0.5 * (verts[1][0] - verts[0][0]), 0.5 * (verts[1][1] - verts[0][1])]);
            return ConstrainedZonotope::zonotope(c, g);
        }
        _ => {}
    }
    let (lo, hi) = hull.bounding_box();
    let m = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let w = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])];
    let mut rows: Vec<(Point2, f64, f64)> = Vec::new();
    for h in hull.halfplanes() {
        let nm = polygon::dot(h.normal, m);
        let reach = h.normal[0].abs() * w[0] + h.normal[1].abs() * w[1];
        if h.offset >= nm + reach - TOL_GEO * (1.0 + reach) {
            // Facet coincides with a box side.
            continue;
        }
        let smax = h.offset - nm + reach;
        rows.push((h.normal, h.offset, smax));
    }
    let nc = rows.len();
    let ng = 2 + nc;
    let mut g = DMatrix::zeros(2, ng);
    g[(0, 0)] = w[0];
    g[(1, 1)] = w[1];
    let mut a = DMatrix::zeros(nc, ng);
    let mut b = DVector::zeros(nc);
    for (j, (nrm, off, smax)) in rows.iter().enumerate() {
        a[(j, 0)] = nrm[0] * w[0];
        a[(j, 1)] = nrm[1] * w[1];
        a[(j, 2 + j)] = 0.5 * smax;
        b[j] = off - polygon::dot(*nrm, m) - 0.5 * smax;
    }
    ConstrainedZonotope::new(DVector::from_vec(m.to_vec()), g, a, b)
}
