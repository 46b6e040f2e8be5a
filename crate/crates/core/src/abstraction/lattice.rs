//! Generator lattices inside a cell and a bucket index over them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::AbstractionError;
use crate::geometry::{GNorm, Point2, Polygon, TOL_FEAS};
use crate::partition::Cell;

/// `g_l = 𝐠_l / N_l` for one generator direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasicGenerator {
    /// Original generator `𝐠_l`.
    pub generator: Point2,
    /// Subdivision count `N_l`.
    pub count: usize,
    /// Basic generator `g_l`.
    pub step: Point2,
}

impl BasicGenerator {
    pub fn length(&self) -> f64 {
        self.step[0].hypot(self.step[1])
    }
}

/// `N_l = ceil(|𝐠_l| / spacing)`; rejects spacings coarser than `ε`.
pub fn basic_generators(g: &DMatrix<f64>, spacing: f64, epsilon: f64) -> Result<Vec<BasicGenerator>, AbstractionError> {
    if !(spacing > 0.0) {
        return Err(AbstractionError::Config(format!("spacing must be positive, got {spacing}")));
    }
    if spacing > epsilon {
        return Err(AbstractionError::Precision { spacing, epsilon });
    }
    if g.nrows() != 2 {
        return Err(AbstractionError::Config("lattices are planar".into()));
    }
    (0..g.ncols())
        .map(|k| {
            let v = [g[(0, k)], g[(1, k)]];
            let len = v[0].hypot(v[1]);
            if !(len > 0.0) {
                return Err(AbstractionError::Config(format!("generator {k} is zero")));
            }
            // Guard against ratios like 2.0000000000000004 adding a subdivision.
            let count = ((len / spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            Ok(BasicGenerator { generator: v, count, step: [v[0] / count as f64, v[1] / count as f64] })
        })
        .collect()
}

/// `𝒜(Z)`: lattice points of the cell body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateLattice {
    pub cell_symbol: usize,
    pub center: Point2,
    pub basic: Vec<BasicGenerator>,
    /// Largest `N̄_l` with `c ± N̄_l g_l` in the body, per direction.
    pub extents: Vec<usize>,
    pub points: Vec<Point2>,
    /// Integer coordinates in the basic generators, one per point.
    pub coords: Vec<Vec<i32>>,
    #[serde(skip)]
    index: Option<BucketIndex>,
}

impl StateLattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `max_l |g_l|`, the precision actually achieved.
    pub fn precision(&self) -> f64 {
        self.basic.iter().map(BasicGenerator::length).fold(0.0, f64::max)
    }

    pub(crate) fn index(&self) -> &BucketIndex {
        self.index.as_ref().expect("lattice index built at construction")
    }

    /// All points within G-norm `r` of `x`, ascending.
    pub fn within(&self, gnorm: &GNorm, x: Point2, r: f64, out: &mut Vec<u32>) {
        self.index().query(&self.points, gnorm, x, r, out);
    }

    /// Rebuilds the bucket index after deserialization.
    pub fn reindex(&mut self, gnorm: &GNorm) {
        self.index = Some(BucketIndex::new(&self.points, gnorm, self.precision()));
    }
}

/// Lattice over every pair of basic generators, clipped to the body.
///
/// With two generators this is the full set `{c + a g_1 + b g_2}` inside the
/// body; with more, the union over the pair planes.
pub fn approx_state_set(cell: &Cell, basic: &[BasicGenerator]) -> Result<StateLattice, AbstractionError> {
    let body = cell.body_polygon();
    let c = cell.base().center();
    let center = [c[0], c[1]];
    let ng = basic.len();
    if ng < 2 {
        return Err(AbstractionError::Config("need at least two generator directions".into()));
    }
    let scale = basic.iter().map(BasicGenerator::length).fold(0.0, f64::max);
    let mut found: BTreeMap<(i64, i64), Vec<i32>> = BTreeMap::new();
    for l in 0..ng {
        for k in l + 1..ng {
            let m = Matrix2::new(basic[l].step[0], basic[k].step[0], basic[l].step[1], basic[k].step[1]);
            let Some(inv) = m.try_inverse() else { continue };
            if m.determinant().abs() < 1e-12 * scale * scale {
                continue;
            }
            let (mut lo, mut hi) = ([i64::MAX; 2], [i64::MIN; 2]);
            for v in body.vertices() {
                let a = inv * Vector2::new(v[0] - center[0], v[1] - center[1]);
                for d in 0..2 {
                    lo[d] = lo[d].min(a[d].floor() as i64);
                    hi[d] = hi[d].max(a[d].ceil() as i64);
                }
            }
            for b in lo[1]..=hi[1] {
                for a in lo[0]..=hi[0] {
                    let p = [
                        center[0] + a as f64 * basic[l].step[0] + b as f64 * basic[k].step[0],
                        center[1] + a as f64 * basic[l].step[1] + b as f64 * basic[k].step[1],
                    ];
                    if !body.contains(p, TOL_FEAS) {
                        continue;
                    }
                    let key = ((p[0] * 1e8).round() as i64, (p[1] * 1e8).round() as i64);
                    found.entry(key).or_insert_with(|| {
                        let mut coord = vec![0; ng];
                        coord[l] = a as i32;
                        coord[k] = b as i32;
                        coord
                    });
                }
            }
        }
    }
    let mut entries: Vec<(Point2, Vec<i32>)> = found
        .into_values()
        .map(|coord| {
            let mut p = center;
            for (l, &a) in coord.iter().enumerate() {
                p[0] += a as f64 * basic[l].step[0];
                p[1] += a as f64 * basic[l].step[1];
            }
            (p, coord)
        })
        .collect();
    entries.sort_by(|a, b| a.1.cmp(&b.1));
    let extents = basic
        .iter()
        .map(|g| {
            let mut m = 0;
            while m < 1_000_000 {
                let step = (m + 1) as f64;
                let plus = [center[0] + step * g.step[0], center[1] + step * g.step[1]];
                let minus = [center[0] - step * g.step[0], center[1] - step * g.step[1]];
                if !(body.contains(plus, TOL_FEAS) && body.contains(minus, TOL_FEAS)) {
                    break;
                }
                m += 1;
            }
            m
        })
        .collect();
    let (points, coords): (Vec<Point2>, Vec<Vec<i32>>) = entries.into_iter().unzip();
    let mut lattice = StateLattice {
        cell_symbol: cell.symbol_index(),
        center,
        basic: basic.to_vec(),
        extents,
        points,
        coords,
        index: None,
    };
    lattice.reindex(cell.gnorm());
    Ok(lattice)
}

/// Uniform bucket grid over the lattice bounding box.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BucketIndex {
    origin: Point2,
    size: f64,
    nx: usize,
    ny: usize,
    /// Half-extents of the unit G-ball.
    reach: Point2,
    buckets: Vec<Vec<u32>>,
}

impl BucketIndex {
    fn new(points: &[Point2], gnorm: &GNorm, precision: f64) -> Self {
        let reach = gnorm
            .unit_ball()
            .map(|b| {
                let (lo, hi) = b.bounding_box();
                [hi[0].max(-lo[0]), hi[1].max(-lo[1])]
            })
            .unwrap_or([1.0, 1.0]);
        let size = if precision > 0.0 { precision } else { 1.0 };
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let nx = ((hi[0] - lo[0]) / size).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / size).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let bx = (((p[0] - lo[0]) / size).floor() as usize).min(nx - 1);
            let by = (((p[1] - lo[1]) / size).floor() as usize).min(ny - 1);
            buckets[by * nx + bx].push(i as u32);
        }
        Self { origin: lo, size, nx, ny, reach, buckets }
    }

    fn query(&self, points: &[Point2], gnorm: &GNorm, x: Point2, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let tol = TOL_FEAS * (1.0 + r);
        let span = |d: usize, n: usize| -> Option<(usize, usize)> {
            let lo = ((x[d] - r * self.reach[d] - tol - self.origin[d]) / self.size).floor();
            let hi = ((x[d] + r * self.reach[d] + tol - self.origin[d]) / self.size).floor();
            if hi < 0.0 || lo > (n - 1) as f64 {
                return None;
            }
            Some((lo.max(0.0) as usize, (hi as usize).min(n - 1)))
        };
        let (Some((x0, x1)), Some((y0, y1))) = (span(0, self.nx), span(1, self.ny)) else { return };
        for by in y0..=y1 {
            for bx in x0..=x1 {
                for &i in &self.buckets[by * self.nx + bx] {
                    let p = points[i as usize];
                    if gnorm.eval2([p[0] - x[0], p[1] - x[1]]) <= r + tol {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// The G-ball of radius `r` around `x`.
pub fn g_ball(unit: &Polygon, x: Point2, r: f64) -> Polygon {
    unit.scaled_translate(r, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;
    use crate::partition::CellKind;

    fn unit_cell() -> Cell {
        Cell::new(1, CellKind::Zonotope, AxisBox::planar([-1.0, -1.0], [1.0, 1.0]).unwrap().to_cz(), 0.0).unwrap()
    }

    #[test]
    fn basic_generator_examples() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let b = basic_generators(&g, 1.0, 1.0).unwrap();
        assert_eq!((b[0].count, b[1].count), (2, 2));
        assert_eq!(b[0].step, [1.0, 0.0]);
        let small = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.2]);
        assert!(basic_generators(&small, 0.5, 1.0).unwrap().iter().all(|b| b.count == 1));
        assert!(matches!(basic_generators(&g, 1.5, 1.0), Err(AbstractionError::Precision { .. })));
    }

    #[test]
    fn unit_box_half_spacing_has_25_points() {
        let cell = unit_cell();
        let b = basic_generators(cell.gnorm_generators(), 0.5, 1.0).unwrap();
        let lat = approx_state_set(&cell, &b).unwrap();
        assert_eq!(lat.len(), 25);
        let mut want: Vec<Point2> = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                want.push([i as f64 * 0.5, j as f64 * 0.5]);
            }
        }
        for w in want {
            assert!(lat.points.iter().any(|p| (p[0] - w[0]).abs() < 1e-12 && (p[1] - w[1]).abs() < 1e-12));
        }
        assert_eq!(lat.extents, vec![2, 2]);
    }

    #[test]
    fn index_query_matches_scan() {
        let cell = unit_cell();
        let b = basic_generators(cell.gnorm_generators(), 0.25, 1.0).unwrap();
        let lat = approx_state_set(&cell, &b).unwrap();
        let mut got = Vec::new();
        lat.within(cell.gnorm(), [0.1, -0.3], 0.4, &mut got);
        let want: Vec<u32> = (0..lat.len() as u32)
            .filter(|&i| {
                let p = lat.points[i as usize];
                cell.gnorm().eval2([p[0] - 0.1, p[1] + 0.3]) <= 0.4 + 1e-9
            })
            .collect();
        assert_eq!(got, want);
    }
}
