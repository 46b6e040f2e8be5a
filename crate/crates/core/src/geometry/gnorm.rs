//! The generator norm `‖v‖_G = max_k |v · g_k| / |g_k|`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GeometryError, HalfPlane, Point2, Polygon};

/// One-off evaluation of the G-norm.
pub fn g_norm(g: &DMatrix<f64>, v: &[f64]) -> Result<f64, GeometryError> {
    Ok(GNorm::new(g)?.eval(v)?)
}

/// Precomputed unit generator directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GNorm {
    dim: usize,
    /// Unit directions, one per generator column.
    units: Vec<Vec<f64>>,
}

impl GNorm {
    pub fn new(g: &DMatrix<f64>) -> Result<Self, GeometryError> {
        if g.ncols() == 0 {
            return Err(GeometryError::NoGenerators);
        }
        let mut units = Vec::with_capacity(g.ncols());
        for k in 0..g.ncols() {
            let col = g.column(k);
            let len = col.norm();
            if !(len > 0.0) {
                return Err(GeometryError::ZeroGenerator(k));
            }
            units.push(col.iter().map(|x| x / len).collect());
        }
        Ok(Self { dim: g.nrows(), units })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn units(&self) -> &[Vec<f64>] {
        &self.units
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64, GeometryError> {
        if v.len() != self.dim {
            return Err(GeometryError::Dimension { expected: self.dim, found: v.len() });
        }
        Ok(self.eval_unchecked(v))
    }

    #[inline]
    pub fn eval_unchecked(&self, v: &[f64]) -> f64 {
        self.units
            .iter()
            .map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn eval2(&self, v: Point2) -> f64 {
        self.units.iter().map(|u| (u[0] * v[0] + u[1] * v[1]).abs()).fold(0.0, f64::max)
    }

    /// Whether the unit ball is bounded (the directions span the space).
    pub fn is_bounded(&self) -> bool {
        let m = DMatrix::from_fn(self.dim, self.units.len(), |r, c| self.units[c][r]);
        m.rank(1e-9) == self.dim
    }

    /// The planar unit ball `{d : ‖d‖_G ≤ 1}` as a polygon.
    pub fn unit_ball(&self) -> Result<Polygon, GeometryError> {
        if self.dim != 2 {
            return Err(GeometryError::UnsupportedDimension(self.dim));
        }
        if !self.is_bounded() {
            return Err(GeometryError::EmptySet);
        }
        // Each slab |u·d| <= 1 is two half-planes; start from a box that
        // contains the ball for sure.
        let r = 1.0 / min_sine(&self.units) + 1.0;
        let mut poly = Polygon::rectangle([-r, -r], [r, r]);
        for u in &self.units {
            for s in [1.0, -1.0] {
                let h = HalfPlane::new([s * u[0], s * u[1]], 1.0);
                poly = poly.clip(&h, 1e-12).ok_or(GeometryError::EmptySet)?;
            }
        }
        Ok(poly)
    }
}

/// Smallest nonvanishing |sin| between any two directions; bounds the
/// extent of the unit ball.
fn min_sine(units: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in units.iter().enumerate() {
        for b in &units[i + 1..] {
            best = best.max((a[0] * b[1] - a[1] * b[0]).abs());
        }
    }
    best.max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(g_norm(&id, &[3.0, -4.0]).unwrap(), 4.0);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(g_norm(&g, &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(g_norm(&g, &[0.0, 0.0]).unwrap(), 0.0);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g_norm(&z, &[1.0, 1.0]), Err(GeometryError::ZeroGenerator(1)));
    }

    #[test]
    fn unit_ball_of_identity_is_square() {
        let n = GNorm::new(&DMatrix::identity(2, 2)).unwrap();
        let ball = n.unit_ball().unwrap();
        assert!((ball.area() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn unit_ball_boundary_has_norm_one() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 0.3, -0.5, 0.2, 1.0, 0.8]);
        let n = GNorm::new(&g).unwrap();
        for v in n.unit_ball().unwrap().vertices() {
            assert!((n.eval2(*v) - 1.0).abs() < 1e-9);
        }
    }
}
