//! Covering the state box with overlapping zonotopes and constrained zonotopes.
//!
//! Random centers are joined to their nearest neighbors; each center gets
//! the zonotope `c_i + 0.5 G_i ξ`. Whatever of the box is left uncovered is
//! cut into convex pieces, each becoming a constrained zonotope. Finally
//! every set is expanded by ε so that neighbors overlap.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AxisBox, ConstrainedZonotope, GNorm, GeometryError, Point2, Polygon, TOL_GEO};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("invalid partition configuration: {0}")]
    Config(String),
    #[error("center {0} has no full-rank neighbor set")]
    Degenerate(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Number of zonotopes `N`.
    pub zonotopes: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub neighbor_count: usize,
}

impl PartitionConfig {
    pub fn validate(&self, n: usize) -> Result<(), PartitionError> {
        if self.zonotopes <= n {
            return Err(PartitionError::Config(format!("need more than {n} zonotopes, got {}", self.zonotopes)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(PartitionError::Config(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if self.neighbor_count < n {
            return Err(PartitionError::Config(format!("neighbor_count must be at least {n}")));
        }
        if self.neighbor_count >= self.zonotopes {
            return Err(PartitionError::Config("neighbor_count must be below the zonotope count".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Zonotope,
    ConstrainedZonotope,
}

/// One element of the cover, the set `⟦π_k⟧`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CellRecord", into = "CellRecord")]
pub struct Cell {
    symbol_index: usize,
    kind: CellKind,
    base: ConstrainedZonotope,
    body: ConstrainedZonotope,
    gnorm_generators: DMatrix<f64>,
    gnorm: GNorm,
    base_poly: Polygon,
    body_poly: Polygon,
    clip: Option<AxisBox>,
}

#[derive(Clone, Serialize, Deserialize)]
struct CellRecord {
    symbol_index: usize,
    kind: CellKind,
    base: ConstrainedZonotope,
    body: ConstrainedZonotope,
    /// Columns of the G-norm generator matrix.
    gnorm_generators: Vec<Vec<f64>>,
    /// Box the body was clipped to, already grown by the expansion radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clip: Option<AxisBox>,
}

impl TryFrom<CellRecord> for Cell {
    type Error = PartitionError;
    fn try_from(r: CellRecord) -> Result<Self, Self::Error> {
        let epsilon = infer_expansion(&r.base, &r.body);
        let mut cell = Cell::new(r.symbol_index, r.kind, r.base, epsilon)?;
        if let Some(b) = r.clip {
            cell.clip_to(b)?;
        }
        let n = cell.base.dim();
        if !r.gnorm_generators.is_empty() {
            let cols: Vec<DVector<f64>> = r.gnorm_generators.iter().map(|c| DVector::from_column_slice(c)).collect();
            if cols.iter().any(|c| c.len() != n) {
                return Err(GeometryError::Dimension { expected: n, found: cols[0].len() }.into());
            }
            cell.gnorm_generators = DMatrix::from_columns(&cols);
            cell.gnorm = GNorm::new(&cell.gnorm_generators)?;
        }
        cell.body = r.body;
        Ok(cell)
    }
}

impl From<Cell> for CellRecord {
    fn from(c: Cell) -> Self {
        CellRecord {
            symbol_index: c.symbol_index,
            kind: c.kind,
            gnorm_generators: (0..c.gnorm_generators.ncols())
                .map(|k| c.gnorm_generators.column(k).iter().copied().collect())
                .collect(),
            base: c.base,
            body: c.body,
            clip: c.clip,
        }
    }
}

/// The expansion radius is stored implicitly as the trailing identity block.
fn infer_expansion(base: &ConstrainedZonotope, body: &ConstrainedZonotope) -> f64 {
    let ng = base.num_generators();
    if body.num_generators() > ng {
        body.generators()[(0, ng)]
    } else {
        0.0
    }
}

impl Cell {
    /// Builds `E_ε(base)` and caches the planar polygons.
    pub fn new(symbol_index: usize, kind: CellKind, base: ConstrainedZonotope, epsilon: f64) -> Result<Self, PartitionError> {
        if base.dim() != 2 {
            return Err(GeometryError::UnsupportedDimension(base.dim()).into());
        }
        if kind == CellKind::Zonotope && !base.is_zonotope() {
            return Err(PartitionError::Config("zonotope cell carries constraints".into()));
        }
        let body = base.expand(epsilon)?;
        let base_poly = base.polygon()?;
        let body_poly = expand_polygon(&base_poly, epsilon);
        let gnorm_generators = base.nonzero_generators();
        let gnorm = GNorm::new(&gnorm_generators)?;
        Ok(Self { symbol_index, kind, base, body, gnorm_generators, gnorm, base_poly, body_poly, clip: None })
    }

    /// `E_ε(base) ∩ E_ε(X)`.
    pub fn clipped(symbol_index: usize, kind: CellKind, base: ConstrainedZonotope, epsilon: f64, x: &AxisBox) -> Result<Self, PartitionError> {
        let mut cell = Self::new(symbol_index, kind, base, epsilon)?;
        cell.clip_to(x.inflate(epsilon))?;
        Ok(cell)
    }

    fn clip_to(&mut self, b: AxisBox) -> Result<(), PartitionError> {
        let bp = b.polygon()?;
        if bp.contains_polygon(&self.body_poly, 0.0) {
            return Ok(());
        }
        self.body = self.body.intersect(&b.to_cz())?;
        self.body_poly = self.body_poly.intersection(&bp, TOL_GEO * 1e-3).ok_or(PartitionError::Degenerate(self.symbol_index))?;
        self.clip = Some(b);
        Ok(())
    }

    pub fn clip_box(&self) -> Option<&AxisBox> {
        self.clip.as_ref()
    }

    pub fn symbol_index(&self) -> usize {
        self.symbol_index
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn base(&self) -> &ConstrainedZonotope {
        &self.base
    }

    pub fn body(&self) -> &ConstrainedZonotope {
        &self.body
    }

    pub fn gnorm_generators(&self) -> &DMatrix<f64> {
        &self.gnorm_generators
    }

    pub fn gnorm(&self) -> &GNorm {
        &self.gnorm
    }

    pub fn base_polygon(&self) -> &Polygon {
        &self.base_poly
    }

    pub fn body_polygon(&self) -> &Polygon {
        &self.body_poly
    }

    /// Planar body membership with tolerance.
    pub fn body_contains(&self, x: Point2, tol: f64) -> bool {
        self.body_poly.contains(x, tol)
    }

    /// Human-readable symbol such as `π_3`.
    pub fn label(&self) -> String {
        format!("π_{}", self.symbol_index)
    }
}

/// Minkowski sum with the infinity-norm ball of radius `eps`.
pub fn expand_polygon(p: &Polygon, eps: f64) -> Polygon {
    if eps == 0.0 {
        return p.clone();
    }
    let mut pts = Vec::with_capacity(4 * p.len());
    for v in p.vertices() {
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            pts.push([v[0] + sx * eps, v[1] + sy * eps]);
        }
    }
    Polygon::hull(&pts, TOL_GEO * 1e-3).expect("finite vertices")
}

/// The complete cover plus the construction data needed for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub state_box: AxisBox,
    pub epsilon: f64,
    pub centers: Vec<Vec<f64>>,
    /// Neighbor indices chosen for each center.
    pub connections: Vec<Vec<usize>>,
    /// Zonotope cells first, then residual cells; symbols `1..=N+M`.
    pub cells: Vec<Cell>,
}

impl Partition {
    pub fn zonotope_count(&self) -> usize {
        self.cells.iter().filter(|c| c.kind == CellKind::Zonotope).count()
    }

    pub fn residual_count(&self) -> usize {
        self.cells.len() - self.zonotope_count()
    }

    /// Cell by symbol index.
    pub fn cell(&self, symbol: usize) -> Option<&Cell> {
        symbol.checked_sub(1).and_then(|i| self.cells.get(i))
    }
}

/// `N` distinct points drawn uniformly from the open box.
pub fn generate_centers(x: &AxisBox, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, PartitionError> {
    let dim = x.dim();
    if n <= dim {
        return Err(PartitionError::Config(format!("need more than {dim} centers, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let p: Vec<f64> = (0..dim)
            .map(|k| {
                let t: f64 = rng.gen();
                x.lower()[k] + t * (x.upper()[k] - x.lower()[k])
            })
            .collect();
        let inside = (0..dim).all(|k| p[k] > x.lower()[k] && p[k] < x.upper()[k]);
        if inside && !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn rank(m: &DMatrix<f64>) -> usize {
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    m.rank(1e-9 * scale)
}

fn neighbor_matrix(centers: &[Vec<f64>], i: usize, chosen: &[usize]) -> DMatrix<f64> {
    let n = centers[i].len();
    DMatrix::from_fn(n, chosen.len(), |r, c| centers[chosen[c]][r] - centers[i][r])
}

/// Neighbor sets and generator matrices `G_i = [c_k - c_i]`, full rank each.
pub fn connect_centers(centers: &[Vec<f64>], neighbor_count: usize) -> Result<(Vec<Vec<usize>>, Vec<DMatrix<f64>>), PartitionError> {
    let Some(first) = centers.first() else {
        return Err(PartitionError::Config("no centers".into()));
    };
    let n = first.len();
    if neighbor_count < n {
        return Err(PartitionError::Config(format!("neighbor_count must be at least {n}")));
    }
    if centers.len() <= neighbor_count {
        return Err(PartitionError::Config("not enough candidate neighbors".into()));
    }
    let mut sets = Vec::with_capacity(centers.len());
    let mut mats = Vec::with_capacity(centers.len());
    for i in 0..centers.len() {
        let mut order: Vec<usize> = (0..centers.len()).filter(|&k| k != i).collect();
        let dist = |k: usize| -> f64 { centers[k].iter().zip(&centers[i]).map(|(a, b)| (a - b) * (a - b)).sum() };
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = order[..neighbor_count].to_vec();
        let mut next = neighbor_count;
        let mut slot = neighbor_count - 1;
        // Replace from the farthest chosen neighbor inwards with the next
        // candidates until the columns span the space.
        while rank(&neighbor_matrix(centers, i, &chosen)) < n {
            if next >= order.len() {
                if slot == 0 {
                    return Err(PartitionError::Degenerate(i));
                }
                slot -= 1;
                next = neighbor_count;
                chosen = order[..neighbor_count].to_vec();
                continue;
            }
            chosen[slot] = order[next];
            next += 1;
        }
        mats.push(neighbor_matrix(centers, i, &chosen));
        sets.push(chosen);
    }
    Ok((sets, mats))
}

/// `Z_i = {c_i + 0.5 G_i ξ}`.
pub fn build_zonotopes(centers: &[Vec<f64>], gens: &[DMatrix<f64>]) -> Result<Vec<ConstrainedZonotope>, PartitionError> {
    if centers.len() != gens.len() {
        return Err(PartitionError::Config("centers and generator matrices differ in length".into()));
    }
    centers
        .iter()
        .zip(gens)
        .map(|(c, g)| Ok(ConstrainedZonotope::zonotope(DVector::from_column_slice(c), g * 0.5)?))
        .collect()
}

/// Convex pieces of `X \ ∪ Z_i` with disjoint interiors.
pub fn residual_pieces(x: &AxisBox, zonotopes: &[ConstrainedZonotope]) -> Result<Vec<Polygon>, PartitionError> {
    if x.dim() != 2 {
        return Err(GeometryError::UnsupportedDimension(x.dim()).into());
    }
    let scale = x.half_widths().iter().fold(1.0_f64, |a, v| a.max(*v));
    let tol = TOL_GEO * scale;
    let mut pieces = vec![x.polygon()?];
    for z in zonotopes {
        let zp = z.polygon()?;
        pieces = pieces.into_iter().flat_map(|p| p.difference(&zp, tol)).filter(|p| p.is_fat(tol)).collect();
    }
    Ok(merge_convex(pieces, tol))
}

/// Greedily fuses pairs whose union is convex (hull area equals the sum).
fn merge_convex(mut pieces: Vec<Polygon>, tol: f64) -> Vec<Polygon> {
    loop {
        let mut merged = None;
        'outer: for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if !pieces[i].intersects(&pieces[j], tol) {
                    continue;
                }
                let mut pts = pieces[i].vertices().to_vec();
                pts.extend_from_slice(pieces[j].vertices());
                let Some(h) = Polygon::hull(&pts, tol) else { continue };
                let sum = pieces[i].area() + pieces[j].area();
                if h.area() <= sum + tol * h.diameter().max(1.0) {
                    merged = Some((i, j, h));
                    break 'outer;
                }
            }
        }
        match merged {
            Some((i, j, h)) => {
                pieces.remove(j);
                pieces[i] = h;
            }
            None => break,
        }
    }
    pieces.sort_by(|a, b| {
        let (ma, mb) = (a.vertex_mean(), b.vertex_mean());
        ma[0].total_cmp(&mb[0]).then(ma[1].total_cmp(&mb[1]))
    });
    pieces
}

/// Residual covering as constrained zonotopes.
pub fn cover_residual(x: &AxisBox, zonotopes: &[ConstrainedZonotope]) -> Result<Vec<ConstrainedZonotope>, PartitionError> {
    residual_pieces(x, zonotopes)?
        .iter()
        .map(|p| Ok(ConstrainedZonotope::from_vertices(p.vertices())?))
        .collect()
}

/// Full cover: expanded zonotopes followed by expanded residual pieces.
pub fn partition(x: &AxisBox, cfg: &PartitionConfig) -> Result<Partition, PartitionError> {
    cfg.validate(x.dim())?;
    let centers = generate_centers(x, cfg.zonotopes, cfg.seed)?;
    let (connections, gens) = connect_centers(&centers, cfg.neighbor_count)?;
    let zonos = build_zonotopes(&centers, &gens)?;
    let residual = cover_residual(x, &zonos)?;
    let n_z = zonos.len();
    let kinds = std::iter::repeat(CellKind::Zonotope).take(n_z).chain(std::iter::repeat(CellKind::ConstrainedZonotope));
    let bases: Vec<(CellKind, ConstrainedZonotope)> = kinds.zip(zonos.into_iter().chain(residual)).collect();
    let cells = bases
        .into_par_iter()
        .enumerate()
        .map(|(i, (kind, base))| Cell::clipped(i + 1, kind, base, cfg.epsilon, x))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("partition: {} zonotopes, {} residual cells", n_z, cells.len() - n_z);
    Ok(Partition { state_box: x.clone(), epsilon: cfg.epsilon, centers, connections, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vehicle_box() -> AxisBox {
        AxisBox::planar([-15.0, -10.0], [15.0, 10.0]).unwrap()
    }

    #[test]
    fn centers_are_deterministic_and_inside() {
        let x = vehicle_box();
        let a = generate_centers(&x, 4, 7).unwrap();
        assert_eq!(a, generate_centers(&x, 4, 7).unwrap());
        assert_ne!(a, generate_centers(&x, 4, 8).unwrap());
        for c in &a {
            assert!(x.contains(c, 0.0));
        }
        assert!(generate_centers(&x, 2, 7).is_err());
    }

    #[test]
    fn collinear_centers_are_rejected() {
        let c: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(connect_centers(&c, 2), Err(PartitionError::Degenerate(_))));
    }

    #[test]
    fn rank_repair_swaps_in_a_farther_center() {
        // Nearest two neighbors of the origin are collinear with it.
        let c = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 5.0]];
        let (sets, mats) = connect_centers(&c, 2).unwrap();
        assert_eq!(sets[0], vec![1, 3]);
        assert_eq!(mats[0].rank(1e-9), 2);
    }

    #[test]
    fn zonotope_from_scaled_identity_is_unit_box() {
        let z = build_zonotopes(&[vec![0.0, 0.0]], &[DMatrix::identity(2, 2) * 2.0]).unwrap();
        assert!(z[0].contains(&[1.0, 1.0]).unwrap());
        assert!(!z[0].contains(&[1.01, 0.0]).unwrap());
    }

    #[test]
    fn connected_pair_midpoint_is_shared() {
        let c = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let (sets, g) = connect_centers(&c, 2).unwrap();
        let z = build_zonotopes(&c, &g).unwrap();
        assert!(sets[0].contains(&1) && sets[1].contains(&0));
        assert!(z[0].contains(&[1.0, 0.0]).unwrap());
        assert!(z[1].contains(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn covered_box_needs_no_residual() {
        let x = AxisBox::planar([-1.0, -1.0], [1.0, 1.0]).unwrap();
        let big = AxisBox::planar([-2.0, -2.0], [2.0, 2.0]).unwrap().to_cz();
        assert!(cover_residual(&x, &[big]).unwrap().is_empty());
    }

    #[test]
    fn inscribed_diamond_leaves_four_corners() {
        let x = AxisBox::planar([-1.0, -1.0], [1.0, 1.0]).unwrap();
        let diamond = ConstrainedZonotope::zonotope(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, -0.5])).unwrap();
        let pieces = residual_pieces(&x, &[diamond]).unwrap();
        assert_eq!(pieces.len(), 4);
        for p in &pieces {
            assert_eq!(p.len(), 3);
            assert!((p.area() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn serialized_cells_round_trip() {
        let cfg = PartitionConfig { zonotopes: 4, epsilon: 1.0, seed: 3, neighbor_count: 2 };
        let p = partition(&vehicle_box(), &cfg).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: Partition = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
    }
}
