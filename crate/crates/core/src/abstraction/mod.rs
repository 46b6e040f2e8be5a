//! Finite abstractions of a sampled system inside one cell.
//!
//! States are the generator lattice of the cell, inputs a uniform grid over
//! the input box. A pair `(q, v)` is enabled when every concrete state the
//! quantizer can relate to `q` lands, after one step, at a point whose own
//! quantizer ball is still inside the cell; its successors are the lattice
//! points within the transition radius of the nominal successor `x(τ, q, v)`.

pub mod dynamics;
pub mod frr;
pub mod lattice;
pub mod quantizer;

use std::io::{self, Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{Dynamics, DynamicsRegistry, SampledSystem, VectorField};
pub use frr::{check_frr, FrrReport, FrrWitness};
pub use lattice::{approx_state_set, basic_generators, BasicGenerator, StateLattice};
pub use quantizer::Quantizer;

use crate::geometry::{AxisBox, GNorm, GeometryError, Point2, Polygon, TOL_FEAS};
use crate::partition::Cell;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("invalid abstraction configuration: {0}")]
    Config(String),
    #[error("lattice spacing {spacing} exceeds the precision bound {epsilon}")]
    Precision { spacing: f64, epsilon: f64 },
    #[error("unknown dynamics `{0}`")]
    UnknownDynamics(String),
    #[error("transition dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `U₂`, a uniform grid through the box center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputGrid {
    pub inputs: Vec<Vec<f64>>,
    /// Grid step, standing in for `η`.
    pub spacing: f64,
}

impl InputGrid {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Grid `center + k · spacing` restricted to the box, first axis slowest.
pub fn approx_input_set(u: &AxisBox, spacing: f64) -> Result<InputGrid, AbstractionError> {
    if !(spacing > 0.0) {
        return Err(AbstractionError::Config(format!("input spacing must be positive, got {spacing}")));
    }
    let center = u.center();
    let axes: Vec<Vec<f64>> = (0..u.dim())
        .map(|d| {
            let half = 0.5 * (u.upper()[d] - u.lower()[d]);
            let k = (half / spacing + 1e-9).floor() as i64;
            (-k..=k).map(|i| center[d] + i as f64 * spacing).collect()
        })
        .collect();
    let mut inputs: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        inputs = inputs
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    Ok(InputGrid { inputs, spacing })
}

/// `T_{τ,η}(Σ, Z)` for one cell, transitions in compressed rows.
#[derive(Clone, Debug)]
pub struct Abstraction {
    pub cell_symbol: usize,
    pub lattice: StateLattice,
    pub inputs: InputGrid,
    /// Row `q * m + v` spans `succ[offsets[row]..offsets[row + 1]]`.
    offsets: Vec<usize>,
    succ: Vec<u32>,
    pub init_states: Vec<u32>,
    /// Cell precision `max_l |g_l|`.
    pub epsilon: f64,
    /// Transition radius `(0.5 + e^{Lτ}) ε`.
    pub radius: f64,
    /// Radius of the quantizer relation.
    pub quantizer_radius: f64,
    pub growth: f64,
    pub gnorm: GNorm,
    pub body: Polygon,
    pub unit_ball: Polygon,
    pub build_seconds: f64,
}

impl Abstraction {
    pub fn num_states(&self) -> usize {
        self.lattice.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    #[inline]
    pub fn successors(&self, q: usize, v: usize) -> &[u32] {
        let row = q * self.num_inputs() + v;
        &self.succ[self.offsets[row]..self.offsets[row + 1]]
    }

    pub fn enabled(&self, q: usize, v: usize) -> bool {
        !self.successors(q, v).is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.len()
    }

    pub fn point(&self, q: usize) -> Point2 {
        self.lattice.points[q]
    }

    /// The quantizer `ℱ` at this abstraction's radius.
    pub fn quantizer(&self) -> Quantizer<'_> {
        Quantizer::new(self, self.quantizer_radius)
    }

    /// G-ball of radius `r` around `x`.
    pub fn ball(&self, x: Point2, r: f64) -> Polygon {
        lattice::g_ball(&self.unit_ball, x, r)
    }

    /// Marks the lattice points inside `region` as initial states.
    pub fn set_init_states(&mut self, region: &Polygon, exclude: &[bool]) {
        self.init_states = (0..self.num_states() as u32)
            .filter(|&q| region.contains(self.point(q as usize), TOL_FEAS) && !exclude.get(q as usize).copied().unwrap_or(false))
            .collect();
    }

    /// Versioned binary dump: magic, version, counts, then for every
    /// `(q, v)` row its length and delta-encoded successors, all LEB128.
    pub fn write_transitions<W: Write>(&self, mut w: W) -> Result<(), AbstractionError> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.num_states() as u64).to_le_bytes())?;
        w.write_all(&(self.num_inputs() as u64).to_le_bytes())?;
        w.write_all(&(self.transition_count() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.succ.len() * 2);
        for row in 0..self.offsets.len() - 1 {
            let s = &self.succ[self.offsets[row]..self.offsets[row + 1]];
            put_varint(&mut buf, s.len() as u64);
            let mut prev = 0u64;
            for (i, &x) in s.iter().enumerate() {
                let x = x as u64;
                put_varint(&mut buf, if i == 0 { x } else { x - prev });
                prev = x;
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

pub const DUMP_MAGIC: &[u8; 4] = b"ZSTD";
pub const DUMP_VERSION: u32 = 1;

fn put_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

fn get_varint(data: &[u8], pos: &mut usize) -> Result<u64, AbstractionError> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let byte = *data.get(*pos).ok_or_else(|| AbstractionError::Dump("truncated".into()))?;
        *pos += 1;
        v |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
        if shift > 63 {
            return Err(AbstractionError::Dump("varint overflow".into()));
        }
    }
}

/// Transition table as read back from a dump.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionTable {
    pub num_states: usize,
    pub num_inputs: usize,
    /// Successors per `(q, v)` row.
    pub rows: Vec<Vec<u32>>,
}

pub fn read_transitions<R: Read>(mut r: R) -> Result<TransitionTable, AbstractionError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 32 || &data[..4] != DUMP_MAGIC {
        return Err(AbstractionError::Dump("bad magic".into()));
    }
    let word = |at: usize| u64::from_le_bytes(data[at..at + 8].try_into().expect("8 bytes"));
    let version = u32::from_le_bytes(data[4..8].try_into().expect("4 bytes"));
    if version != DUMP_VERSION {
        return Err(AbstractionError::Dump(format!("unsupported version {version}")));
    }
    let (ns, ni, nt) = (word(8) as usize, word(16) as usize, word(24) as usize);
    let mut pos = 32;
    let mut rows = Vec::with_capacity(ns * ni);
    let mut total = 0;
    for _ in 0..ns * ni {
        let len = get_varint(&data, &mut pos)? as usize;
        let mut row = Vec::with_capacity(len);
        let mut prev = 0u64;
        for i in 0..len {
            let d = get_varint(&data, &mut pos)?;
            prev = if i == 0 { d } else { prev + d };
            row.push(prev as u32);
        }
        total += len;
        rows.push(row);
    }
    if total != nt || pos != data.len() {
        return Err(AbstractionError::Dump("count mismatch".into()));
    }
    Ok(TransitionTable { num_states: ns, num_inputs: ni, rows })
}

/// Knobs of [`build_abstraction`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbstractionParams {
    /// Multiplies the transition radius; 1 is the sound setting.
    pub radius_scale: f64,
}

impl Default for AbstractionParams {
    fn default() -> Self {
        Self { radius_scale: 1.0 }
    }
}

/// Transition radius and quantizer radius for precision `eps` and growth
/// factor `e^{Lτ}`. The quantizer radius is the lattice covering radius
/// `eps / 2`, so a quantized concrete successor lands within
/// `(1 + e^{Lτ}) eps / 2` of the nominal one, inside the transition radius.
pub fn radii(eps: f64, growth: f64) -> (f64, f64) {
    ((0.5 + growth) * eps, 0.5 * eps)
}

pub fn build_abstraction(
    sys: &SampledSystem,
    cell: &Cell,
    lattice: StateLattice,
    inputs: InputGrid,
    params: AbstractionParams,
) -> Result<Abstraction, AbstractionError> {
    let start = Instant::now();
    if lattice.cell_symbol != cell.symbol_index() {
        return Err(AbstractionError::Config("lattice built for another cell".into()));
    }
    if inputs.inputs.iter().any(|u| u.len() != sys.input_box.dim()) {
        return Err(AbstractionError::Config("input dimension mismatch".into()));
    }
    let growth = sys.growth();
    let epsilon = lattice.precision();
    let (radius, quantizer_radius) = radii(epsilon, growth);
    let radius = radius * params.radius_scale;
    let gnorm = cell.gnorm().clone();
    let unit_ball = gnorm.unit_ball()?;
    let body = cell.body_polygon().clone();
    // Successors stay quantizable: their quantizer ball must fit in the body
    // for the covering bound to hold on the clipped lattice.
    let spread = (growth + 1.0) * quantizer_radius;
    let rows: Vec<Vec<u32>> = (0..lattice.len())
        .into_par_iter()
        .flat_map_iter(|q| {
            let p = lattice.points[q];
            let mut scratch = Vec::new();
            let (lattice, inputs, body, unit_ball, gnorm) = (&lattice, &inputs, &body, &unit_ball, &gnorm);
            inputs.inputs.iter().map(move |u| {
                let xp = sys.integrate2(p, u);
                let reach = lattice::g_ball(unit_ball, xp, spread);
                if !body.contains_polygon(&reach, TOL_FEAS) {
                    return Vec::new();
                }
                lattice.within(gnorm, xp, radius, &mut scratch);
                scratch.clone()
            })
        })
        .collect();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let mut succ = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for r in rows {
        succ.extend_from_slice(&r);
        offsets.push(succ.len());
    }
    Ok(Abstraction {
        cell_symbol: cell.symbol_index(),
        lattice,
        inputs,
        offsets,
        succ,
        init_states: Vec::new(),
        epsilon,
        radius,
        quantizer_radius,
        growth,
        gnorm,
        body,
        unit_ball,
        build_seconds: start.elapsed().as_secs_f64(),
    })
}
