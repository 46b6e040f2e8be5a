//! The quantizer relation `ℱ(x) = {q : ‖x - q‖_G ≤ r}`.

use super::Abstraction;
use crate::geometry::{Point2, TOL_FEAS};

#[derive(Clone, Copy, Debug)]
pub struct Quantizer<'a> {
    abs: &'a Abstraction,
    pub radius: f64,
}

impl<'a> Quantizer<'a> {
    pub fn new(abs: &'a Abstraction, radius: f64) -> Self {
        Self { abs, radius }
    }

    /// Related lattice points, ascending. Empty outside the cell body.
    pub fn quantize(&self, x: Point2) -> Vec<u32> {
        let mut out = Vec::new();
        self.quantize_into(x, &mut out);
        out
    }

    pub fn quantize_into(&self, x: Point2, out: &mut Vec<u32>) {
        out.clear();
        if !self.abs.body.contains(x, TOL_FEAS) {
            log::trace!("quantize: {x:?} outside cell {}", self.abs.cell_symbol);
            return;
        }
        self.abs.lattice.within(&self.abs.gnorm, x, self.radius, out);
    }
}
