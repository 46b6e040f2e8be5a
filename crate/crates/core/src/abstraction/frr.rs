//! Monte-Carlo check of the feedback refinement conditions.
//!
//! For sampled `x`, a related `q̂ ∈ ℱ(x)` and an input `v` enabled at `q̂`:
//! (a) `v` must be applicable at `x`, that is `x(τ, x, v)` stays in the
//! cell; (b) `ℱ(x(τ, x, v)) ⊆ Δ(q̂, v)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Abstraction, SampledSystem};
use crate::geometry::{Point2, TOL_FEAS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrrWitness {
    pub x: Point2,
    pub state: u32,
    pub input: u32,
    /// Quantized successor missing from `Δ(q̂, v)`, if condition (b) failed.
    pub missing: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrrReport {
    pub samples: usize,
    /// Samples that produced a `(x, q̂, v)` triple.
    pub checked: usize,
    pub applicability_violations: usize,
    pub inclusion_violations: usize,
    pub witnesses: Vec<FrrWitness>,
}

impl FrrReport {
    pub fn violations(&self) -> usize {
        self.applicability_violations + self.inclusion_violations
    }
}

const MAX_WITNESSES: usize = 16;

pub fn check_frr(sys: &SampledSystem, abs: &Abstraction, samples: usize, seed: u64) -> FrrReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quant = abs.quantizer();
    let (lo, hi) = abs.body.bounding_box();
    let mut report = FrrReport { samples, ..FrrReport::default() };
    let mut related = Vec::new();
    let mut next = Vec::new();
    let mut drawn = 0;
    let mut attempts = 0usize;
    while drawn < samples && attempts < 100 * samples.max(1) {
        attempts += 1;
        let x = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
        if !abs.body.contains(x, 0.0) {
            continue;
        }
        drawn += 1;
        quant.quantize_into(x, &mut related);
        if related.is_empty() {
            continue;
        }
        let q = related[rng.gen_range(0..related.len())] as usize;
        let enabled: Vec<usize> = (0..abs.num_inputs()).filter(|&v| abs.enabled(q, v)).collect();
        if enabled.is_empty() {
            continue;
        }
        let v = enabled[rng.gen_range(0..enabled.len())];
        report.checked += 1;
        let xp = sys.integrate2(x, &abs.inputs.inputs[v]);
        if !abs.body.contains(xp, TOL_FEAS) {
            report.applicability_violations += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(FrrWitness { x, state: q as u32, input: v as u32, missing: None });
            }
            continue;
        }
        quant.quantize_into(xp, &mut next);
        let succ = abs.successors(q, v);
        if let Some(&m) = next.iter().find(|s| succ.binary_search(s).is_err()) {
            report.inclusion_violations += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(FrrWitness { x, state: q as u32, input: v as u32, missing: Some(m) });
            }
        }
    }
    report
}
