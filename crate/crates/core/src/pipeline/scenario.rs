//! Scenario files (TOML, schema version 1).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::abstraction::{Dynamics, DynamicsRegistry, SampledSystem};
use crate::geometry::{AxisBox, ConstrainedZonotope, Point2};
use crate::graph::{ForbiddenRegions, ReachAvoidSpec, Symbol};
use crate::partition::PartitionConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// An obstacle given as a box or as polygon vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObstacleSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polygon { vertices: Vec<Point2> },
}

impl ObstacleSpec {
    pub fn to_cz(&self) -> Result<ConstrainedZonotope, PipelineError> {
        match self {
            ObstacleSpec::Box { lower, upper } => Ok(AxisBox::new(lower.clone(), upper.clone())?.to_cz()),
            ObstacleSpec::Polygon { vertices } => Ok(ConstrainedZonotope::from_vertices(vertices)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    SingleIntegrator,
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    /// Looked up by name in a [`DynamicsRegistry`].
    Custom { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub zonotopes: usize,
    #[serde(default = "default_neighbors")]
    pub neighbor_count: usize,
}

fn default_neighbors() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionSpec {
    /// Lattice spacing per plan stage; later stages use `default_spacing`.
    #[serde(default)]
    pub spacings: Vec<f64>,
    pub default_spacing: f64,
    #[serde(default = "one")]
    pub radius_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub tau: f64,
    pub epsilon: f64,
    pub input_spacing: f64,
    pub max_steps: usize,
    pub state_box: AxisBox,
    pub input_box: AxisBox,
    pub init_box: AxisBox,
    pub initial_state: Point2,
    pub goals: Vec<AxisBox>,
    /// Accepting symbol path such as `["pi0", "phi1"]`; defaults to the
    /// goals in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepting_path: Option<Vec<String>>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub dynamics: DynamicsSpec,
    pub partition: PartitionSpec,
    pub abstraction: AbstractionSpec,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if self.state_box.dim() != 2 || self.input_box.dim() != 2 {
            return bad("only planar state and input boxes are supported".into());
        }
        if !self.state_box.contains_box(&self.init_box) {
            return bad("init_box must lie inside state_box".into());
        }
        if self.goals.is_empty() {
            return bad("at least one goal is required".into());
        }
        if self.goals.iter().any(|g| !self.state_box.contains_box(g)) {
            return bad("goals must lie inside state_box".into());
        }
        if !self.init_box.contains(&self.initial_state, 0.0) {
            return bad("initial_state must lie in init_box".into());
        }
        for (what, v) in [("tau", self.tau), ("epsilon", self.epsilon), ("input_spacing", self.input_spacing)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{what} must be positive, got {v}"));
            }
        }
        let ab = &self.abstraction;
        if ab.spacings.iter().chain(std::iter::once(&ab.default_spacing)).any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("spacings must be positive".into());
        }
        if !(ab.radius_scale > 0.0) {
            return bad("radius_scale must be positive".into());
        }
        if self.partition.zonotopes <= 2 {
            return bad(format!("partition.zonotopes must exceed the state dimension, got {}", self.partition.zonotopes));
        }
        Ok(())
    }

    pub fn partition_config(&self) -> PartitionConfig {
        PartitionConfig {
            zonotopes: self.partition.zonotopes,
            epsilon: self.epsilon,
            seed: self.seed,
            neighbor_count: self.partition.neighbor_count,
        }
    }

    pub fn obstacles(&self) -> Result<ForbiddenRegions, PipelineError> {
        let regions = self.obstacles.iter().map(ObstacleSpec::to_cz).collect::<Result<Vec<_>, _>>()?;
        Ok(ForbiddenRegions::new(regions)?)
    }

    /// Obstacles grown by the worst inter-sample excursion `τ·u_max/2`.
    pub fn strict_obstacles(&self) -> Result<ForbiddenRegions, PipelineError> {
        Ok(self.obstacles()?.inflate(self.inter_sample_margin())?)
    }

    pub fn inter_sample_margin(&self) -> f64 {
        let umax = self.input_box.lower().iter().chain(self.input_box.upper()).map(|v| v.abs()).fold(0.0, f64::max);
        0.5 * self.tau * umax
    }

    pub fn spec(&self, obstacles: ForbiddenRegions) -> ReachAvoidSpec {
        ReachAvoidSpec { goals: self.goals.iter().map(AxisBox::to_cz).collect(), obstacles, domain: self.state_box.polygon().ok() }
    }

    pub fn accepting(&self) -> Result<Option<Vec<Symbol>>, PipelineError> {
        let Some(path) = &self.accepting_path else { return Ok(None) };
        Ok(Some(path.iter().map(|s| Symbol::parse(s)).collect::<Result<Vec<_>, _>>()?))
    }

    pub fn spacing(&self, stage: usize) -> f64 {
        self.abstraction.spacings.get(stage).copied().unwrap_or(self.abstraction.default_spacing)
    }

    pub fn min_spacing(&self) -> f64 {
        self.abstraction.spacings.iter().copied().fold(self.abstraction.default_spacing, f64::min)
    }

    pub fn sampled_system(&self, registry: &DynamicsRegistry) -> Result<SampledSystem, PipelineError> {
        let (dynamics, lipschitz) = match &self.dynamics {
            DynamicsSpec::SingleIntegrator => (Dynamics::SingleIntegrator { dim: 2 }, 0.0),
            DynamicsSpec::Affine { a, b, lipschitz } => {
                let mat = |rows: &Vec<Vec<f64>>, cols: usize| -> Result<DMatrix<f64>, PipelineError> {
                    if rows.len() != 2 || rows.iter().any(|r| r.len() != cols) {
                        return Err(PipelineError::Config(format!("affine matrices must be 2x{cols}")));
                    }
                    Ok(DMatrix::from_fn(2, cols, |i, j| rows[i][j]))
                };
                let d = Dynamics::Affine { a: mat(a, 2)?, b: mat(b, 2)? };
                let l = match lipschitz {
                    Some(l) => *l,
                    None => d.default_lipschitz().expect("affine has a Lipschitz bound"),
                };
                (d, l)
            }
            DynamicsSpec::Custom { name } => registry.get(name)?,
        };
        Ok(SampledSystem::new(dynamics, self.tau, lipschitz, self.state_box.clone(), self.input_box.clone())?)
    }

    /// The autonomous-vehicle scenario shipped as `configs/vehicle2d.toml`.
    pub fn vehicle2d() -> Self {
        Self::from_toml(VEHICLE2D).expect("bundled scenario is valid")
    }
}

pub const VEHICLE2D: &str = include_str!("../../../../configs/vehicle2d.toml");
