//! TOML recipe files.
//!
//! ```toml
//! [[recipe]]
//! name = "exp-small"
//! lambdas = [0.0, 0.5, 1.0]
//! replicates = 2
//! m = 8
//! iterations = 50000
//! batch_size = 1
//! seed = 1
//! init = "quantile_spread"
//!
//! [recipe.source]
//! kind = "exponential"
//! rate = 1.0
//!
//! [recipe.lr]
//! scale = 1.0
//! ```
//!
//! Omitted keys take the defaults of [`RunConfig::new`]: squared Euclidean
//! cost, batch size 1, step sizes `sigma / (30 + k)^(2/3)`, sample
//! initialization and uniform initial weights.

use std::path::Path;

use serde::Deserialize;

use super::{Outputs, Recipe};
use crate::error::{Error, Result};
use crate::geometry::DistanceSpec;
use crate::measures::{Point, SourceSpec};
use crate::sgd::{Init, LearningRate, RunConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    recipe: Vec<RawRecipe>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecipe {
    name: String,
    #[serde(default)]
    description: String,
    lambdas: Vec<f64>,
    #[serde(default = "one")]
    replicates: usize,
    m: usize,
    source: SourceSpec,
    iterations: Option<u64>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    #[serde(default = "two")]
    p: f64,
    #[serde(default = "two")]
    r: f64,
    coord_weights: Option<Vec<f64>>,
    #[serde(default)]
    lr: RawLr,
    init: Option<String>,
    init_locations: Option<Vec<Point>>,
    init_weights: Option<Vec<f64>>,
    snapshot_every: Option<u64>,
    eval_samples: Option<usize>,
    merge_radius: Option<f64>,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLr {
    scale: Option<f64>,
    offset: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutputs {
    trajectory: bool,
    final_state: bool,
    cdf: bool,
    tessellation_grid: bool,
}

impl Default for RawOutputs {
    fn default() -> Self {
        let o = Outputs::default();
        Self {
            trajectory: o.trajectory,
            final_state: o.final_state,
            cdf: o.cdf,
            tessellation_grid: o.tessellation_grid,
        }
    }
}

fn one() -> usize {
    1
}

fn two() -> f64 {
    2.0
}

impl RawRecipe {
    fn build(self) -> Result<Recipe> {
        let ctx = |e: Error| Error::InvalidConfig(format!("recipe {:?}: {e}", self.name));
        self.source.validate().map_err(ctx)?;
        let d = self.source.dim();
        let mut base = RunConfig::new(self.source.clone(), self.m.max(1), 0.0).map_err(ctx)?;
        base.m = self.m;
        base.distance = DistanceSpec::new(
            self.p,
            self.coord_weights.clone().unwrap_or_else(|| vec![1.0; d]),
            self.r,
        )
        .map_err(ctx)?;
        base.lr = LearningRate::new(
            self.lr.scale.unwrap_or(self.source.scale()),
            self.lr.offset.unwrap_or(LearningRate::DEFAULT_OFFSET),
            self.lr.exponent.unwrap_or(LearningRate::DEFAULT_EXPONENT),
        )
        .map_err(ctx)?;
        if let Some(v) = self.iterations {
            base.iterations = v;
        }
        if let Some(v) = self.batch_size {
            base.batch_size = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.snapshot_every {
            base.snapshot_every = v;
        }
        if let Some(v) = self.eval_samples {
            base.eval_samples = v;
        }
        base.init_weights = self.init_weights.clone();
        base.init = match (self.init.as_deref(), self.init_locations.clone()) {
            (None | Some("explicit"), Some(locs)) => Init::Explicit(locs),
            (Some("explicit"), None) => {
                return Err(ctx(Error::InvalidConfig(
                    "init = \"explicit\" needs init_locations".into(),
                )))
            }
            (_, Some(_)) => {
                return Err(ctx(Error::InvalidConfig(
                    "init_locations requires init = \"explicit\"".into(),
                )))
            }
            (None | Some("sample"), None) => Init::SampleM,
            (Some("quantile_spread"), None) => Init::QuantileSpread,
            (Some(other), None) => {
                return Err(ctx(Error::InvalidConfig(format!(
                    "unknown init {other:?}; use sample, quantile_spread or explicit"
                ))))
            }
        };
        let recipe = Recipe {
            name: self.name.clone(),
            description: self.description.clone(),
            base,
            lambdas: self.lambdas.clone(),
            replicates: self.replicates,
            outputs: Outputs {
                trajectory: self.outputs.trajectory,
                final_state: self.outputs.final_state,
                cdf: self.outputs.cdf,
                tessellation_grid: self.outputs.tessellation_grid,
            },
            merge_radius: self.merge_radius,
        };
        recipe.validate().map_err(ctx)?;
        Ok(recipe)
    }
}

/// Parses and validates every `[[recipe]]` table of a TOML document.
pub fn parse_recipes(text: &str) -> Result<Vec<Recipe>> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    if raw.recipe.is_empty() {
        return Err(Error::InvalidConfig("no [[recipe]] tables".into()));
    }
    let recipes = raw
        .recipe
        .into_iter()
        .map(RawRecipe::build)
        .collect::<Result<Vec<_>>>()?;
    for (i, r) in recipes.iter().enumerate() {
        if recipes[..i].iter().any(|o| o.name == r.name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate recipe name {:?}",
                r.name
            )));
        }
    }
    Ok(recipes)
}

pub fn read_recipes(path: &Path) -> Result<Vec<Recipe>> {
    parse_recipes(&std::fs::read_to_string(path)?)
}
