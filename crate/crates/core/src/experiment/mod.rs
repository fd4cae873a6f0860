//! Experiment recipes: lambda sweeps of the optimizer with plot-ready
//! outputs and a summary table.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{center_of_measure, Point, Sampler, SourceSpec, STREAM_EVAL};
use crate::objective::soft_objective_on;
use crate::oracle::{closed_form_value, verify_suite, DiscreteInstance, VerificationReport};
use crate::sgd::{
    self, default_merge_radius, distinct_quantizers, Init, LearningRate, RunConfig, Trajectory,
};

pub use config::{parse_recipes, read_recipes};

/// Draws used to locate the center of the source.
pub const CENTER_SAMPLES: usize = 50_000;

/// Weight above which an atom counts as charged.
pub const CHARGED_WEIGHT: f64 = 1e-6;

/// Which files a recipe writes per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub trajectory: bool,
    pub final_state: bool,
    pub cdf: bool,
    pub tessellation_grid: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trajectory: true,
            final_state: true,
            cdf: true,
            tessellation_grid: true,
        }
    }
}

/// A lambda grid over a base configuration, repeated over seeds
/// `base.seed, base.seed + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub description: String,
    pub base: RunConfig,
    pub lambdas: Vec<f64>,
    pub replicates: usize,
    pub outputs: Outputs,
    /// Coincidence threshold for counting distinct quantizers; defaults to
    /// [`default_merge_radius`].
    pub merge_radius: Option<f64>,
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(Error::InvalidConfig(format!(
                "recipe name {:?} must be nonempty and use only [A-Za-z0-9._-]",
                self.name
            )));
        }
        if self.lambdas.is_empty() {
            return Err(Error::InvalidConfig("lambda grid is empty".into()));
        }
        if self.lambdas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "lambda grid must be strictly ascending".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if let Some(r) = self.merge_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "merge radius must be positive, got {r}"
                )));
            }
        }
        for &lambda in &self.lambdas {
            self.config(lambda, self.base.seed)?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicates as u64)
            .map(|i| self.base.seed + i)
            .collect()
    }

    pub fn merge_radius(&self) -> f64 {
        self.merge_radius
            .unwrap_or_else(|| default_merge_radius(&self.base.source))
    }

    /// Run configuration for one grid point.
    pub fn config(&self, lambda: f64, seed: u64) -> Result<RunConfig> {
        let mut cfg = self.base.clone();
        cfg.lambda = lambda;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Center of the source under the recipe's distance.
    pub fn center(&self) -> Result<Point> {
        center_of_measure(
            &self.base.source,
            &self.base.distance,
            CENTER_SAMPLES,
            self.base.seed,
        )
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub recipe: String,
    pub lambda: f64,
    pub seed: u64,
    pub distinct_count: usize,
    pub charged_count: usize,
    pub final_objective_at_lambda: f64,
    pub final_objective_at_zero: f64,
    pub center_distance: f64,
}

/// Everything produced by a single run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub labels: Vec<usize>,
    pub record: RunRecord,
}

/// Runs one grid point of a recipe without writing anything.
pub fn run_single(recipe: &Recipe, lambda: f64, seed: u64, center: &[f64]) -> Result<RunOutcome> {
    let config = recipe.config(lambda, seed)?;
    let trajectory = sgd::run(&config)?;
    let state = &trajectory.final_state;
    let (distinct_count, labels) = distinct_quantizers(state, recipe.merge_radius())?;
    let eval = Sampler::new(&config.source, seed, STREAM_EVAL)?.draw(config.eval_samples.max(1));
    let final_objective_at_lambda =
        soft_objective_on(&eval, state, &config.distance, lambda)?.value;
    let final_objective_at_zero = soft_objective_on(&eval, state, &config.distance, 0.0)?.value;
    let center_distance = state
        .locations()
        .iter()
        .map(|y| config.distance.dist(y, center))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let record = RunRecord {
        recipe: recipe.name.clone(),
        lambda,
        seed,
        distinct_count,
        charged_count: state
            .weights()
            .iter()
            .filter(|&&w| w > CHARGED_WEIGHT)
            .count(),
        final_objective_at_lambda,
        final_objective_at_zero,
        center_distance,
    };
    Ok(RunOutcome {
        config,
        trajectory,
        labels,
        record,
    })
}

/// Directory of one run below the recipe directory.
pub fn run_dir(recipe_dir: &Path, lambda: f64, seed: u64) -> PathBuf {
    recipe_dir.join(format!("lambda-{lambda}_seed-{seed}"))
}

/// Executes every (lambda, seed) pair of the recipe, writes the per-run
/// files and `summary.csv` under `outdir/<recipe name>`, and returns the
/// summary rows ordered by lambda, then seed.
pub fn run_recipe(recipe: &Recipe, outdir: &Path) -> Result<Vec<RunRecord>> {
    recipe.validate()?;
    let recipe_dir = outdir.join(&recipe.name);
    fs::create_dir_all(&recipe_dir)?;
    let center = recipe.center()?;
    let jobs: Vec<(f64, u64)> = recipe
        .lambdas
        .iter()
        .flat_map(|&l| recipe.seeds().into_iter().map(move |s| (l, s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(lambda, seed)| {
            let outcome = run_single(recipe, lambda, seed, &center)?;
            let dir = run_dir(&recipe_dir, lambda, seed);
            fs::create_dir_all(&dir)?;
            output::write_run(&dir, recipe, &outcome, &center)?;
            Ok(outcome.record)
        })
        .collect::<Result<Vec<_>>>()?;
    output::write_summary(&recipe_dir.join("summary.csv"), &records)?;
    Ok(records)
}

/// Runs the randomized oracle suite with `closed_form` as the value under
/// test and writes `verify-report.txt` into `outdir` when given.
pub fn verify_with(
    outdir: Option<&Path>,
    seed: u64,
    closed_form: fn(&DiscreteInstance) -> f64,
) -> Result<VerificationReport> {
    let report = verify_suite(seed, closed_form);
    if let Some(dir) = outdir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("verify-report.txt"), report.to_text())?;
    }
    Ok(report)
}

pub fn verify(outdir: Option<&Path>, seed: u64) -> Result<VerificationReport> {
    verify_with(outdir, seed, closed_form_value)
}

fn recipe(
    name: &str,
    description: &str,
    source: SourceSpec,
    m: usize,
    lambdas: &[f64],
    iterations: u64,
) -> Recipe {
    let mut base = RunConfig::new(source, m, 0.0).expect("built-in recipe");
    base.iterations = iterations;
    base.seed = 1;
    base.snapshot_every = iterations / 100;
    if base.source.dim() == 1 {
        base.init = Init::QuantileSpread;
    }
    Recipe {
        name: name.into(),
        description: description.into(),
        base,
        lambdas: lambdas.to_vec(),
        replicates: 1,
        outputs: Outputs::default(),
        merge_radius: None,
    }
}

/// The built-in experiments.
pub fn builtin_recipes() -> Vec<Recipe> {
    let unit_square = || SourceSpec::UniformBox {
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
    };
    let mut normal = recipe(
        "normal1d-m8",
        "standard normal, 8 quantizers",
        SourceSpec::Normal1d {
            mean: 0.0,
            std: 1.0,
        },
        8,
        &[0.0, 1.0, 10.0],
        200_000,
    );
    normal.replicates = 3;
    let exp = recipe(
        "exp1-m8",
        "exponential with rate 1, 8 quantizers",
        SourceSpec::Exponential { rate: 1.0 },
        8,
        &[0.0, 0.5, 1.0, 10.0],
        200_000,
    );
    let mut gamma = recipe(
        "gamma22-m8",
        "gamma with shape 2 and scale 2, 8 quantizers",
        SourceSpec::Gamma {
            shape: 2.0,
            scale: 2.0,
        },
        8,
        &[0.0, 1.0, 10.0, 20.0],
        200_000,
    );
    gamma.replicates = 3;
    let mut square4 = recipe(
        "uniform2d-m4",
        "uniform on the unit square, 4 quantizers",
        unit_square(),
        4,
        &[0.0, 0.1, 1.0],
        500_000,
    );
    square4.base.lr = LearningRate::new(1.0, 30.0, 2.0 / 3.0).expect("valid");
    let mut square16 = recipe(
        "uniform2d-m16",
        "uniform on the unit square, 16 quantizers",
        unit_square(),
        16,
        &[0.0, 0.037, 0.1, 1.0],
        2_000_000,
    );
    square16.base.lr = LearningRate::new(1.0, 30.0, 2.0 / 3.0).expect("valid");
    let mvnormal = recipe(
        "mvnormal2d-m100",
        "bivariate normal with covariance [[3, 1], [1, 3]], 100 quantizers",
        SourceSpec::MvNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![3.0, 1.0], vec![1.0, 3.0]],
        },
        100,
        &[0.0, 5.0, 10.0],
        200_000,
    );
    vec![normal, exp, gamma, square4, square16, mvnormal]
}

pub fn builtin(name: &str) -> Option<Recipe> {
    builtin_recipes().into_iter().find(|r| r.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_sorted() {
        let all = builtin_recipes();
        assert_eq!(all.len(), 6);
        for r in &all {
            r.validate().unwrap();
        }
        assert!(builtin("exp1-m8").is_some());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn recipe_validation() {
        let mut r = builtin("exp1-m8").unwrap();
        r.lambdas = vec![1.0, 0.5];
        assert!(r.validate().is_err());
        r.lambdas = vec![];
        assert!(r.validate().is_err());
        let mut r = builtin("exp1-m8").unwrap();
        r.replicates = 0;
        assert!(r.validate().is_err());
        let mut r = builtin("exp1-m8").unwrap();
        r.name = "../escape".into();
        assert!(r.validate().is_err());
    }

    #[test]
    fn seeds_follow_base() {
        let mut r = builtin("normal1d-m8").unwrap();
        r.base.seed = 10;
        assert_eq!(r.seeds(), vec![10, 11, 12]);
    }
}
