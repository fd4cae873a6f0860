//! Stochastic gradient optimization of quantizer locations and weights.
//!
//! Each step draws a batch `xi_1..xi_B` from the source, computes the
//! allocation probabilities `a_ij = p_j * softmin(d(xi_i, y_.)^r)_j` and moves
//!
//! ```text
//! y_j <- y_j - alpha_k * mean_i a_ij * grad_y d(xi_i, y_j)^r
//! p   <- k/(k+1) * p + 1/(k+1) * mean_i a_i.
//! ```
//!
//! With `lambda = 0` the allocation is one-hot at the nearest atom, which is
//! the classical competitive-learning update. Weights are floored at
//! [`WEIGHT_FLOOR`] and renormalized after every step.

use crate::error::{Error, Result};
use crate::geometry::DistanceSpec;
use crate::measures::{
    DiscreteMeasure, Point, Sampler, SourceSpec, STREAM_EVAL, STREAM_INIT, STREAM_MAIN,
};
use crate::objective;
use crate::softmin::{check_probability, gibbs_into};

/// Lower bound applied to every weight before renormalization.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Tolerance on `sum(weights) == 1` for [`QuantizerState`].
pub const STATE_WEIGHT_TOL: f64 = 1e-10;

/// Robbins-Monro step sizes `alpha_k = scale / (offset + k)^exponent`.
///
/// `exponent` is restricted to `(1/2, 1]`, which gives `sum alpha_k = inf`
/// and `sum alpha_k^2 < inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    scale: f64,
    offset: f64,
    exponent: f64,
}

impl LearningRate {
    pub const DEFAULT_OFFSET: f64 = 30.0;
    pub const DEFAULT_EXPONENT: f64 = 2.0 / 3.0;

    pub fn new(scale: f64, offset: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr scale must be positive, got {scale}"
            )));
        }
        if !(offset > 0.0 && offset.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr offset must be positive, got {offset}"
            )));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lr exponent must lie in (1/2, 1], got {exponent}"
            )));
        }
        Ok(Self {
            scale,
            offset,
            exponent,
        })
    }

    /// `sigma / (30 + k)^(2/3)` with `sigma` the source standard deviation.
    pub fn standard(sigma: f64) -> Result<Self> {
        Self::new(sigma, Self::DEFAULT_OFFSET, Self::DEFAULT_EXPONENT)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn at(&self, k: u64) -> f64 {
        self.scale / (self.offset + k as f64).powf(self.exponent)
    }
}

/// Locations `y_1..y_m`, weights `p_1..p_m` and the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerState {
    locations: Vec<Point>,
    weights: Vec<f64>,
    iteration: u64,
}

impl QuantizerState {
    pub fn new(locations: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptySupport);
        }
        if locations.len() != weights.len() {
            return Err(Error::LengthMismatch(locations.len(), weights.len()));
        }
        let d = locations[0].len();
        if d == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for y in &locations {
            if y.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: y.len(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("non-finite quantizer location".into()));
            }
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidWeights(
                "quantizer weights must be positive".into(),
            ));
        }
        crate::softmin::check_probability(&weights, STATE_WEIGHT_TOL)?;
        Ok(Self {
            locations,
            weights,
            iteration: 0,
        })
    }

    /// Locations with uniform weights `1/m`.
    pub fn uniform(locations: Vec<Point>) -> Result<Self> {
        let m = locations.len().max(1);
        Self::new(locations, vec![1.0 / m as f64; m])
    }

    pub fn with_iteration(mut self, k: u64) -> Self {
        self.iteration = k;
        self
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn m(&self) -> usize {
        self.locations.len()
    }

    pub fn dim(&self) -> usize {
        self.locations[0].len()
    }

    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.locations.clone(), self.weights.clone())
            .expect("quantizer state is always a valid measure")
    }
}

/// How the initial locations are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `m` i.i.d. draws from the source.
    SampleM,
    /// Midpoint quantiles `(j + 1/2)/m` of a pilot sample; 1-d sources only.
    QuantileSpread,
    Explicit(Vec<Point>),
}

/// Everything needed to reproduce one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m: usize,
    pub lambda: f64,
    pub distance: DistanceSpec,
    pub source: SourceSpec,
    pub iterations: u64,
    pub batch_size: usize,
    pub lr: LearningRate,
    pub seed: u64,
    pub init: Init,
    /// Initial weights; uniform when `None`.
    pub init_weights: Option<Vec<f64>>,
    /// Snapshot cadence in iterations; 0 keeps only the first and last state.
    pub snapshot_every: u64,
    /// Size of the fixed sample on which snapshot objectives are evaluated.
    pub eval_samples: usize,
}

impl RunConfig {
    pub const DEFAULT_ITERATIONS: u64 = 10_000;
    pub const DEFAULT_EVAL_SAMPLES: usize = 2_000;

    /// Squared Euclidean cost, batch size 1, the standard learning rate and
    /// sample initialization.
    pub fn new(source: SourceSpec, m: usize, lambda: f64) -> Result<Self> {
        source.validate()?;
        let cfg = Self {
            m,
            lambda,
            distance: DistanceSpec::euclidean(source.dim(), 2.0)?,
            lr: LearningRate::standard(source.scale())?,
            source,
            iterations: Self::DEFAULT_ITERATIONS,
            batch_size: 1,
            seed: 0,
            init: Init::SampleM,
            init_weights: None,
            snapshot_every: 0,
            eval_samples: Self::DEFAULT_EVAL_SAMPLES,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if self.distance.dim() != self.source.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim(),
                got: self.distance.dim(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        match &self.init {
            Init::QuantileSpread if self.source.dim() != 1 => {
                return Err(Error::InvalidConfig(
                    "quantile-spread initialization needs a 1-d source".into(),
                ))
            }
            Init::Explicit(locs) => {
                if locs.len() != self.m {
                    return Err(Error::InvalidConfig(format!(
                        "{} explicit locations for m = {}",
                        locs.len(),
                        self.m
                    )));
                }
                if let Some(y) = locs.iter().find(|y| y.len() != self.source.dim()) {
                    return Err(Error::DimensionMismatch {
                        expected: self.source.dim(),
                        got: y.len(),
                    });
                }
            }
            _ => {}
        }
        if let Some(w) = &self.init_weights {
            if w.len() != self.m {
                return Err(Error::LengthMismatch(self.m, w.len()));
            }
            if w.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidWeights(
                    "initial weights must be positive".into(),
                ));
            }
            check_probability(w, STATE_WEIGHT_TOL)?;
        }
        Ok(())
    }
}

/// Step size at iteration `k`.
pub fn lr(config: &RunConfig, k: u64) -> f64 {
    config.lr.at(k)
}

/// Reusable buffers for the inner loop.
pub struct Stepper {
    m: usize,
    distance: DistanceSpec,
    lambda: f64,
    lr: LearningRate,
    costs: Vec<f64>,
    alloc: Vec<f64>,
    sample_grad: Vec<f64>,
    scratch: Vec<f64>,
    grad: Vec<f64>,
    alloc_mean: Vec<f64>,
    skipped: u64,
}

impl Stepper {
    pub fn new(m: usize, distance: DistanceSpec, lambda: f64, lr: LearningRate) -> Self {
        let d = distance.dim();
        Self {
            m,
            lambda,
            lr,
            costs: vec![0.0; m],
            alloc: vec![0.0; m],
            sample_grad: vec![0.0; m * d],
            scratch: vec![0.0; d],
            grad: vec![0.0; m * d],
            alloc_mean: vec![0.0; m],
            skipped: 0,
            distance,
        }
    }

    pub fn from_config(config: &RunConfig) -> Self {
        Self::new(config.m, config.distance.clone(), config.lambda, config.lr)
    }

    /// Samples dropped so far because their gradient was not finite.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Batch-averaged location gradient (flat, `m * d`) and allocation
    /// probabilities. Returns the number of samples that entered the average.
    fn accumulate(&mut self, state: &QuantizerState, batch: &[f64]) -> usize {
        let d = self.distance.dim();
        self.grad.fill(0.0);
        self.alloc_mean.fill(0.0);
        let mut used = 0;
        'samples: for xi in batch.chunks_exact(d) {
            for (c, y) in self.costs.iter_mut().zip(&state.locations) {
                *c = self.distance.cost(y, xi);
            }
            if self.costs.iter().any(|c| !c.is_finite()) {
                self.skipped += 1;
                continue;
            }
            let s = gibbs_into(&self.costs, &state.weights, self.lambda, &mut self.alloc);
            if !s.is_finite() {
                self.skipped += 1;
                continue;
            }
            for j in 0..self.m {
                let block = &mut self.sample_grad[j * d..(j + 1) * d];
                let a = self.alloc[j];
                if a == 0.0 {
                    block.fill(0.0);
                    continue;
                }
                self.distance
                    .cost_grad_into(&state.locations[j], xi, &mut self.scratch);
                for (g, s) in block.iter_mut().zip(&self.scratch) {
                    *g = a * s;
                }
                if block.iter().any(|g| !g.is_finite()) {
                    self.skipped += 1;
                    continue 'samples;
                }
            }
            for (g, s) in self.grad.iter_mut().zip(&self.sample_grad) {
                *g += s;
            }
            for (a, s) in self.alloc_mean.iter_mut().zip(&self.alloc) {
                *a += s;
            }
            used += 1;
        }
        if used > 0 {
            let inv = 1.0 / used as f64;
            self.grad.iter_mut().for_each(|g| *g *= inv);
            self.alloc_mean.iter_mut().for_each(|a| *a *= inv);
        }
        used
    }

    /// One optimizer step on a flat batch (`len` a multiple of `d`).
    pub fn advance(&mut self, state: &mut QuantizerState, batch: &[f64]) {
        let d = self.distance.dim();
        let k = state.iteration;
        if self.accumulate(state, batch) > 0 {
            let alpha = self.lr.at(k);
            for (j, y) in state.locations.iter_mut().enumerate() {
                for (v, g) in y.iter_mut().zip(&self.grad[j * d..(j + 1) * d]) {
                    *v -= alpha * g;
                }
            }
            let kf = k as f64;
            let (keep, fresh) = (kf / (kf + 1.0), 1.0 / (kf + 1.0));
            for (p, a) in state.weights.iter_mut().zip(&self.alloc_mean) {
                *p = (keep * *p + fresh * a).max(WEIGHT_FLOOR);
            }
            let total: f64 = state.weights.iter().sum();
            state.weights.iter_mut().for_each(|p| *p /= total);
        }
        state.iteration += 1;
    }
}

fn flatten(batch: &[Point], dim: usize) -> Result<Vec<f64>> {
    if let Some(x) = batch.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(batch.iter().flatten().copied().collect())
}

fn check_state(state: &QuantizerState, config: &RunConfig) -> Result<()> {
    if state.m() != config.m {
        return Err(Error::LengthMismatch(config.m, state.m()));
    }
    if state.dim() != config.distance.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.distance.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// Batch-averaged location gradient, one row per atom. Samples with a
/// non-finite gradient are left out of the average.
pub fn batch_gradient(
    state: &QuantizerState,
    batch: &[Point],
    config: &RunConfig,
) -> Result<Vec<Point>> {
    check_state(state, config)?;
    let d = config.distance.dim();
    let flat = flatten(batch, d)?;
    let mut stepper = Stepper::from_config(config);
    stepper.accumulate(state, &flat);
    Ok(stepper.grad.chunks_exact(d).map(<[f64]>::to_vec).collect())
}

/// One step of the optimizer from `state` on the given batch.
pub fn step(state: &QuantizerState, batch: &[Point], config: &RunConfig) -> Result<QuantizerState> {
    check_state(state, config)?;
    let flat = flatten(batch, config.distance.dim())?;
    let mut next = state.clone();
    Stepper::from_config(config).advance(&mut next, &flat);
    Ok(next)
}

/// A recorded state with its objective on the run's evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub state: QuantizerState,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_state: QuantizerState,
    /// Number of source draws fed to the optimizer.
    pub consumed: u64,
    /// Mean of all draws fed to the optimizer.
    pub consumed_mean: Point,
    pub skipped: u64,
}

fn initial_locations(config: &RunConfig) -> Result<Vec<Point>> {
    match &config.init {
        Init::SampleM => Ok(Sampler::new(&config.source, config.seed, STREAM_INIT)?.draw(config.m)),
        Init::QuantileSpread => {
            let n = (200 * config.m).max(1_000);
            let mut pilot: Vec<f64> = Sampler::new(&config.source, config.seed, STREAM_INIT)?
                .draw(n)
                .into_iter()
                .map(|x| x[0])
                .collect();
            pilot.sort_by(f64::total_cmp);
            Ok((0..config.m)
                .map(|j| {
                    let q = (j as f64 + 0.5) / config.m as f64;
                    vec![pilot[((q * n as f64) as usize).min(n - 1)]]
                })
                .collect())
        }
        Init::Explicit(locs) => Ok(locs.clone()),
    }
}

/// Runs `config.iterations` steps from the configured initialization.
/// Deterministic in `config`.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    config.validate()?;
    let d = config.source.dim();
    let locations = initial_locations(config)?;
    let mut state = match &config.init_weights {
        Some(w) => QuantizerState::new(locations, w.clone())?,
        None => QuantizerState::uniform(locations)?,
    };
    let mut sampler = Sampler::new(&config.source, config.seed, STREAM_MAIN)?;
    let eval = Sampler::new(&config.source, config.seed, STREAM_EVAL)?.draw(config.eval_samples);
    let objective_of = |s: &QuantizerState| {
        if eval.is_empty() {
            f64::NAN
        } else {
            objective::mean_smooth_min(&eval, s, &config.distance, config.lambda)
        }
    };

    let mut stepper = Stepper::from_config(config);
    let mut batch = vec![0.0; config.batch_size * d];
    let mut sum = vec![0.0; d];
    let mut snapshots = vec![Snapshot {
        iteration: 0,
        objective: objective_of(&state),
        state: state.clone(),
    }];

    for _ in 0..config.iterations {
        sampler.fill(&mut batch);
        for xi in batch.chunks_exact(d) {
            for (s, v) in sum.iter_mut().zip(xi) {
                *s += v;
            }
        }
        stepper.advance(&mut state, &batch);
        let k = state.iteration;
        if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
            snapshots.push(Snapshot {
                iteration: k,
                objective: objective_of(&state),
                state: state.clone(),
            });
        }
    }
    if snapshots
        .last()
        .is_some_and(|s| s.iteration != state.iteration)
    {
        snapshots.push(Snapshot {
            iteration: state.iteration,
            objective: objective_of(&state),
            state: state.clone(),
        });
    }

    let consumed = config.iterations * config.batch_size as u64;
    let consumed_mean = if consumed > 0 {
        sum.iter().map(|s| s / consumed as f64).collect()
    } else {
        vec![f64::NAN; d]
    };
    Ok(Trajectory {
        snapshots,
        final_state: state,
        consumed,
        consumed_mean,
        skipped: stepper.skipped(),
    })
}

/// Single-linkage clusters of the locations at Euclidean threshold
/// `merge_radius`: the cluster count and each atom's cluster label, labels
/// numbered in order of first appearance.
pub fn distinct_quantizers(
    state: &QuantizerState,
    merge_radius: f64,
) -> Result<(usize, Vec<usize>)> {
    if !(merge_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "merge radius must be positive, got {merge_radius}"
        )));
    }
    let m = state.m();
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = merge_radius * merge_radius;
    for i in 0..m {
        for j in (i + 1)..m {
            let dist2: f64 = state.locations[i]
                .iter()
                .zip(&state.locations[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist2 <= r2 {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label_of_root = vec![usize::MAX; m];
    let mut count = 0;
    let labels = (0..m)
        .map(|i| {
            let r = root(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = count;
                count += 1;
            }
            label_of_root[r]
        })
        .collect();
    Ok((count, labels))
}

/// Default coincidence threshold: 1% of the mean coordinate standard
/// deviation of the source.
pub fn default_merge_radius(source: &SourceSpec) -> f64 {
    let s = source.coord_std();
    1e-2 * s.iter().sum::<f64>() / s.len() as f64
}
