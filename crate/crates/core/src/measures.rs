//! Source distributions, reproducible samplers and discrete measures.
//!
//! Every sampler is a ChaCha8 stream keyed by `(seed, stream)`. Distinct
//! consumers of randomness inside a run (initialization, SGD batches,
//! objective evaluation) read from distinct streams, so changing one of them
//! never shifts the others.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DistanceSpec;
use crate::sgd;

/// A point of `R^d`.
pub type Point = Vec<f64>;

/// Stream used for optimizer batches and plain `sample` calls.
pub const STREAM_MAIN: u64 = 0;
/// Stream used to initialize quantizer locations.
pub const STREAM_INIT: u64 = 1;
/// Stream used for objective evaluation samples.
pub const STREAM_EVAL: u64 = 2;

/// A named source distribution `P` on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Normal1d {
        mean: f64,
        std: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Gamma with shape `k` and scale `theta` (mean `k * theta`).
    Gamma {
        shape: f64,
        scale: f64,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    #[serde(rename = "mvnormal")]
    MvNormal {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Empirical {
        points: Vec<Point>,
    },
}

impl SourceSpec {
    pub fn dim(&self) -> usize {
        match self {
            SourceSpec::Normal1d { .. }
            | SourceSpec::Exponential { .. }
            | SourceSpec::Gamma { .. } => 1,
            SourceSpec::UniformBox { lo, .. } => lo.len(),
            SourceSpec::MvNormal { mean, .. } => mean.len(),
            SourceSpec::Empirical { points } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSource(msg));
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSource(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match self {
            SourceSpec::Normal1d { mean, std } => {
                if !mean.is_finite() {
                    return bad(format!("mean must be finite, got {mean}"));
                }
                positive("std", *std)
            }
            SourceSpec::Exponential { rate } => positive("rate", *rate),
            SourceSpec::Gamma { shape, scale } => {
                positive("shape", *shape)?;
                positive("scale", *scale)
            }
            SourceSpec::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad(format!(
                        "box bounds of length {} and {}",
                        lo.len(),
                        hi.len()
                    ));
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b && a.is_finite() && b.is_finite()))
                {
                    return bad("box needs lo < hi in every coordinate".into());
                }
                Ok(())
            }
            SourceSpec::MvNormal { mean, cov } => {
                mvnormal_factor(mean, cov)?;
                Ok(())
            }
            SourceSpec::Empirical { points } => {
                let d = self.dim();
                if points.is_empty() || d == 0 {
                    return bad("empirical source needs at least one point".into());
                }
                if points
                    .iter()
                    .any(|x| x.len() != d || x.iter().any(|v| !v.is_finite()))
                {
                    return bad("empirical points must be finite and of equal dimension".into());
                }
                Ok(())
            }
        }
    }

    /// Population mean.
    pub fn mean(&self) -> Point {
        match self {
            SourceSpec::Normal1d { mean, .. } => vec![*mean],
            SourceSpec::Exponential { rate } => vec![1.0 / rate],
            SourceSpec::Gamma { shape, scale } => vec![shape * scale],
            SourceSpec::UniformBox { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            SourceSpec::MvNormal { mean, .. } => mean.clone(),
            SourceSpec::Empirical { points } => column_mean(points),
        }
    }

    /// Population standard deviation of each coordinate.
    pub fn coord_std(&self) -> Vec<f64> {
        match self {
            SourceSpec::Normal1d { std, .. } => vec![*std],
            SourceSpec::Exponential { rate } => vec![1.0 / rate],
            SourceSpec::Gamma { shape, scale } => vec![shape.sqrt() * scale],
            SourceSpec::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (b - a) / 12f64.sqrt())
                .collect(),
            SourceSpec::MvNormal { cov, .. } => (0..cov.len()).map(|i| cov[i][i].sqrt()).collect(),
            SourceSpec::Empirical { points } => {
                let mu = column_mean(points);
                let n = points.len() as f64;
                (0..mu.len())
                    .map(|l| {
                        (points.iter().map(|x| (x[l] - mu[l]).powi(2)).sum::<f64>() / n).sqrt()
                    })
                    .collect()
            }
        }
    }

    /// Root mean coordinate variance; the `sigma` of the default learning rate.
    pub fn scale(&self) -> f64 {
        let s = self.coord_std();
        (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt()
    }

    /// Short human-readable description, e.g. `gamma(2,2)`.
    pub fn label(&self) -> String {
        match self {
            SourceSpec::Normal1d { mean, std } => format!("normal1d({mean},{std})"),
            SourceSpec::Exponential { rate } => format!("exponential({rate})"),
            SourceSpec::Gamma { shape, scale } => format!("gamma({shape},{scale})"),
            SourceSpec::UniformBox { lo, hi } => format!("uniform_box({lo:?},{hi:?})"),
            SourceSpec::MvNormal { mean, cov } => format!("mvnormal({mean:?},{cov:?})"),
            SourceSpec::Empirical { points } => format!("empirical({} points)", points.len()),
        }
    }
}

fn column_mean(points: &[Point]) -> Point {
    let d = points.first().map_or(0, Vec::len);
    let n = points.len() as f64;
    (0..d)
        .map(|l| points.iter().map(|x| x[l]).sum::<f64>() / n)
        .collect()
}

/// Lower Cholesky factor of `cov`, row-major.
fn mvnormal_factor(mean: &[f64], cov: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = mean.len();
    if d == 0 || cov.len() != d || cov.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidSource(format!(
            "covariance must be {d}x{d} for a mean of length {d}"
        )));
    }
    if mean
        .iter()
        .chain(cov.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidSource("non-finite mvnormal parameter".into()));
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                return Err(Error::InvalidSource("covariance is not symmetric".into()));
            }
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::InvalidSource("covariance is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| l[(i, j)])
        .collect())
}

enum Law {
    Normal(Normal<f64>),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Uniform(Vec<Uniform<f64>>),
    MvNormal { mean: Vec<f64>, factor: Vec<f64> },
    Empirical(Vec<Point>),
}

/// Reproducible i.i.d. sampler for a [`SourceSpec`].
pub struct Sampler {
    law: Law,
    dim: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(spec: &SourceSpec, seed: u64, stream: u64) -> Result<Self> {
        spec.validate()?;
        let invalid = |e: &dyn std::fmt::Display| Error::InvalidSource(e.to_string());
        let law = match spec {
            SourceSpec::Normal1d { mean, std } => {
                Law::Normal(Normal::new(*mean, *std).map_err(|e| invalid(&e))?)
            }
            SourceSpec::Exponential { rate } => Law::Exp(Exp::new(*rate).map_err(|e| invalid(&e))?),
            SourceSpec::Gamma { shape, scale } => {
                Law::Gamma(Gamma::new(*shape, *scale).map_err(|e| invalid(&e))?)
            }
            SourceSpec::UniformBox { lo, hi } => Law::Uniform(
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| Uniform::new(*a, *b).map_err(|e| invalid(&e)))
                    .collect::<Result<_>>()?,
            ),
            SourceSpec::MvNormal { mean, cov } => Law::MvNormal {
                mean: mean.clone(),
                factor: mvnormal_factor(mean, cov)?,
            },
            SourceSpec::Empirical { points } => Law::Empirical(points.clone()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self {
            law,
            dim: spec.dim(),
            rng,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn draw_into(&mut self, out: &mut [f64]) {
        let rng = &mut self.rng;
        match &self.law {
            Law::Normal(d) => out[0] = d.sample(rng),
            Law::Exp(d) => out[0] = d.sample(rng),
            Law::Gamma(d) => out[0] = d.sample(rng),
            Law::Uniform(ds) => {
                for (o, d) in out.iter_mut().zip(ds) {
                    *o = d.sample(rng);
                }
            }
            Law::MvNormal { mean, factor } => {
                let d = mean.len();
                let z: Vec<f64> = (0..d)
                    .map(|_| rng.sample(rand_distr::StandardNormal))
                    .collect();
                for i in 0..d {
                    out[i] = mean[i] + (0..=i).map(|j| factor[i * d + j] * z[j]).sum::<f64>();
                }
            }
            Law::Empirical(points) => {
                let k = rng.random_range(0..points.len());
                out.copy_from_slice(&points[k]);
            }
        }
    }

    /// Fills a flat buffer with `out.len() / dim` consecutive draws.
    pub fn fill(&mut self, out: &mut [f64]) {
        let d = self.dim;
        for chunk in out.chunks_exact_mut(d) {
            self.draw_into(chunk);
        }
    }

    pub fn draw(&mut self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| {
                let mut x = vec![0.0; self.dim];
                self.draw_into(&mut x);
                x
            })
            .collect()
    }
}

/// `n` i.i.d. draws from `spec`; identical arguments give identical output.
pub fn sample(spec: &SourceSpec, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample size must be at least 1".into(),
        ));
    }
    Ok(Sampler::new(spec, seed, STREAM_MAIN)?.draw(n))
}

/// Atoms in `R^d` carrying a probability vector. Atoms may coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch(atoms.len(), weights.len()));
        }
        let d = atoms[0].len();
        if let Some(a) = atoms.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.len(),
            });
        }
        crate::softmin::check_probability(&weights, 1e-10)?;
        Ok(Self { atoms, weights })
    }

    /// Probability vector on the ground set `{0, .., n-1}` (atom `i` at `i`).
    pub fn on_indices(weights: Vec<f64>) -> Result<Self> {
        let atoms = (0..weights.len()).map(|i| vec![i as f64]).collect();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Knots `(location, cumulative weight)` of the CDF of a 1-d measure, sorted
/// ascending with coincident atoms merged. The last cumulative weight is 1.
pub fn empirical_cdf(measure: &DiscreteMeasure) -> Result<Vec<(f64, f64)>> {
    if measure.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: measure.dim(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = measure
        .atoms
        .iter()
        .zip(&measure.weights)
        .map(|(a, &w)| (a[0], w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = measure.weights.iter().sum();
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    let mut acc = 0.0;
    for (x, w) in pairs {
        acc += w;
        match knots.last_mut() {
            Some(last) if last.0 == x => last.1 = acc / total,
            _ => knots.push((x, acc / total)),
        }
    }
    if let Some(last) = knots.last_mut() {
        last.1 = 1.0;
    }
    Ok(knots)
}

/// Full-batch descent iterations used by [`center_of_points`].
pub const CENTER_ITERATIONS: u64 = 2_000;

/// Center of the measure: the minimizer of `E d(x, xi)^r`, estimated from
/// `n` draws. For `p = r = 2` this is the sample mean.
pub fn center_of_measure(
    spec: &SourceSpec,
    dspec: &DistanceSpec,
    n: usize,
    seed: u64,
) -> Result<Point> {
    if spec.dim() != dspec.dim() {
        return Err(Error::DimensionMismatch {
            expected: dspec.dim(),
            got: spec.dim(),
        });
    }
    let points = sample(spec, n, seed)?;
    if dspec.is_squared_euclidean_like() {
        return Ok(column_mean(&points));
    }
    center_of_points(&points, dspec, spec.scale())
}

/// Minimizer of the empirical objective `mean_i d(x, xi_i)^r`, found by
/// running the quantizer optimizer with a single atom on the full sample as
/// one batch. `scale` is the spread of the sample.
pub fn center_of_points(points: &[Point], dspec: &DistanceSpec, scale: f64) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    let r = dspec.r();
    // Step sizes of order scale / |gradient| ~ scale^(2 - r) / r.
    let lr = sgd::LearningRate::new(0.5 * scale.powf(2.0 - r) / r, 30.0, 2.0 / 3.0)?;
    let mut state = sgd::QuantizerState::new(vec![points[0].clone()], vec![1.0])?;
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let mut stepper = sgd::Stepper::new(1, dspec.clone(), 0.0, lr);
    for _ in 0..CENTER_ITERATIONS {
        stepper.advance(&mut state, &flat);
    }
    Ok(state.locations()[0].clone())
}
