//! The regularized quantization objective, optimal weights, soft
//! tessellations and discrete divergences.

use crate::error::{Error, Result};
use crate::geometry::DistanceSpec;
use crate::measures::{sample, DiscreteMeasure, Point, SourceSpec};
use crate::sgd::QuantizerState;
use crate::softmin::{gibbs_into, smooth_min_slice};

/// Monte-Carlo estimate of `E_P smin_lambda(d(xi, y_.)^r; p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftObjectiveEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

fn check_dims(points: &[Point], state: &QuantizerState, dspec: &DistanceSpec) -> Result<()> {
    let d = dspec.dim();
    if state.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: state.dim(),
        });
    }
    if let Some(x) = points.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

fn costs_into(xi: &[f64], state: &QuantizerState, dspec: &DistanceSpec, out: &mut [f64]) {
    for (c, y) in out.iter_mut().zip(state.locations()) {
        *c = dspec.cost(y, xi);
    }
}

/// Unchecked sample mean of the smooth minimum, used for trajectory
/// snapshots.
pub(crate) fn mean_smooth_min(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
    lambda: f64,
) -> f64 {
    let mut costs = vec![0.0; state.m()];
    let total: f64 = points
        .iter()
        .map(|xi| {
            costs_into(xi, state, dspec, &mut costs);
            smooth_min_slice(&costs, state.weights(), lambda)
        })
        .sum();
    total / points.len() as f64
}

/// Objective evaluated on a given sample.
pub fn soft_objective_on(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
    lambda: f64,
) -> Result<SoftObjectiveEstimate> {
    check_lambda(lambda)?;
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    check_dims(points, state, dspec)?;
    let mut costs = vec![0.0; state.m()];
    let vals: Vec<f64> = points
        .iter()
        .map(|xi| {
            costs_into(xi, state, dspec, &mut costs);
            smooth_min_slice(&costs, state.weights(), lambda)
        })
        .collect();
    Ok(estimate(&vals))
}

fn estimate(vals: &[f64]) -> SoftObjectiveEstimate {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    SoftObjectiveEstimate {
        value: mean,
        std_error,
        n,
    }
}

/// Objective `E_P smin_lambda(d(xi, y_.)^r; p)` from `n` draws of the source.
/// For `lambda = 0` this is the classical quantization error.
pub fn soft_objective(
    state: &QuantizerState,
    spec: &SourceSpec,
    dspec: &DistanceSpec,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<SoftObjectiveEstimate> {
    soft_objective_on(&sample(spec, n, seed)?, state, dspec, lambda)
}

/// Sample mean of `sum_j p_j d(xi, y_j)^r`, the upper bound on the objective.
pub fn mean_weighted_cost_on(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    check_dims(points, state, dspec)?;
    let mut costs = vec![0.0; state.m()];
    let total: f64 = points
        .iter()
        .map(|xi| {
            costs_into(xi, state, dspec, &mut costs);
            costs
                .iter()
                .zip(state.weights())
                .map(|(c, p)| c * p)
                .sum::<f64>()
        })
        .sum();
    Ok(total / points.len() as f64)
}

/// Allocation probabilities `p_j * softmin_j` per point; one-hot rows at the
/// nearest atom for `lambda = 0`.
pub fn tessellation_probabilities(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    check_lambda(lambda)?;
    check_dims(points, state, dspec)?;
    let mut costs = vec![0.0; state.m()];
    Ok(points
        .iter()
        .map(|xi| {
            costs_into(xi, state, dspec, &mut costs);
            let mut row = vec![0.0; state.m()];
            gibbs_into(&costs, state.weights(), lambda, &mut row);
            row
        })
        .collect())
}

fn column_means(rows: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Density `q_j = mean_i softmin_j` of the best approximating weights
/// relative to the current ones, on a given sample. The reweighted
/// measure has weights `p_j * q_j`.
pub fn optimal_weights_on(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
    lambda: f64,
) -> Result<Vec<f64>> {
    if lambda == 0.0 {
        return Err(Error::ZeroLambda);
    }
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    let rows = tessellation_probabilities(points, state, dspec, lambda)?;
    Ok(column_means(&rows, state.m())
        .into_iter()
        .zip(state.weights())
        .map(|(a, p)| a / p)
        .collect())
}

/// [`optimal_weights_on`] for `n` draws of the source.
pub fn optimal_weights(
    state: &QuantizerState,
    spec: &SourceSpec,
    dspec: &DistanceSpec,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    optimal_weights_on(&sample(spec, n, seed)?, state, dspec, lambda)
}

/// Fraction of points nearest to each atom.
pub fn voronoi_weights_on(
    points: &[Point],
    state: &QuantizerState,
    dspec: &DistanceSpec,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    let rows = tessellation_probabilities(points, state, dspec, 0.0)?;
    Ok(column_means(&rows, state.m()))
}

/// [`voronoi_weights_on`] for `n` draws of the source.
pub fn voronoi_weights(
    state: &QuantizerState,
    spec: &SourceSpec,
    dspec: &DistanceSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    voronoi_weights_on(&sample(spec, n, seed)?, state, dspec)
}

/// Kullback-Leibler divergence, which is infinite when the first measure
/// charges a point the second does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    /// The value with `Infinite` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// `D(q || p) = sum_x q(x) log(q(x) / p(x))` over index-matched weights.
pub fn kl_weights(q: &[f64], p: &[f64]) -> Result<Divergence> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch(q.len(), p.len()));
    }
    let mut d = 0.0;
    for (&a, &b) in q.iter().zip(p) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(Divergence::Infinite);
        }
        d += a * (a / b).ln();
    }
    Ok(Divergence::Finite(d))
}

/// `D(q || p)` for measures on the same atoms.
pub fn kl_divergence(q: &DiscreteMeasure, p: &DiscreteMeasure) -> Result<Divergence> {
    if q.atoms() != p.atoms() {
        return Err(Error::GroundSetMismatch);
    }
    kl_weights(q.weights(), p.weights())
}

/// Shannon entropy `-sum p log p`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}

/// Cross-entropy `-sum q log p`; infinite off the support of `p`.
pub fn cross_entropy(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::LengthMismatch(q.len(), p.len()));
    }
    let mut h = 0.0;
    for (&a, &b) in q.iter().zip(p) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        h -= a * b.ln();
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(ys: &[f64]) -> QuantizerState {
        QuantizerState::uniform(ys.iter().map(|&y| vec![y]).collect()).unwrap()
    }

    fn normal() -> SourceSpec {
        SourceSpec::Normal1d {
            mean: 0.0,
            std: 1.0,
        }
    }

    #[test]
    fn single_atom_at_mean_gives_variance() {
        let e = DistanceSpec::euclidean(1, 2.0).unwrap();
        for lambda in [0.0, 0.3, 5.0] {
            let est = soft_objective(&line(&[0.0]), &normal(), &e, lambda, 50_000, 3).unwrap();
            assert!((est.value - 1.0).abs() < 4.0 * est.std_error, "{est:?}");
        }
    }

    #[test]
    fn collocated_atoms_are_lambda_free() {
        let e = DistanceSpec::euclidean(1, 2.0).unwrap();
        let state = QuantizerState::new(vec![vec![0.4]; 3], vec![0.2, 0.3, 0.5]).unwrap();
        let pts = sample(&normal(), 500, 1).unwrap();
        let a = soft_objective_on(&pts, &state, &e, 0.0).unwrap().value;
        for lambda in [0.1, 1.0, 100.0] {
            let b = soft_objective_on(&pts, &state, &e, lambda).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_weight_examples() {
        let e = DistanceSpec::euclidean(1, 2.0).unwrap();
        let q = optimal_weights(&line(&[0.7]), &normal(), &e, 1.0, 100, 0).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-12);
        let q = optimal_weights(&line(&[-1.0, 1.0]), &normal(), &e, 1.0, 40_000, 5).unwrap();
        assert!(
            (q[0] - 1.0).abs() < 0.03 && (q[1] - 1.0).abs() < 0.03,
            "{q:?}"
        );
        assert!(matches!(
            optimal_weights(&line(&[0.0]), &normal(), &e, 0.0, 10, 0),
            Err(Error::ZeroLambda)
        ));
    }

    #[test]
    fn voronoi_weight_examples() {
        let e = DistanceSpec::euclidean(1, 2.0).unwrap();
        assert_eq!(
            voronoi_weights(&line(&[3.0]), &normal(), &e, 50, 0).unwrap(),
            vec![1.0]
        );
        let v = voronoi_weights(&line(&[-1.0, 1.0]), &normal(), &e, 40_000, 2).unwrap();
        assert!((v[0] - 0.5).abs() < 0.01);
        let n = 200_000;
        let v = voronoi_weights(
            &line(&[0.0, 10.0]),
            &SourceSpec::Exponential { rate: 1.0 },
            &e,
            n,
            4,
        )
        .unwrap();
        // 1 - e^-5
        let expected = 0.993_262_053_000_914_5;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((v[0] - expected).abs() < 4.0 * se, "{v:?}");
    }

    #[test]
    fn tessellation_limits() {
        let e = DistanceSpec::euclidean(1, 2.0).unwrap();
        let state =
            QuantizerState::new(vec![vec![-1.0], vec![0.5], vec![2.0]], vec![0.5, 0.3, 0.2])
                .unwrap();
        let pts: Vec<Point> = [-2.0, 0.0, 0.4, 1.3, 3.0]
            .iter()
            .map(|&x| vec![x])
            .collect();
        let hard = tessellation_probabilities(&pts, &state, &e, 0.0).unwrap();
        let nearest = [0, 1, 1, 2, 2];
        for (row, &j) in hard.iter().zip(&nearest) {
            let mut want = vec![0.0; 3];
            want[j] = 1.0;
            assert_eq!(row, &want);
        }
        let flat = tessellation_probabilities(&pts, &state, &e, 1e6 * 25.0).unwrap();
        for row in flat {
            for (a, p) in row.iter().zip(state.weights()) {
                assert!((a - p).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let q = DiscreteMeasure::on_indices(vec![1.0, 0.0]).unwrap();
        let p = DiscreteMeasure::on_indices(vec![0.5, 0.5]).unwrap();
        let d = kl_divergence(&q, &p).unwrap().finite().unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(kl_divergence(&p, &q).unwrap(), Divergence::Infinite);
        assert_eq!(kl_divergence(&p, &p).unwrap(), Divergence::Finite(0.0));
        let other = DiscreteMeasure::new(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            kl_divergence(&p, &other),
            Err(Error::GroundSetMismatch)
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        let (q, p) = ([0.2, 0.5, 0.3], [0.6, 0.1, 0.3]);
        let d = kl_weights(&q, &p).unwrap().finite().unwrap();
        assert!((d - (cross_entropy(&q, &p).unwrap() - entropy(&q))).abs() < 1e-12);
    }
}
