//! Smooth minimum, softmin (Gibbs density) and their derivatives.
//!
//! For values `x` carried by a probability vector `p` and a regularization
//! `lambda > 0` the smooth minimum is
//!
//! ```text
//! smin(x) = -lambda * log( sum_j p_j * exp(-x_j / lambda) )
//! ```
//!
//! and `lambda = 0` selects the hard (essential) minimum over atoms with
//! positive weight. Every exponential is evaluated relative to the smallest
//! value `x*` among positively weighted atoms, so the largest exponent is zero
//! and nothing overflows however small `lambda` gets.
//!
//! The slice functions (`smooth_min_slice`, `gibbs_into`, ...) skip input
//! validation and are what the optimizer calls in its inner loop. The typed
//! functions taking [`WeightedValues`] validate first.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) == 1` for [`WeightedValues`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Values `x_j` paired with a probability vector `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedValues {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedValues {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        if values.len() != weights.len() {
            return Err(Error::LengthMismatch(values.len(), weights.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        check_probability(&weights, WEIGHT_SUM_TOL)?;
        Ok(Self { values, weights })
    }

    /// Values with the uniform weight `1/n` each.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptySupport);
        }
        Self::new(values, vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Checks that `weights` is a probability vector up to `tol` on the sum.
pub fn check_probability(weights: &[f64], tol: f64) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !w.is_finite() || **w < 0.0)
    {
        return Err(Error::InvalidWeights(format!("weight {i} is {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Regularization parameter `lambda >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Regularization(f64);

impl Regularization {
    /// The unregularized (hard minimum) case.
    pub const HARD: Regularization = Regularization(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self(lambda))
    }

    pub fn lambda(self) -> f64 {
        self.0
    }

    pub fn is_hard(self) -> bool {
        self.0 == 0.0
    }
}

/// Smallest value among atoms with positive weight, with its index.
fn positive_min(values: &[f64], weights: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&x, &p)) in values.iter().zip(weights).enumerate() {
        if p > 0.0 && best.is_none_or(|(_, b)| x < b) {
            best = Some((j, x));
        }
    }
    best
}

/// Index of the minimal value among atoms with positive weight; ties go to
/// the lowest index. Falls back to all atoms when every weight is zero.
pub fn hard_assignment_slice(values: &[f64], weights: &[f64]) -> Option<usize> {
    positive_min(values, weights).map(|(j, _)| j).or_else(|| {
        values
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, f64)>, (j, &x)| match acc {
                Some((_, b)) if b <= x => acc,
                _ => Some((j, x)),
            })
            .map(|(j, _)| j)
    })
}

/// Unchecked smooth minimum. `weights` must be nonnegative with at least one
/// positive entry.
pub fn smooth_min_slice(values: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let Some((_, shift)) = positive_min(values, weights) else {
        return f64::NAN;
    };
    if lambda == 0.0 {
        return shift;
    }
    let s: f64 = values
        .iter()
        .zip(weights)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&x, &p)| p * (-(x - shift) / lambda).exp())
        .sum();
    shift - lambda * s.ln()
}

/// Writes the allocation probabilities `p_j * softmin_j` into `out` and
/// returns the smooth minimum. For `lambda == 0` the output is one-hot at
/// [`hard_assignment_slice`].
pub fn gibbs_into(values: &[f64], weights: &[f64], lambda: f64, out: &mut [f64]) -> f64 {
    debug_assert_eq!(values.len(), out.len());
    let Some((jstar, shift)) = positive_min(values, weights) else {
        out.fill(f64::NAN);
        return f64::NAN;
    };
    if lambda == 0.0 {
        out.fill(0.0);
        out[jstar] = 1.0;
        return shift;
    }
    let mut s = 0.0;
    for ((o, &x), &p) in out.iter_mut().zip(values).zip(weights) {
        *o = if p > 0.0 {
            p * (-(x - shift) / lambda).exp()
        } else {
            0.0
        };
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
    shift - lambda * s.ln()
}

/// Smooth minimum of `wv` at regularization `reg`; the hard minimum for
/// `lambda = 0`. Zero-weight atoms never attain the minimum.
pub fn smooth_min(wv: &WeightedValues, reg: Regularization) -> f64 {
    smooth_min_slice(&wv.values, &wv.weights, reg.lambda())
}

/// Softmin (Gibbs density) `exp(-x_j/lambda) / sum_k p_k exp(-x_k/lambda)`.
///
/// Satisfies `sum_j p_j * softmin_j == 1`. A zero-weight atom whose value lies
/// far below the positively weighted ones can get an infinite density.
pub fn softmin(wv: &WeightedValues, reg: Regularization) -> Result<Vec<f64>> {
    if reg.is_hard() {
        return Err(Error::ZeroLambda);
    }
    let lambda = reg.lambda();
    let (_, shift) = positive_min(&wv.values, &wv.weights).ok_or(Error::EmptySupport)?;
    let e: Vec<f64> = wv
        .values
        .iter()
        .map(|&x| (-(x - shift) / lambda).exp())
        .collect();
    let s: f64 = e
        .iter()
        .zip(&wv.weights)
        .filter(|(_, &p)| p > 0.0)
        .map(|(e, p)| e * p)
        .sum();
    Ok(e.into_iter().map(|e| e / s).collect())
}

/// Index of the minimal positively weighted value, lowest index on ties.
pub fn hard_assignment(wv: &WeightedValues) -> usize {
    // WeightedValues is nonempty with weights summing to one.
    hard_assignment_slice(&wv.values, &wv.weights).unwrap_or(0)
}

/// Gradient of the smooth minimum: `g_j = p_j * softmin_j`, summing to one.
pub fn smin_gradient(wv: &WeightedValues, reg: Regularization) -> Result<Vec<f64>> {
    if reg.is_hard() {
        return Err(Error::ZeroLambda);
    }
    let mut g = vec![0.0; wv.len()];
    gibbs_into(&wv.values, &wv.weights, reg.lambda(), &mut g);
    Ok(g)
}

/// Hessian of the smooth minimum, `-(diag(g) - g g^T) / lambda`.
pub fn smin_hessian(wv: &WeightedValues, reg: Regularization) -> Result<DMatrix<f64>> {
    let g = smin_gradient(wv, reg)?;
    let n = g.len();
    let inv = 1.0 / reg.lambda();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { g[i] } else { 0.0 };
        -(diag - g[i] * g[j]) * inv
    }))
}

/// Conditional smooth minimum over a finite partition.
///
/// `blocks[j]` names the block of atom `j`. Each block becomes one atom whose
/// value is the smooth minimum over the block (with weights renormalized
/// inside the block) and whose weight is the block's total weight. Blocks of
/// total weight zero fall back to uniform weights inside the block.
pub fn conditional_smooth_min(
    wv: &WeightedValues,
    blocks: &[usize],
    n_blocks: usize,
    reg: Regularization,
) -> Result<WeightedValues> {
    if blocks.len() != wv.len() {
        return Err(Error::LengthMismatch(wv.len(), blocks.len()));
    }
    if let Some(&index) = blocks.iter().find(|&&b| b >= n_blocks) {
        return Err(Error::BlockOutOfRange {
            index,
            blocks: n_blocks,
        });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    for (j, &b) in blocks.iter().enumerate() {
        members[b].push(j);
    }
    let mut values = Vec::with_capacity(n_blocks);
    let mut weights = Vec::with_capacity(n_blocks);
    for (b, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::EmptyBlock(b));
        }
        let xs: Vec<f64> = idx.iter().map(|&j| wv.values[j]).collect();
        let total: f64 = idx.iter().map(|&j| wv.weights[j]).sum();
        let ps: Vec<f64> = if total > 0.0 {
            idx.iter().map(|&j| wv.weights[j] / total).collect()
        } else {
            vec![1.0 / idx.len() as f64; idx.len()]
        };
        values.push(smooth_min_slice(&xs, &ps, reg.lambda()));
        weights.push(total);
    }
    WeightedValues::new(values, weights)
}

/// Mean, population variance and third central moment of a value list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantSummary {
    pub mean: f64,
    pub variance: f64,
    pub third_cumulant: f64,
}

impl CumulantSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (m2, m3) = values.iter().fold((0.0, 0.0), |(a, b), &x| {
            let d = x - mean;
            (a + d * d, b + d * d * d)
        });
        Ok(Self {
            mean,
            variance: m2 / n,
            third_cumulant: m3 / n,
        })
    }
}

/// Large-lambda expansion of the smooth minimum under uniform weights:
/// `mean - var/(2 lambda) + k3/(6 lambda^2)`, truncated after `order` terms.
pub fn cumulant_expansion(values: &[f64], reg: Regularization, order: u32) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    if reg.is_hard() {
        return Err(Error::ZeroLambda);
    }
    let c = CumulantSummary::of(values)?;
    let lambda = reg.lambda();
    let mut out = c.mean;
    if order >= 2 {
        out -= c.variance / (2.0 * lambda);
    }
    if order >= 3 {
        out += c.third_cumulant / (6.0 * lambda * lambda);
    }
    Ok(out)
}
