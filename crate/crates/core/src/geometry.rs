//! Weighted p-norm distances and the gradient of their r-th power.

use crate::error::{Error, Result};

/// Ground distance `d(y, xi) = (sum_l w_l |y_l - xi_l|^p)^(1/p)` together with
/// the transport order `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpec {
    p: f64,
    coord_weights: Vec<f64>,
    r: f64,
}

impl DistanceSpec {
    pub fn new(p: f64, coord_weights: Vec<f64>, r: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidDistance(format!("p must be >= 1, got {p}")));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidDistance(format!("r must be >= 1, got {r}")));
        }
        if coord_weights.is_empty() {
            return Err(Error::InvalidDistance("no coordinates".into()));
        }
        if let Some(w) = coord_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDistance(format!(
                "coordinate weights must be positive, got {w}"
            )));
        }
        Ok(Self {
            p,
            coord_weights,
            r,
        })
    }

    /// Unweighted Euclidean distance in `dim` coordinates with order `r`.
    pub fn euclidean(dim: usize, r: f64) -> Result<Self> {
        Self::new(2.0, vec![1.0; dim], r)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn coord_weights(&self) -> &[f64] {
        &self.coord_weights
    }

    pub fn dim(&self) -> usize {
        self.coord_weights.len()
    }

    /// True for `p = r = 2`, where the center of a measure is its mean.
    pub fn is_squared_euclidean_like(&self) -> bool {
        self.p == 2.0 && self.r == 2.0
    }

    fn check(&self, y: &[f64], xi: &[f64]) -> Result<()> {
        for len in [y.len(), xi.len()] {
            if len != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// `sum_l w_l |y_l - xi_l|^p`, the p-th power of the distance.
    fn pow_sum(&self, y: &[f64], xi: &[f64]) -> f64 {
        let p = self.p;
        let it = self.coord_weights.iter().zip(y).zip(xi);
        if p == 2.0 {
            it.map(|((w, a), b)| w * (a - b) * (a - b)).sum()
        } else if p == 1.0 {
            it.map(|((w, a), b)| w * (a - b).abs()).sum()
        } else {
            it.map(|((w, a), b)| w * (a - b).abs().powf(p)).sum()
        }
    }

    /// Distance `d(y, xi)`.
    pub fn dist(&self, y: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(y, xi)?;
        Ok(self.pow_sum(y, xi).powf(1.0 / self.p))
    }

    /// `d(y, xi)^r`, the transport cost.
    pub fn dist_power(&self, y: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(y, xi)?;
        Ok(self.cost(y, xi))
    }

    /// Gradient of `d(y, xi)^r` with respect to `y`:
    /// `r w_l d^(r-p) |y_l - xi_l|^(p-1) sign(y_l - xi_l)`.
    /// Returns the zero subgradient at `y == xi`.
    pub fn dist_power_grad(&self, y: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check(y, xi)?;
        let mut g = vec![0.0; self.dim()];
        self.cost_grad_into(y, xi, &mut g);
        Ok(g)
    }

    /// Unchecked `d^r`.
    pub(crate) fn cost(&self, y: &[f64], xi: &[f64]) -> f64 {
        let s = self.pow_sum(y, xi);
        if self.r == self.p {
            s
        } else {
            s.powf(self.r / self.p)
        }
    }

    /// Unchecked gradient of `d^r` in `y`, written to `out`.
    pub(crate) fn cost_grad_into(&self, y: &[f64], xi: &[f64], out: &mut [f64]) {
        let s = self.pow_sum(y, xi);
        if s == 0.0 {
            out.fill(0.0);
            return;
        }
        let (p, r) = (self.p, self.r);
        // d^(r-p) = s^((r-p)/p)
        let scale = if r == p { r } else { r * s.powf((r - p) / p) };
        for (((o, w), a), b) in out.iter_mut().zip(&self.coord_weights).zip(y).zip(xi) {
            let diff = a - b;
            let dir = if p == 2.0 {
                diff
            } else if p == 1.0 {
                sign(diff)
            } else {
                diff.abs().powf(p - 1.0) * sign(diff)
            };
            *o = scale * w * dir;
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
