//! Brute-force checks of the closed-form regularized transport value on small
//! fully discrete instances.
//!
//! With the first marginal `P` fixed, the inner problem
//!
//! ```text
//! min_pi  E_pi c + lambda * D(pi || P x Q)
//! ```
//!
//! separates across the rows of `pi`. Each row is a convex problem on the
//! simplex over `supp Q`, solved here by exponentiated-gradient descent with
//! backtracking, independently of the closed form
//! `sum_i P_i smin_lambda(c_i.; Q)`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::objective::{entropy, kl_weights, Divergence};
use crate::softmin::{
    check_probability, gibbs_into, smin_gradient, smooth_min, smooth_min_slice, softmin,
    Regularization, WeightedValues,
};

/// Tolerance on the total mass of a plan.
pub const PLAN_MASS_TOL: f64 = 1e-12;

/// Tolerance on the marginals of a feasible plan.
pub const MARGINAL_TOL: f64 = 1e-8;

/// Joint probability matrix, row-major `n x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransportPlan {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptySupport);
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch(rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        check_probability(&data, PLAN_MASS_TOL)?;
        Ok(Self { rows, cols, data })
    }

    /// Product measure `p x q`.
    pub fn product(p: &[f64], q: &[f64]) -> Result<Self> {
        let data = p
            .iter()
            .flat_map(|a| q.iter().map(move |b| a * b))
            .collect();
        Self::new(p.len(), q.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (a, v) in c.iter_mut().zip(row) {
                *a += v;
            }
        }
        c
    }

    /// Shannon entropy of the joint weights.
    pub fn entropy(&self) -> f64 {
        entropy(&self.data)
    }

    /// `D(pi || a x b)`.
    pub fn divergence_from_product(&self, a: &[f64], b: &[f64]) -> Result<Divergence> {
        if a.len() != self.rows || b.len() != self.cols {
            return Err(Error::GroundSetMismatch);
        }
        let prod: Vec<f64> = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| x * y))
            .collect();
        kl_weights(&self.data, &prod)
    }
}

/// Source weights `P` (length `n`), reference weights `Q` (length `m`), the
/// cost matrix `c_ij = d(xi_i, eta_j)^r` (row-major) and `lambda > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInstance {
    p: Vec<f64>,
    q: Vec<f64>,
    cost: Vec<f64>,
    lambda: f64,
}

impl DiscreteInstance {
    pub fn new(p: Vec<f64>, q: Vec<f64>, cost: Vec<f64>, lambda: f64) -> Result<Self> {
        if p.is_empty() || q.is_empty() {
            return Err(Error::EmptySupport);
        }
        check_probability(&p, PLAN_MASS_TOL)?;
        check_probability(&q, PLAN_MASS_TOL)?;
        if cost.len() != p.len() * q.len() {
            return Err(Error::LengthMismatch(p.len() * q.len(), cost.len()));
        }
        if let Some(i) = cost.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::NonFiniteValue(i));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self { p, q, cost, lambda })
    }

    /// Dirichlet(1) marginals and i.i.d. uniform `[0, 1]` costs.
    pub fn random<R: Rng>(rng: &mut R, n: usize, m: usize, lambda: f64) -> Result<Self> {
        let p = random_probability(rng, n);
        let q = random_probability(rng, m);
        let cost = (0..n * m).map(|_| rng.random::<f64>()).collect();
        Self::new(p, q, cost, lambda)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cost_row(&self, i: usize) -> &[f64] {
        &self.cost[i * self.m()..(i + 1) * self.m()]
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.p.clone(), self.q.clone(), self.cost.clone(), lambda)
    }
}

/// Dirichlet(1, ..., 1) draw via normalized exponentials.
pub fn random_probability<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Dirichlet(1) plan on `n x m` cells.
pub fn random_plan<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<TransportPlan> {
    TransportPlan::new(n, m, random_probability(rng, n * m))
}

/// `sum_i P_i smin_lambda(c_i.; Q)`.
pub fn closed_form_value(inst: &DiscreteInstance) -> f64 {
    (0..inst.n())
        .map(|i| inst.p[i] * smooth_min_slice(inst.cost_row(i), &inst.q, inst.lambda))
        .sum()
}

/// The minimizing plan `pi_ij = P_i Q_j softmin_j(c_i.)`.
pub fn optimal_plan(inst: &DiscreteInstance) -> TransportPlan {
    let m = inst.m();
    let mut data = vec![0.0; inst.n() * m];
    for (i, row) in data.chunks_exact_mut(m).enumerate() {
        gibbs_into(inst.cost_row(i), &inst.q, inst.lambda, row);
        row.iter_mut().for_each(|v| *v *= inst.p[i]);
    }
    TransportPlan {
        rows: inst.n(),
        cols: m,
        data,
    }
}

/// Expected cost under a plan.
pub fn expected_cost(plan: &TransportPlan, inst: &DiscreteInstance) -> Result<f64> {
    if plan.rows != inst.n() || plan.cols != inst.m() {
        return Err(Error::GroundSetMismatch);
    }
    Ok(plan.data.iter().zip(&inst.cost).map(|(a, c)| a * c).sum())
}

/// `E_pi c + lambda D(pi || P x Q)`; infinite when `pi` leaves the support
/// of the product.
pub fn plan_objective(plan: &TransportPlan, inst: &DiscreteInstance) -> Result<f64> {
    let c = expected_cost(plan, inst)?;
    let d = plan.divergence_from_product(&inst.p, &inst.q)?;
    Ok(c + inst.lambda * d.to_f64())
}

/// Result of [`brute_force`].
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub value: f64,
    pub plan: TransportPlan,
    /// Total descent iterations over all rows.
    pub iterations: usize,
}

/// Iteration cap per row.
pub const BRUTE_FORCE_MAX_ITER: usize = 100_000;

/// Row objective `sum_j z_j c_j + lambda sum_j z_j log(z_j / q_j)`.
fn row_objective(z: &[f64], c: &[f64], q: &[f64], lambda: f64) -> f64 {
    z.iter()
        .zip(c)
        .zip(q)
        .filter(|((zj, _), _)| **zj > 0.0)
        .map(|((zj, cj), qj)| zj * cj + lambda * zj * (zj / qj).ln())
        .sum()
}

/// Minimizes one row on the simplex over `supp q`, starting from `q`.
fn solve_row(c: &[f64], q: &[f64], lambda: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
    let m = c.len();
    let mut z = q.to_vec();
    let mut f = row_objective(&z, c, q, lambda);
    let mut grad = vec![0.0; m];
    let mut trial = vec![0.0; m];
    for it in 1..=BRUTE_FORCE_MAX_ITER {
        for j in 0..m {
            grad[j] = if z[j] > 0.0 {
                c[j] + lambda * ((z[j] / q[j]).ln() + 1.0)
            } else {
                0.0
            };
        }
        let mut eta = 1.0;
        let (f_new, accepted) = loop {
            let gmin = grad
                .iter()
                .zip(&z)
                .filter(|(_, zj)| **zj > 0.0)
                .map(|(g, _)| *g)
                .fold(f64::INFINITY, f64::min);
            let mut s = 0.0;
            for j in 0..m {
                trial[j] = if z[j] > 0.0 {
                    z[j] * (-eta * (grad[j] - gmin)).exp()
                } else {
                    0.0
                };
                s += trial[j];
            }
            trial.iter_mut().for_each(|t| *t /= s);
            let f_trial = row_objective(&trial, c, q, lambda);
            let slope: f64 = grad
                .iter()
                .zip(&trial)
                .zip(&z)
                .map(|((g, t), zj)| g * (t - zj))
                .sum();
            if f_trial <= f + 1e-4 * slope {
                break (f_trial, true);
            }
            eta *= 0.5;
            if eta < 1e-20 {
                break (f, false);
            }
        };
        if !accepted {
            return Ok((z, it));
        }
        let decrease = f - f_new;
        std::mem::swap(&mut z, &mut trial);
        f = f_new;
        if decrease < tol {
            return Ok((z, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: BRUTE_FORCE_MAX_ITER,
        best: f,
    })
}

/// Numerical minimum of the inner regularized transport problem.
pub fn brute_force(inst: &DiscreteInstance, tol: f64) -> Result<BruteForce> {
    let m = inst.m();
    let mut data = vec![0.0; inst.n() * m];
    let mut value = 0.0;
    let mut iterations = 0;
    for i in 0..inst.n() {
        let c = inst.cost_row(i);
        let (z, it) = solve_row(c, &inst.q, inst.lambda, tol).map_err(|e| match e {
            Error::NoConvergence { iterations, .. } => Error::NoConvergence {
                iterations,
                best: value,
            },
            e => e,
        })?;
        iterations += it;
        value += inst.p[i] * row_objective(&z, c, &inst.q, inst.lambda);
        for (dst, zj) in data[i * m..(i + 1) * m].iter_mut().zip(&z) {
            *dst = inst.p[i] * zj;
        }
    }
    Ok(BruteForce {
        value,
        plan: TransportPlan {
            rows: inst.n(),
            cols: m,
            data,
        },
        iterations,
    })
}

pub fn brute_force_value(inst: &DiscreteInstance, tol: f64) -> Result<f64> {
    brute_force(inst, tol).map(|b| b.value)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `(D(pi || P x pi_2), D(pi || P x Q))` for a plan with first marginal `P`.
pub fn marginal_projection_gap(
    plan: &TransportPlan,
    p: &[f64],
    q: &[f64],
) -> Result<(Divergence, Divergence)> {
    if p.len() != plan.rows || q.len() != plan.cols {
        return Err(Error::GroundSetMismatch);
    }
    let gap = max_abs_diff(&plan.row_marginal(), p);
    if gap > MARGINAL_TOL {
        return Err(Error::MarginalMismatch(gap));
    }
    let d_proj = plan.divergence_from_product(p, &plan.col_marginal())?;
    let d_orig = plan.divergence_from_product(p, q)?;
    Ok((d_proj, d_orig))
}

/// `E_pi c - lambda H(pi)` for a plan with marginals `P` and `Q`.
pub fn entropy_form_value(plan: &TransportPlan, inst: &DiscreteInstance) -> Result<f64> {
    if plan.rows != inst.n() || plan.cols != inst.m() {
        return Err(Error::GroundSetMismatch);
    }
    let gap = max_abs_diff(&plan.row_marginal(), &inst.p)
        .max(max_abs_diff(&plan.col_marginal(), &inst.q));
    if gap > MARGINAL_TOL {
        return Err(Error::MarginalMismatch(gap));
    }
    Ok(expected_cost(plan, inst)? - inst.lambda * plan.entropy())
}

/// North-west corner plan with marginals `p` and `q`.
pub fn north_west_corner(p: &[f64], q: &[f64]) -> Result<TransportPlan> {
    let (n, m) = (p.len(), q.len());
    let mut data = vec![0.0; n * m];
    let (mut a, mut b) = (p.to_vec(), q.to_vec());
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        let t = a[i].min(b[j]);
        data[i * m + j] = t;
        a[i] -= t;
        b[j] -= t;
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    TransportPlan::new(n, m, data)
}

/// One row of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
    pub note: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// Structured text, one `key: value` block per check.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed: {}", self.seed).unwrap();
        writeln!(s, "status: {}", if self.passed() { "pass" } else { "fail" }).unwrap();
        for c in &self.checks {
            writeln!(s).unwrap();
            writeln!(s, "check: {}", c.name).unwrap();
            writeln!(s, "cases: {}", c.cases).unwrap();
            writeln!(s, "worst: {:e}", c.worst).unwrap();
            writeln!(s, "tolerance: {:e}", c.tolerance).unwrap();
            writeln!(s, "failures: {}", c.failures).unwrap();
            writeln!(s, "status: {}", if c.passed() { "pass" } else { "fail" }).unwrap();
            if !c.note.is_empty() {
                writeln!(s, "note: {}", c.note).unwrap();
            }
        }
        s
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
    failures: usize,
    note: String,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            worst: 0.0,
            failures: 0,
            note: String::new(),
        }
    }

    fn record(&mut self, err: f64, context: impl FnOnce() -> String) {
        self.cases += 1;
        let bad = !(err <= self.tolerance);
        if bad {
            self.failures += 1;
            if self.note.is_empty() {
                self.note = context();
            }
        }
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.into(),
            cases: self.cases,
            worst: self.worst,
            tolerance: self.tolerance,
            failures: self.failures,
            note: self.note,
        }
    }
}

/// Grid of regularization levels used by the randomized suite.
pub const SUITE_LAMBDAS: [f64; 3] = [0.1, 0.5, 2.0];
/// Randomized instances per check.
pub const SUITE_CASES: usize = 100;
/// Descent tolerance used for the brute-force solve in the suite.
pub const SUITE_TOL: f64 = 1e-15;

/// Randomized oracle and softmin property suite. `closed_form` is the value
/// under test, normally [`closed_form_value`].
pub fn verify_suite(seed: u64, closed_form: fn(&DiscreteInstance) -> f64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value = Tally::new("closed_form_vs_brute_force", 1e-6);
    let mut plan = Tally::new("optimal_plan_vs_brute_force", 1e-5);
    let mut self_value = Tally::new("optimal_plan_objective", 1e-10);
    let mut support = Tally::new("plan_support_in_reference", 0.0);
    let mut projection = Tally::new("marginal_projection_identity", 1e-10);
    let mut offset = Tally::new("entropy_form_offset", 1e-10);
    let mut softmin_checks = Tally::new("softmin_properties", 1e-10);
    let mut gradient = Tally::new("smin_gradient_finite_difference", 1e-5);

    for case in 0..SUITE_CASES {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let lambda = SUITE_LAMBDAS[case % SUITE_LAMBDAS.len()];
        let inst = DiscreteInstance::random(&mut rng, n, m, lambda).expect("valid random instance");
        let describe = || format!("case {case}: n={n} m={m} lambda={lambda}");

        let closed = closed_form(&inst);
        let opt = optimal_plan(&inst);
        match brute_force(&inst, SUITE_TOL) {
            Ok(bf) => {
                value.record((closed - bf.value).abs(), || {
                    format!(
                        "{}: closed form {closed:.12} vs brute force {:.12}, gap {:e}",
                        describe(),
                        bf.value,
                        (closed - bf.value).abs()
                    )
                });
                plan.record(max_abs_diff(opt.as_slice(), bf.plan.as_slice()), describe);
            }
            Err(e) => {
                value.record(f64::NAN, || format!("{}: {e}", describe()));
                plan.record(f64::NAN, describe);
            }
        }
        let own = plan_objective(&opt, &inst).unwrap_or(f64::NAN);
        self_value.record((own - closed_form_value(&inst)).abs(), describe);

        // reference weights with a hole: the plan must not charge it
        if m > 1 {
            let mut q = random_probability(&mut rng, m);
            let hole = case % m;
            let mass = q[hole];
            q[hole] = 0.0;
            q.iter_mut().for_each(|v| *v /= 1.0 - mass);
            let holed = DiscreteInstance::new(inst.p.clone(), q, inst.cost.clone(), lambda)
                .expect("valid holed instance");
            let leak_opt = optimal_plan(&holed).col_marginal()[hole];
            let leak_bf = brute_force(&holed, SUITE_TOL)
                .map(|b| b.plan.col_marginal()[hole])
                .unwrap_or(f64::NAN);
            support.record(leak_opt.max(leak_bf), describe);
        }

        let pi = random_plan(&mut rng, n, m).expect("valid random plan");
        let p = pi.row_marginal();
        let q = random_probability(&mut rng, m);
        match marginal_projection_gap(&pi, &p, &q) {
            Ok((Divergence::Finite(d_proj), Divergence::Finite(d_orig))) => {
                let dq = kl_weights(&pi.col_marginal(), &q)
                    .map(Divergence::to_f64)
                    .unwrap_or(f64::NAN);
                let err = ((d_orig - d_proj) - dq).abs();
                let err = if d_proj <= d_orig + 1e-12 {
                    err
                } else {
                    f64::INFINITY
                };
                projection.record(err, describe);
            }
            _ => projection.record(f64::NAN, describe),
        }

        let expected_offset = lambda * (entropy(&inst.p) + entropy(&inst.q));
        for feasible in [
            TransportPlan::product(&inst.p, &inst.q),
            north_west_corner(&inst.p, &inst.q),
        ] {
            let err = feasible
                .and_then(|f| Ok(plan_objective(&f, &inst)? - entropy_form_value(&f, &inst)?))
                .map(|o| (o - expected_offset).abs())
                .unwrap_or(f64::NAN);
            offset.record(err, describe);
        }

        let k = rng.random_range(1..=6);
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let wv =
            WeightedValues::new(values.clone(), random_probability(&mut rng, k)).expect("valid");
        let reg = Regularization::new(lambda).expect("valid");
        softmin_checks.record(
            softmin_property_error(&wv, reg, rng.random_range(-3.0..3.0)),
            describe,
        );
        gradient.record(gradient_error(&wv, reg), describe);
    }

    VerificationReport {
        seed,
        checks: vec![
            value.finish(),
            plan.finish(),
            self_value.finish(),
            support.finish(),
            projection.finish(),
            offset.finish(),
            softmin_checks.finish(),
            gradient.finish(),
        ],
    }
}

/// Largest violation of normalization, bounds, translation equivariance and
/// homogeneity for one input.
fn softmin_property_error(wv: &WeightedValues, reg: Regularization, shift: f64) -> f64 {
    let lambda = reg.lambda();
    let s = smooth_min(wv, reg);
    let sigma = softmin(wv, reg).expect("lambda > 0");
    let norm: f64 = sigma.iter().zip(wv.weights()).map(|(a, p)| a * p).sum();
    let mean: f64 = wv
        .values()
        .iter()
        .zip(wv.weights())
        .map(|(x, p)| x * p)
        .sum();
    let hard = smooth_min(wv, Regularization::HARD);
    let bounds = (s - mean).max(hard - s).max(0.0);
    let shifted = WeightedValues::new(
        wv.values().iter().map(|x| x + shift).collect(),
        wv.weights().to_vec(),
    )
    .expect("valid");
    let translation = (smooth_min(&shifted, reg) - (s + shift)).abs();
    let gamma = 2.5;
    let scaled = WeightedValues::new(
        wv.values().iter().map(|x| gamma * x).collect(),
        wv.weights().to_vec(),
    )
    .expect("valid");
    let homog = (smooth_min(&scaled, Regularization::new(gamma * lambda).expect("valid"))
        - gamma * s)
        .abs()
        / (1.0 + (gamma * s).abs());
    (norm - 1.0).abs().max(bounds).max(translation).max(homog)
}

/// Relative error of the analytic gradient against central differences.
fn gradient_error(wv: &WeightedValues, reg: Regularization) -> f64 {
    let g = smin_gradient(wv, reg).expect("lambda > 0");
    let mut worst: f64 = 0.0;
    for j in 0..wv.len() {
        let x = wv.values()[j];
        let h = 1e-6 * x.abs().max(1.0);
        let eval = |dx: f64| {
            let mut v = wv.values().to_vec();
            v[j] += dx;
            smooth_min(
                &WeightedValues::new(v, wv.weights().to_vec()).expect("valid"),
                reg,
            )
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let err = (fd - g[j]).abs() / g[j].abs().max(1e-3);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p: &[f64], q: &[f64], cost: &[f64], lambda: f64) -> DiscreteInstance {
        DiscreteInstance::new(p.to_vec(), q.to_vec(), cost.to_vec(), lambda).unwrap()
    }

    #[test]
    fn singleton_instance() {
        let i = inst(&[1.0], &[1.0], &[0.7], 0.5);
        assert!((closed_form_value(&i) - 0.7).abs() < 1e-15);
        assert!((brute_force_value(&i, 1e-14).unwrap() - 0.7).abs() < 1e-15);
        let pi = TransportPlan::product(&[1.0], &[1.0]).unwrap();
        assert_eq!(pi.entropy(), 0.0);
        assert!((entropy_form_value(&pi, &i).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constant_cost() {
        let i = inst(&[0.3, 0.7], &[0.2, 0.5, 0.3], &[0.4; 6], 0.8);
        assert!((closed_form_value(&i) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_rows_keep_the_prior() {
        let i = inst(&[0.3, 0.7], &[0.2, 0.8], &[0.1, 0.1, 0.9, 0.9], 2.0);
        let bf = brute_force(&i, 1e-15).unwrap();
        assert!((bf.value - (0.3 * 0.1 + 0.7 * 0.9)).abs() < 1e-12);
        for r in 0..2 {
            let mass = i.p()[r];
            assert!((bf.plan.get(r, 0) - mass * 0.2).abs() < 1e-12);
            assert!((bf.plan.get(r, 1) - mass * 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn small_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let i = DiscreteInstance::random(&mut rng, 3, 2, 0.5).unwrap();
        let bf = brute_force(&i, 1e-15).unwrap();
        assert!((closed_form_value(&i) - bf.value).abs() < 1e-6);
        let opt = optimal_plan(&i);
        assert_eq!(opt.row_marginal().len(), 3);
        for (a, b) in opt.row_marginal().iter().zip(i.p()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((plan_objective(&opt, &i).unwrap() - closed_form_value(&i)).abs() < 1e-10);
    }

    #[test]
    fn plan_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = DiscreteInstance::random(&mut rng, 3, 3, 1.0).unwrap();
        let big = base.with_lambda(1e6).unwrap();
        let prod = TransportPlan::product(base.p(), base.q()).unwrap();
        assert!(max_abs_diff(optimal_plan(&big).as_slice(), prod.as_slice()) < 1e-4);
        let tiny = base.with_lambda(1e-4).unwrap();
        let plan = optimal_plan(&tiny);
        for i in 0..3 {
            let row = base.cost_row(i);
            let j = (0..3).min_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!((plan.get(i, j) - base.p()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn column_marginal_is_reweighted_reference() {
        let i = inst(&[0.5, 0.5], &[0.25, 0.75], &[0.0, 1.0, 1.0, 0.0], 0.7);
        let col = optimal_plan(&i).col_marginal();
        for j in 0..2 {
            let mut q = 0.0;
            for r in 0..2 {
                let w = WeightedValues::new(i.cost_row(r).to_vec(), i.q().to_vec()).unwrap();
                q += i.p()[r] * softmin(&w, Regularization::new(0.7).unwrap()).unwrap()[j];
            }
            assert!((col[j] - i.q()[j] * q).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        let p = [0.4, 0.6];
        let q = [0.3, 0.2, 0.5];
        let prod = TransportPlan::product(&p, &q).unwrap();
        let (a, b) = marginal_projection_gap(&prod, &p, &q).unwrap();
        assert!(a.finite().unwrap().abs() < 1e-15 && b.finite().unwrap().abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pi = random_plan(&mut rng, 2, 3).unwrap();
        let (a, b) = marginal_projection_gap(&pi, &pi.row_marginal(), &pi.col_marginal()).unwrap();
        assert!((a.finite().unwrap() - b.finite().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn offsets_agree_across_feasible_plans() {
        let i = inst(
            &[0.2, 0.3, 0.5],
            &[0.5, 0.1, 0.4],
            &[0.3, 0.9, 0.1, 0.5, 0.2, 0.8, 0.6, 0.4, 0.7],
            0.5,
        );
        let a = TransportPlan::product(i.p(), i.q()).unwrap();
        let b = north_west_corner(i.p(), i.q()).unwrap();
        assert_ne!(a, b);
        let off = |pi: &TransportPlan| {
            plan_objective(pi, &i).unwrap() - entropy_form_value(pi, &i).unwrap()
        };
        let expected = 0.5 * (entropy(i.p()) + entropy(i.q()));
        assert!((off(&a) - expected).abs() < 1e-12);
        assert!((off(&b) - expected).abs() < 1e-12);
        let bad = TransportPlan::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        assert!(matches!(
            entropy_form_value(&bad, &i),
            Err(Error::MarginalMismatch(_))
        ));
    }

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = verify_suite(1, closed_form_value);
        assert!(a.passed(), "{}", a.to_text());
        assert_eq!(a.to_text(), verify_suite(1, closed_form_value).to_text());
    }

    #[test]
    fn suite_catches_a_dropped_lambda() {
        fn mutant(inst: &DiscreteInstance) -> f64 {
            (0..inst.n())
                .map(|i| {
                    inst.p()[i] * smooth_min_slice(inst.cost_row(i), inst.q(), inst.lambda())
                        / inst.lambda()
                })
                .sum()
        }
        let r = verify_suite(1, mutant);
        assert!(!r.passed());
        assert!(!r.checks[0].passed());
        assert!(r.to_text().contains("closed form"));
    }
}
