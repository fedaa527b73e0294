//! Entropic optimal transport by Sinkhorn iterations.
//!
//! The log-domain variant iterates on the dual potentials `f`, `g`:
//!
//! ```text
//! f_i = eps * ln a_i - eps * LSE_j((g_j - C_ij) / eps)
//! g_j = eps * ln b_j - eps * LSE_i((f_i - C_ij) / eps)
//! P_ij = exp((f_i + g_j - C_ij) / eps)
//! ```
//!
//! The marginal error of the current iterate falls out of the next update
//! for free: `sum_j P_ij = a_i * exp((f_i - f_i') / eps)`, and likewise for
//! columns.
//!
//! With `epsilon_scaling`, the solve walks eps down geometrically from the
//! cost scale to the target, warm-starting each stage from the previous
//! potentials. The fixed point is unchanged; small eps just gets there in
//! far fewer iterations.
//!
//! Two things keep the final stage from crawling. The alternating updates
//! are over-relaxed with a factor fitted to the observed contraction rate,
//! and on small problems a stalled stage is finished with Newton steps on
//! the dual, which handles nearly block-diagonal plans that first-order
//! updates cannot balance.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_problem, inner, marginal_violation, TransportPlan};
use crate::cost::CostMatrix;
use crate::error::{Error, Result};

// Below this many matrix entries the row updates run on the calling thread.
const PARALLEL_MIN_ENTRIES: usize = 1 << 15;
const SCALING_FACTOR: f64 = 0.5;
const STAGE_TOLERANCE: f64 = 1e-3;
const NEWTON_MAX_DIM: usize = 600;
const NEWTON_MAX_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Bound on the L1 marginal violation.
    pub tolerance: f64,
    pub log_stabilized: bool,
    pub epsilon_scaling: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.01,
            max_iterations: 10_000,
            tolerance: 1e-9,
            log_stabilized: true,
            epsilon_scaling: true,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidSolverConfig("max_iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Entropic plan for `cost` between `src` and `tgt`. The returned value is
/// `<plan, cost>`, without the entropy term. Running out of iterations is
/// not an error: the last iterate comes back with `converged = false`.
///
/// A problem and its transpose are solved identically, so swapping `src`
/// and `tgt` (and transposing `cost`) returns the bit-identical value.
pub fn sinkhorn(cost: &CostMatrix, src: &[f64], tgt: &[f64], config: &SinkhornConfig) -> Result<(f64, TransportPlan)> {
    config.validate()?;
    let c = &cost.values;
    check_problem(c, src, tgt)?;
    if transposed_is_canonical(c, src, tgt) {
        let ct = c.t().to_owned();
        let (value, plan) = solve(&ct, tgt, src, config)?;
        return Ok((
            value,
            TransportPlan {
                matrix: plan.matrix.reversed_axes(),
                ..plan
            },
        ));
    }
    solve(c, src, tgt, config)
}

fn solve(c: &Array2<f64>, src: &[f64], tgt: &[f64], config: &SinkhornConfig) -> Result<(f64, TransportPlan)> {
    let (matrix, iterations, converged) = if config.log_stabilized {
        let solver = LogSolver::new(c, src, tgt);
        if src == tgt && is_symmetric(c) {
            solver.run_symmetric(config)
        } else {
            solver.run(config)
        }
    } else {
        scaling_solve(c, src, tgt, config)?
    };
    let value = inner(&matrix, c);
    let marginal_error = marginal_violation(&matrix, src, tgt);
    Ok((
        value,
        TransportPlan {
            matrix,
            cost_value: value,
            iterations_used: iterations,
            converged,
            marginal_error,
        },
    ))
}

/// Orders a problem against its transpose: fewer rows first, then the
/// smaller source weights, then the smaller cost in row-major order.
fn transposed_is_canonical(c: &Array2<f64>, src: &[f64], tgt: &[f64]) -> bool {
    use std::cmp::Ordering;
    let lex = |a: &mut dyn Iterator<Item = (f64, f64)>| {
        a.map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    };
    let order = src
        .len()
        .cmp(&tgt.len())
        .then_with(|| lex(&mut src.iter().copied().zip(tgt.iter().copied())))
        .then_with(|| lex(&mut c.iter().copied().zip(c.t().iter().copied())));
    order == Ordering::Greater
}

/// `sum_k w_k |exp((pot_k - next_k) / eps) - 1|`: the L1 gap between the
/// current marginal and the prescribed weights.
fn scaled_gap(pot: &[f64], next: &[f64], weights: &[f64], eps: f64) -> f64 {
    pot.iter()
        .zip(next)
        .zip(weights)
        .map(|((p, q), w)| w * (((p - q) / eps).exp() - 1.0).abs())
        .sum()
}

/// `pot <- (1 - omega) * pot + omega * next`.
fn relax_into(pot: &mut [f64], next: &[f64], omega: f64) {
    if omega == 1.0 {
        pot.copy_from_slice(next);
    } else {
        for (p, q) in pot.iter_mut().zip(next) {
            *p = (1.0 - omega) * *p + omega * q;
        }
    }
}

/// Over-relaxation schedule. Plain steps (omega = 1) run for a warm-up
/// window to estimate the linear contraction rate r of the error; the
/// factor is then set to 2 / (1 + sqrt(1 - r)). If the error later grows
/// well past its best value the schedule falls back to plain steps with a
/// longer window.
struct Relaxation {
    omega: f64,
    window: usize,
    history: Vec<f64>,
    best: f64,
}

const RELAX_WINDOW: usize = 20;
const RELAX_REFIT: usize = 200;
const RELAX_MAX_OMEGA: f64 = 1.98;

fn tail_rate(history: &[f64]) -> Option<f64> {
    let start = history.len() / 2;
    let (first, last) = (history[start], history[history.len() - 1]);
    let steps = (history.len() - 1 - start) as f64;
    (first > 0.0 && last > 0.0 && last < first).then(|| (last / first).powf(1.0 / steps))
}

fn optimal_omega(rate: f64) -> f64 {
    (2.0 / (1.0 + (1.0 - rate).max(0.0).sqrt())).clamp(1.0, RELAX_MAX_OMEGA)
}

impl Relaxation {
    fn new() -> Self {
        Relaxation {
            omega: 1.0,
            window: RELAX_WINDOW,
            history: Vec::with_capacity(RELAX_REFIT),
            best: f64::INFINITY,
        }
    }

    fn observe(&mut self, err: f64) {
        if !err.is_finite() || err > 10.0 * self.best {
            self.omega = 1.0;
            self.window *= 2;
            self.history.clear();
            self.best = f64::INFINITY;
            return;
        }
        self.best = self.best.min(err);
        self.history.push(err);
        if self.omega == 1.0 {
            if self.history.len() == self.window {
                if let Some(rate) = tail_rate(&self.history) {
                    self.omega = optimal_omega(rate);
                }
                self.history.clear();
            }
        } else if self.history.len() == RELAX_REFIT.max(self.window) {
            // Recover the unrelaxed rate from the observed relaxed one and
            // only ever move omega upwards.
            if let Some(mu) = tail_rate(&self.history) {
                let w = self.omega;
                let base = (mu + w - 1.0).powi(2) / (mu * w * w);
                if base < 1.0 {
                    self.omega = self.omega.max(optimal_omega(base));
                }
            }
            self.history.clear();
        }
    }
}

/// Flags a final stage whose error has not halved over a whole window.
struct Stall {
    count: usize,
    checkpoint: f64,
}

const STALL_WINDOW: usize = 500;

impl Stall {
    fn new() -> Self {
        Stall {
            count: 0,
            checkpoint: f64::INFINITY,
        }
    }

    fn stalled(&mut self, err: f64) -> bool {
        self.count += 1;
        if !self.count.is_multiple_of(STALL_WINDOW) {
            return false;
        }
        let stalled = err > 0.5 * self.checkpoint;
        self.checkpoint = err;
        stalled
    }
}

fn is_symmetric(c: &Array2<f64>) -> bool {
    c.is_square() && c.indexed_iter().all(|((i, j), &v)| i <= j || v == c[[j, i]])
}

/// `max_k x_k + eps * ln sum_k exp((x_k - max) / eps)`, for `x_k = pot_k - cost_k`.
#[inline]
fn soft_max(pot: &[f64], cost: ArrayView1<f64>, eps: f64) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    for (p, c) in pot.iter().zip(cost.iter()) {
        hi = hi.max(p - c);
    }
    let mut sum = 0.0;
    for (p, c) in pot.iter().zip(cost.iter()) {
        sum += ((p - c - hi) / eps).exp();
    }
    hi + eps * sum.ln()
}

struct LogSolver<'a> {
    cost: &'a Array2<f64>,
    cost_t: Array2<f64>,
    log_src: Vec<f64>,
    log_tgt: Vec<f64>,
    src: &'a [f64],
    tgt: Vec<f64>,
    parallel: bool,
}

impl<'a> LogSolver<'a> {
    fn new(cost: &'a Array2<f64>, src: &'a [f64], tgt: &[f64]) -> Self {
        LogSolver {
            cost,
            cost_t: cost.t().as_standard_layout().into_owned(),
            log_src: src.iter().map(|a| a.ln()).collect(),
            log_tgt: tgt.iter().map(|b| b.ln()).collect(),
            src,
            tgt: tgt.to_vec(),
            parallel: cost.len() >= PARALLEL_MIN_ENTRIES,
        }
    }

    /// One half-step: `out_k = eps * log_w_k - softmax_k(other - C_k.)`.
    fn half_step(&self, rows: &Array2<f64>, log_w: &[f64], other: &[f64], eps: f64, out: &mut [f64]) {
        let update = |(o, (row, lw)): (&mut f64, (ArrayView1<f64>, &f64))| {
            *o = eps * lw - soft_max(other, row, eps);
        };
        if self.parallel {
            out.par_iter_mut()
                .zip(rows.axis_iter(Axis(0)).into_par_iter().zip(log_w.par_iter()))
                .for_each(update);
        } else {
            out.iter_mut()
                .zip(rows.axis_iter(Axis(0)).zip(log_w.iter()))
                .for_each(update);
        }
    }

    fn run(&self, config: &SinkhornConfig) -> (Array2<f64>, usize, bool) {
        let (n, m) = self.cost.dim();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        let mut t = vec![0.0; n];
        let mut s = vec![0.0; m];

        let target = config.epsilon;
        let mut eps = self.initial_eps(config);
        let mut iterations = 0;
        let mut converged;

        loop {
            let final_stage = eps <= target;
            let tol = if final_stage {
                config.tolerance
            } else {
                STAGE_TOLERANCE.max(config.tolerance)
            };
            let mut relax = Relaxation::new();
            let mut stall = Stall::new();
            converged = false;
            while iterations < config.max_iterations {
                let omega = relax.omega;
                self.half_step(self.cost, &self.log_src, &g, eps, &mut t);
                relax_into(&mut f, &t, omega);
                self.half_step(&self.cost_t, &self.log_tgt, &f, eps, &mut s);
                // Marginal error of the plan built from (f, g): t gives its row
                // sums, s its column sums.
                let err = scaled_gap(&f, &t, self.src, eps) + scaled_gap(&g, &s, &self.tgt, eps);
                if err <= tol {
                    converged = true;
                    break;
                }
                relax_into(&mut g, &s, omega);
                relax.observe(err);
                iterations += 1;
                if final_stage && stall.stalled(err) && self.dim_ok() {
                    let (steps, done) = self.newton(&mut f, &mut g, eps, config, config.max_iterations - iterations);
                    iterations += steps;
                    if done {
                        converged = true;
                        break;
                    }
                }
            }
            if final_stage || iterations >= config.max_iterations {
                break;
            }
            eps = (eps * SCALING_FACTOR).max(target);
        }
        (self.plan(&f, &g, eps), iterations, converged && eps <= target)
    }

    /// Self-transport (`a = b`, symmetric cost) has a symmetric solution
    /// `f = g`. Plain alternation oscillates around it and converges slowly;
    /// averaging each step with the previous potential damps the oscillation.
    fn run_symmetric(&self, config: &SinkhornConfig) -> (Array2<f64>, usize, bool) {
        let n = self.cost.nrows();
        let mut f = vec![0.0; n];
        let mut t = vec![0.0; n];
        let target = config.epsilon;
        let mut eps = self.initial_eps(config);
        let mut iterations = 0;
        let mut converged;

        loop {
            let final_stage = eps <= target;
            let tol = if final_stage {
                config.tolerance
            } else {
                STAGE_TOLERANCE.max(config.tolerance)
            };
            converged = false;
            while iterations < config.max_iterations {
                self.half_step(self.cost, &self.log_src, &f, eps, &mut t);
                // Rows and columns of the symmetric plan err by the same amount.
                if 2.0 * scaled_gap(&f, &t, self.src, eps) <= tol {
                    converged = true;
                    break;
                }
                relax_into(&mut f, &t, 0.5);
                iterations += 1;
            }
            if final_stage || iterations >= config.max_iterations {
                break;
            }
            eps = (eps * SCALING_FACTOR).max(target);
        }
        (self.plan(&f, &f, eps), iterations, converged && eps <= target)
    }

    fn dim_ok(&self) -> bool {
        self.cost.nrows() + self.cost.ncols() <= NEWTON_MAX_DIM
    }

    /// Newton steps on the concave dual
    /// `<a, f> + <b, g> - eps * sum_ij P_ij`, with `g_m` pinned to fix the
    /// additive gauge. Returns the steps taken and whether the plan reached
    /// the tolerance.
    fn newton(&self, f: &mut [f64], g: &mut [f64], eps: f64, config: &SinkhornConfig, budget: usize) -> (usize, bool) {
        let (n, m) = self.cost.dim();
        let dim = n + m - 1;
        let dual = |f: &[f64], g: &[f64]| {
            let p = self.plan(f, g, eps);
            let lin: f64 = f.iter().zip(self.src).map(|(x, w)| x * w).sum::<f64>()
                + g.iter().zip(&self.tgt).map(|(x, w)| x * w).sum::<f64>();
            (lin - eps * p.sum(), p)
        };
        let (mut value, mut p) = dual(f, g);
        for step in 0..budget.min(NEWTON_MAX_STEPS) {
            let rows = p.sum_axis(Axis(1));
            let cols = p.sum_axis(Axis(0));
            let err: f64 = rows.iter().zip(self.src).map(|(r, a)| (r - a).abs()).sum::<f64>()
                + cols.iter().zip(&self.tgt).map(|(c, b)| (c - b).abs()).sum::<f64>();
            if err <= config.tolerance {
                return (step, true);
            }
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            let mut grad = DVector::<f64>::zeros(dim);
            for i in 0..n {
                h[(i, i)] = rows[i];
                grad[i] = self.src[i] - rows[i];
                for j in 0..m - 1 {
                    h[(i, n + j)] = p[[i, j]];
                    h[(n + j, i)] = p[[i, j]];
                }
            }
            for j in 0..m - 1 {
                h[(n + j, n + j)] = cols[j];
                grad[n + j] = self.tgt[j] - cols[j];
            }
            let ridge = 1e-12 * h.trace() / dim as f64;
            let chol = match h.clone().cholesky() {
                Some(c) => c,
                None => {
                    for k in 0..dim {
                        h[(k, k)] += ridge;
                    }
                    match h.cholesky() {
                        Some(c) => c,
                        None => return (step, false),
                    }
                }
            };
            let delta = chol.solve(&grad) * eps;
            let slope = delta.dot(&grad);
            let mut alpha = 1.0;
            let accepted = loop {
                let nf: Vec<f64> = (0..n).map(|i| f[i] + alpha * delta[i]).collect();
                let ng: Vec<f64> = (0..m)
                    .map(|j| g[j] + if j + 1 < m { alpha * delta[n + j] } else { 0.0 })
                    .collect();
                let (nv, np) = dual(&nf, &ng);
                if nv.is_finite() && nv >= value + 1e-4 * alpha * slope {
                    f.copy_from_slice(&nf);
                    g.copy_from_slice(&ng);
                    value = nv;
                    p = np;
                    break true;
                }
                alpha *= 0.5;
                if alpha < 1e-6 {
                    break false;
                }
            };
            if !accepted {
                return (step + 1, false);
            }
        }
        (budget.min(NEWTON_MAX_STEPS), false)
    }

    fn initial_eps(&self, config: &SinkhornConfig) -> f64 {
        if config.epsilon_scaling {
            self.cost.iter().copied().fold(0.0, f64::max).max(config.epsilon)
        } else {
            config.epsilon
        }
    }

    fn plan(&self, f: &[f64], g: &[f64], eps: f64) -> Array2<f64> {
        let mut plan = Array2::zeros(self.cost.dim());
        for ((i, j), p) in plan.indexed_iter_mut() {
            *p = ((f[i] + g[j] - self.cost[[i, j]]) / eps).exp();
        }
        plan
    }
}

/// Classic multiplicative scaling on `K = exp(-C / eps)`. Fails when the
/// kernel underflows or the scalings overflow.
fn scaling_solve(
    c: &Array2<f64>,
    src: &[f64],
    tgt: &[f64],
    config: &SinkhornConfig,
) -> Result<(Array2<f64>, usize, bool)> {
    let eps = config.epsilon;
    let kernel = c.mapv(|x| (-x / eps).exp());
    let (n, m) = kernel.dim();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let overflow = || {
        Error::Numerical(format!(
            "kernel scaling overflowed at epsilon = {eps}; enable log stabilization"
        ))
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let kv = kernel.dot(&ndarray::ArrayView1::from(&v));
        if iterations > 0 {
            let err: f64 = u
                .iter()
                .zip(kv.iter())
                .zip(src)
                .map(|((ui, k), a)| (ui * k - a).abs())
                .sum();
            if err <= config.tolerance {
                converged = true;
                break;
            }
        }
        for ((ui, k), a) in u.iter_mut().zip(kv.iter()).zip(src) {
            *ui = a / k;
        }
        let ktu = kernel.t().dot(&ndarray::ArrayView1::from(&u));
        for ((vj, k), b) in v.iter_mut().zip(ktu.iter()).zip(tgt) {
            *vj = b / k;
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(overflow());
        }
        iterations += 1;
    }
    let mut plan = kernel;
    for ((i, j), p) in plan.indexed_iter_mut() {
        *p *= u[i] * v[j];
    }
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(overflow());
    }
    Ok((plan, iterations, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::exact_ot;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(values: Array2<f64>) -> CostMatrix {
        CostMatrix::from_values(values).unwrap()
    }

    fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
        let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>());
        let max = c.iter().copied().fold(0.0, f64::max);
        c / max
    }

    #[test]
    fn singletons_cost_their_single_entry() {
        for eps in [1.0, 0.01, 1e-5] {
            let cfg = SinkhornConfig::default().with_epsilon(eps);
            let (v, plan) = sinkhorn(&cm(array![[0.42]]), &[1.0], &[1.0], &cfg).unwrap();
            assert_abs_diff_eq!(v, 0.42, epsilon = 1e-15);
            assert!(plan.converged);
        }
    }

    #[test]
    fn self_transport_vanishes_as_eps_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let c = Array2::from_shape_fn((5, 5), |(i, j)| (pts[i] - pts[j]).powi(2));
        let u = [0.2; 5];
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
            let (v, _) = sinkhorn(&cm(c.clone()), &u, &u, &SinkhornConfig::default().with_epsilon(eps)).unwrap();
            assert!(v <= last + 1e-12);
            last = v;
        }
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn small_eps_matches_exact_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_cost(&mut rng, 5, 5);
        let u = [0.2; 5];
        let (exact, _) = exact_ot(&cm(c.clone()), &u, &u).unwrap();
        let (v, plan) = sinkhorn(&cm(c), &u, &u, &SinkhornConfig::default().with_epsilon(1e-4)).unwrap();
        assert!(plan.converged);
        assert!((v - exact).abs() / exact <= 1e-3, "{v} vs {exact}");
    }

    #[test]
    fn converged_plans_meet_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, m) in [(3, 7), (10, 10), (25, 4)] {
            let c = random_cost(&mut rng, n, m);
            let a = vec![1.0 / n as f64; n];
            let b = vec![1.0 / m as f64; m];
            let (_, plan) = sinkhorn(&cm(c), &a, &b, &SinkhornConfig::default()).unwrap();
            assert!(plan.converged);
            assert!(plan.marginal_violation(&a, &b) <= 1e-9);
            assert!(plan.matrix.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn plain_scaling_agrees_at_moderate_eps_and_fails_at_tiny_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_cost(&mut rng, 6, 6);
        let u = [1.0 / 6.0; 6];
        let log = SinkhornConfig::default().with_epsilon(0.1);
        let plain = SinkhornConfig {
            log_stabilized: false,
            ..log
        };
        let (a, _) = sinkhorn(&cm(c.clone()), &u, &u, &log).unwrap();
        let (b, _) = sinkhorn(&cm(c.clone()), &u, &u, &plain).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);

        let tiny = SinkhornConfig { epsilon: 1e-4, ..plain };
        assert!(matches!(sinkhorn(&cm(c), &u, &u, &tiny), Err(Error::Numerical(_))));
    }

    #[test]
    fn iteration_cap_is_reported_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = random_cost(&mut rng, 8, 8);
        let u = [0.125; 8];
        let cfg = SinkhornConfig {
            max_iterations: 2,
            epsilon_scaling: false,
            ..SinkhornConfig::default()
        };
        let (v, plan) = sinkhorn(&cm(c), &u, &u, &cfg).unwrap();
        assert!(!plan.converged);
        assert_eq!(plan.iterations_used, 2);
        assert!(v.is_finite());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SinkhornConfig::default().with_epsilon(0.0);
        assert!(matches!(
            sinkhorn(&cm(array![[1.0]]), &[1.0], &[1.0], &cfg),
            Err(Error::InvalidSolverConfig(_))
        ));
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random_cost(&mut rng, 200, 300);
        let a = vec![1.0 / 200.0; 200];
        let b = vec![1.0 / 300.0; 300];
        let (x, _) = sinkhorn(&cm(c.clone()), &a, &b, &SinkhornConfig::default()).unwrap();
        let (y, _) = sinkhorn(&cm(c), &a, &b, &SinkhornConfig::default()).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
