//! Differentiable relaxation of the RCPSP objective and constraints.
//!
//! The only trainable quantities are the raw parameters `theta`, one per
//! activity. Start times are `softplus(theta_i) - min_j softplus(theta_j)`, so
//! the earliest activity always sits at time zero. The loss combines a
//! log-sum-exp makespan with precedence, resource and horizon penalties, and
//! [`Relaxation::evaluate`] returns its exact gradient by a hand-written
//! reverse pass over this fixed composition.
//!
//! The resource term is evaluated on a dense `n x T` grid. Each row depends on
//! one activity only and each column on one time cell only, so both passes are
//! plain batched array operations.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::ProjectInstance;
use crate::scalar::{sigmoid, softplus, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("non-finite value in {component}")]
    NonFinite { component: &'static str },
    #[error("resource {resource} has zero capacity")]
    ZeroCapacity { resource: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid relaxation config: {0}")]
    InvalidConfig(String),
}

/// Weights and sharpness of the relaxed objective at one point of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    /// Log-sum-exp sharpness of the makespan.
    pub beta: f64,
    /// Sharpness of the sigmoids that build the running-activity grid.
    pub tau: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    /// Weight of the squared overflow past the horizon.
    pub lambda_h: f64,
    /// Skip the time grid entirely; the resource term is reported as zero.
    pub precedence_only: bool,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            beta: 20.0,
            tau: 4.0,
            lambda_p: 1.0,
            lambda_r: 1.0,
            lambda_h: 1.0,
            precedence_only: false,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<(), RelaxError> {
        let bad = |m: String| Err(RelaxError::InvalidConfig(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        for (name, v) in [
            ("lambda_p", self.lambda_p),
            ("lambda_r", self.lambda_r),
            ("lambda_h", self.lambda_h),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Value of every loss component at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub makespan_soft: T,
    pub precedence_loss: T,
    pub resource_loss: T,
    pub horizon_loss: T,
    /// Largest raw precedence violation, in time units.
    pub max_prec_violation: T,
    /// Largest capacity-normalized resource overshoot.
    pub max_res_overshoot: T,
}

fn ensure_finite<T: Scalar>(values: &[T], component: &'static str) -> Result<(), RelaxError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RelaxError::NonFinite { component })
    }
}

fn finite<T: Scalar>(v: T, component: &'static str) -> Result<T, RelaxError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RelaxError::NonFinite { component })
    }
}

/// Index of the smallest raw parameter; ties go to the lowest index.
pub fn anchor_index<T: Scalar>(theta: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &t) in theta.iter().enumerate() {
        match best {
            Some(b) if theta[b] <= t => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Start times from raw parameters, anchored so the earliest start is exactly zero.
pub fn start_times<T: Scalar>(theta: &[T]) -> Result<Vec<T>, RelaxError> {
    ensure_finite(theta, "theta")?;
    let Some(a) = anchor_index(theta) else {
        return Ok(Vec::new());
    };
    let base = softplus(theta[a]);
    Ok(theta.iter().map(|&t| softplus(t) - base).collect())
}

/// `(1/beta) ln sum_i exp(beta (s_i + d_i))`, shifted by the hard maximum.
pub fn soft_makespan<T: Scalar>(s: &[T], d: &[T], beta: T) -> T {
    soft_max_with_weights(s, d, beta, None)
}

fn soft_max_with_weights<T: Scalar>(s: &[T], d: &[T], beta: T, weights: Option<&mut Vec<T>>) -> T {
    if s.is_empty() {
        return T::zero();
    }
    let hard = s
        .iter()
        .zip(d)
        .map(|(&si, &di)| si + di)
        .fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    let mut w: Vec<T> = s
        .iter()
        .zip(d)
        .map(|(&si, &di)| {
            let e = (beta * (si + di - hard)).exp();
            z += e;
            e
        })
        .collect();
    if let Some(out) = weights {
        for e in w.iter_mut() {
            *e /= z;
        }
        *out = w;
    }
    hard + z.ln() / beta
}

/// `max(0, s_i + d_i - s_j)` for every edge.
pub fn precedence_violations<T: Scalar>(s: &[T], d: &[T], edges: &[(usize, usize)]) -> Vec<T> {
    edges
        .iter()
        .map(|&(i, j)| (s[i] + d[i] - s[j]).max(T::zero()))
        .collect()
}

/// Quadratic below one time unit of violation, linear above.
pub fn smooth_penalty<T: Scalar>(v: T) -> T {
    if v < T::one() {
        v * v / T::lit(2.0)
    } else {
        v - T::lit(0.5)
    }
}

/// Derivative of [`smooth_penalty`].
pub fn smooth_penalty_slope<T: Scalar>(v: T) -> T {
    if v < T::one() {
        v
    } else {
        T::one()
    }
}

/// Mean smooth penalty over all edges (zero when there are no edges).
pub fn precedence_loss<T: Scalar>(s: &[T], d: &[T], edges: &[(usize, usize)]) -> T {
    if edges.is_empty() {
        return T::zero();
    }
    let sum: T = precedence_violations(s, d, edges).into_iter().map(smooth_penalty).sum();
    sum / T::lit(edges.len() as f64)
}

#[inline]
fn running_factors<T: Scalar>(s: T, d: T, cell_center: T, tau: T) -> (T, T) {
    let after_start = sigmoid(tau * (cell_center - s));
    let before_end = sigmoid(tau * (s + d - cell_center));
    (after_start, before_end)
}

/// Soft running indicator of every activity at every cell center `t + 1/2`.
pub fn soft_running_matrix<T: Scalar>(s: &[T], d: &[T], horizon: usize, tau: T) -> Array2<T> {
    let mut p = Array2::zeros((s.len(), horizon));
    fill_running(&mut p, s, d, tau);
    p
}

fn fill_running<T: Scalar>(p: &mut Array2<T>, s: &[T], d: &[T], tau: T) {
    let half = T::lit(0.5);
    for (i, mut row) in p.outer_iter_mut().enumerate() {
        for (t, cell) in row.iter_mut().enumerate() {
            let (a, b) = running_factors(s[i], d[i], T::lit(t as f64) + half, tau);
            *cell = a * b;
        }
    }
}

/// `U = P^T R`: soft usage of every resource in every cell.
pub fn resource_usage<T: Scalar>(running: &Array2<T>, requirements: &Array2<T>) -> Result<Array2<T>, RelaxError> {
    if running.nrows() != requirements.nrows() {
        return Err(RelaxError::Dimension(format!(
            "running matrix has {} rows, requirement matrix {}",
            running.nrows(),
            requirements.nrows()
        )));
    }
    Ok(running.t().dot(requirements))
}

/// Mean squared capacity-normalized overshoot over all `(t, k)` cells.
pub fn resource_loss<T: Scalar>(usage: &Array2<T>, capacities: &[T]) -> Result<T, RelaxError> {
    Ok(resource_loss_and_max(usage, capacities)?.0)
}

fn resource_loss_and_max<T: Scalar>(usage: &Array2<T>, capacities: &[T]) -> Result<(T, T), RelaxError> {
    if usage.ncols() != capacities.len() {
        return Err(RelaxError::Dimension(format!(
            "usage has {} resource columns, {} capacities given",
            usage.ncols(),
            capacities.len()
        )));
    }
    if let Some(k) = capacities.iter().position(|&c| c <= T::zero()) {
        return Err(RelaxError::ZeroCapacity { resource: k });
    }
    if usage.is_empty() {
        return Ok((T::zero(), T::zero()));
    }
    let mut sum = T::zero();
    let mut worst = T::zero();
    for row in usage.outer_iter() {
        for (&u, &c) in row.iter().zip(capacities) {
            let o = ((u - c) / c).max(T::zero());
            sum += o * o;
            worst = worst.max(o);
        }
    }
    Ok((sum / T::lit(usage.len() as f64), worst))
}

/// Mean squared overflow of finish times past the horizon.
pub fn horizon_loss<T: Scalar>(s: &[T], d: &[T], horizon: T) -> T {
    if s.is_empty() {
        return T::zero();
    }
    let sum: T = s
        .iter()
        .zip(d)
        .map(|(&si, &di)| {
            let over = (si + di - horizon).max(T::zero());
            over * over
        })
        .sum();
    sum / T::lit(s.len() as f64)
}

/// The relaxed loss of one instance, with reusable buffers for the time grid.
#[derive(Debug, Clone)]
pub struct Relaxation<T: Scalar> {
    durations: Vec<T>,
    edges: Vec<(usize, usize)>,
    requirements: Array2<T>,
    capacities: Vec<T>,
    horizon: usize,
    grid: Option<Workspace<T>>,
}

/// Running-activity grid and the loss gradient with respect to it.
#[derive(Debug, Clone)]
struct Workspace<T> {
    running: Array2<T>,
    running_grad: Array2<T>,
}

impl<T: Scalar> Relaxation<T> {
    pub fn new(inst: &ProjectInstance) -> Self {
        let n = inst.n();
        let k = inst.resources();
        let requirements = Array2::from_shape_fn((n, k), |(i, r)| T::lit(inst.requirements[i][r] as f64));
        Relaxation {
            durations: inst.durations.iter().map(|&d| T::lit(d as f64)).collect(),
            edges: inst.edges.clone(),
            requirements,
            capacities: inst.capacities.iter().map(|&c| T::lit(c as f64)).collect(),
            horizon: inst.horizon as usize,
            grid: None,
        }
    }

    pub fn n(&self) -> usize {
        self.durations.len()
    }

    pub fn durations(&self) -> &[T] {
        &self.durations
    }

    /// Bytes held by the time grid and its gradient buffer (zero until a resource-aware evaluation).
    pub fn grid_bytes(&self) -> usize {
        self.grid.as_ref().map_or(0, |w| {
            (w.running.len() + w.running_grad.len()) * std::mem::size_of::<T>()
        })
    }

    /// Allocates the grid buffers without evaluating anything.
    pub fn reserve_grid(&mut self) {
        let shape = (self.n(), self.horizon);
        self.grid.get_or_insert_with(|| Workspace {
            running: Array2::zeros(shape),
            running_grad: Array2::zeros(shape),
        });
    }

    /// Evaluates the loss and, if `grad` is given, writes `d total / d theta` into it.
    pub fn evaluate(
        &mut self,
        theta: &[T],
        cfg: &RelaxationConfig,
        grad: Option<&mut [T]>,
    ) -> Result<LossBreakdown<T>, RelaxError> {
        cfg.validate()?;
        let n = self.n();
        if theta.len() != n {
            return Err(RelaxError::Dimension(format!("theta has {} entries for {n} activities", theta.len())));
        }
        ensure_finite(theta, "theta")?;
        if n == 0 {
            return Ok(LossBreakdown::default());
        }
        let beta = T::lit(cfg.beta);
        let tau = T::lit(cfg.tau);
        let (lp, lr, lh) = (T::lit(cfg.lambda_p), T::lit(cfg.lambda_r), T::lit(cfg.lambda_h));
        let horizon = T::lit(self.horizon as f64);
        let want_grad = grad.is_some();

        let s = start_times(theta)?;
        let anchor = anchor_index(theta).expect("non-empty theta");
        let d = &self.durations;

        // d total / d s, accumulated term by term.
        let mut gs = vec![T::zero(); n];

        let mut weights = Vec::new();
        let makespan = finite(
            soft_max_with_weights(&s, d, beta, want_grad.then_some(&mut weights)),
            "soft makespan",
        )?;
        if want_grad {
            gs.copy_from_slice(&weights);
        }

        let viol = precedence_violations(&s, d, &self.edges);
        let max_prec = viol.iter().copied().fold(T::zero(), T::max);
        let prec_loss = if self.edges.is_empty() {
            T::zero()
        } else {
            let inv_e = T::one() / T::lit(self.edges.len() as f64);
            if want_grad {
                for (&(i, j), &v) in self.edges.iter().zip(&viol) {
                    if v > T::zero() {
                        let g = lp * smooth_penalty_slope(v) * inv_e;
                        gs[i] += g;
                        gs[j] -= g;
                    }
                }
            }
            viol.iter().map(|&v| smooth_penalty(v)).sum::<T>() * inv_e
        };
        let prec_loss = finite(prec_loss, "precedence loss")?;

        let hor_loss = finite(horizon_loss(&s, d, horizon), "horizon loss")?;
        if want_grad {
            let scale = T::lit(2.0) / T::lit(n as f64);
            for i in 0..n {
                let over = (s[i] + d[i] - horizon).max(T::zero());
                gs[i] += lh * scale * over;
            }
        }

        let (res_loss, max_over) = if cfg.precedence_only || self.capacities.is_empty() || self.horizon == 0 {
            (T::zero(), T::zero())
        } else {
            self.resource_term(&s, tau, lr, want_grad.then_some(&mut gs))?
        };
        let res_loss = finite(res_loss, "resource loss")?;

        let total = finite(makespan + lp * prec_loss + lr * res_loss + lh * hor_loss, "total loss")?;

        if let Some(out) = grad {
            // s_i = sp(theta_i) - sp(theta_anchor)
            let total_gs: T = gs.iter().copied().sum();
            for i in 0..n {
                out[i] = sigmoid(theta[i]) * gs[i];
            }
            out[anchor] -= sigmoid(theta[anchor]) * total_gs;
            ensure_finite(out, "gradient")?;
        }

        Ok(LossBreakdown {
            total,
            makespan_soft: makespan,
            precedence_loss: prec_loss,
            resource_loss: res_loss,
            horizon_loss: hor_loss,
            max_prec_violation: max_prec,
            max_res_overshoot: max_over,
        })
    }

    /// Resource loss and largest overshoot; with `gs`, adds `lambda_r * d loss / d s`.
    fn resource_term(
        &mut self,
        s: &[T],
        tau: T,
        lambda_r: T,
        gs: Option<&mut Vec<T>>,
    ) -> Result<(T, T), RelaxError> {
        self.reserve_grid();
        let ws = self.grid.as_mut().expect("grid reserved");
        fill_running(&mut ws.running, s, &self.durations, tau);
        let usage = resource_usage(&ws.running, &self.requirements)?;
        let (loss, worst) = resource_loss_and_max(&usage, &self.capacities)?;

        if let Some(gs) = gs {
            let cells = T::lit(usage.len() as f64);
            let two = T::lit(2.0);
            // d loss / d u_tk
            let mut usage_grad = usage;
            for mut row in usage_grad.outer_iter_mut() {
                for (u, &c) in row.iter_mut().zip(&self.capacities) {
                    let o = ((*u - c) / c).max(T::zero());
                    *u = two * o / (c * cells);
                }
            }
            // d loss / d rho = R (d loss / d U)^T
            ws.running_grad.assign(&self.requirements.dot(&usage_grad.t()));
            let half = T::lit(0.5);
            for (i, row) in ws.running_grad.outer_iter().enumerate() {
                let mut acc = T::zero();
                for (t, &g) in row.iter().enumerate() {
                    if g == T::zero() {
                        continue;
                    }
                    let (a, b) = running_factors(s[i], self.durations[i], T::lit(t as f64) + half, tau);
                    // d(a b)/ds = tau a b (a - b)
                    acc += g * tau * a * b * (a - b);
                }
                gs[i] += lambda_r * acc;
            }
        }
        Ok((loss, worst))
    }
}

/// Loss breakdown of `theta` on `inst`.
pub fn total_loss<T: Scalar>(
    theta: &[T],
    inst: &ProjectInstance,
    cfg: &RelaxationConfig,
) -> Result<LossBreakdown<T>, RelaxError> {
    Relaxation::new(inst).evaluate(theta, cfg, None)
}

/// Exact gradient of the total loss with respect to `theta`.
pub fn grad_total_loss<T: Scalar>(
    theta: &[T],
    inst: &ProjectInstance,
    cfg: &RelaxationConfig,
) -> Result<Vec<T>, RelaxError> {
    let mut g = vec![T::zero(); theta.len()];
    Relaxation::new(inst).evaluate(theta, cfg, Some(&mut g))?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn equal_parameters_anchor_at_zero() {
        assert_eq!(start_times(&[0.0f64, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_parameter_start_times() {
        let s = start_times(&[0.0f64, 10.0]).unwrap();
        assert_eq!(s[0], 0.0);
        let expected = (1.0f64 + 10f64.exp()).ln() - 2f64.ln();
        assert_abs_diff_eq!(s[1], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 9.3069, epsilon = 1e-4);
    }

    #[test]
    fn rejects_non_finite_theta() {
        assert_eq!(
            start_times(&[0.0f64, f64::NAN]),
            Err(RelaxError::NonFinite { component: "theta" })
        );
    }

    #[test]
    fn soft_makespan_examples() {
        assert_eq!(soft_makespan(&[0.0f64], &[5.0], 3.0), 5.0);
        assert_abs_diff_eq!(
            soft_makespan(&[4.0f64, 0.0], &[6.0, 10.0], 1.0),
            10.0 + 2f64.ln(),
            epsilon = 1e-12
        );
        let m = soft_makespan(&[3.0f64, 7.0, 9.0], &[0.0, 0.0, 0.0], 20.0);
        assert!(m >= 9.0 && m - 9.0 <= 3f64.ln() / 20.0);
        assert!(m - 9.0 < 0.06);
    }

    #[test]
    fn soft_makespan_survives_large_arguments() {
        let m = soft_makespan(&[150.0f64, 149.0], &[0.0, 0.0], 20.0);
        assert!(m.is_finite() && m >= 150.0);
        let m32 = soft_makespan(&[150.0f32, 149.0], &[0.0, 0.0], 20.0);
        assert!(m32.is_finite());
    }

    #[test]
    fn violation_examples() {
        let v = precedence_violations(&[0.0f64, 2.0], &[3.0, 0.0], &[(0, 1)]);
        assert_eq!(v, vec![1.0]);
        let v = precedence_violations(&[0.0f64, 5.0], &[3.0, 0.0], &[(0, 1)]);
        assert_eq!(v, vec![0.0]);
        let v = precedence_violations(&[0.0f64, 3.0, 7.0], &[3.0, 4.0, 1.0], &[(0, 1), (1, 2)]);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn penalty_examples_and_joint() {
        assert_eq!(smooth_penalty(0.0f64), 0.0);
        assert_eq!(smooth_penalty(0.5f64), 0.125);
        assert_eq!(smooth_penalty(2.0f64), 1.5);
        let eps = 1e-9f64;
        assert_abs_diff_eq!(smooth_penalty(1.0 - eps), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(smooth_penalty(1.0f64), 0.5);
        assert_abs_diff_eq!(smooth_penalty_slope(1.0 - eps), 1.0, epsilon = 1e-8);
        assert_eq!(smooth_penalty_slope(1.0f64), 1.0);
    }

    #[test]
    fn precedence_loss_examples() {
        let d = [3.0f64, 0.0, 0.0];
        assert_eq!(precedence_loss(&[0.0, 3.0, 5.0], &d, &[(0, 1)]), 0.0);
        // single edge, v = 2
        assert_eq!(precedence_loss(&[0.0, 1.0, 0.0], &d, &[(0, 1)]), 1.5);
        // v = (0.5, 2)
        let s = [0.0, 2.5, 1.0];
        assert_eq!(precedence_loss(&s, &d, &[(0, 1), (0, 2)]), 0.8125);
        assert_eq!(precedence_loss::<f64>(&s, &d, &[]), 0.0);
    }

    #[test]
    fn running_row_limits() {
        let p = soft_running_matrix(&[0.0f64], &[4.0], 8, 200.0);
        for t in 0..8 {
            let want = if t < 4 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(p[[0, t]], want, epsilon = 1e-12);
        }
        let p = soft_running_matrix(&[0.0f64], &[4.0], 8, 4.0);
        let mass: f64 = p.row(0).sum();
        assert!((3.5..=4.5).contains(&mass), "{mass}");
    }

    #[test]
    fn zero_duration_rows_are_small() {
        let tau = 4.0f64;
        let bound = sigmoid(tau / 2.0) * sigmoid(-tau / 2.0);
        assert!(bound < 0.25);
        // integer starts sit half a cell away from every center
        let p = soft_running_matrix(&[0.0f64, 2.0, 5.0], &[0.0, 0.0, 0.0], 8, tau);
        assert!(p.iter().all(|&x| x > 0.0 && x <= bound + 1e-15));
        // a start on a cell center reaches the global maximum of 1/4
        let p = soft_running_matrix(&[2.5f64, 3.3], &[0.0, 0.0], 8, tau);
        assert!(p.iter().all(|&x| x > 0.0 && x <= 0.25 + 1e-15));
        assert!((p[[0, 2]] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn usage_examples() {
        let p = Array2::<f64>::ones((2, 3));
        let u = resource_usage(&p, &array![[2.0], [3.0]]).unwrap();
        assert!(u.iter().all(|&x| x == 5.0));
        let u = resource_usage(&Array2::<f64>::zeros((2, 3)), &array![[2.0], [3.0]]).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
        assert!(resource_usage(&p, &array![[1.0]]).is_err());
    }

    #[test]
    fn resource_loss_examples() {
        let mut u = Array2::<f64>::zeros((25, 4));
        let caps = [10.0, 10.0, 10.0, 10.0];
        assert_eq!(resource_loss(&u, &caps).unwrap(), 0.0);
        u[[3, 1]] = 11.0;
        assert_abs_diff_eq!(resource_loss(&u, &caps).unwrap(), 1e-4, epsilon = 1e-15);
        let mut big = Array2::<f64>::zeros((25, 4));
        big[[3, 1]] = 110.0;
        let caps100 = [100.0; 4];
        assert_abs_diff_eq!(
            resource_loss(&big, &caps100).unwrap(),
            resource_loss(&u, &caps).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(resource_loss(&u, &[10.0, 0.0, 10.0, 10.0]), Err(RelaxError::ZeroCapacity { resource: 1 }));
    }

    #[test]
    fn horizon_loss_examples() {
        let d = [1.0f64, 1.0, 1.0, 1.0];
        assert_eq!(horizon_loss(&[0.0, 1.0, 2.0, 3.0], &d, 10.0), 0.0);
        assert_eq!(horizon_loss(&[0.0, 1.0, 2.0, 11.0], &d, 10.0), 1.0);
        assert_eq!(horizon_loss(&[0.0, 1.0, 2.0, 9.0], &d, 10.0), 0.0);
    }

    #[test]
    fn single_zero_duration_activity() {
        let mut inst = ProjectInstance::chain("one", &[]);
        inst.durations = vec![0];
        inst.edges.clear();
        inst.requirements = vec![vec![]];
        let out = total_loss(&[0.0f64], &inst, &RelaxationConfig::default()).unwrap();
        assert_eq!(out.total, 0.0);
        assert_eq!(out.makespan_soft, 0.0);
    }

    #[test]
    fn single_activity_gradient_vanishes() {
        let mut inst = ProjectInstance::chain("one", &[]);
        inst.durations = vec![5];
        inst.edges.clear();
        inst.requirements = vec![vec![]];
        inst.horizon = 5;
        let g = grad_total_loss(&[0.7f64], &inst, &RelaxationConfig::default()).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn violated_edge_gradient_signs() {
        // activities 1 -> 2 overlapping; 0 is an unconstrained early anchor
        let inst = ProjectInstance {
            name: "pair".into(),
            durations: vec![0, 4, 1],
            edges: vec![(1, 2)],
            requirements: vec![vec![]; 3],
            capacities: vec![],
            horizon: 20,
        };
        let cfg = RelaxationConfig {
            lambda_p: 100.0,
            ..RelaxationConfig::default()
        };
        let theta = [-3.0f64, 2.0, 2.5];
        let g = grad_total_loss(&theta, &inst, &cfg).unwrap();
        assert!(g[1] > 0.0, "predecessor should move earlier: {g:?}");
        assert!(g[2] < 0.0, "successor should move later: {g:?}");
    }

    #[test]
    fn breakdown_composes_total() {
        let inst = ProjectInstance {
            name: "mix".into(),
            durations: vec![0, 3, 2, 0],
            edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            requirements: vec![vec![0], vec![2], vec![2], vec![0]],
            capacities: vec![3],
            horizon: 5,
        };
        let cfg = RelaxationConfig {
            lambda_p: 3.0,
            lambda_r: 7.0,
            lambda_h: 2.0,
            ..RelaxationConfig::default()
        };
        let out = total_loss(&[0.1f64, 0.3, 0.2, 0.4], &inst, &cfg).unwrap();
        let recomposed = out.makespan_soft + 3.0 * out.precedence_loss + 7.0 * out.resource_loss + 2.0 * out.horizon_loss;
        assert_abs_diff_eq!(out.total, recomposed, epsilon = 1e-12);
        assert!(out.resource_loss > 0.0);
    }

    #[test]
    fn precedence_only_skips_grid() {
        let inst = ProjectInstance {
            name: "mix".into(),
            durations: vec![0, 3, 2, 0],
            edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            requirements: vec![vec![0], vec![2], vec![2], vec![0]],
            capacities: vec![3],
            horizon: 5,
        };
        let cfg = RelaxationConfig {
            precedence_only: true,
            ..RelaxationConfig::default()
        };
        let mut relax = Relaxation::<f64>::new(&inst);
        let out = relax.evaluate(&[0.1, 0.3, 0.2, 0.4], &cfg, None).unwrap();
        assert_eq!(out.resource_loss, 0.0);
        assert_eq!(relax.grid_bytes(), 0);
    }
}
