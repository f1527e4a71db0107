//! Gradient-descent driver: Adam with cosine warm restarts, adaptive
//! penalties, plateau perturbation, feasible-candidate tracking and early
//! stopping.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::ProjectInstance;
use crate::penalty::{Decision, PenaltyController, PenaltyControllerConfig};
use crate::relax::{start_times, LossBreakdown, RelaxError, Relaxation, RelaxationConfig};
use crate::scalar::{softplus_inv, Scalar};
use crate::schedule::{check_feasible, extract_schedule, repair_schedule, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr0: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    /// Epochs per cosine cycle; the learning rate jumps back to `lr0` at every cycle start.
    pub reheat_period: usize,
    /// Epochs without a loss improvement of at least 1e-6 before noise is injected.
    pub plateau_window: usize,
    pub perturb_sigma: f64,
    pub stop_violation_eps: f64,
    /// Global gradient norm above which gradients are rescaled before the Adam step.
    pub grad_clip: f64,
    /// Zero the Adam moments at every warm restart and after every penalty change.
    pub reset_moments: bool,
    /// Epochs over which the rounded candidate must stay feasible with an
    /// unchanged makespan before stopping early.
    pub stabilization_window: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr0: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 5000,
            reheat_period: 500,
            plateau_window: 200,
            perturb_sigma: 0.01,
            stop_violation_eps: 1e-3,
            grad_clip: 1e3,
            reset_moments: true,
            stabilization_window: 50,
            seed: 1,
        }
    }
}

/// How the relaxation sharpness and initial weights evolve over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    pub tau: f64,
    /// Ramp tau linearly from 2 to 8 instead of holding it constant.
    pub tau_ramp: bool,
    pub lambda_p0: f64,
    pub lambda_r0: f64,
    /// Fixed horizon-overflow weight; `None` tracks the current `lambda_r`.
    pub lambda_h: Option<f64>,
    pub precedence_only: bool,
}

impl Default for RelaxationSchedule {
    fn default() -> Self {
        RelaxationSchedule {
            beta_start: 1.0,
            beta_end: 20.0,
            tau: 4.0,
            tau_ramp: false,
            lambda_p0: 1.0,
            lambda_r0: 1.0,
            lambda_h: None,
            precedence_only: false,
        }
    }
}

impl RelaxationSchedule {
    /// Geometric ramp from `beta_start` to `beta_end` across the epoch budget.
    pub fn beta_at(&self, epoch: usize, max_epochs: usize) -> f64 {
        if max_epochs <= 1 {
            return self.beta_end;
        }
        let frac = (epoch as f64 / (max_epochs - 1) as f64).min(1.0);
        self.beta_start * (self.beta_end / self.beta_start).powf(frac)
    }

    pub fn tau_at(&self, epoch: usize, max_epochs: usize) -> f64 {
        if !self.tau_ramp {
            return self.tau;
        }
        let frac = if max_epochs <= 1 {
            1.0
        } else {
            (epoch as f64 / (max_epochs - 1) as f64).min(1.0)
        };
        2.0 + 6.0 * frac
    }
}

/// Everything a solve depends on besides the instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SolverConfig {
    pub relaxation: RelaxationSchedule,
    pub optimizer: OptimizerConfig,
    pub penalty: PenaltyControllerConfig,
    /// Run a right-shift repair on rounded candidates before checking them.
    pub repair: bool,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let o = &self.optimizer;
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if !(o.lr0 > 0.0 && o.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if !(0.0 < o.adam_beta1 && o.adam_beta1 < o.adam_beta2 && o.adam_beta2 < 1.0) {
            return bad("need 0 < adam_beta1 < adam_beta2 < 1");
        }
        if !(o.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if o.reheat_period == 0 || o.plateau_window == 0 || o.stabilization_window == 0 {
            return bad("periods must be at least 1");
        }
        if !(o.perturb_sigma >= 0.0 && o.grad_clip > 0.0 && o.stop_violation_eps > 0.0) {
            return bad("perturb_sigma >= 0, grad_clip > 0 and stop_violation_eps > 0 required");
        }
        let r = &self.relaxation;
        if !(r.beta_start > 0.0 && r.beta_end > 0.0) {
            return bad("beta_start and beta_end must be positive");
        }
        if !(r.lambda_p0 >= 0.0 && r.lambda_r0 >= 0.0 && r.lambda_h.is_none_or(|h| h >= 0.0)) {
            return bad("penalty weights must be non-negative");
        }
        self.penalty.validate().map_err(|e| SolveError::Config(e.to_string()))?;
        self.relaxation_at(0, 1.0, 1.0).validate()?;
        Ok(())
    }

    /// Relaxation weights for a given epoch and current controller coefficients.
    pub fn relaxation_at(&self, epoch: usize, lambda_p: f64, lambda_r: f64) -> RelaxationConfig {
        let r = &self.relaxation;
        let max = self.optimizer.max_epochs;
        let lambda_r = if r.precedence_only { 0.0 } else { lambda_r };
        RelaxationConfig {
            beta: r.beta_at(epoch, max),
            tau: r.tau_at(epoch, max),
            lambda_p,
            lambda_r,
            lambda_h: r.lambda_h.unwrap_or(lambda_r),
            precedence_only: r.precedence_only,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error("non-finite gradient entry")]
    NonFiniteGradient,
    #[error("epoch {epoch}: {source}")]
    Diverged {
        epoch: usize,
        source: RelaxError,
        trace: Box<ConvergenceTrace>,
    },
}

/// Mutable state of one solve.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub theta: Vec<T>,
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub adam_steps: u32,
    pub epoch: usize,
    pub best_loss: f64,
    /// Epochs since `best_loss` last improved.
    pub stall_epochs: usize,
    pub best_feasible: Option<Schedule>,
    pub rng: ChaCha8Rng,
}

impl<T: Scalar> SolverState<T> {
    /// Forgets gradient history so the next step is sized by `lr` alone.
    pub fn reset_moments(&mut self) {
        self.first_moment.iter_mut().for_each(|m| *m = T::zero());
        self.second_moment.iter_mut().for_each(|v| *v = T::zero());
        self.adam_steps = 0;
    }

    pub fn best_makespan(&self) -> Option<u32> {
        self.best_feasible.as_ref().map(|s| s.makespan)
    }

    /// Updates the plateau bookkeeping with this epoch's loss.
    pub fn note_loss(&mut self, loss: f64) {
        if loss < self.best_loss - 1e-6 {
            self.best_loss = loss;
            self.stall_epochs = 0;
        } else {
            self.stall_epochs += 1;
        }
    }
}

/// Start times drawn uniformly over the first half of the horizon, mapped back through softplus.
pub fn init_state<T: Scalar>(inst: &ProjectInstance, seed: u64) -> SolverState<T> {
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = (f64::from(inst.horizon) / 2.0).max(1.0);
    let theta = (0..n)
        .map(|_| T::lit(softplus_inv(rng.random_range(0.5..=hi))))
        .collect();
    SolverState {
        theta,
        first_moment: vec![T::zero(); n],
        second_moment: vec![T::zero(); n],
        adam_steps: 0,
        epoch: 0,
        best_loss: f64::INFINITY,
        stall_epochs: 0,
        best_feasible: None,
        rng,
    }
}

/// One bias-corrected Adam update of `state.theta`.
pub fn adam_step<T: Scalar>(
    state: &mut SolverState<T>,
    grad: &[T],
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<(), SolveError> {
    if grad.len() != state.theta.len() || grad.iter().any(|g| !g.is_finite()) {
        return Err(SolveError::NonFiniteGradient);
    }
    state.adam_steps += 1;
    let b1 = T::lit(cfg.adam_beta1);
    let b2 = T::lit(cfg.adam_beta2);
    let one = T::one();
    let t = state.adam_steps as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(lr);
    let eps = T::lit(cfg.adam_eps);
    for (i, &g) in grad.iter().enumerate() {
        let m = b1 * state.first_moment[i] + (one - b1) * g;
        let v = b2 * state.second_moment[i] + (one - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        state.theta[i] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
    Ok(())
}

/// Cosine decay from `lr0` to `lr0 / 100` inside each reheat period.
pub fn lr_schedule(epoch: usize, cfg: &OptimizerConfig) -> f64 {
    let pos = (epoch % cfg.reheat_period) as f64 / cfg.reheat_period as f64;
    cfg.lr0 * (0.01 + 0.99 * (1.0 + (PI * pos).cos()) / 2.0)
}

/// Adds Gaussian noise to every parameter once the loss has stalled for a full window.
pub fn maybe_perturb<T: Scalar>(state: &mut SolverState<T>, cfg: &OptimizerConfig) -> bool {
    if state.stall_epochs < cfg.plateau_window || cfg.perturb_sigma == 0.0 {
        return false;
    }
    let noise = Normal::new(0.0, cfg.perturb_sigma).expect("valid sigma");
    for t in state.theta.iter_mut() {
        *t += T::lit(noise.sample(&mut state.rng));
    }
    state.stall_epochs = 0;
    true
}

/// Rounds the current start times, checks them exactly, and keeps the
/// candidate if it is feasible and strictly better. Returns the candidate and
/// whether it was feasible.
pub fn track_feasible<T: Scalar>(
    state: &mut SolverState<T>,
    starts: &[T],
    inst: &ProjectInstance,
    repair: bool,
) -> (Schedule, bool) {
    let mut cand = extract_schedule(starts, inst);
    if repair {
        if let Ok(fixed) = repair_schedule(&cand, inst) {
            cand = fixed;
        }
    }
    let feasible = check_feasible(&cand, inst).is_empty();
    if feasible && state.best_makespan().is_none_or(|m| cand.makespan < m) {
        state.best_feasible = Some(cand.clone());
    }
    (cand, feasible)
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub loss: f64,
    pub makespan_soft: f64,
    pub prec_viol_max: f64,
    pub res_viol_max: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub lr: f64,
    pub beta: f64,
    pub best_feasible_makespan: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    /// Penalty controller decisions with the epoch they were taken at.
    pub decisions: Vec<(usize, Decision)>,
    pub perturbations: Vec<usize>,
    /// Epochs whose rounded candidate passed the exact check.
    pub feasible_epochs: Vec<usize>,
    pub early_stop_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub best: Option<Schedule>,
    pub theta: Vec<T>,
    pub trace: ConvergenceTrace,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub epochs_run: usize,
}

impl<T> SolveOutcome<T> {
    pub fn early_stop_epoch(&self) -> Option<usize> {
        self.trace.early_stop_epoch
    }
}

/// Runs the full optimization loop on one instance.
///
/// In precedence-only mode the resource grid is never built and candidates are
/// checked against precedence constraints only.
pub fn solve<T: Scalar>(inst: &ProjectInstance, cfg: &SolverConfig) -> Result<SolveOutcome<T>, SolveError> {
    cfg.validate()?;
    let opt = &cfg.optimizer;
    let prec_only = cfg.relaxation.precedence_only;
    let check_inst = if prec_only {
        inst.without_resources()
    } else {
        inst.clone()
    };
    let mut relax = Relaxation::<T>::new(inst);
    let mut state = init_state::<T>(inst, opt.seed);
    let mut controller = PenaltyController::new(cfg.penalty, cfg.relaxation.lambda_p0, cfg.relaxation.lambda_r0);
    controller.freeze_resource = prec_only;
    let mut trace = ConvergenceTrace::default();
    let mut grad = vec![T::zero(); inst.n()];
    // exact makespan of each epoch's rounded candidate, `None` when infeasible
    let mut recent_makespan: VecDeque<Option<u32>> = VecDeque::with_capacity(opt.stabilization_window + 1);
    let clip = T::lit(opt.grad_clip);

    for epoch in 0..opt.max_epochs {
        state.epoch = epoch;
        if opt.reset_moments && epoch > 0 && epoch % opt.reheat_period == 0 {
            state.reset_moments();
        }
        let lr = lr_schedule(epoch, opt);
        let rcfg = cfg.relaxation_at(epoch, controller.lambda_p, controller.lambda_r);
        let loss: LossBreakdown<T> = match relax.evaluate(&state.theta, &rcfg, Some(&mut grad)) {
            Ok(l) => l,
            Err(source) => {
                return Err(SolveError::Diverged {
                    epoch,
                    source,
                    trace: Box::new(trace),
                })
            }
        };
        let starts = start_times(&state.theta)?;
        let (cand, feasible) = track_feasible(&mut state, &starts, &check_inst, cfg.repair);
        if feasible {
            trace.feasible_epochs.push(epoch);
        }
        state.note_loss(loss.total.as_f64());

        let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
        if norm > clip {
            let scale = clip / norm;
            grad.iter_mut().for_each(|g| *g *= scale);
        }
        adam_step(&mut state, &grad, lr, opt)?;

        let prec = loss.max_prec_violation.as_f64();
        let res = loss.max_res_overshoot.as_f64();
        let decisions = controller
            .observe(epoch, prec, res)
            .expect("epochs are recorded in increasing order");
        if !decisions.is_empty() {
            // the objective changed scale; restart plateau detection
            state.best_loss = f64::INFINITY;
            state.stall_epochs = 0;
            if opt.reset_moments {
                state.reset_moments();
            }
        }
        trace.decisions.extend(decisions.into_iter().map(|d| (epoch, d)));
        if maybe_perturb(&mut state, opt) {
            trace.perturbations.push(epoch);
        }

        trace.records.push(TraceRecord {
            epoch,
            loss: loss.total.as_f64(),
            makespan_soft: loss.makespan_soft.as_f64(),
            prec_viol_max: prec,
            res_viol_max: res,
            lambda_p: rcfg.lambda_p,
            lambda_r: rcfg.lambda_r,
            lr,
            beta: rcfg.beta,
            best_feasible_makespan: state.best_makespan(),
        });

        recent_makespan.push_back(feasible.then_some(cand.makespan));
        if recent_makespan.len() > opt.stabilization_window + 1 {
            recent_makespan.pop_front();
        }
        let stable = recent_makespan.len() == opt.stabilization_window + 1
            && recent_makespan.iter().all(|m| m.is_some() && *m == recent_makespan[0]);
        if feasible && stable && prec < opt.stop_violation_eps && res < opt.stop_violation_eps {
            trace.early_stop_epoch = Some(epoch);
            break;
        }
    }

    Ok(SolveOutcome {
        best: state.best_feasible,
        theta: state.theta,
        epochs_run: trace.records.len(),
        trace,
        lambda_p: controller.lambda_p,
        lambda_r: if prec_only { 0.0 } else { controller.lambda_r },
    })
}
