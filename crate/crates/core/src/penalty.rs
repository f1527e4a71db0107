//! Adaptive penalty coefficients.
//!
//! Every `update_period` epochs the controller inspects the recent history of
//! the worst precedence violation and the worst resource overshoot and
//! rescales `lambda_p` and `lambda_r` independently:
//!
//! * escalation when violations stay above `small_violation_eps` without
//!   changing much,
//! * reduction when they are small and stable,
//! * recovery (overrides both) when they trend upward again after having
//!   been at least twice as low earlier in the window.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyControllerConfig {
    pub lookback: usize,
    pub escalate_factor: f64,
    pub reduce_factor: f64,
    pub recover_factor: f64,
    pub small_violation_eps: f64,
    pub stable_rel_change: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub update_period: usize,
}

impl Default for PenaltyControllerConfig {
    fn default() -> Self {
        PenaltyControllerConfig {
            lookback: 100,
            escalate_factor: 10.0,
            reduce_factor: 0.5,
            recover_factor: 100.0,
            small_violation_eps: 1e-4,
            stable_rel_change: 0.05,
            lambda_min: 1.0,
            lambda_max: 1e9,
            update_period: 50,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("epoch {epoch} recorded after epoch {last}")]
    OutOfOrder { epoch: usize, last: usize },
    #[error("invalid penalty controller config: {0}")]
    InvalidConfig(String),
}

impl PenaltyControllerConfig {
    pub fn validate(&self) -> Result<(), PenaltyError> {
        let bad = |m: &str| Err(PenaltyError::InvalidConfig(m.to_string()));
        if [self.escalate_factor, self.reduce_factor, self.recover_factor]
            .iter()
            .any(|&f| !(f > 0.0 && f.is_finite()))
        {
            return bad("factors must be positive");
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite()) {
            return bad("need 0 < lambda_min <= lambda_max < inf");
        }
        if self.update_period == 0 || self.lookback < self.update_period {
            return bad("need 1 <= update_period <= lookback");
        }
        if !(self.small_violation_eps >= 0.0 && self.stable_rel_change >= 0.0) {
            return bad("thresholds must be non-negative");
        }
        Ok(())
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        lambda.clamp(self.lambda_min, self.lambda_max)
    }
}

/// Bounded window of `(epoch, max precedence violation, max overshoot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationHistory {
    capacity: usize,
    entries: VecDeque<(usize, f64, f64)>,
}

impl ViolationHistory {
    pub fn new(capacity: usize) -> Self {
        ViolationHistory {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &(usize, f64, f64)> {
        self.entries.iter()
    }

    pub fn record(&mut self, epoch: usize, prec_viol: f64, res_viol: f64) -> Result<(), PenaltyError> {
        if let Some(&(last, _, _)) = self.entries.back() {
            if epoch <= last {
                return Err(PenaltyError::OutOfOrder { epoch, last });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((epoch, prec_viol, res_viol));
        Ok(())
    }

    fn series(&self, family: Family) -> Vec<f64> {
        self.entries
            .iter()
            .map(|&(_, p, r)| match family {
                Family::Precedence => p,
                Family::Resource => r,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Precedence,
    Resource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    Escalate,
    Reduce,
    Recover,
}

/// One controller decision, kept for post-hoc analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub family: Family,
    pub adjustment: Adjustment,
    pub from: f64,
    pub to: f64,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{:?} {:e} -> {:e}", self.family, self.adjustment, self.from, self.to)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Least-squares slope of `xs` against its index.
fn slope(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = (n - 1) as f64 / 2.0;
    let my = mean(xs);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &y) in xs.iter().enumerate() {
        let dx = i as f64 - mx;
        num += dx * (y - my);
        den += dx * dx;
    }
    num / den
}

fn classify(xs: &[f64], cfg: &PenaltyControllerConfig) -> Option<Adjustment> {
    if xs.is_empty() {
        return None;
    }
    let half = xs.len() / 2;
    let (older, recent) = xs.split_at(half);
    let m = mean(xs);
    let last = *xs.last().expect("non-empty");
    let lowest = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if slope(recent) > 0.0 && lowest < 0.5 * last {
        return Some(Adjustment::Recover);
    }
    let rel_change = if m <= f64::MIN_POSITIVE {
        0.0
    } else {
        (mean(recent) - mean(older)).abs() / m
    };
    let stable = rel_change < cfg.stable_rel_change;
    match (m > cfg.small_violation_eps, stable) {
        (true, true) => Some(Adjustment::Escalate),
        (false, true) => Some(Adjustment::Reduce),
        _ => None,
    }
}

/// New `(lambda_p, lambda_r)` and the adjustments applied. Pure in its inputs.
pub fn decide(
    history: &ViolationHistory,
    lambda_p: f64,
    lambda_r: f64,
    cfg: &PenaltyControllerConfig,
) -> (f64, f64, Vec<Decision>) {
    let mut decisions = Vec::new();
    let mut apply = |family: Family, lambda: f64| -> f64 {
        let Some(adj) = classify(&history.series(family), cfg) else {
            return lambda;
        };
        let factor = match adj {
            Adjustment::Escalate => cfg.escalate_factor,
            Adjustment::Reduce => cfg.reduce_factor,
            Adjustment::Recover => cfg.recover_factor,
        };
        let next = cfg.clamp(lambda * factor);
        if next != lambda {
            decisions.push(Decision {
                family,
                adjustment: adj,
                from: lambda,
                to: next,
            });
        }
        next
    };
    let p = apply(Family::Precedence, lambda_p);
    let r = apply(Family::Resource, lambda_r);
    (p, r, decisions)
}

/// Controller state owned by one solve.
#[derive(Debug, Clone)]
pub struct PenaltyController {
    pub config: PenaltyControllerConfig,
    pub history: ViolationHistory,
    pub lambda_p: f64,
    pub lambda_r: f64,
    /// When set, the resource coefficient is pinned (precedence-only runs).
    pub freeze_resource: bool,
}

impl PenaltyController {
    pub fn new(config: PenaltyControllerConfig, lambda_p: f64, lambda_r: f64) -> Self {
        PenaltyController {
            history: ViolationHistory::new(config.lookback),
            lambda_p: config.clamp(lambda_p),
            lambda_r: config.clamp(lambda_r),
            config,
            freeze_resource: false,
        }
    }

    /// Records one epoch and, on update epochs with enough history, adjusts the coefficients.
    pub fn observe(&mut self, epoch: usize, prec_viol: f64, res_viol: f64) -> Result<Vec<Decision>, PenaltyError> {
        self.history.record(epoch, prec_viol, res_viol)?;
        let due = (epoch + 1).is_multiple_of(self.config.update_period);
        if !due || self.history.len() * 2 < self.config.lookback {
            return Ok(Vec::new());
        }
        let (p, r, mut decisions) = decide(&self.history, self.lambda_p, self.lambda_r, &self.config);
        self.lambda_p = p;
        if self.freeze_resource {
            decisions.retain(|d| d.family != Family::Resource);
        } else {
            self.lambda_r = r;
        }
        Ok(decisions)
    }
}
