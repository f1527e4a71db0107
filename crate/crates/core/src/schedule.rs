//! Discrete schedules: rounding from the relaxation, exact feasibility
//! checking, and the classical oracles used to judge solver output
//! (critical path, serial schedule generation, exhaustive search).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::ProjectInstance;
use crate::scalar::Scalar;

/// Activity count (positive-duration activities) accepted by [`brute_force_optimal`] by default.
pub const BRUTE_FORCE_LIMIT: usize = 9;
/// Largest horizon accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX_HORIZON: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("precedence graph has a cycle through {0:?}")]
    Cycle(Vec<usize>),
    #[error("activity {activity} needs more of resource {resource} than its capacity")]
    Infeasible { activity: usize, resource: usize },
    #[error("instance has {activities} activities with positive duration, brute force is limited to {limit}")]
    TooManyActivities { activities: usize, limit: usize },
    #[error("horizon {horizon} exceeds the brute-force limit of {limit}")]
    HorizonTooLong { horizon: u32, limit: u32 },
}

/// Integer start times and the resulting makespan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: Vec<u32>,
    pub makespan: u32,
}

impl Schedule {
    pub fn new(start: Vec<u32>, durations: &[u32]) -> Self {
        let makespan = start
            .iter()
            .zip(durations)
            .map(|(&s, &d)| s + d)
            .max()
            .unwrap_or(0);
        Schedule { start, makespan }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleViolation {
    Length { expected: usize, found: usize },
    Makespan { declared: u32, actual: u32 },
    /// `to` starts `overlap` units before `from` finishes.
    Precedence { from: usize, to: usize, overlap: u32 },
    Overload { time: u32, resource: usize, excess: u32 },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleViolation::Length { expected, found } => {
                write!(f, "schedule has {found} start times, instance has {expected} activities")
            }
            ScheduleViolation::Makespan { declared, actual } => {
                write!(f, "declared makespan {declared} but activities finish at {actual}")
            }
            ScheduleViolation::Precedence { from, to, overlap } => {
                write!(f, "precedence {from} -> {to} violated by {overlap}")
            }
            ScheduleViolation::Overload { time, resource, excess } => {
                write!(f, "resource {resource} over capacity by {excess} at t = {time}")
            }
        }
    }
}

/// Rounds half up, then shifts so the earliest start is zero.
pub fn extract_schedule<T: Scalar>(s: &[T], inst: &ProjectInstance) -> Schedule {
    let half = T::lit(0.5);
    let rounded: Vec<i64> = s
        .iter()
        .map(|&x| (x + half).floor().to_i64().unwrap_or(i64::MAX / 4))
        .collect();
    let base = rounded.iter().copied().min().unwrap_or(0);
    let start = rounded
        .into_iter()
        .map(|x| u32::try_from(x - base).unwrap_or(u32::MAX / 4))
        .collect();
    Schedule::new(start, &inst.durations)
}

/// Exact integer feasibility check. An empty result means feasible.
///
/// Precedence violations come first in edge order, then overloads ordered by
/// `(time, resource)` with one entry per overloaded time unit. Resource usage
/// is only recomputed where it can change, at start and finish events.
pub fn check_feasible(sched: &Schedule, inst: &ProjectInstance) -> Vec<ScheduleViolation> {
    let n = inst.n();
    if sched.start.len() != n {
        return vec![ScheduleViolation::Length {
            expected: n,
            found: sched.start.len(),
        }];
    }
    let mut out = Vec::new();
    let finish: Vec<u32> = sched
        .start
        .iter()
        .zip(&inst.durations)
        .map(|(&s, &d)| s + d)
        .collect();
    let actual = finish.iter().copied().max().unwrap_or(0);
    if actual != sched.makespan {
        out.push(ScheduleViolation::Makespan {
            declared: sched.makespan,
            actual,
        });
    }
    for &(i, j) in &inst.edges {
        if finish[i] > sched.start[j] {
            out.push(ScheduleViolation::Precedence {
                from: i,
                to: j,
                overlap: finish[i] - sched.start[j],
            });
        }
    }

    let mut events: Vec<u32> = (0..n)
        .filter(|&i| inst.durations[i] > 0)
        .flat_map(|i| [sched.start[i], finish[i]])
        .collect();
    events.sort_unstable();
    events.dedup();
    let k = inst.resources();
    let mut usage = vec![0u32; k];
    for w in events.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        usage.iter_mut().for_each(|u| *u = 0);
        for i in 0..n {
            if sched.start[i] <= t0 && t0 < finish[i] {
                for (u, &r) in usage.iter_mut().zip(&inst.requirements[i]) {
                    *u += r;
                }
            }
        }
        if usage.iter().zip(&inst.capacities).all(|(u, c)| u <= c) {
            continue;
        }
        for t in t0..t1 {
            for (r, (&u, &c)) in usage.iter().zip(&inst.capacities).enumerate() {
                if u > c {
                    out.push(ScheduleViolation::Overload {
                        time: t,
                        resource: r,
                        excess: u - c,
                    });
                }
            }
        }
    }
    out
}

pub fn is_feasible(sched: &Schedule, inst: &ProjectInstance) -> bool {
    check_feasible(sched, inst).is_empty()
}

/// Longest duration path through the precedence graph.
pub fn critical_path(inst: &ProjectInstance) -> Result<u32, ScheduleError> {
    let tails = inst.tails().map_err(ScheduleError::Cycle)?;
    Ok(tails.into_iter().max().unwrap_or(0))
}

/// Latest finish times from a backward pass anchored at the horizon.
pub fn latest_finish(inst: &ProjectInstance) -> Result<Vec<u32>, ScheduleError> {
    let tails = inst.tails().map_err(ScheduleError::Cycle)?;
    let end = inst.horizon.max(tails.iter().copied().max().unwrap_or(0));
    Ok(tails
        .iter()
        .zip(&inst.durations)
        .map(|(&tail, &d)| end - (tail - d))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityRule {
    /// Minimum latest finish time, ties by index.
    #[default]
    MinLatestFinish,
    /// Lowest activity index first.
    Index,
}

struct Profile {
    usage: Vec<Vec<u32>>,
    resources: usize,
}

impl Profile {
    fn new(resources: usize) -> Self {
        Profile {
            usage: Vec::new(),
            resources,
        }
    }

    fn fits(&self, t: u32, d: u32, req: &[u32], caps: &[u32]) -> bool {
        (t..t + d).all(|tt| match self.usage.get(tt as usize) {
            None => true,
            Some(row) => row.iter().zip(req).zip(caps).all(|((&u, &r), &c)| u + r <= c),
        })
    }

    fn add(&mut self, t: u32, d: u32, req: &[u32]) {
        let end = (t + d) as usize;
        if self.usage.len() < end {
            self.usage.resize(end, vec![0; self.resources]);
        }
        for row in &mut self.usage[t as usize..end] {
            for (u, &r) in row.iter_mut().zip(req) {
                *u += r;
            }
        }
    }

    fn remove(&mut self, t: u32, d: u32, req: &[u32]) {
        for row in &mut self.usage[t as usize..(t + d) as usize] {
            for (u, &r) in row.iter_mut().zip(req) {
                *u -= r;
            }
        }
    }

    /// Earliest `t >= from` at which an activity fits for its whole duration.
    fn earliest_fit(&self, from: u32, d: u32, req: &[u32], caps: &[u32]) -> u32 {
        let mut t = from;
        while !self.fits(t, d, req, caps) {
            t += 1;
        }
        t
    }
}

fn check_requests(inst: &ProjectInstance) -> Result<(), ScheduleError> {
    for (i, row) in inst.requirements.iter().enumerate() {
        if inst.durations[i] == 0 {
            continue;
        }
        if let Some(k) = row.iter().zip(&inst.capacities).position(|(r, c)| r > c) {
            return Err(ScheduleError::Infeasible { activity: i, resource: k });
        }
    }
    Ok(())
}

/// Serial schedule generation with an arbitrary priority key (smaller first).
fn serial_sgs(inst: &ProjectInstance, key: &[u64]) -> Result<Schedule, ScheduleError> {
    inst.topological_order().map_err(ScheduleError::Cycle)?;
    check_requests(inst)?;
    let n = inst.n();
    let preds = inst.predecessors();
    let mut remaining_preds: Vec<usize> = preds.iter().map(Vec::len).collect();
    let succ = inst.successors();
    let mut start = vec![0u32; n];
    let mut done = vec![false; n];
    let mut profile = Profile::new(inst.resources());
    for _ in 0..n {
        let next = (0..n)
            .filter(|&i| !done[i] && remaining_preds[i] == 0)
            .min_by_key(|&i| (key[i], i))
            .expect("acyclic graph always has an eligible activity");
        let es = preds[next]
            .iter()
            .map(|&p| start[p] + inst.durations[p])
            .max()
            .unwrap_or(0);
        let d = inst.durations[next];
        let t = profile.earliest_fit(es, d, &inst.requirements[next], &inst.capacities);
        profile.add(t, d, &inst.requirements[next]);
        start[next] = t;
        done[next] = true;
        for &j in &succ[next] {
            remaining_preds[j] -= 1;
        }
    }
    let base = start.iter().copied().min().unwrap_or(0);
    start.iter_mut().for_each(|s| *s -= base);
    Ok(Schedule::new(start, &inst.durations))
}

/// Serial schedule generation scheme. The result is always feasible.
pub fn ssgs(inst: &ProjectInstance, rule: PriorityRule) -> Result<Schedule, ScheduleError> {
    let key: Vec<u64> = match rule {
        PriorityRule::MinLatestFinish => latest_finish(inst)?.into_iter().map(u64::from).collect(),
        PriorityRule::Index => (0..inst.n() as u64).collect(),
    };
    serial_sgs(inst, &key)
}

/// Right-shift repair: re-schedules activities serially in order of their
/// current start times, each at its earliest feasible slot.
pub fn repair_schedule(sched: &Schedule, inst: &ProjectInstance) -> Result<Schedule, ScheduleError> {
    let key: Vec<u64> = sched.start.iter().map(|&s| u64::from(s)).collect();
    serial_sgs(inst, &key)
}

/// Provably optimal schedule by exhaustive depth-first search.
///
/// Branches over every precedence-feasible activity order and places each
/// activity at its earliest resource-feasible start; some optimal schedule is
/// always reachable this way. Partial schedules are cut against the best
/// makespan found with a critical-path tail bound.
pub fn brute_force_optimal(inst: &ProjectInstance, limit: usize) -> Result<Schedule, ScheduleError> {
    let active = inst.durations.iter().filter(|&&d| d > 0).count();
    if active > limit {
        return Err(ScheduleError::TooManyActivities {
            activities: active,
            limit,
        });
    }
    if inst.horizon > BRUTE_FORCE_MAX_HORIZON {
        return Err(ScheduleError::HorizonTooLong {
            horizon: inst.horizon,
            limit: BRUTE_FORCE_MAX_HORIZON,
        });
    }
    let tails = inst.tails().map_err(ScheduleError::Cycle)?;
    check_requests(inst)?;
    let order = inst.topological_order().map_err(ScheduleError::Cycle)?;
    let n = inst.n();
    let mut search = Search {
        inst,
        preds: inst.predecessors(),
        order,
        tails,
        start: vec![None; n],
        profile: Profile::new(inst.resources()),
        best: Schedule {
            start: Vec::new(),
            makespan: u32::MAX,
        },
    };
    search.dfs(0);
    let mut best = search.best;
    let base = best.start.iter().copied().min().unwrap_or(0);
    best.start.iter_mut().for_each(|s| *s -= base);
    best.makespan -= base;
    Ok(best)
}

struct Search<'a> {
    inst: &'a ProjectInstance,
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
    tails: Vec<u32>,
    start: Vec<Option<u32>>,
    profile: Profile,
    best: Schedule,
}

impl Search<'_> {
    fn pred_finish(&self, i: usize) -> Option<u32> {
        let mut es = 0;
        for &p in &self.preds[i] {
            es = es.max(self.start[p]? + self.inst.durations[p]);
        }
        Some(es)
    }

    /// Makespan lower bound of any completion of the current partial schedule.
    fn lower_bound(&self) -> u32 {
        let d = &self.inst.durations;
        let mut es = vec![0u32; self.inst.n()];
        let mut bound = 0;
        for &i in &self.order {
            let s = match self.start[i] {
                Some(s) => s,
                None => self.preds[i]
                    .iter()
                    .map(|&p| es[p] + d[p])
                    .max()
                    .unwrap_or(0),
            };
            es[i] = s;
            bound = bound.max(s + self.tails[i]);
        }
        bound
    }

    fn dfs(&mut self, placed: usize) {
        let inst = self.inst;
        let n = inst.n();
        if placed == n {
            let start: Vec<u32> = self.start.iter().map(|s| s.expect("all placed")).collect();
            let sched = Schedule::new(start, &inst.durations);
            if sched.makespan < self.best.makespan {
                self.best = sched;
            }
            return;
        }
        if self.lower_bound() >= self.best.makespan {
            return;
        }
        let eligible: Vec<(usize, u32)> = (0..n)
            .filter(|&i| self.start[i].is_none())
            .filter_map(|i| self.pred_finish(i).map(|es| (i, es)))
            .collect();
        // Zero-duration activities use nothing: place the first one without branching.
        if let Some(&(i, es)) = eligible.iter().find(|&&(i, _)| inst.durations[i] == 0) {
            self.start[i] = Some(es);
            self.dfs(placed + 1);
            self.start[i] = None;
            return;
        }
        for (i, es) in eligible {
            let d = inst.durations[i];
            let req = &inst.requirements[i];
            let t = self.profile.earliest_fit(es, d, req, &inst.capacities);
            if t + self.tails[i] >= self.best.makespan {
                continue;
            }
            self.profile.add(t, d, req);
            self.start[i] = Some(t);
            self.dfs(placed + 1);
            self.start[i] = None;
            self.profile.remove(t, d, req);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clash() -> ProjectInstance {
        ProjectInstance {
            name: "clash".into(),
            durations: vec![0, 1, 1, 0],
            edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            requirements: vec![vec![0], vec![1], vec![1], vec![0]],
            capacities: vec![1],
            horizon: 2,
        }
    }

    fn branches() -> ProjectInstance {
        // source -> a(5) -> sink ; source -> b(2) -> c(2) -> sink
        ProjectInstance {
            name: "branches".into(),
            durations: vec![0, 5, 2, 2, 0],
            edges: vec![(0, 1), (0, 2), (2, 3), (1, 4), (3, 4)],
            requirements: vec![vec![]; 5],
            capacities: vec![],
            horizon: 9,
        }
    }

    #[test]
    fn rounding_examples() {
        let inst = ProjectInstance::chain("c", &[1]);
        let s = extract_schedule(&[0.0f64, 2.49, 5.51], &inst);
        assert_eq!(s.start, vec![0, 2, 6]);
        let s = extract_schedule(&[0.0f64, 1.0, 2.0], &inst);
        assert_eq!(s.start, vec![0, 1, 2]);
        let two = ProjectInstance {
            name: "two".into(),
            durations: vec![1, 1],
            edges: vec![],
            requirements: vec![vec![]; 2],
            capacities: vec![],
            horizon: 4,
        };
        let s = extract_schedule(&[1.2f64, 3.2], &two);
        assert_eq!(s.start, vec![0, 2]);
        assert_eq!(s.makespan, 3);
        // exact halves round up
        assert_eq!(extract_schedule(&[0.0f64, 0.5, 1.5], &inst).start, vec![0, 1, 2]);
    }

    #[test]
    fn reversed_chain_reports_both_edges() {
        let inst = ProjectInstance::chain("c", &[2, 3]);
        // edges (0,1) (1,2) (2,3); run jobs in reverse order
        let sched = Schedule::new(vec![5, 3, 0, 5], &inst.durations);
        let v = check_feasible(&sched, &inst);
        let prec: Vec<_> = v
            .iter()
            .filter(|x| matches!(x, ScheduleViolation::Precedence { .. }))
            .collect();
        assert_eq!(prec.len(), 2, "{v:?}");
        assert!(v.contains(&ScheduleViolation::Precedence { from: 1, to: 2, overlap: 5 }));
        assert!(v.contains(&ScheduleViolation::Precedence { from: 0, to: 1, overlap: 2 }));
    }

    #[test]
    fn forced_clash_reports_one_overload() {
        let inst = clash();
        let sched = Schedule::new(vec![0, 0, 0, 1], &inst.durations);
        assert_eq!(
            check_feasible(&sched, &inst),
            vec![ScheduleViolation::Overload { time: 0, resource: 0, excess: 1 }]
        );
    }

    #[test]
    fn wrong_length_and_makespan() {
        let inst = clash();
        let short = Schedule::new(vec![0, 0, 1], &inst.durations);
        assert!(matches!(check_feasible(&short, &inst)[0], ScheduleViolation::Length { expected: 4, found: 3 }));
        let lying = Schedule {
            start: vec![0, 0, 1, 2],
            makespan: 1,
        };
        assert_eq!(
            check_feasible(&lying, &inst),
            vec![ScheduleViolation::Makespan { declared: 1, actual: 2 }]
        );
    }

    #[test]
    fn critical_path_examples() {
        assert_eq!(critical_path(&ProjectInstance::chain("c", &[2, 3, 4])).unwrap(), 9);
        assert_eq!(critical_path(&branches()).unwrap(), 5);
        let mut cyc = ProjectInstance::chain("c", &[1]);
        cyc.edges.push((2, 0));
        assert!(matches!(critical_path(&cyc), Err(ScheduleError::Cycle(_))));
    }

    #[test]
    fn ssgs_examples() {
        let free = branches();
        let s = ssgs(&free, PriorityRule::default()).unwrap();
        assert_eq!(s.makespan, critical_path(&free).unwrap());
        assert!(is_feasible(&s, &free));
        let s = ssgs(&clash(), PriorityRule::default()).unwrap();
        assert_eq!(s.makespan, 2);
        assert!(is_feasible(&s, &clash()));
    }

    #[test]
    fn ssgs_rejects_impossible_request() {
        let mut inst = clash();
        inst.requirements[1][0] = 2;
        assert_eq!(
            ssgs(&inst, PriorityRule::Index),
            Err(ScheduleError::Infeasible { activity: 1, resource: 0 })
        );
    }

    #[test]
    fn brute_force_examples() {
        let chain = ProjectInstance::chain("c", &[2, 3, 4]);
        assert_eq!(brute_force_optimal(&chain, BRUTE_FORCE_LIMIT).unwrap().makespan, 9);
        let b = brute_force_optimal(&clash(), BRUTE_FORCE_LIMIT).unwrap();
        assert_eq!(b.makespan, 2);
        assert!(is_feasible(&b, &clash()));
    }

    #[test]
    fn brute_force_size_guards() {
        let big = ProjectInstance::chain("c", &[1; 10]);
        assert!(matches!(
            brute_force_optimal(&big, BRUTE_FORCE_LIMIT),
            Err(ScheduleError::TooManyActivities { activities: 10, limit: 9 })
        ));
        let long = ProjectInstance::chain("c", &[40, 30]);
        assert!(matches!(
            brute_force_optimal(&long, BRUTE_FORCE_LIMIT),
            Err(ScheduleError::HorizonTooLong { horizon: 70, .. })
        ));
    }

    #[test]
    fn repair_makes_rounded_clash_feasible() {
        let inst = clash();
        let bad = Schedule::new(vec![0, 0, 0, 1], &inst.durations);
        let fixed = repair_schedule(&bad, &inst).unwrap();
        assert!(is_feasible(&fixed, &inst));
        assert_eq!(fixed.makespan, 2);
    }
}
