#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcpsp_core::relax::{grad_total_loss, start_times, total_loss, RelaxationConfig};
use rcpsp_core::*;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn j301() -> ProjectInstance {
    parse_sm(&std::fs::read_to_string(data("j301_1.sm")).unwrap(), "j301_1").unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeded instance with `n = 8` (six jobs plus dummies), two resources and horizon 32.
pub fn gradient_instance(seed: u64) -> ProjectInstance {
    let spec = SynthSpec {
        activities: 6,
        resources: 2,
        ..SynthSpec::default()
    };
    let mut inst = synth_instance(&spec, seed).unwrap();
    inst.horizon = 32;
    inst
}

/// Naive feasibility: every edge, then every `(t, k)` cell summed over all activities.
pub fn naive_feasible(start: &[u32], inst: &ProjectInstance) -> bool {
    if start.len() != inst.n() {
        return false;
    }
    let d = &inst.durations;
    for &(i, j) in &inst.edges {
        if start[i] + d[i] > start[j] {
            return false;
        }
    }
    let end = (0..inst.n()).map(|i| start[i] + d[i]).max().unwrap_or(0);
    for t in 0..end {
        for k in 0..inst.resources() {
            let mut used = 0;
            for i in 0..inst.n() {
                if start[i] <= t && t < start[i] + d[i] {
                    used += inst.requirements[i][k];
                }
            }
            if used > inst.capacities[k] {
                return false;
            }
        }
    }
    true
}

/// Optimum by enumerating every start vector of the real jobs below `bound`.
/// Only usable for a handful of short jobs.
pub fn naive_optimum(inst: &ProjectInstance, bound: u32) -> u32 {
    let n = inst.n();
    let jobs: Vec<usize> = (1..n - 1).collect();
    let mut start = vec![0u32; n];
    let mut best = u32::MAX;
    let mut idx = vec![0u32; jobs.len()];
    loop {
        for (slot, &j) in jobs.iter().enumerate() {
            start[j] = idx[slot];
        }
        let finish = jobs.iter().map(|&j| start[j] + inst.durations[j]).max().unwrap_or(0);
        start[n - 1] = finish;
        if finish < best && naive_feasible(&start, inst) {
            best = finish;
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                return best;
            }
            idx[p] += 1;
            if idx[p] < bound {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Random raw parameters spreading start times roughly over `0..spread`.
pub fn random_theta(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..spread)).collect()
}

/// Distance to the nearest point where the loss is not differentiable:
/// a tie for the anchor or a precedence violation at exactly zero.
pub fn kink_distance(theta: &[f64], inst: &ProjectInstance) -> f64 {
    let mut sorted = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gap = if sorted.len() > 1 { sorted[1] - sorted[0] } else { f64::INFINITY };
    let s = start_times(theta).unwrap();
    let slack = inst
        .edges
        .iter()
        .map(|&(i, j)| (s[i] + f64::from(inst.durations[i]) - s[j]).abs())
        .fold(f64::INFINITY, f64::min);
    gap.min(slack)
}

/// `|g - fd| / max(|g|, |fd|)` in the Euclidean norm, with central differences of step `h`.
pub fn fd_relative_error(theta: &[f64], inst: &ProjectInstance, cfg: &RelaxationConfig, h: f64) -> f64 {
    let g = grad_total_loss(theta, inst, cfg).unwrap();
    let mut x = theta.to_vec();
    let mut num = 0.0;
    let mut den_g = 0.0;
    let mut den_fd = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = total_loss(&x, inst, cfg).unwrap().total;
        x[i] = orig - h;
        let down = total_loss(&x, inst, cfg).unwrap().total;
        x[i] = orig;
        let fd = (up - down) / (2.0 * h);
        num += (g[i] - fd).powi(2);
        den_g += g[i] * g[i];
        den_fd += fd * fd;
    }
    let den = den_g.max(den_fd).sqrt();
    if den < 1e-12 {
        num.sqrt()
    } else {
        num.sqrt() / den
    }
}

/// Draws `count` kink-free parameter vectors and returns the worst relative error.
pub fn worst_fd_error(inst: &ProjectInstance, cfg: &RelaxationConfig, seed: u64, count: usize, spread: f64) -> f64 {
    let h = 1e-4;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let theta = random_theta(&mut r, inst.n(), spread);
        if kink_distance(&theta, inst) < 1e3 * h {
            continue;
        }
        worst = worst.max(fd_relative_error(&theta, inst, cfg, h));
        done += 1;
    }
    worst
}

/// Random integer schedule: uniform starts, a shifted copy of `base`, or
/// `base` with one activity moved.
pub fn random_schedule(rng: &mut ChaCha8Rng, inst: &ProjectInstance, base: &Schedule) -> Schedule {
    let start: Vec<u32> = match rng.random_range(0..3) {
        0 => (0..inst.n()).map(|_| rng.random_range(0..=inst.horizon)).collect(),
        1 => {
            let shift = rng.random_range(0..5);
            base.start.iter().map(|&s| s + shift).collect()
        }
        _ => {
            let mut start = base.start.clone();
            let i = rng.random_range(0..inst.n());
            let shift: i64 = rng.random_range(-3..=3);
            start[i] = (i64::from(start[i]) + shift).max(0) as u32;
            start
        }
    };
    Schedule::new(start, &inst.durations)
}
