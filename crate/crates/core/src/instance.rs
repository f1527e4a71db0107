//! Project instances: PSPLIB single-mode parsing, validation, synthesis and
//! canonical serialization.
//!
//! Activities are 0-based internally. PSPLIB files number jobs from 1 and carry
//! a dummy supersource and supersink; both dummies are kept, so a J30 file
//! yields 32 activities.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: `{token}` is not a non-negative integer")]
    NotAnInteger { line: usize, token: String },
    #[error("{section}: header declares {expected} jobs, found {found}")]
    JobCountMismatch {
        section: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unsupported format: job {job} declares {modes} modes (only single-mode instances are supported)")]
    MultiMode { job: usize, modes: usize },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<InstanceViolation>),
    #[error("inconsistent generator parameters: {0}")]
    InvalidSpec(String),
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[InstanceViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A single-mode RCPSP instance with renewable resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectInstance {
    pub name: String,
    /// Duration of every activity, in time units.
    pub durations: Vec<u32>,
    /// Precedence pairs `(i, j)`: `i` must finish before `j` starts.
    pub edges: Vec<(usize, usize)>,
    /// `requirements[i][k]`: units of resource `k` used by activity `i` while it runs.
    pub requirements: Vec<Vec<u32>>,
    pub capacities: Vec<u32>,
    /// Planning horizon; the time grid covers `0..horizon`.
    pub horizon: u32,
}

/// Problems reported by [`ProjectInstance::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceViolation {
    Shape { message: String },
    EdgeOutOfRange { from: usize, to: usize },
    SelfLoop { activity: usize },
    Cycle { activities: Vec<usize> },
    CapacityExceeded {
        activity: usize,
        resource: usize,
        requirement: u32,
        capacity: u32,
    },
    HorizonBelowCriticalPath { horizon: u32, critical_path: u32 },
}

impl InstanceViolation {
    /// Violations that make the instance structurally unusable (as opposed to merely infeasible).
    pub fn is_structural(&self) -> bool {
        !matches!(self, InstanceViolation::CapacityExceeded { .. })
    }
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceViolation::Shape { message } => write!(f, "shape mismatch: {message}"),
            InstanceViolation::EdgeOutOfRange { from, to } => {
                write!(f, "edge ({from}, {to}) references a missing activity")
            }
            InstanceViolation::SelfLoop { activity } => write!(f, "self loop on activity {activity}"),
            InstanceViolation::Cycle { activities } => {
                write!(f, "cycle through activities {activities:?}")
            }
            InstanceViolation::CapacityExceeded {
                activity,
                resource,
                requirement,
                capacity,
            } => write!(
                f,
                "capacity exceeded: activity {activity} needs {requirement} of resource {resource} (capacity {capacity})"
            ),
            InstanceViolation::HorizonBelowCriticalPath {
                horizon,
                critical_path,
            } => write!(
                f,
                "horizon {horizon} is below the critical path length {critical_path}"
            ),
        }
    }
}

impl ProjectInstance {
    pub fn n(&self) -> usize {
        self.durations.len()
    }

    pub fn resources(&self) -> usize {
        self.capacities.len()
    }

    /// Resource-free chain `source -> a_1 -> ... -> a_m -> sink` with the given job durations.
    pub fn chain(name: &str, durations: &[u32]) -> Self {
        let mut d = Vec::with_capacity(durations.len() + 2);
        d.push(0);
        d.extend_from_slice(durations);
        d.push(0);
        let n = d.len();
        ProjectInstance {
            name: name.to_string(),
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
            requirements: vec![Vec::new(); n],
            capacities: Vec::new(),
            horizon: d.iter().sum::<u32>().max(1),
            durations: d,
        }
    }

    /// Same activities and precedences with every resource dropped.
    pub fn without_resources(&self) -> Self {
        ProjectInstance {
            requirements: vec![Vec::new(); self.n()],
            capacities: Vec::new(),
            ..self.clone()
        }
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n()];
        for &(i, j) in &self.edges {
            out[i].push(j);
        }
        out
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n()];
        for &(i, j) in &self.edges {
            out[j].push(i);
        }
        out
    }

    /// Kahn's algorithm, smallest ready index first. On a cycle returns the
    /// activities that could not be ordered.
    pub fn topological_order(&self) -> Result<Vec<usize>, Vec<usize>> {
        let n = self.n();
        let succ = self.successors();
        let mut indeg = vec![0usize; n];
        for &(_, j) in &self.edges {
            indeg[j] += 1;
        }
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push_back(j);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err((0..n).filter(|&i| indeg[i] > 0).collect())
        }
    }

    /// Earliest start times ignoring resources (forward CPM pass).
    pub fn earliest_starts(&self) -> Result<Vec<u32>, Vec<usize>> {
        let order = self.topological_order()?;
        let succ = self.successors();
        let mut es = vec![0u32; self.n()];
        for &i in &order {
            let fin = es[i] + self.durations[i];
            for &j in &succ[i] {
                es[j] = es[j].max(fin);
            }
        }
        Ok(es)
    }

    /// Longest path from each activity's start to the project end, its own duration included.
    pub fn tails(&self) -> Result<Vec<u32>, Vec<usize>> {
        let order = self.topological_order()?;
        let succ = self.successors();
        let mut tail = vec![0u32; self.n()];
        for &i in order.iter().rev() {
            let after = succ[i].iter().map(|&j| tail[j]).max().unwrap_or(0);
            tail[i] = self.durations[i] + after;
        }
        Ok(tail)
    }

    /// Reports every problem found; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<InstanceViolation> {
        let n = self.n();
        let k = self.resources();
        let mut out = Vec::new();
        if self.requirements.len() != n {
            out.push(InstanceViolation::Shape {
                message: format!("{} requirement rows for {n} activities", self.requirements.len()),
            });
            return out;
        }
        if let Some(i) = self.requirements.iter().position(|r| r.len() != k) {
            out.push(InstanceViolation::Shape {
                message: format!("activity {i} lists {} requirements for {k} resources", self.requirements[i].len()),
            });
            return out;
        }
        let mut edges_ok = true;
        for &(i, j) in &self.edges {
            if i >= n || j >= n {
                out.push(InstanceViolation::EdgeOutOfRange { from: i, to: j });
                edges_ok = false;
            } else if i == j {
                out.push(InstanceViolation::SelfLoop { activity: i });
                edges_ok = false;
            }
        }
        for (i, row) in self.requirements.iter().enumerate() {
            if self.durations[i] == 0 {
                continue;
            }
            for (r, (&req, &cap)) in row.iter().zip(&self.capacities).enumerate() {
                if req > cap {
                    out.push(InstanceViolation::CapacityExceeded {
                        activity: i,
                        resource: r,
                        requirement: req,
                        capacity: cap,
                    });
                }
            }
        }
        if !edges_ok {
            return out;
        }
        match self.tails() {
            Err(activities) => out.push(InstanceViolation::Cycle { activities }),
            Ok(tails) => {
                let cp = tails.into_iter().max().unwrap_or(0);
                if self.horizon < cp || self.horizon == 0 {
                    out.push(InstanceViolation::HorizonBelowCriticalPath {
                        horizon: self.horizon,
                        critical_path: cp,
                    });
                }
            }
        }
        out
    }

    /// Canonical JSON document (stable key order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceDocument::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceDocument = serde_json::from_str(text)?;
        let inst = ProjectInstance {
            name: doc.name,
            durations: doc.durations,
            edges: doc.edges.into_iter().map(|[i, j]| (i, j)).collect(),
            requirements: doc.requirements,
            capacities: doc.capacities,
            horizon: doc.horizon,
        };
        if inst.n() != doc.n || inst.resources() != doc.resources {
            return Err(InstanceError::Invalid(vec![InstanceViolation::Shape {
                message: "declared counts disagree with array lengths".into(),
            }]));
        }
        let bad: Vec<_> = inst.validate().into_iter().filter(|v| v.is_structural()).collect();
        if !bad.is_empty() {
            return Err(InstanceError::Invalid(bad));
        }
        Ok(inst)
    }

    /// Writes the instance back out as a PSPLIB single-mode document.
    pub fn to_sm_string(&self) -> String {
        let n = self.n();
        let k = self.resources();
        let succ = self.successors();
        let cp = self.tails().map(|t| t.into_iter().max().unwrap_or(0)).unwrap_or(0);
        let rule = "*".repeat(72);
        let mut s = String::new();
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "file with basedata            : {}", self.name);
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "projects                      :  1");
        let _ = writeln!(s, "jobs (incl. supersource/sink ):  {n}");
        let _ = writeln!(s, "horizon                       :  {}", self.horizon);
        let _ = writeln!(s, "RESOURCES");
        let _ = writeln!(s, "  - renewable                 :  {k}   R");
        let _ = writeln!(s, "  - nonrenewable              :  0   N");
        let _ = writeln!(s, "  - doubly constrained        :  0   D");
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "PROJECT INFORMATION:");
        let _ = writeln!(s, "pronr.  #jobs rel.date duedate tardcost  MPM-Time");
        let _ = writeln!(s, "    1    {:>3}      0   {cp:>5}        0    {cp:>5}", n.saturating_sub(2));
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "PRECEDENCE RELATIONS:");
        let _ = writeln!(s, "jobnr.    #modes  #successors   successors");
        for (i, row) in succ.iter().enumerate() {
            let _ = write!(s, "{:>4}        1        {:>3}       ", i + 1, row.len());
            for &j in row {
                let _ = write!(s, " {:>3}", j + 1);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "REQUESTS/DURATIONS:");
        let _ = write!(s, "jobnr. mode duration");
        for r in 0..k {
            let _ = write!(s, "  R {}", r + 1);
        }
        s.push('\n');
        let _ = writeln!(s, "{}", "-".repeat(72));
        for i in 0..n {
            let _ = write!(s, "{:>3}      1   {:>3}   ", i + 1, self.durations[i]);
            for &q in &self.requirements[i] {
                let _ = write!(s, " {q:>4}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "RESOURCEAVAILABILITIES:");
        let header: Vec<String> = (0..k).map(|r| format!("  R {}", r + 1)).collect();
        let _ = writeln!(s, "{}", header.join(""));
        let caps: Vec<String> = self.capacities.iter().map(|c| format!("{c:>5}")).collect();
        let _ = writeln!(s, "{}", caps.join(""));
        let _ = writeln!(s, "{rule}");
        s
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDocument {
    name: String,
    n: usize,
    resources: usize,
    horizon: u32,
    durations: Vec<u32>,
    capacities: Vec<u32>,
    requirements: Vec<Vec<u32>>,
    edges: Vec<[usize; 2]>,
}

impl From<&ProjectInstance> for InstanceDocument {
    fn from(inst: &ProjectInstance) -> Self {
        InstanceDocument {
            name: inst.name.clone(),
            n: inst.n(),
            resources: inst.resources(),
            horizon: inst.horizon,
            durations: inst.durations.clone(),
            capacities: inst.capacities.clone(),
            requirements: inst.requirements.clone(),
            edges: inst.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// PSPLIB parsing

struct Lines<'a> {
    lines: Vec<&'a str>,
}

impl<'a> Lines<'a> {
    fn find(&self, pred: impl Fn(&str) -> bool) -> Option<usize> {
        self.lines.iter().position(|l| pred(l.trim_start()))
    }

    /// Integer after the first `:` on the first line starting with `key`.
    fn header_value(&self, key: &'static str) -> Result<Option<usize>, InstanceError> {
        let Some(idx) = self.find(|l| l.starts_with(key)) else {
            return Ok(None);
        };
        let line = self.lines[idx];
        let rest = line.split_once(':').map(|(_, r)| r).ok_or(InstanceError::Malformed {
            line: idx + 1,
            message: format!("expected `:` after `{key}`"),
        })?;
        let token = rest.split_whitespace().next().ok_or(InstanceError::Malformed {
            line: idx + 1,
            message: format!("missing value for `{key}`"),
        })?;
        parse_int(token, idx + 1).map(Some)
    }

    /// Numeric rows following a section keyword. Header lines are skipped;
    /// the section ends at a `*` rule or at the first non-numeric line after data started.
    fn section_rows(&self, keyword: &'static str) -> Result<Vec<(usize, Vec<usize>)>, InstanceError> {
        let start = self
            .find(|l| l.starts_with(keyword))
            .ok_or(InstanceError::MissingSection(keyword))?;
        let mut rows = Vec::new();
        for (off, raw) in self.lines[start + 1..].iter().enumerate() {
            let line_no = start + off + 2;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('*') {
                break;
            }
            let first = line.split_whitespace().next().unwrap_or("");
            if first.parse::<usize>().is_err() {
                if rows.is_empty() {
                    continue; // column header or dashed rule
                }
                break;
            }
            let values = line
                .split_whitespace()
                .map(|t| parse_int(t, line_no))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((line_no, values));
        }
        Ok(rows)
    }
}

fn parse_int(token: &str, line: usize) -> Result<usize, InstanceError> {
    token.parse::<usize>().map_err(|_| InstanceError::NotAnInteger {
        line,
        token: token.to_string(),
    })
}

fn to_u32(v: usize, line: usize) -> Result<u32, InstanceError> {
    u32::try_from(v).map_err(|_| InstanceError::Malformed {
        line,
        message: format!("value {v} out of range"),
    })
}

/// Parses a PSPLIB single-mode (`.sm`) document.
///
/// Sections are located by keyword, never by column position. Cycles and a
/// horizon below the critical path are rejected; per-activity capacity
/// excesses are left for [`ProjectInstance::validate`] to report.
pub fn parse_sm(text: &str, name: &str) -> Result<ProjectInstance, InstanceError> {
    let lines = Lines {
        lines: text.lines().collect(),
    };
    let jobs = lines
        .header_value("jobs (incl. supersource/sink")?
        .ok_or(InstanceError::MissingSection("jobs"))?;
    let horizon = lines
        .header_value("horizon")?
        .ok_or(InstanceError::MissingSection("horizon"))?;
    if lines.find(|l| l.starts_with("RESOURCES")).is_none() {
        return Err(InstanceError::MissingSection("RESOURCES"));
    }
    let renewable = lines
        .header_value("- renewable")?
        .ok_or(InstanceError::MissingSection("RESOURCES"))?;

    let prec = lines.section_rows("PRECEDENCE RELATIONS")?;
    // Mode count is checked before anything else so multi-mode files get a clear error.
    for (line, row) in &prec {
        if row.len() >= 2 && row[1] != 1 {
            return Err(InstanceError::MultiMode {
                job: row[0],
                modes: row[1],
            });
        }
        if row.len() < 3 {
            return Err(InstanceError::Malformed {
                line: *line,
                message: "precedence row needs job, mode count and successor count".into(),
            });
        }
    }
    for key in ["- nonrenewable", "- doubly constrained"] {
        if let Some(count) = lines.header_value(key)? {
            if count > 0 {
                return Err(InstanceError::Unsupported(format!(
                    "{count} {} resources",
                    key.trim_start_matches("- ")
                )));
            }
        }
    }
    if prec.len() != jobs {
        return Err(InstanceError::JobCountMismatch {
            section: "PRECEDENCE RELATIONS",
            expected: jobs,
            found: prec.len(),
        });
    }
    let mut edges = Vec::new();
    for (idx, (line, row)) in prec.iter().enumerate() {
        if row[0] != idx + 1 {
            return Err(InstanceError::Malformed {
                line: *line,
                message: format!("expected job {}, found {}", idx + 1, row[0]),
            });
        }
        let declared = row[2];
        let succ = &row[3..];
        if succ.len() != declared {
            return Err(InstanceError::Malformed {
                line: *line,
                message: format!("job {} declares {declared} successors but lists {}", row[0], succ.len()),
            });
        }
        for &j in succ {
            if j == 0 || j > jobs || j == idx + 1 {
                return Err(InstanceError::Malformed {
                    line: *line,
                    message: format!("invalid successor {j} of job {}", row[0]),
                });
            }
            edges.push((idx, j - 1));
        }
    }

    let req = lines.section_rows("REQUESTS/DURATIONS")?;
    if req.len() != jobs {
        return Err(InstanceError::JobCountMismatch {
            section: "REQUESTS/DURATIONS",
            expected: jobs,
            found: req.len(),
        });
    }
    let mut durations = Vec::with_capacity(jobs);
    let mut requirements = Vec::with_capacity(jobs);
    for (idx, (line, row)) in req.iter().enumerate() {
        if row.len() != 3 + renewable {
            return Err(InstanceError::Malformed {
                line: *line,
                message: format!("expected {} fields, found {}", 3 + renewable, row.len()),
            });
        }
        if row[0] != idx + 1 {
            return Err(InstanceError::Malformed {
                line: *line,
                message: format!("expected job {}, found {}", idx + 1, row[0]),
            });
        }
        if row[1] != 1 {
            return Err(InstanceError::MultiMode {
                job: row[0],
                modes: row[1],
            });
        }
        durations.push(to_u32(row[2], *line)?);
        requirements.push(
            row[3..]
                .iter()
                .map(|&v| to_u32(v, *line))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }

    let avail = lines.section_rows("RESOURCEAVAILABILITIES")?;
    let empty = (0, Vec::new());
    let (line, caps) = match avail.first() {
        Some(row) => row,
        None if renewable == 0 => &empty,
        None => return Err(InstanceError::MissingSection("RESOURCEAVAILABILITIES")),
    };
    if caps.len() != renewable {
        return Err(InstanceError::Malformed {
            line: *line,
            message: format!("expected {renewable} capacities, found {}", caps.len()),
        });
    }
    let capacities = caps
        .iter()
        .map(|&v| to_u32(v, *line))
        .collect::<Result<Vec<_>, _>>()?;

    let inst = ProjectInstance {
        name: name.to_string(),
        durations,
        edges,
        requirements,
        capacities,
        horizon: to_u32(horizon, 0)?,
    };
    let structural: Vec<_> = inst.validate().into_iter().filter(|v| v.is_structural()).collect();
    if !structural.is_empty() {
        return Err(InstanceError::Invalid(structural));
    }
    Ok(inst)
}

// ---------------------------------------------------------------------------
// Synthetic instances

/// Parameters for [`synth_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Non-dummy activities; source and sink are added on top.
    pub activities: usize,
    pub min_duration: u32,
    pub max_duration: u32,
    /// Probability of an edge between two jobs (oriented along a hidden topological order).
    pub edge_density: f64,
    pub resources: usize,
    pub min_capacity: u32,
    pub max_capacity: u32,
    /// Probability that a job uses a given resource at all.
    pub request_probability: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            activities: 6,
            min_duration: 1,
            max_duration: 6,
            edge_density: 0.3,
            resources: 2,
            min_capacity: 2,
            max_capacity: 5,
            request_probability: 0.6,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<(), InstanceError> {
        let bad = |m: &str| Err(InstanceError::InvalidSpec(m.to_string()));
        if self.activities == 0 {
            return bad("activity count must be positive");
        }
        if self.min_duration > self.max_duration {
            return bad("min_duration exceeds max_duration");
        }
        if self.max_duration == 0 {
            return bad("max_duration must be positive");
        }
        if !(0.0..=1.0).contains(&self.edge_density) || !(0.0..=1.0).contains(&self.request_probability) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.resources > 0 && (self.min_capacity == 0 || self.min_capacity > self.max_capacity) {
            return bad("capacity range must satisfy 1 <= min <= max");
        }
        Ok(())
    }
}

/// Generates a random valid instance. Deterministic for a fixed `(spec, seed)`.
pub fn synth_instance(spec: &SynthSpec, seed: u64) -> Result<ProjectInstance, InstanceError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.activities;
    let n = m + 2;
    let sink = n - 1;

    let capacities: Vec<u32> = (0..spec.resources)
        .map(|_| rng.random_range(spec.min_capacity..=spec.max_capacity))
        .collect();
    let mut durations = vec![0u32; n];
    let mut requirements = vec![vec![0u32; spec.resources]; n];
    for i in 1..=m {
        durations[i] = rng.random_range(spec.min_duration..=spec.max_duration);
        for (k, &cap) in capacities.iter().enumerate() {
            if durations[i] > 0 && rng.random_bool(spec.request_probability) {
                requirements[i][k] = rng.random_range(1..=cap);
            }
        }
    }

    let mut edges = Vec::new();
    let mut has_pred = vec![false; n];
    let mut has_succ = vec![false; n];
    for a in 1..=m {
        for b in a + 1..=m {
            if rng.random_bool(spec.edge_density) {
                edges.push((a, b));
                has_succ[a] = true;
                has_pred[b] = true;
            }
        }
    }
    for j in 1..=m {
        if !has_pred[j] {
            edges.push((0, j));
        }
        if !has_succ[j] {
            edges.push((j, sink));
        }
    }
    edges.sort_unstable();

    Ok(ProjectInstance {
        name: format!("synth_n{m}_k{}_s{seed}", spec.resources),
        horizon: durations.iter().sum::<u32>().max(1),
        durations,
        edges,
        requirements,
        capacities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
jobs (incl. supersource/sink ):  3
horizon                       :  5
RESOURCES
  - renewable                 :  1   R
  - nonrenewable              :  0   N
  - doubly constrained        :  0   D
PRECEDENCE RELATIONS:
jobnr.    #modes  #successors   successors
   1        1          1           2
   2        1          1           3
   3        1          0
REQUESTS/DURATIONS:
jobnr. mode duration  R 1
------------------------------------------------------------------------
  1      1     0       0
  2      1     5       1
  3      1     0       0
RESOURCEAVAILABILITIES:
  R 1
   1
";

    #[test]
    fn parses_hand_written_fixture() {
        let inst = parse_sm(TINY, "tiny").unwrap();
        assert_eq!(inst.durations, vec![0, 5, 0]);
        assert_eq!(inst.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(inst.requirements, vec![vec![0], vec![1], vec![0]]);
        assert_eq!(inst.capacities, vec![1]);
        assert_eq!(inst.horizon, 5);
    }

    #[test]
    fn rejects_job_count_mismatch() {
        let text = TINY.replace("):  3", "):  4");
        assert!(matches!(
            parse_sm(&text, "x"),
            Err(InstanceError::JobCountMismatch { expected: 4, found: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_integer_field() {
        let text = TINY.replace("  2      1     5       1", "  2      1     5.5     1");
        assert!(matches!(parse_sm(&text, "x"), Err(InstanceError::NotAnInteger { .. })));
    }

    #[test]
    fn rejects_multi_mode() {
        let text = TINY.replace("   2        1          1           3", "   2        3          1           3");
        assert!(matches!(parse_sm(&text, "x"), Err(InstanceError::MultiMode { job: 2, modes: 3 })));
    }

    #[test]
    fn rejects_missing_section() {
        let text = TINY.replace("RESOURCEAVAILABILITIES:", "AVAILABLE:");
        assert!(matches!(
            parse_sm(&text, "x"),
            Err(InstanceError::MissingSection("RESOURCEAVAILABILITIES"))
        ));
    }

    #[test]
    fn rejects_short_horizon() {
        let text = TINY.replace(":  5", ":  4");
        match parse_sm(&text, "x") {
            Err(InstanceError::Invalid(v)) => {
                assert!(matches!(v[0], InstanceViolation::HorizonBelowCriticalPath { horizon: 4, critical_path: 5 }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tolerates_irregular_whitespace() {
        let text = TINY
            .replace("   2        1          1           3", "2 1 1 3")
            .replace("  2      1     5       1", "\t2\t1\t5\t1  ");
        assert_eq!(parse_sm(&text, "tiny").unwrap(), parse_sm(TINY, "tiny").unwrap());
    }

    #[test]
    fn detects_two_cycle() {
        let mut inst = ProjectInstance::chain("c", &[1]);
        inst.edges = vec![(0, 1), (1, 0)];
        let v = inst.validate();
        assert!(v.iter().any(|x| x.to_string().contains("cycle")), "{v:?}");
    }

    #[test]
    fn detects_capacity_excess() {
        let mut inst = parse_sm(TINY, "tiny").unwrap();
        inst.requirements[1][0] = 2;
        let v = inst.validate();
        assert!(v.iter().any(|x| x.to_string().contains("capacity exceeded")), "{v:?}");
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec {
            activities: 5,
            ..SynthSpec::default()
        };
        assert_eq!(synth_instance(&spec, 7).unwrap(), synth_instance(&spec, 7).unwrap());
        assert_ne!(synth_instance(&spec, 7).unwrap(), synth_instance(&spec, 8).unwrap());
    }

    #[test]
    fn synth_output_validates() {
        let spec = SynthSpec {
            activities: 8,
            resources: 2,
            ..SynthSpec::default()
        };
        for seed in 0..50 {
            let inst = synth_instance(&spec, seed).unwrap();
            assert!(inst.validate().is_empty(), "seed {seed}");
            assert_eq!(inst.durations[0], 0);
            assert_eq!(*inst.durations.last().unwrap(), 0);
        }
    }

    #[test]
    fn synth_rejects_inconsistent_spec() {
        let spec = SynthSpec {
            min_duration: 5,
            max_duration: 2,
            ..SynthSpec::default()
        };
        assert!(matches!(synth_instance(&spec, 0), Err(InstanceError::InvalidSpec(_))));
        let spec = SynthSpec {
            edge_density: 1.5,
            ..SynthSpec::default()
        };
        assert!(synth_instance(&spec, 0).is_err());
    }

    #[test]
    fn chain_critical_path_is_duration_sum() {
        let inst = ProjectInstance::chain("chain", &[2, 3, 4]);
        assert_eq!(inst.tails().unwrap()[0], 9);
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let inst = parse_sm(TINY, "tiny").unwrap();
        let json = inst.to_json();
        assert!(json.find("\"name\"").unwrap() < json.find("\"edges\"").unwrap());
        assert_eq!(ProjectInstance::from_json(&json).unwrap(), inst);
    }
}
