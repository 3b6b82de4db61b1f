//! Problem definitions: benchmark-format parsing, validation, and the
//! known-upper-bound reference table.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Time unit used throughout. All benchmark durations are integral; keeping
/// makespan arithmetic in 64-bit integers avoids float drift.
pub type Time = i64;

/// One (machine, duration) choice for an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    /// 0-based machine index.
    pub machine: usize,
    pub duration: Time,
}

/// An operation together with the machines able to process it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub alternatives: Vec<Alternative>,
}

impl OperationSpec {
    pub fn duration_on(&self, machine: usize) -> Option<Time> {
        self.alternatives
            .iter()
            .find(|a| a.machine == machine)
            .map(|a| a.duration)
    }

    pub fn min_duration(&self) -> Time {
        self.alternatives.iter().map(|a| a.duration).min().unwrap_or(0)
    }
}

/// Ordered operations of one job; list order is the precedence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub operations: Vec<OperationSpec>,
}

/// An immutable flexible job-shop instance.
///
/// Construction precomputes two lookups used on hot paths: suffix sums of
/// per-operation minimum durations (for the makespan lower bound) and a flat
/// dense index per (job, operation, alternative) so policy and bias tables
/// can be plain vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub machine_count: usize,
    pub jobs: Vec<JobSpec>,
    rem_min: Vec<Vec<Time>>,
    action_base: Vec<Vec<usize>>,
    action_count: usize,
    total_ops: usize,
}

impl Instance {
    /// Assembles an instance from raw parts. Accepts structurally broken data
    /// (see [`validate_instance`]); derived tables treat missing alternatives
    /// as zero-duration.
    pub fn from_parts(name: impl Into<String>, machine_count: usize, jobs: Vec<JobSpec>) -> Self {
        let mut rem_min = Vec::with_capacity(jobs.len());
        let mut action_base = Vec::with_capacity(jobs.len());
        let mut next_index = 0usize;
        let mut total_ops = 0usize;
        for job in &jobs {
            let n = job.operations.len();
            total_ops += n;
            let mut suffix = vec![0; n + 1];
            for k in (0..n).rev() {
                suffix[k] = suffix[k + 1] + job.operations[k].min_duration();
            }
            rem_min.push(suffix);
            let mut bases = Vec::with_capacity(n);
            for op in &job.operations {
                bases.push(next_index);
                next_index += op.alternatives.len();
            }
            action_base.push(bases);
        }
        Instance {
            name: name.into(),
            machine_count,
            jobs,
            rem_min,
            action_base,
            action_count: next_index,
            total_ops,
        }
    }

    pub fn total_ops(&self) -> usize {
        self.total_ops
    }

    /// Number of distinct (job, operation, machine) actions.
    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Sum of minimum durations of operations `op..` of `job`.
    pub fn remaining_min_duration(&self, job: usize, op: usize) -> Time {
        self.rem_min[job][op]
    }

    /// Dense index of an action, or `None` if the triple does not name an
    /// alternative of this instance.
    pub fn action_index(&self, action: ActionId) -> Option<usize> {
        let job = self.jobs.get(action.job)?;
        let opspec = job.operations.get(action.op)?;
        let alt = opspec
            .alternatives
            .iter()
            .position(|a| a.machine == action.machine)?;
        Some(self.action_base[action.job][action.op] + alt)
    }

    /// Inverse of [`action_index`](Self::action_index); iterates all actions
    /// in dense-index order.
    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.jobs.iter().enumerate().flat_map(|(j, job)| {
            job.operations.iter().enumerate().flat_map(move |(k, op)| {
                op.alternatives
                    .iter()
                    .map(move |a| ActionId { job: j, op: k, machine: a.machine })
            })
        })
    }

    pub fn duration(&self, action: ActionId) -> Option<Time> {
        self.jobs
            .get(action.job)?
            .operations
            .get(action.op)?
            .duration_on(action.machine)
    }

    /// Serializes back to the benchmark text format (1-based machines).
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.jobs.len(), self.machine_count);
        for job in &self.jobs {
            let _ = write!(out, "{}", job.operations.len());
            for op in &job.operations {
                let _ = write!(out, " {}", op.alternatives.len());
                for alt in &op.alternatives {
                    let _ = write!(out, " {} {}", alt.machine + 1, alt.duration);
                }
            }
            let _ = writeln!(out);
        }
        out
    }

    /// Copy of this instance keeping only the first `jobs` jobs and the first
    /// `ops_per_job` operations of each. Intended for building small
    /// exhaustively-enumerable variants of large benchmarks.
    pub fn truncated(&self, jobs: usize, ops_per_job: usize, name: impl Into<String>) -> Instance {
        let jobs = self
            .jobs
            .iter()
            .take(jobs.max(1))
            .map(|j| JobSpec {
                operations: j.operations.iter().take(ops_per_job.max(1)).cloned().collect(),
            })
            .collect();
        Instance::from_parts(name, self.machine_count, jobs)
    }
}

/// The state-independent key of all policy and bias tables: assigning
/// operation `op` of `job` to `machine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.job, self.op, self.machine)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, token {token}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub token: usize,
    pub message: String,
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim_start().starts_with('#') {
                continue;
            }
            for (tn, tok) in line.split_whitespace().enumerate() {
                items.push((tok, ln + 1, tn + 1));
            }
        }
        Tokens { items, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(&'a str, usize, usize), ParseError> {
        match self.items.get(self.pos) {
            Some(&t) => {
                self.pos += 1;
                Ok(t)
            }
            None => {
                let (line, token) = self
                    .items
                    .last()
                    .map(|&(_, l, t)| (l, t + 1))
                    .unwrap_or((1, 1));
                Err(ParseError {
                    line,
                    token,
                    message: format!("unexpected end of input, expected {what}"),
                })
            }
        }
    }

    fn next_usize(&mut self, what: &str) -> Result<usize, ParseError> {
        let (tok, line, token) = self.next(what)?;
        tok.parse().map_err(|_| ParseError {
            line,
            token,
            message: format!("expected {what}, found `{tok}`"),
        })
    }

    fn next_time(&mut self, what: &str) -> Result<Time, ParseError> {
        let (tok, line, token) = self.next(what)?;
        match tok.parse::<Time>() {
            Ok(v) if v >= 0 => Ok(v),
            _ => Err(ParseError {
                line,
                token,
                message: format!("expected {what}, found `{tok}`"),
            }),
        }
    }

    fn remainder(&self) -> Option<(&'a str, usize, usize)> {
        self.items.get(self.pos).copied()
    }
}

/// Parses the standard flexible job-shop text format.
///
/// Line 1 holds `<n_jobs> <n_machines>` and optionally a third
/// average-flexibility token, which is accepted and discarded. Each job then
/// contributes `<n_ops>` followed, per operation, by `<k>` and `k` pairs
/// `<machine> <duration>` with 1-based machine numbers. Whitespace and line
/// breaks between job tokens are not significant; lines starting with `#`
/// are skipped.
pub fn parse_instance(text: &str, name: &str) -> Result<Instance, ParseError> {
    let mut toks = Tokens::new(text);
    let n_jobs = toks.next_usize("job count")?;
    let n_machines = toks.next_usize("machine count")?;
    if n_jobs == 0 || n_machines == 0 {
        return Err(ParseError {
            line: 1,
            token: 1,
            message: format!("instance must have jobs and machines, got {n_jobs} jobs on {n_machines} machines"),
        });
    }
    // Optional average-flexibility token shares the header line.
    if let Some((tok, 1, tn)) = toks.remainder() {
        if tok.parse::<f64>().is_ok() {
            toks.pos += 1;
        } else {
            return Err(ParseError {
                line: 1,
                token: tn,
                message: format!("expected average flexibility or job data on a new line, found `{tok}`"),
            });
        }
    }

    let mut jobs = Vec::with_capacity(n_jobs);
    for _ in 0..n_jobs {
        let n_ops = toks.next_usize("operation count")?;
        let mut operations = Vec::with_capacity(n_ops);
        for _ in 0..n_ops {
            let (ktok, kline, ktn) = toks.next("alternative count")?;
            let k: usize = ktok.parse().map_err(|_| ParseError {
                line: kline,
                token: ktn,
                message: format!("expected alternative count, found `{ktok}`"),
            })?;
            if k == 0 {
                return Err(ParseError {
                    line: kline,
                    token: ktn,
                    message: "operation with zero alternatives".into(),
                });
            }
            let mut alternatives = Vec::with_capacity(k);
            for _ in 0..k {
                let (mtok, mline, mtn) = toks.next("machine number")?;
                let machine: usize = mtok.parse().map_err(|_| ParseError {
                    line: mline,
                    token: mtn,
                    message: format!("expected machine number, found `{mtok}`"),
                })?;
                if machine < 1 || machine > n_machines {
                    return Err(ParseError {
                        line: mline,
                        token: mtn,
                        message: format!("machine {machine} out of range 1..={n_machines}"),
                    });
                }
                let duration = toks.next_time("duration")?;
                alternatives.push(Alternative { machine: machine - 1, duration });
            }
            operations.push(OperationSpec { alternatives });
        }
        jobs.push(JobSpec { operations });
    }
    if let Some((tok, line, token)) = toks.remainder() {
        return Err(ParseError {
            line,
            token,
            message: format!("trailing data after last job: `{tok}`"),
        });
    }
    Ok(Instance::from_parts(name, n_machines, jobs))
}

/// A single invariant violation reported by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    NoJobs,
    NoMachines,
    EmptyJob { job: usize },
    EmptyOperation { job: usize, op: usize },
    DuplicateMachine { job: usize, op: usize, machine: usize },
    NonpositiveDuration { job: usize, op: usize, machine: usize },
    MachineOutOfRange { job: usize, op: usize, machine: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ValidationIssue::NoJobs => write!(f, "instance has no jobs"),
            ValidationIssue::NoMachines => write!(f, "instance has no machines"),
            ValidationIssue::EmptyJob { job } => write!(f, "job {job} has no operations"),
            ValidationIssue::EmptyOperation { job, op } => {
                write!(f, "operation {op} of job {job} has no alternatives")
            }
            ValidationIssue::DuplicateMachine { job, op, machine } => {
                write!(f, "duplicate machine {machine} in operation {op} of job {job}")
            }
            ValidationIssue::NonpositiveDuration { job, op, machine } => {
                write!(f, "nonpositive duration on machine {machine} in operation {op} of job {job}")
            }
            ValidationIssue::MachineOutOfRange { job, op, machine } => {
                write!(f, "machine {machine} out of range in operation {op} of job {job}")
            }
        }
    }
}

/// Checks every structural invariant and returns all violations found.
pub fn validate_instance(inst: &Instance) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if inst.jobs.is_empty() {
        issues.push(ValidationIssue::NoJobs);
    }
    if inst.machine_count == 0 {
        issues.push(ValidationIssue::NoMachines);
    }
    for (j, job) in inst.jobs.iter().enumerate() {
        if job.operations.is_empty() {
            issues.push(ValidationIssue::EmptyJob { job: j });
        }
        for (k, op) in job.operations.iter().enumerate() {
            if op.alternatives.is_empty() {
                issues.push(ValidationIssue::EmptyOperation { job: j, op: k });
            }
            let mut seen = Vec::new();
            for alt in &op.alternatives {
                if seen.contains(&alt.machine) {
                    issues.push(ValidationIssue::DuplicateMachine {
                        job: j,
                        op: k,
                        machine: alt.machine,
                    });
                } else {
                    seen.push(alt.machine);
                }
                if alt.duration < 1 {
                    issues.push(ValidationIssue::NonpositiveDuration {
                        job: j,
                        op: k,
                        machine: alt.machine,
                    });
                }
                if alt.machine >= inst.machine_count {
                    issues.push(ValidationIssue::MachineOutOfRange {
                        job: j,
                        op: k,
                        machine: alt.machine,
                    });
                }
            }
        }
    }
    issues
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UbEntry {
    pub upper_bound: Time,
    pub optimal: bool,
}

/// Best known makespans from the literature, keyed by (dataset, instance).
#[derive(Debug, Clone, Default)]
pub struct UbTable {
    entries: HashMap<(String, String), UbEntry>,
}

impl UbTable {
    /// Parses CSV lines `dataset,instance,ub,optimal_flag`. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<UbTable, ParseError> {
        let mut entries = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',');
            let err = |token: usize, message: String| ParseError { line: ln + 1, token, message };
            let dataset = fields
                .next()
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| err(1, "missing dataset".into()))?;
            let name = fields
                .next()
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| err(2, "missing instance name".into()))?;
            let ub: Time = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| err(3, "missing or invalid upper bound".into()))?;
            let optimal = match fields.next().map(str::trim) {
                Some("0") => false,
                Some("1") => true,
                other => {
                    return Err(err(4, format!("optimal flag must be 0 or 1, found {other:?}")));
                }
            };
            if let Some(extra) = fields.next() {
                return Err(err(5, format!("trailing field `{extra}`")));
            }
            entries.insert(
                (dataset.trim().to_string(), name.trim().to_string()),
                UbEntry { upper_bound: ub, optimal },
            );
        }
        Ok(UbTable { entries })
    }

    pub fn get(&self, dataset: &str, instance: &str) -> Option<UbEntry> {
        self.entries.get(&(dataset.to_string(), instance.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
