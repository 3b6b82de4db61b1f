//! Sequential-decision model of the schedule: state, legal moves, makespan
//! lower bound, trajectory replay, and 2-opt refinement.

use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::instance::{ActionId, Instance, Time};

/// One operation placed on a machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledOp {
    pub action: ActionId,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: ActionId, reason: &'static str },
    #[error("illegal action {action} at step {index}: {reason}")]
    IllegalStep { index: usize, action: ActionId, reason: &'static str },
}

/// A partial schedule. Grows monotonically through [`ScheduleState::apply`];
/// fields are public for inspection but should not be mutated directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleState {
    pub machine_free_at: Vec<Time>,
    pub job_free_at: Vec<Time>,
    pub next_op: Vec<usize>,
    pub history: Vec<ScheduledOp>,
    pub makespan: Time,
}

/// Undo token for [`ScheduleState::apply_in_place`].
#[derive(Debug, Clone, Copy)]
pub struct Undo {
    prev_machine_free: Time,
    prev_job_free: Time,
    prev_makespan: Time,
}

impl ScheduleState {
    /// Empty schedule: all ready times zero, every job at its first operation.
    pub fn initial(inst: &Instance) -> ScheduleState {
        ScheduleState {
            machine_free_at: vec![0; inst.machine_count],
            job_free_at: vec![0; inst.jobs.len()],
            next_op: vec![0; inst.jobs.len()],
            history: Vec::with_capacity(inst.total_ops()),
            makespan: 0,
        }
    }

    pub fn is_terminal(&self, inst: &Instance) -> bool {
        self.next_op
            .iter()
            .zip(&inst.jobs)
            .all(|(&k, job)| k >= job.operations.len())
    }

    /// All currently legal actions: the next operation of every unfinished
    /// job on each of its compatible machines, ordered by ascending job then
    /// machine.
    pub fn legal_actions(&self, inst: &Instance) -> Vec<ActionId> {
        let mut out = Vec::new();
        self.legal_actions_into(inst, &mut out);
        out
    }

    pub fn legal_actions_into(&self, inst: &Instance, out: &mut Vec<ActionId>) {
        out.clear();
        for (job, spec) in inst.jobs.iter().enumerate() {
            let k = self.next_op[job];
            if let Some(op) = spec.operations.get(k) {
                // alternatives are stored in ascending machine order by the
                // parser; sort defensively for hand-built instances
                debug_assert!(op.alternatives.windows(2).all(|w| w[0].machine < w[1].machine));
                for alt in &op.alternatives {
                    out.push(ActionId { job, op: k, machine: alt.machine });
                }
            }
        }
    }

    fn legality(&self, inst: &Instance, action: ActionId) -> Result<Time, ScheduleError> {
        let job = inst
            .jobs
            .get(action.job)
            .ok_or(ScheduleError::IllegalAction { action, reason: "no such job" })?;
        if self.next_op[action.job] != action.op {
            return Err(ScheduleError::IllegalAction {
                action,
                reason: "operation is not the job's next unscheduled one",
            });
        }
        let op = job
            .operations
            .get(action.op)
            .ok_or(ScheduleError::IllegalAction { action, reason: "no such operation" })?;
        op.duration_on(action.machine)
            .ok_or(ScheduleError::IllegalAction { action, reason: "machine not compatible" })
    }

    /// Earliest feasible start of a legal action: the later of the machine's
    /// idle time and the job's completion time.
    pub fn earliest_start(&self, inst: &Instance, action: ActionId) -> Result<Time, ScheduleError> {
        self.legality(inst, action)?;
        Ok(self.machine_free_at[action.machine].max(self.job_free_at[action.job]))
    }

    /// Applies a legal action in place, returning what is needed to undo it.
    pub fn apply_in_place(&mut self, inst: &Instance, action: ActionId) -> Result<Undo, ScheduleError> {
        let duration = self.legality(inst, action)?;
        let undo = Undo {
            prev_machine_free: self.machine_free_at[action.machine],
            prev_job_free: self.job_free_at[action.job],
            prev_makespan: self.makespan,
        };
        let start = undo.prev_machine_free.max(undo.prev_job_free);
        let end = start + duration;
        self.machine_free_at[action.machine] = end;
        self.job_free_at[action.job] = end;
        self.next_op[action.job] += 1;
        self.makespan = self.makespan.max(end);
        self.history.push(ScheduledOp { action, start, end });
        Ok(undo)
    }

    /// Reverts the most recent apply. Must be passed the token that apply
    /// returned, in reverse order of application.
    pub fn undo(&mut self, undo: Undo) {
        let op = self.history.pop().expect("undo without matching apply");
        self.machine_free_at[op.action.machine] = undo.prev_machine_free;
        self.job_free_at[op.action.job] = undo.prev_job_free;
        self.next_op[op.action.job] -= 1;
        self.makespan = undo.prev_makespan;
    }

    /// Pure variant of [`apply_in_place`]: returns the successor state.
    pub fn apply(&self, inst: &Instance, action: ActionId) -> Result<ScheduleState, ScheduleError> {
        let mut next = self.clone();
        next.apply_in_place(inst, action)?;
        Ok(next)
    }

    /// Makespan lower bound: current makespan plus the largest sum of
    /// minimum remaining operation durations over all jobs. Equals the
    /// makespan exactly on terminal states.
    pub fn lower_bound(&self, inst: &Instance) -> Time {
        let max_rem = self
            .next_op
            .iter()
            .enumerate()
            .map(|(job, &k)| inst.remaining_min_duration(job, k))
            .max()
            .unwrap_or(0);
        self.makespan + max_rem
    }
}

/// A complete (or prefix) action sequence with its resulting makespan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub actions: Vec<ActionId>,
    pub makespan: Time,
}

impl Trajectory {
    /// JSON wire format: `{"actions": [[job, op, machine], ...], "makespan": m}`.
    pub fn to_json(&self) -> String {
        let actions: Vec<_> = self.actions.iter().map(|a| json!([a.job, a.op, a.machine])).collect();
        json!({ "actions": actions, "makespan": self.makespan }).to_string()
    }

    pub fn from_json(text: &str) -> Result<Trajectory, serde_json::Error> {
        #[derive(serde::Deserialize)]
        struct Wire {
            actions: Vec<[usize; 3]>,
            makespan: Time,
        }
        let wire: Wire = serde_json::from_str(text)?;
        Ok(Trajectory {
            actions: wire
                .actions
                .into_iter()
                .map(|[job, op, machine]| ActionId { job, op, machine })
                .collect(),
            makespan: wire.makespan,
        })
    }
}

/// Replays an action sequence from the initial state. Fails on the first
/// illegal step, identifying its index.
pub fn replay(inst: &Instance, actions: &[ActionId]) -> Result<ScheduleState, ScheduleError> {
    let mut state = ScheduleState::initial(inst);
    for (index, &action) in actions.iter().enumerate() {
        state.apply_in_place(inst, action).map_err(|e| match e {
            ScheduleError::IllegalAction { action, reason } => {
                ScheduleError::IllegalStep { index, action, reason }
            }
            other => other,
        })?;
    }
    Ok(state)
}

/// Whether exchanging positions `a < b` keeps every job's operations in
/// precedence order. Any operation of either swapped job strictly between
/// the two positions makes the exchange infeasible.
fn swap_preserves_job_order(actions: &[ActionId], a: usize, b: usize) -> bool {
    let (ja, jb) = (actions[a].job, actions[b].job);
    if ja == jb {
        return false;
    }
    !actions[a + 1..b].iter().any(|x| x.job == ja || x.job == jb)
}

/// First-improvement 2-opt over the flat action sequence: try exchanging two
/// positions, keep the exchange when the replayed schedule is feasible and
/// strictly shorter, and rescan from the start after every acceptance. Stops
/// at a local optimum or at the deadline. Never returns a worse trajectory.
pub fn two_opt_improve(inst: &Instance, traj: &Trajectory, deadline: Option<Instant>) -> Trajectory {
    let mut actions = traj.actions.clone();
    let mut best = traj.makespan;
    let n = actions.len();
    'restart: loop {
        for a in 0..n {
            for b in a + 1..n {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        break 'restart;
                    }
                }
                if !swap_preserves_job_order(&actions, a, b) {
                    continue;
                }
                actions.swap(a, b);
                match replay(inst, &actions) {
                    Ok(state) if state.makespan < best => {
                        best = state.makespan;
                        continue 'restart;
                    }
                    _ => actions.swap(a, b),
                }
            }
        }
        break;
    }
    Trajectory { actions, makespan: best }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("op {index}: unknown action {action}")]
    UnknownAction { index: usize, action: ActionId },
    #[error("op {index}: end {end} != start {start} + duration {duration}")]
    BadEndpoint { index: usize, start: Time, end: Time, duration: Time },
    #[error("op {index}: negative start {start}")]
    NegativeStart { index: usize, start: Time },
    #[error("job {job}: operation {got} scheduled where {expected} was due")]
    PrecedenceOrder { job: usize, expected: usize, got: usize },
    #[error("job {job}: operation {op} starts at {start} before predecessor ends at {prev_end}")]
    PrecedenceTiming { job: usize, op: usize, start: Time, prev_end: Time },
    #[error("machine {machine}: {a} and {b} overlap")]
    MachineOverlap { machine: usize, a: ActionId, b: ActionId },
    #[error("recorded makespan {recorded} != max end {actual}")]
    MakespanMismatch { recorded: Time, actual: Time },
}

/// Independent schedule checker. Works from the raw scheduled-op list alone,
/// re-deriving precedence and overlap facts with pairwise scans rather than
/// trusting any of the state's bookkeeping.
pub fn check_history(inst: &Instance, history: &[ScheduledOp]) -> Result<(), CheckError> {
    for (index, op) in history.iter().enumerate() {
        let duration = inst
            .duration(op.action)
            .ok_or(CheckError::UnknownAction { index, action: op.action })?;
        if op.start < 0 {
            return Err(CheckError::NegativeStart { index, start: op.start });
        }
        if op.end != op.start + duration {
            return Err(CheckError::BadEndpoint { index, start: op.start, end: op.end, duration });
        }
    }
    // per-job precedence: scheduling order and timing
    for job in 0..inst.jobs.len() {
        let mut expected = 0usize;
        let mut prev_end = 0;
        for op in history.iter().filter(|o| o.action.job == job) {
            if op.action.op != expected {
                return Err(CheckError::PrecedenceOrder { job, expected, got: op.action.op });
            }
            if op.action.op > 0 && op.start < prev_end {
                return Err(CheckError::PrecedenceTiming {
                    job,
                    op: op.action.op,
                    start: op.start,
                    prev_end,
                });
            }
            prev_end = op.end;
            expected += 1;
        }
    }
    // machine non-overlap, pairwise
    for (i, a) in history.iter().enumerate() {
        for b in &history[i + 1..] {
            if a.action.machine == b.action.machine && a.start < b.end && b.start < a.end {
                return Err(CheckError::MachineOverlap {
                    machine: a.action.machine,
                    a: a.action,
                    b: b.action,
                });
            }
        }
    }
    Ok(())
}

/// Extends [`check_history`] with the recorded-makespan consistency check.
pub fn check_state(inst: &Instance, state: &ScheduleState) -> Result<(), CheckError> {
    check_history(inst, &state.history)?;
    let actual = state.history.iter().map(|o| o.end).max().unwrap_or(0);
    if actual != state.makespan {
        return Err(CheckError::MakespanMismatch { recorded: state.makespan, actual });
    }
    Ok(())
}

/// Gantt rows `machine,job,op,start,end`, one scheduled operation per line.
pub fn gantt_csv(history: &[ScheduledOp]) -> String {
    let mut out = String::from("machine,job,op,start,end\n");
    for op in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            op.action.machine, op.action.job, op.action.op, op.start, op.end
        ));
    }
    out
}
