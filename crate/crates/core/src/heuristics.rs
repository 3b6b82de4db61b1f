//! Bias heuristics and the per-action bias table.
//!
//! Raw scores are oriented so that larger means more preferred. Normalizing
//! a legal set's raw scores yields the biases added to the softmax exponent.

use serde::{Deserialize, Serialize};

use crate::instance::{ActionId, Instance};
use crate::schedule::{ScheduleError, ScheduleState};

/// The six bias heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Shortest processing time.
    Spt,
    /// Longest processing time.
    Lpt,
    /// Least remaining processing time of the job (candidate included).
    Lrpt,
    /// Most remaining processing time of the job.
    Mrpt,
    /// Earliest ending time given the current state.
    Eet,
    /// Latest ending time.
    Let,
}

impl Heuristic {
    pub const ALL: [Heuristic; 6] =
        [Heuristic::Spt, Heuristic::Lpt, Heuristic::Lrpt, Heuristic::Mrpt, Heuristic::Eet, Heuristic::Let];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Spt => "spt",
            Heuristic::Lpt => "lpt",
            Heuristic::Lrpt => "lrpt",
            Heuristic::Mrpt => "mrpt",
            Heuristic::Eet => "eet",
            Heuristic::Let => "let",
        }
    }

    pub fn from_name(name: &str) -> Option<Heuristic> {
        Heuristic::ALL.into_iter().find(|h| h.name() == name.to_ascii_lowercase())
    }
}

/// Higher-is-preferred raw score of a legal action under a heuristic.
pub fn raw_score(
    kind: Heuristic,
    state: &ScheduleState,
    action: ActionId,
    inst: &Instance,
) -> Result<f64, ScheduleError> {
    let est = state.earliest_start(inst, action)?;
    let duration = inst.duration(action).expect("legality checked above");
    Ok(match kind {
        Heuristic::Spt => -(duration as f64),
        Heuristic::Lpt => duration as f64,
        Heuristic::Lrpt => -(inst.remaining_min_duration(action.job, action.op) as f64),
        Heuristic::Mrpt => inst.remaining_min_duration(action.job, action.op) as f64,
        Heuristic::Eet => -((est + duration) as f64),
        Heuristic::Let => (est + duration) as f64,
    })
}

/// How raw scores become biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasNorm {
    /// Divide by the signed sum of the set's raw scores. For heuristics
    /// whose raw scores are negative (EET among them) the negative
    /// denominator inverts the preference order, making sign-opposite
    /// heuristic pairs coincide.
    Literal,
    /// Divide by the absolute value of the sum, preserving the raw
    /// preference order. Default.
    Magnitude,
}

impl BiasNorm {
    pub fn name(self) -> &'static str {
        match self {
            BiasNorm::Literal => "literal",
            BiasNorm::Magnitude => "magnitude",
        }
    }

    pub fn from_name(name: &str) -> Option<BiasNorm> {
        match name.to_ascii_lowercase().as_str() {
            "literal" => Some(BiasNorm::Literal),
            "magnitude" => Some(BiasNorm::Magnitude),
            _ => None,
        }
    }
}

const ZERO_SUM_EPS: f64 = 1e-9;

/// Normalizes raw scores into biases by dividing each by the signed sum of
/// the set. A vanishing denominator falls back to uniform `1/k`; the second
/// return value reports whether that happened.
pub fn normalize_scores(scores: &[(ActionId, f64)]) -> (Vec<(ActionId, f64)>, bool) {
    normalize_scores_with(BiasNorm::Literal, scores)
}

pub fn normalize_scores_with(
    norm: BiasNorm,
    scores: &[(ActionId, f64)],
) -> (Vec<(ActionId, f64)>, bool) {
    let sum: f64 = scores.iter().map(|(_, s)| s).sum();
    let denom = match norm {
        BiasNorm::Literal => sum,
        BiasNorm::Magnitude => sum.abs(),
    };
    if denom.abs() < ZERO_SUM_EPS {
        let uniform = 1.0 / scores.len() as f64;
        return (scores.iter().map(|&(a, _)| (a, uniform)).collect(), true);
    }
    (scores.iter().map(|&(a, s)| (a, s / denom)).collect(), false)
}

/// Per-action biases with first-encounter initialization tracking.
///
/// Stored densely over the instance's action index space; reads of
/// uninitialized entries are the caller's contract violation except through
/// [`beta_or_zero`](BiasTable::beta_or_zero).
#[derive(Debug, Clone)]
pub struct BiasTable {
    values: Vec<f64>,
    initial: Vec<f64>,
    initialized: Vec<bool>,
    fallback_count: u64,
}

impl BiasTable {
    pub fn new(inst: &Instance) -> BiasTable {
        let n = inst.action_count();
        BiasTable {
            values: vec![0.0; n],
            initial: vec![0.0; n],
            initialized: vec![false; n],
            fallback_count: 0,
        }
    }

    pub fn is_initialized(&self, inst: &Instance, action: ActionId) -> bool {
        inst.action_index(action).map(|i| self.initialized[i]).unwrap_or(false)
    }

    pub fn get(&self, inst: &Instance, action: ActionId) -> Option<f64> {
        let i = inst.action_index(action)?;
        self.initialized[i].then(|| self.values[i])
    }

    /// Bias for the softmax exponent: zero when never initialized, matching
    /// the unbiased algorithms.
    pub fn beta_or_zero(&self, inst: &Instance, action: ActionId) -> f64 {
        self.get(inst, action).unwrap_or(0.0)
    }

    pub(crate) fn beta_by_index(&self, index: usize) -> f64 {
        if self.initialized[index] {
            self.values[index]
        } else {
            0.0
        }
    }

    pub(crate) fn is_initialized_by_index(&self, index: usize) -> bool {
        self.initialized[index]
    }

    pub(crate) fn add_by_index(&mut self, index: usize, delta: f64) {
        self.values[index] += delta;
    }

    fn set_initial(&mut self, index: usize, value: f64) {
        if !self.initialized[index] {
            self.values[index] = value;
            self.initial[index] = value;
            self.initialized[index] = true;
        }
    }

    /// Times the uniform fallback of [`normalize_scores_with`] fired during
    /// initialization.
    pub fn fallback_count(&self) -> u64 {
        self.fallback_count
    }

    pub fn initialized_count(&self) -> usize {
        self.initialized.iter().filter(|&&b| b).count()
    }

    /// `(action index, current bias, initial bias)` for every initialized
    /// entry, in dense-index order.
    pub fn initialized_entries(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.initialized
            .iter()
            .enumerate()
            .filter(|(_, &init)| init)
            .map(|(i, _)| (i, self.values[i], self.initial[i]))
    }

    /// Mean relative drift of every initialized bias from its initial value,
    /// in percent. `None` when nothing was ever initialized.
    pub fn deviation_pct(&self) -> Option<f64> {
        let mut n = 0usize;
        let mut acc = 0.0;
        for (_, value, initial) in self.initialized_entries() {
            acc += (value - initial).abs() / initial.abs().max(1e-12);
            n += 1;
        }
        (n > 0).then(|| acc / n as f64 * 100.0)
    }
}

/// Gives every not-yet-initialized action of `legal` its first-encounter
/// bias, computed by normalizing the heuristic's raw scores over the whole
/// current legal set. Entries initialized earlier are left untouched.
pub fn ensure_initialized(
    bias: &mut BiasTable,
    kind: Heuristic,
    norm: BiasNorm,
    state: &ScheduleState,
    legal: &[ActionId],
    inst: &Instance,
) -> Result<(), ScheduleError> {
    if legal
        .iter()
        .all(|&a| inst.action_index(a).map(|i| bias.initialized[i]).unwrap_or(true))
    {
        return Ok(());
    }
    let mut scores = Vec::with_capacity(legal.len());
    for &a in legal {
        scores.push((a, raw_score(kind, state, a, inst)?));
    }
    let (betas, fell_back) = normalize_scores_with(norm, &scores);
    if fell_back {
        bias.fallback_count += 1;
    }
    for (a, beta) in betas {
        if let Some(i) = inst.action_index(a) {
            bias.set_initial(i, beta);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use crate::synth::{random_instance, SynthConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn act(job: usize, op: usize, machine: usize) -> ActionId {
        ActionId { job, op, machine }
    }

    #[test]
    fn eet_on_empty_state_is_negated_duration() {
        let inst = parse_instance("1 1\n1 1 1 7\n", "one").unwrap();
        let state = ScheduleState::initial(&inst);
        let raw = raw_score(Heuristic::Eet, &state, act(0, 0, 0), &inst).unwrap();
        assert_eq!(raw, -7.0);
    }

    #[test]
    fn spt_prefers_shorter_duration() {
        let inst = parse_instance("2 2 1.5\n1 2 1 3 2 5\n1 1 2 4\n", "tiny").unwrap();
        let state = ScheduleState::initial(&inst);
        let short = raw_score(Heuristic::Spt, &state, act(0, 0, 0), &inst).unwrap();
        let long = raw_score(Heuristic::Spt, &state, act(0, 0, 1), &inst).unwrap();
        assert_eq!(short, -3.0);
        assert_eq!(long, -5.0);
        assert!(short > long);
    }

    #[test]
    fn lrpt_and_mrpt_include_candidate_op() {
        // job 0 has ops with min durations 3 then 2
        let inst = parse_instance("2 2\n2 2 1 3 2 5 1 2 6\n1 1 2 4\n", "rem").unwrap();
        let state = ScheduleState::initial(&inst);
        assert_eq!(raw_score(Heuristic::Lrpt, &state, act(0, 0, 0), &inst).unwrap(), -5.0);
        assert_eq!(raw_score(Heuristic::Mrpt, &state, act(0, 0, 0), &inst).unwrap(), 5.0);
    }

    #[test]
    fn raw_score_rejects_illegal_action() {
        let inst = parse_instance("1 1\n1 1 1 7\n", "one").unwrap();
        let state = ScheduleState::initial(&inst);
        assert!(raw_score(Heuristic::Eet, &state, act(0, 0, 3), &inst).is_err());
    }

    #[test]
    fn normalize_literal_examples() {
        let a = act(0, 0, 0);
        let b = act(1, 0, 0);
        let (out, fell_back) = normalize_scores(&[(a, -3.0), (b, -6.0)]);
        assert!(!fell_back);
        assert!((out[0].1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((out[1].1 - 2.0 / 3.0).abs() < 1e-12);

        let (single, _) = normalize_scores(&[(a, -7.0)]);
        assert_eq!(single[0].1, 1.0);

        let (uniform, fell_back) = normalize_scores(&[(a, 2.0), (b, -2.0)]);
        assert!(fell_back);
        assert_eq!(uniform[0].1, 0.5);
        assert_eq!(uniform[1].1, 0.5);
    }

    #[test]
    fn normalize_sums_to_one_without_fallback() {
        let scores: Vec<(ActionId, f64)> =
            (0..7).map(|i| (act(i, 0, 0), -((i + 1) as f64))).collect();
        let (out, fell_back) = normalize_scores(&scores);
        assert!(!fell_back);
        let total: f64 = out.iter().map(|(_, b)| b).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnitude_norm_preserves_preference_order() {
        let a = act(0, 0, 0);
        let b = act(1, 0, 0);
        // a ends earlier, so its raw EET score is larger
        let (out, _) = normalize_scores_with(BiasNorm::Magnitude, &[(a, -3.0), (b, -6.0)]);
        assert!((out[0].1 + 1.0 / 3.0).abs() < 1e-12);
        assert!((out[1].1 + 2.0 / 3.0).abs() < 1e-12);
        assert!(out[0].1 > out[1].1);
        // while the literal form flips it
        let (lit, _) = normalize_scores_with(BiasNorm::Literal, &[(a, -3.0), (b, -6.0)]);
        assert!(lit[0].1 < lit[1].1);
    }

    #[test]
    fn ensure_initialized_is_idempotent_per_action() {
        let inst = parse_instance("2 2 1.5\n1 2 1 3 2 5\n1 1 2 4\n", "tiny").unwrap();
        let state = ScheduleState::initial(&inst);
        let legal = state.legal_actions(&inst);
        let mut bias = BiasTable::new(&inst);
        ensure_initialized(&mut bias, Heuristic::Eet, BiasNorm::Magnitude, &state, &legal, &inst)
            .unwrap();
        assert_eq!(bias.initialized_count(), 3);
        let frozen = bias.get(&inst, legal[0]).unwrap();

        // a later encounter from a different state must not touch the entry
        let advanced = state.apply(&inst, act(1, 0, 1)).unwrap();
        let legal2 = advanced.legal_actions(&inst);
        ensure_initialized(&mut bias, Heuristic::Eet, BiasNorm::Magnitude, &advanced, &legal2, &inst)
            .unwrap();
        assert_eq!(bias.get(&inst, legal[0]).unwrap(), frozen);
    }

    #[test]
    fn heuristic_argmax_matches_direct_minimization() {
        let cfg = SynthConfig {
            jobs: 4,
            machines: 3,
            ops_per_job: (2, 3),
            flexibility: (1, 3),
            duration: (1, 9),
            total_flexibility: false,
        };
        for seed in 0..10 {
            let inst = random_instance("argmax", &cfg, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = ScheduleState::initial(&inst);
            loop {
                let legal = state.legal_actions(&inst);
                if legal.is_empty() {
                    break;
                }
                let eet_best = legal
                    .iter()
                    .max_by(|&&a, &&b| {
                        raw_score(Heuristic::Eet, &state, a, &inst)
                            .unwrap()
                            .total_cmp(&raw_score(Heuristic::Eet, &state, b, &inst).unwrap())
                    })
                    .copied()
                    .unwrap();
                let end_min = legal
                    .iter()
                    .min_by_key(|&&a| {
                        state.earliest_start(&inst, a).unwrap() + inst.duration(a).unwrap()
                    })
                    .copied()
                    .unwrap();
                let eet_score = |a: ActionId| raw_score(Heuristic::Eet, &state, a, &inst).unwrap();
                assert_eq!(eet_score(eet_best), eet_score(end_min));

                let spt_best = legal
                    .iter()
                    .max_by(|&&a, &&b| {
                        raw_score(Heuristic::Spt, &state, a, &inst)
                            .unwrap()
                            .total_cmp(&raw_score(Heuristic::Spt, &state, b, &inst).unwrap())
                    })
                    .copied()
                    .unwrap();
                let dur_min = legal.iter().min_by_key(|&&a| inst.duration(a).unwrap()).copied().unwrap();
                assert_eq!(inst.duration(spt_best), inst.duration(dur_min));

                let pick = legal[rng.gen_range(0..legal.len())];
                state.apply_in_place(&inst, pick).unwrap();
            }
        }
    }

    #[test]
    fn raw_scores_are_pure() {
        let inst = parse_instance("2 2 1.5\n1 2 1 3 2 5\n1 1 2 4\n", "tiny").unwrap();
        let state = ScheduleState::initial(&inst);
        for kind in Heuristic::ALL {
            let a = raw_score(kind, &state, act(0, 0, 1), &inst).unwrap();
            let b = raw_score(kind, &state, act(0, 0, 1), &inst).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn deviation_tracks_relative_drift() {
        let inst = parse_instance("2 2 1.5\n1 2 1 3 2 5\n1 1 2 4\n", "tiny").unwrap();
        let state = ScheduleState::initial(&inst);
        let legal = state.legal_actions(&inst);
        let mut bias = BiasTable::new(&inst);
        ensure_initialized(&mut bias, Heuristic::Eet, BiasNorm::Magnitude, &state, &legal, &inst)
            .unwrap();
        assert_eq!(bias.deviation_pct(), Some(0.0));
        let idx = inst.action_index(legal[0]).unwrap();
        let before = bias.beta_by_index(idx);
        bias.add_by_index(idx, before.abs()); // 100% drift on one of three entries
        let dev = bias.deviation_pct().unwrap();
        assert!((dev - 100.0 / 3.0).abs() < 1e-9);
    }
}
