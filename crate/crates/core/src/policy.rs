//! Softmax action selection, policy-gradient weight adaptation toward a best
//! sequence, and the per-step additive bias update.

use rand::Rng;
use thiserror::Error;

use crate::heuristics::{self, BiasNorm, BiasTable, Heuristic};
use crate::instance::{ActionId, Instance, Time};
use crate::schedule::{ScheduleError, ScheduleState, Trajectory};

/// Action weights, densely indexed; absent entries read as zero, which is
/// the uniform starting policy.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    weights: Vec<f64>,
}

impl PolicyTable {
    pub fn new(inst: &Instance) -> PolicyTable {
        PolicyTable { weights: vec![0.0; inst.action_count()] }
    }

    pub fn weight(&self, inst: &Instance, action: ActionId) -> f64 {
        inst.action_index(action).map(|i| self.weights[i]).unwrap_or(0.0)
    }

    pub fn set_weight(&mut self, inst: &Instance, action: ActionId, value: f64) {
        if let Some(i) = inst.action_index(action) {
            self.weights[i] = value;
        }
    }

    pub(crate) fn weight_by_index(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub(crate) fn add_by_index(&mut self, index: usize, delta: f64) {
        self.weights[index] += delta;
    }
}

/// Sampling and learning-rate knobs shared by the policy-adaptation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    /// Softmax temperature on the weight term.
    pub tau: f64,
    /// Policy learning rate.
    pub alpha: f64,
    /// Bias learning rate.
    pub gamma: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams { tau: 1.0, alpha: 1.0, gamma: 1e-6 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("bias entry for {action} read before initialization")]
    UninitializedBias { action: ActionId },
    #[error("chosen action {action} is not in the legal set")]
    ChosenNotLegal { action: ActionId },
    #[error("trajectory is infeasible: {0}")]
    Infeasible(#[from] ScheduleError),
}

/// Where the softmax's bias term comes from.
#[derive(Debug, Clone, Copy)]
pub enum BiasRef<'a> {
    /// No bias: plain policy softmax.
    None,
    /// Recompute from the heuristic at every state.
    Recompute(Heuristic, BiasNorm),
    /// Read the adapting bias table; uninitialized entries read as zero.
    Table(&'a BiasTable),
}

impl BiasRef<'_> {
    fn betas(
        &self,
        state: &ScheduleState,
        legal: &[ActionId],
        inst: &Instance,
    ) -> Result<Vec<f64>, ScheduleError> {
        match *self {
            BiasRef::None => Ok(vec![0.0; legal.len()]),
            BiasRef::Recompute(kind, norm) => {
                let mut scores = Vec::with_capacity(legal.len());
                for &a in legal {
                    scores.push((a, heuristics::raw_score(kind, state, a, inst)?));
                }
                let (betas, _) = heuristics::normalize_scores_with(norm, &scores);
                Ok(betas.into_iter().map(|(_, b)| b).collect())
            }
            BiasRef::Table(table) => {
                Ok(legal.iter().map(|&a| table.beta_or_zero(inst, a)).collect())
            }
        }
    }
}

/// Softmax over `exp(w/tau + beta)`, computed with max-subtraction.
pub(crate) fn probabilities_from_parts(weights: &[f64], betas: &[f64], tau: f64) -> Vec<f64> {
    debug_assert_eq!(weights.len(), betas.len());
    let exponents: Vec<f64> =
        weights.iter().zip(betas).map(|(w, b)| w / tau + b).collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Probability of each legal action under the current policy and biases.
pub fn action_probabilities(
    policy: &PolicyTable,
    bias: &BiasTable,
    legal: &[ActionId],
    tau: f64,
    inst: &Instance,
) -> Vec<(ActionId, f64)> {
    let weights: Vec<f64> = legal.iter().map(|&a| policy.weight(inst, a)).collect();
    let betas: Vec<f64> = legal.iter().map(|&a| bias.beta_or_zero(inst, a)).collect();
    let probs = probabilities_from_parts(&weights, &betas, tau);
    legal.iter().copied().zip(probs).collect()
}

/// Draws one action from a probability-weighted list. A fixed RNG seed
/// replays the same draw sequence.
pub fn sample_action<R: Rng>(dist: &[(ActionId, f64)], rng: &mut R) -> ActionId {
    let probs: Vec<f64> = dist.iter().map(|&(_, p)| p).collect();
    dist[sample_index(&probs, rng)].0
}

pub(crate) fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1 // rounding left u at or beyond the cumulative total
}

/// Policy-gradient step toward `best`: replays the trajectory and, at every
/// step, moves each legal action's weight by `-alpha * (p - delta) / tau`
/// with `delta` equal to one exactly for the trajectory's action. All of a
/// step's probabilities come from the weights as they stood entering that
/// step.
pub fn adapt(
    policy: &mut PolicyTable,
    inst: &Instance,
    best: &Trajectory,
    params: &SamplerParams,
    bias: BiasRef<'_>,
) -> Result<(), PolicyError> {
    let mut state = ScheduleState::initial(inst);
    let mut legal = Vec::new();
    for &chosen in &best.actions {
        state.legal_actions_into(inst, &mut legal);
        if !legal.contains(&chosen) {
            return Err(PolicyError::ChosenNotLegal { action: chosen });
        }
        let weights: Vec<f64> = legal.iter().map(|&a| policy.weight(inst, a)).collect();
        let betas = bias.betas(&state, &legal, inst)?;
        let probs = probabilities_from_parts(&weights, &betas, params.tau);
        for (i, &a) in legal.iter().enumerate() {
            let delta = if a == chosen { 1.0 } else { 0.0 };
            let index = inst.action_index(a).expect("legal action indexes");
            policy.add_by_index(index, -params.alpha * (probs[i] - delta) / params.tau);
        }
        state.apply_in_place(inst, chosen)?;
    }
    Ok(())
}

/// Per-step bias update: the chosen action gains `gamma * lb` while every
/// other legal action loses `gamma * lb / n`. Distinct from the policy
/// step's delta, which is zero (not `-1/n`) for non-chosen actions.
pub fn update_bias(
    bias: &mut BiasTable,
    inst: &Instance,
    legal: &[ActionId],
    chosen: ActionId,
    lb: Time,
    gamma: f64,
) -> Result<(), PolicyError> {
    if !legal.contains(&chosen) {
        return Err(PolicyError::ChosenNotLegal { action: chosen });
    }
    for &a in legal {
        if !bias.is_initialized(inst, a) {
            return Err(PolicyError::UninitializedBias { action: a });
        }
    }
    let n = legal.len() as f64;
    for &a in legal {
        let delta = if a == chosen { 1.0 } else { -1.0 / n };
        let index = inst.action_index(a).expect("initialized action indexes");
        bias.add_by_index(index, gamma * delta * lb as f64);
    }
    Ok(())
}
