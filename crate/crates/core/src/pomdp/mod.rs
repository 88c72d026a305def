//! Finite POMDPs with rewards folded into the observable signal.
//!
//! A signal is an (observation, reward-value) pair. The model stores the joint
//! kernel `P(z | s, a, s')` so that rewards which depend on the departing state
//! (as in most Cassandra files) are represented exactly; models whose signal
//! depends only on the arriving state are the special case where every `s`
//! slice is identical.

mod cassandra;
mod json;

pub use cassandra::{load_pomdp, parse_pomdp, write_pomdp, LoadOptions, RewardNormalization};
pub use json::ModelJson;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating stochastic rows of a constructed model.
pub const STOCHASTIC_TOL: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("transition row for state '{state}', action '{action}' sums to {sum}")]
    TransitionRow {
        state: String,
        action: String,
        sum: f64,
    },
    #[error("observation row for end state '{state}', action '{action}' sums to {sum}")]
    ObservationRow {
        state: String,
        action: String,
        sum: f64,
    },
    #[error("signal kernel row (start {from}, action {action}, end {to}) sums to {sum}")]
    SignalRow {
        from: usize,
        action: usize,
        to: usize,
        sum: f64,
    },
    #[error("negative probability {value} in {place}")]
    NegativeProbability { place: String, value: f64 },
    #[error("initial belief invalid: {0}")]
    InitialBelief(String),
    #[error("discount {0} is not strictly inside (0, 1)")]
    Discount(f64),
    #[error("reward value {0} outside [0, 1]")]
    RewardRange(f64),
    #[error("{count} distinct reward values exceed the cap of {cap}")]
    TooManyRewards { count: usize, cap: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("belief invalid: {0}")]
    Belief(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An (observation, reward-value) pair, both as indices into the model's sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signal {
    pub observation: usize,
    pub reward: usize,
}

/// One (action, signal) element of a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub action: usize,
    pub signal: Signal,
}

/// A finite sequence of (action, signal) pairs. The empty test always succeeds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Test(pub Vec<Step>);

impl Test {
    pub fn empty() -> Self {
        Test(Vec::new())
    }

    pub fn single(action: usize, signal: Signal) -> Self {
        Test(vec![Step { action, signal }])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    /// `step ∘ self`: a one-step extension in front of this test.
    pub fn prepend(&self, step: Step) -> Test {
        let mut steps = Vec::with_capacity(self.0.len() + 1);
        steps.push(step);
        steps.extend_from_slice(&self.0);
        Test(steps)
    }

    pub fn concat(&self, other: &Test) -> Test {
        let mut steps = self.0.clone();
        steps.extend_from_slice(&other.0);
        Test(steps)
    }
}

/// A probability vector over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState(Vec<f64>);

impl BeliefState {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::Belief("empty belief".into()));
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < -NEGATIVE_TOL) {
            return Err(ModelError::Belief(format!("entry {bad} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(ModelError::Belief(format!("entries sum to {sum}")));
        }
        Ok(BeliefState(probs.into_iter().map(|p| p.max(0.0)).collect()))
    }

    pub fn point(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        BeliefState(v)
    }

    pub fn uniform(n: usize) -> Self {
        BeliefState(vec![1.0 / n as f64; n])
    }

    /// Renormalizes a nonnegative weight vector into a belief; `None` if it has no mass.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        let mut w: Vec<f64> = weights.into_iter().map(|x| x.max(0.0)).collect();
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= sum);
        Some(BeliefState(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &BeliefState) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &BeliefState, weight: f64) -> BeliefState {
        BeliefState(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| weight * a + (1.0 - weight) * b)
                .collect(),
        )
    }
}

/// Result of one Bayesian filtering step.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    /// `P(z | b, a)`.
    pub probability: f64,
    /// Posterior belief; `None` when the signal is impossible.
    pub posterior: Option<BeliefState>,
}

/// A finite POMDP whose signals are (observation, reward) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PomdpModel {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    reward_values: Vec<f64>,
    /// `[a][s][s']`
    transition: Vec<f64>,
    /// `[a][s][s'][z]` with `z = observation * |R| + reward`.
    signal_kernel: Vec<f64>,
    discount: f64,
    initial_belief: BeliefState,
    reward_scale: f64,
    reward_offset: f64,
    /// `[a][s]` expected normalized immediate reward.
    expected_reward: Vec<f64>,
}

/// Raw ingredients of a model, validated by [`PomdpModel::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    /// Normalized reward values, each in [0, 1].
    pub reward_values: Vec<f64>,
    /// `[a][s][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    pub signal_kernel: SignalKernel,
    pub discount: f64,
    pub initial_belief: Vec<f64>,
    pub reward_scale: f64,
    pub reward_offset: f64,
}

#[derive(Debug, Clone)]
pub enum SignalKernel {
    /// `[a][s'][z]`: signal depends on the action and arriving state only.
    Arrival(Vec<Vec<Vec<f64>>>),
    /// `[a][s][s'][z]`: general joint kernel.
    Joint(Vec<Vec<Vec<Vec<f64>>>>),
}

fn shape_err(what: &str, expected: usize, got: usize) -> ModelError {
    ModelError::Shape(format!("{what}: expected {expected} entries, got {got}"))
}

/// Checks a probability row: rejects negatives, clamps tiny negatives, and
/// rescales rows whose drift is within tolerance. Returns the original sum.
const ROUNDING_TOL: f64 = 1e-14;

fn normalize_row(row: &mut [f64], place: impl Fn() -> String) -> Result<f64, ModelError> {
    for p in row.iter_mut() {
        if !p.is_finite() || *p < -NEGATIVE_TOL {
            return Err(ModelError::NegativeProbability {
                place: place(),
                value: *p,
            });
        }
        *p = p.max(0.0);
    }
    let sum: f64 = row.iter().sum();
    // rows already within rounding error are kept as is, so reloading is exact
    if (sum - 1.0).abs() <= STOCHASTIC_TOL && (sum - 1.0).abs() > ROUNDING_TOL {
        row.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(sum)
}

impl PomdpModel {
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        let n = parts.states.len();
        let na = parts.actions.len();
        let no = parts.observations.len();
        let nr = parts.reward_values.len();
        let nz = no * nr;
        if n == 0 || na == 0 || no == 0 || nr == 0 {
            return Err(ModelError::Shape(
                "states, actions, observations and reward values must be nonempty".into(),
            ));
        }
        if !(parts.discount > 0.0 && parts.discount < 1.0) {
            return Err(ModelError::Discount(parts.discount));
        }
        if let Some(&r) = parts
            .reward_values
            .iter()
            .find(|r| !(0.0..=1.0).contains(*r))
        {
            return Err(ModelError::RewardRange(r));
        }
        if !(parts.reward_scale.is_finite() && parts.reward_scale > 0.0)
            || !parts.reward_offset.is_finite()
        {
            return Err(ModelError::Shape("reward scale must be positive and finite".into()));
        }

        if parts.transition.len() != na {
            return Err(shape_err("transition actions", na, parts.transition.len()));
        }
        let mut transition = Vec::with_capacity(na * n * n);
        for (a, rows) in parts.transition.iter().enumerate() {
            if rows.len() != n {
                return Err(shape_err("transition rows", n, rows.len()));
            }
            for (s, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(shape_err("transition row", n, row.len()));
                }
                let mut row = row.clone();
                let sum = normalize_row(&mut row, || {
                    format!("T({}, {})", parts.actions[a], parts.states[s])
                })?;
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(ModelError::TransitionRow {
                        state: parts.states[s].clone(),
                        action: parts.actions[a].clone(),
                        sum,
                    });
                }
                transition.extend(row);
            }
        }

        let mut signal_kernel = Vec::with_capacity(na * n * n * nz);
        match &parts.signal_kernel {
            SignalKernel::Arrival(k) => {
                if k.len() != na {
                    return Err(shape_err("signal kernel actions", na, k.len()));
                }
                let mut rows = Vec::with_capacity(na);
                for (a, per_state) in k.iter().enumerate() {
                    if per_state.len() != n {
                        return Err(shape_err("signal kernel states", n, per_state.len()));
                    }
                    let mut checked = Vec::with_capacity(n);
                    for (s2, row) in per_state.iter().enumerate() {
                        if row.len() != nz {
                            return Err(shape_err("signal kernel row", nz, row.len()));
                        }
                        let mut row = row.clone();
                        let sum = normalize_row(&mut row, || {
                            format!("OB(· | {}, {})", parts.states[s2], parts.actions[a])
                        })?;
                        if (sum - 1.0).abs() > STOCHASTIC_TOL {
                            return Err(ModelError::ObservationRow {
                                state: parts.states[s2].clone(),
                                action: parts.actions[a].clone(),
                                sum,
                            });
                        }
                        checked.push(row);
                    }
                    rows.push(checked);
                }
                for per_state in &rows {
                    for _s in 0..n {
                        for row in per_state {
                            signal_kernel.extend_from_slice(row);
                        }
                    }
                }
            }
            SignalKernel::Joint(k) => {
                if k.len() != na {
                    return Err(shape_err("signal kernel actions", na, k.len()));
                }
                for (a, per_from) in k.iter().enumerate() {
                    if per_from.len() != n {
                        return Err(shape_err("signal kernel start states", n, per_from.len()));
                    }
                    for (s, per_to) in per_from.iter().enumerate() {
                        if per_to.len() != n {
                            return Err(shape_err("signal kernel end states", n, per_to.len()));
                        }
                        for (s2, row) in per_to.iter().enumerate() {
                            if row.len() != nz {
                                return Err(shape_err("signal kernel row", nz, row.len()));
                            }
                            let mut row = row.clone();
                            let sum = normalize_row(&mut row, || {
                                format!("OB(· | {s}, {a}, {s2})")
                            })?;
                            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                                return Err(ModelError::SignalRow {
                                    from: s,
                                    action: a,
                                    to: s2,
                                    sum,
                                });
                            }
                            signal_kernel.extend(row);
                        }
                    }
                }
            }
        }

        if parts.initial_belief.len() != n {
            return Err(ModelError::InitialBelief(format!(
                "expected {n} entries, got {}",
                parts.initial_belief.len()
            )));
        }
        let mut b0 = parts.initial_belief.clone();
        let sum = normalize_row(&mut b0, || "initial belief".to_string())?;
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::InitialBelief(format!("entries sum to {sum}")));
        }

        let mut model = PomdpModel {
            states: parts.states,
            actions: parts.actions,
            observations: parts.observations,
            reward_values: parts.reward_values,
            transition,
            signal_kernel,
            discount: parts.discount,
            initial_belief: BeliefState(b0),
            reward_scale: parts.reward_scale,
            reward_offset: parts.reward_offset,
            expected_reward: Vec::new(),
        };
        model.expected_reward = (0..na)
            .flat_map(|a| (0..n).map(move |s| (a, s)))
            .map(|(a, s)| {
                (0..n)
                    .map(|s2| {
                        let t = model.transition(s, a, s2);
                        if t == 0.0 {
                            return 0.0;
                        }
                        let row = model.signal_row(s, a, s2);
                        t * row
                            .iter()
                            .enumerate()
                            .map(|(z, p)| p * model.reward_values[z % nr])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        Ok(model)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_rewards(&self) -> usize {
        self.reward_values.len()
    }

    /// `|O| * |R|`.
    pub fn num_signals(&self) -> usize {
        self.observations.len() * self.reward_values.len()
    }

    /// `|A| * |O| * |R|`, the automaton alphabet size.
    pub fn num_symbols(&self) -> usize {
        self.actions.len() * self.num_signals()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn reward_values(&self) -> &[f64] {
        &self.reward_values
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_belief(&self) -> &BeliefState {
        &self.initial_belief
    }

    pub fn reward_scale(&self) -> f64 {
        self.reward_scale
    }

    pub fn reward_offset(&self) -> f64 {
        self.reward_offset
    }

    /// Maps a normalized value back to the units of the source file.
    pub fn denormalize_reward(&self, normalized: f64) -> f64 {
        (normalized - self.reward_offset) / self.reward_scale
    }

    pub fn signal_index(&self, signal: Signal) -> usize {
        signal.observation * self.reward_values.len() + signal.reward
    }

    pub fn signal_at(&self, z: usize) -> Signal {
        let nr = self.reward_values.len();
        Signal {
            observation: z / nr,
            reward: z % nr,
        }
    }

    pub fn signals(&self) -> impl Iterator<Item = Signal> + '_ {
        (0..self.num_signals()).map(|z| self.signal_at(z))
    }

    /// Index of `(action, signal)` in the automaton alphabet, ordered
    /// lexicographically by (action, observation, reward).
    pub fn symbol_index(&self, step: Step) -> usize {
        step.action * self.num_signals() + self.signal_index(step.signal)
    }

    pub fn step_at(&self, symbol: usize) -> Step {
        let nz = self.num_signals();
        Step {
            action: symbol / nz,
            signal: self.signal_at(symbol % nz),
        }
    }

    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        let n = self.states.len();
        self.transition[(a * n + s) * n + s2]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.states.len();
        let start = (a * n + s) * n;
        &self.transition[start..start + n]
    }

    /// `P(z | s, a, s')` over all signals `z`.
    pub fn signal_row(&self, s: usize, a: usize, s2: usize) -> &[f64] {
        let n = self.states.len();
        let nz = self.num_signals();
        let start = ((a * n + s) * n + s2) * nz;
        &self.signal_kernel[start..start + nz]
    }

    pub fn signal_prob(&self, s: usize, a: usize, s2: usize, z: usize) -> f64 {
        self.signal_row(s, a, s2)[z]
    }

    /// True when `P(z | s, a, s')` does not depend on `s`.
    pub fn is_arrival_only(&self) -> bool {
        let n = self.states.len();
        (0..self.actions.len()).all(|a| {
            (1..n).all(|s| (0..n).all(|s2| self.signal_row(s, a, s2) == self.signal_row(0, a, s2)))
        })
    }

    /// Expected normalized reward of `a` taken in state `s`.
    pub fn state_reward(&self, s: usize, a: usize) -> f64 {
        self.expected_reward[a * self.states.len() + s]
    }

    /// `Σ_{r'} P(r' | a, b) r'`.
    pub fn expected_reward(&self, b: &BeliefState, a: usize) -> f64 {
        let n = self.states.len();
        b.0.iter()
            .zip(&self.expected_reward[a * n..(a + 1) * n])
            .map(|(p, r)| p * r)
            .sum()
    }

    pub fn check_belief(&self, b: &BeliefState) -> Result<(), ModelError> {
        if b.len() != self.states.len() {
            return Err(ModelError::Belief(format!(
                "expected {} entries, got {}",
                self.states.len(),
                b.len()
            )));
        }
        Ok(())
    }

    /// Unnormalized posteriors for every signal after taking `a` from `b`:
    /// entry `z` holds `u_z(j) = Σ_i b(i) P(s_i, a, s_j) OB(z | s_i, a, s_j)`.
    pub fn joint_successors(&self, b: &BeliefState, a: usize) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let nz = self.num_signals();
        let mut out = vec![vec![0.0; n]; nz];
        for (i, &bi) in b.0.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            for (j, &t) in self.transition_row(i, a).iter().enumerate() {
                let w = bi * t;
                if w == 0.0 {
                    continue;
                }
                for (z, &o) in self.signal_row(i, a, j).iter().enumerate() {
                    out[z][j] += w * o;
                }
            }
        }
        out
    }

    /// One exact Bayesian filtering step.
    pub fn belief_update(&self, b: &BeliefState, a: usize, z: Signal) -> Filtered {
        let n = self.states.len();
        let zi = self.signal_index(z);
        let mut u = vec![0.0; n];
        for (i, &bi) in b.0.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            for (j, &t) in self.transition_row(i, a).iter().enumerate() {
                u[j] += bi * t * self.signal_prob(i, a, j, zi);
            }
        }
        let p: f64 = u.iter().sum();
        if p <= 0.0 {
            return Filtered {
                probability: 0.0,
                posterior: None,
            };
        }
        u.iter_mut().for_each(|x| *x /= p);
        Filtered {
            probability: p,
            posterior: Some(BeliefState(u)),
        }
    }

    /// Probability that executing the test's actions from `b` yields exactly
    /// its signals, computed by chaining filtering steps.
    pub fn sequence_probability(&self, b: &BeliefState, t: &Test) -> f64 {
        let mut belief = b.clone();
        let mut prob = 1.0;
        for step in t.steps() {
            let f = self.belief_update(&belief, step.action, step.signal);
            prob *= f.probability;
            match f.posterior {
                Some(next) => belief = next,
                None => return 0.0,
            }
        }
        prob
    }

    /// Simulates `horizon` steps from a hidden state drawn from `b`.
    pub fn sample_trajectory<F>(
        &self,
        b: &BeliefState,
        mut policy: F,
        horizon: usize,
        seed: u64,
    ) -> Vec<TrajectoryStep>
    where
        F: FnMut(&BeliefState) -> usize,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::with_capacity(horizon);
        if horizon == 0 {
            return steps;
        }
        let mut state = sample_index(&mut rng, b.as_slice());
        let mut belief = b.clone();
        for _ in 0..horizon {
            let action = policy(&belief);
            let next_state = sample_index(&mut rng, self.transition_row(state, action));
            let z = sample_index(&mut rng, self.signal_row(state, action, next_state));
            let signal = self.signal_at(z);
            steps.push(TrajectoryStep {
                state,
                action,
                signal,
                reward: self.reward_values[signal.reward],
                next_state,
            });
            // the realized signal has positive probability under the true state,
            // so it has positive probability under any belief that covers it
            belief = self
                .belief_update(&belief, action, signal)
                .posterior
                .unwrap_or_else(|| BeliefState::point(self.num_states(), next_state));
            state = next_state;
        }
        steps
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson::from_model(self)
    }
}

/// One simulated transition; `reward` is in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep {
    pub state: usize,
    pub action: usize,
    pub signal: Signal,
    pub reward: f64,
    pub next_state: usize,
}

fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn fair_coin_update_keeps_belief() {
        let m = corpus::fair_coin();
        let b = BeliefState::point(1, 0);
        for z in m.signals() {
            let f = m.belief_update(&b, 0, z);
            assert!((f.probability - 0.5).abs() < 1e-15);
            assert_eq!(f.posterior.unwrap(), b);
        }
    }

    #[test]
    fn fully_observable_posterior_is_point_mass() {
        let m = corpus::fully_observable(2, 7);
        let b = BeliefState::uniform(2);
        for z in m.signals() {
            let f = m.belief_update(&b, 0, z);
            if let Some(post) = f.posterior {
                let s = z.observation;
                assert!((post.as_slice()[s] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tiger_listen_matches_hand_filter() {
        let m = corpus::tiger();
        let listen = m.actions().iter().position(|a| a == "listen").unwrap();
        let left = m.observations().iter().position(|o| o == "tiger-left").unwrap();
        let b = BeliefState::uniform(2);
        let z = m
            .signals()
            .find(|z| z.observation == left && m.sequence_probability(&b, &Test::single(listen, *z)) > 0.0)
            .unwrap();
        // hand filter over the 2x2 joint: listening keeps the state and the
        // observation matches it with probability 0.85
        let joint = [0.5 * 0.85, 0.5 * 0.15];
        let p: f64 = joint.iter().sum();
        let f = m.belief_update(&b, listen, z);
        assert!((f.probability - p).abs() < 1e-12);
        let post = f.posterior.unwrap();
        assert!((post.as_slice()[0] - joint[0] / p).abs() < 1e-12);
        assert!((post.as_slice()[1] - joint[1] / p).abs() < 1e-12);
    }

    #[test]
    fn empty_test_succeeds() {
        let m = corpus::tiger();
        assert_eq!(m.sequence_probability(&BeliefState::uniform(2), &Test::empty()), 1.0);
    }

    #[test]
    fn coin_flips_multiply() {
        let m = corpus::fair_coin();
        let t = Test(
            (0..6)
                .map(|k| Step {
                    action: 0,
                    signal: m.signal_at(k % 2),
                })
                .collect(),
        );
        let p = m.sequence_probability(&BeliefState::point(1, 0), &t);
        assert!((p - 0.5f64.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn rejects_leaky_transition() {
        let mut parts = corpus::fully_observable_parts(2, 1);
        parts.transition[0][1] = vec![0.5, 0.4];
        match PomdpModel::new(parts) {
            Err(ModelError::TransitionRow { sum, .. }) => assert!((sum - 0.9).abs() < 1e-12),
            other => panic!("expected transition error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_discount_and_belief() {
        let mut parts = corpus::fully_observable_parts(2, 1);
        parts.discount = 1.0;
        assert!(matches!(PomdpModel::new(parts), Err(ModelError::Discount(_))));
        let mut parts = corpus::fully_observable_parts(2, 1);
        parts.initial_belief = vec![0.7, 0.7];
        assert!(matches!(PomdpModel::new(parts), Err(ModelError::InitialBelief(_))));
        assert!(BeliefState::new(vec![0.5, -0.1, 0.6]).is_err());
    }

    #[test]
    fn horizon_zero_is_empty() {
        let m = corpus::fair_coin();
        assert!(m
            .sample_trajectory(m.initial_belief(), |_| 0, 0, 1)
            .is_empty());
    }

    #[test]
    fn coin_frequency_concentrates() {
        let m = corpus::fair_coin();
        let heads = m.observations().iter().position(|o| o == "heads").unwrap();
        let traj = m.sample_trajectory(m.initial_belief(), |_| 0, 10_000, 2024);
        let freq = traj.iter().filter(|s| s.signal.observation == heads).count() as f64 / 1e4;
        // 4 sigma of a fair binomial over 10^4 draws is 0.02
        assert!((0.48..=0.52).contains(&freq), "{freq}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = corpus::deterministic_cycle(3);
        let a = m.sample_trajectory(m.initial_belief(), |_| 0, 50, 9);
        let b = m.sample_trajectory(m.initial_belief(), |_| 0, 50, 9);
        assert_eq!(a, b);
        for w in a.windows(2) {
            assert_eq!(w[1].state, (w[0].state + 1) % 3);
        }
    }
}
