//! Finite MDPs over integer-labelled grid states, value iteration, and the
//! plan result shared by the coefficient-grid planner and the simplex baseline.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

/// Sweep cap for value iteration; reaching it means the stop rule is broken.
pub const MAX_VI_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("value-iteration tolerance must be positive, got {0}")]
    Tolerance(f64),
}

/// A finite MDP whose states carry integer lattice labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub num_actions: usize,
    pub labels: Vec<Vec<i64>>,
    /// Sparse successor distribution per `state * num_actions + action`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Expected immediate reward per `state * num_actions + action`.
    pub rewards: Vec<f64>,
    pub discount: f64,
    pub initial: usize,
}

impl FiniteMdp {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.num_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    fn q(&self, values: &[f64], s: usize, a: usize) -> f64 {
        self.reward(s, a)
            + self.discount
                * self
                    .successors(s, a)
                    .iter()
                    .map(|&(t, p)| p * values[t])
                    .sum::<f64>()
    }

    /// Action maximizing the one-step lookahead; ties go to the lowest index.
    pub fn greedy_action(&self, values: &[f64], s: usize) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.num_actions {
            let q = self.q(values, s, a);
            if q > best.1 {
                best = (a, q);
            }
        }
        best
    }
}

/// Values and greedy policy of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
}

/// Synchronous value iteration, stopped once the sup-norm change is at most
/// `vi_tol (1 − γ) / (2γ)`, which makes the greedy policy `vi_tol`-optimal.
pub fn value_iteration(mdp: &FiniteMdp, vi_tol: f64) -> Result<Solution, SolveError> {
    if vi_tol.is_nan() || vi_tol <= 0.0 {
        return Err(SolveError::Tolerance(vi_tol));
    }
    let gamma = mdp.discount;
    let stop = vi_tol * (1.0 - gamma) / (2.0 * gamma);
    let n = mdp.num_states();
    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while residual > stop {
        if iterations >= MAX_VI_ITERATIONS {
            return Err(SolveError::NoConvergence {
                iterations,
                residual,
            });
        }
        residual = 0.0;
        for s in 0..n {
            let (_, v) = mdp.greedy_action(&values, s);
            residual = residual.max((v - values[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
    }
    let policy = (0..n).map(|s| mdp.greedy_action(&values, s).0).collect();
    Ok(Solution {
        values,
        policy,
        residual,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum GridKind {
    /// Coefficient lattice of step `mesh = epsilon / rank` over [-2, 2]^rank.
    Coefficient { epsilon: f64, mesh: f64, rank: usize },
    /// Simplex lattice of step `delta` over beliefs.
    Simplex { delta: f64, states: usize },
}

/// Solved grid MDP: per-state value and action plus run metadata.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub kind: GridKind,
    pub labels: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub initial_state: usize,
    pub bellman_residual: f64,
    pub iterations: usize,
    pub discount: f64,
    index: HashMap<Vec<i64>, usize>,
}

impl PlanResult {
    pub fn new(kind: GridKind, mdp: &FiniteMdp, solution: Solution) -> Self {
        let index = mdp
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        PlanResult {
            kind,
            labels: mdp.labels.clone(),
            values: solution.values,
            policy: solution.policy,
            initial_state: mdp.initial,
            bellman_residual: solution.residual,
            iterations: solution.iterations,
            discount: mdp.discount,
            index,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.labels.len()
    }

    pub fn lookup(&self, label: &[i64]) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Index of `label`, or of the stored label closest to it in L1 when it
    /// was never expanded. The second field reports whether a fallback happened.
    pub fn resolve(&self, label: &[i64]) -> (usize, bool) {
        if let Some(i) = self.lookup(label) {
            return (i, false);
        }
        let nearest = self
            .labels
            .iter()
            .enumerate()
            .min_by_key(|(_, l)| l.iter().zip(label).map(|(a, b)| (a - b).abs()).sum::<i64>())
            .map(|(i, _)| i)
            .expect("plan has at least one state");
        log::warn!("grid state {label:?} was not expanded; using nearest expanded state {:?}", self.labels[nearest]);
        (nearest, true)
    }

    pub fn value_at_initial(&self) -> f64 {
        self.values[self.initial_state]
    }

    pub fn to_json(&self, action_names: &[String]) -> PolicyJson {
        PolicyJson {
            schema_version: crate::SCHEMA_VERSION,
            grid: self.kind,
            initial_state: self.labels[self.initial_state].clone(),
            bellman_residual: self.bellman_residual,
            iterations: self.iterations,
            states: self
                .labels
                .iter()
                .zip(&self.policy)
                .zip(&self.values)
                .map(|((l, &a), &v)| PolicyEntry {
                    m: l.clone(),
                    action: a,
                    action_name: action_names.get(a).cloned().unwrap_or_default(),
                    value: v,
                })
                .collect(),
        }
    }
}

/// Policy file: grid states as integer lattice vectors.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyJson {
    pub schema_version: u32,
    pub grid: GridKind,
    pub initial_state: Vec<i64>,
    pub bellman_residual: f64,
    pub iterations: usize,
    pub states: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyEntry {
    pub m: Vec<i64>,
    pub action: usize,
    pub action_name: String,
    pub value: f64,
}
